#include "poqd/corpus.hpp"

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iostream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "poqd/errors.hpp"
#include "poqd/text.hpp"

namespace poqd {

std::vector<std::string> segment_document(const std::string& text) {
    if (trim(text).empty()) {
        throw InvariantError("segment_document: text is empty after trimming");
    }
    std::vector<std::string> out;
    std::size_t start = 0;
    for (std::size_t i = 0; i < text.size(); ++i) {
        const char c = text[i];
        const bool terminator = (c == '.' || c == '!' || c == '?');
        const bool boundary =
            terminator && (i + 1 == text.size() ||
                           std::isspace(static_cast<unsigned char>(text[i + 1])) != 0);
        if (boundary) {
            std::string piece = trim(text.substr(start, i - start + 1));
            if (!piece.empty()) out.push_back(std::move(piece));
            start = i + 1;
        }
    }
    if (start < text.size()) {
        std::string piece = trim(text.substr(start));
        if (!piece.empty()) out.push_back(std::move(piece));
    }
    return out;
}

MultiVectorIndex build_index(const std::vector<std::pair<std::string, std::string>>& docs,
                             const EmbedderSpec& spec) {
    if (docs.empty()) {
        throw InvariantError("build_index: document list is empty");
    }
    std::set<std::string> seen;
    for (const auto& [id, _] : docs) {
        if (trim(id).empty()) throw InvariantError("build_index: empty doc id");
        if (!seen.insert(id).second) {
            throw InvariantError("build_index: duplicate doc id '" + id + "'");
        }
    }

    auto embedder = make_embedder(spec);
    MultiVectorIndex index;
    index.dimension = spec.dimension;
    index.embedder_fingerprint = spec.fingerprint();
    index.documents.reserve(docs.size());

    for (const auto& [id, text] : docs) {
        std::vector<std::string> pieces;
        try {
            pieces = segment_document(text);
        } catch (const Error& e) {
            throw InvariantError("doc '" + id + "': " + e.what());
        }
        if (pieces.size() > kMaxSegmentsPerDocument) {
            std::cerr << "warning: doc '" << id << "' has " << pieces.size()
                      << " segments, truncating to " << kMaxSegmentsPerDocument << "\n";
            pieces.resize(kMaxSegmentsPerDocument);
        }

        std::vector<EmbeddingVector> vectors;
        try {
            vectors = embedder->embed(pieces);
        } catch (const TransportError&) {
            throw;
        } catch (const Error& e) {
            throw InvariantError("doc '" + id + "': " + e.what());
        }

        SegmentedDocument doc;
        doc.doc_id = id;
        doc.raw_text = text;
        doc.segments.reserve(pieces.size());
        for (std::size_t i = 0; i < pieces.size(); ++i) {
            doc.segments.push_back({pieces[i], std::move(vectors[i])});
        }
        index.documents.push_back(std::move(doc));
    }
    return index;
}

namespace {

constexpr std::array<char, 4> kMagic{'P', 'O', 'Q', 'D'};
constexpr std::uint16_t kVersion = 1;

std::uint32_t crc32(const std::string& data) {
    static const auto table = [] {
        std::array<std::uint32_t, 256> t{};
        for (std::uint32_t i = 0; i < 256; ++i) {
            std::uint32_t c = i;
            for (int k = 0; k < 8; ++k) {
                c = (c & 1u) ? 0xEDB88320u ^ (c >> 1) : c >> 1;
            }
            t[i] = c;
        }
        return t;
    }();
    std::uint32_t c = 0xFFFFFFFFu;
    for (unsigned char b : data) {
        c = table[(c ^ b) & 0xFFu] ^ (c >> 8);
    }
    return c ^ 0xFFFFFFFFu;
}

void put_u16(std::string& out, std::uint16_t v) {
    out.push_back(static_cast<char>(v & 0xFF));
    out.push_back(static_cast<char>((v >> 8) & 0xFF));
}

void put_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

void put_string(std::string& out, const std::string& s) {
    put_u32(out, static_cast<std::uint32_t>(s.size()));
    out += s;
}

void put_f32(std::string& out, float f) {
    const auto bits = std::bit_cast<std::uint32_t>(f);
    put_u32(out, bits);
}

class Reader {
public:
    Reader(const std::string& data, std::size_t offset) : data_(data), pos_(offset) {}

    std::uint16_t u16() {
        need(2);
        std::uint16_t v = static_cast<std::uint8_t>(data_[pos_]) |
                          (static_cast<std::uint16_t>(static_cast<std::uint8_t>(data_[pos_ + 1])) << 8);
        pos_ += 2;
        return v;
    }

    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) {
            v |= static_cast<std::uint32_t>(static_cast<std::uint8_t>(data_[pos_ + i])) << (8 * i);
        }
        pos_ += 4;
        return v;
    }

    std::string str() {
        const std::uint32_t n = u32();
        need(n);
        std::string s = data_.substr(pos_, n);
        pos_ += n;
        return s;
    }

    float f32() { return std::bit_cast<float>(u32()); }

    std::size_t pos() const { return pos_; }

private:
    void need(std::size_t n) {
        if (pos_ + n > data_.size()) {
            throw IoError("index file is truncated");
        }
    }

    const std::string& data_;
    std::size_t pos_;
};

} // namespace

void save_index(const MultiVectorIndex& index, const std::string& path) {
    std::string payload;
    put_u32(payload, static_cast<std::uint32_t>(index.dimension));
    put_string(payload, index.embedder_fingerprint);
    put_u32(payload, static_cast<std::uint32_t>(index.documents.size()));
    for (const auto& doc : index.documents) {
        put_string(payload, doc.doc_id);
        put_string(payload, doc.raw_text);
        put_u32(payload, static_cast<std::uint32_t>(doc.segments.size()));
        for (const auto& seg : doc.segments) {
            if (static_cast<int>(seg.vector.size()) != index.dimension) {
                throw InvariantError("save_index: doc '" + doc.doc_id +
                                     "' has a segment vector of wrong dimension");
            }
            put_string(payload, seg.text);
            for (float f : seg.vector) put_f32(payload, f);
        }
    }

    std::string file;
    file.append(kMagic.data(), kMagic.size());
    put_u16(file, kVersion);
    file += payload;
    put_u32(file, crc32(payload));

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    out.write(file.data(), static_cast<std::streamsize>(file.size()));
    if (!out) throw IoError("short write to '" + path + "'");
}

MultiVectorIndex load_index(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path + "' for reading");
    std::ostringstream buf;
    buf << in.rdbuf();
    const std::string file = buf.str();

    if (file.size() < kMagic.size() + 2 + 4) {
        throw IoError("index file is truncated");
    }
    if (std::memcmp(file.data(), kMagic.data(), kMagic.size()) != 0) {
        throw IoError("bad magic bytes: not a poqd index file");
    }

    Reader header(file, kMagic.size());
    const std::uint16_t version = header.u16();
    if (version != kVersion) {
        throw IoError("unsupported index version " + std::to_string(version) + " (expected " +
                      std::to_string(kVersion) + ")");
    }

    const std::size_t payload_start = header.pos();
    const std::size_t payload_end = file.size() - 4;
    const std::string payload = file.substr(payload_start, payload_end - payload_start);
    Reader trailer(file, payload_end);
    if (crc32(payload) != trailer.u32()) {
        throw IoError("index checksum mismatch: file is corrupt");
    }

    Reader r(file, payload_start);
    MultiVectorIndex index;
    index.dimension = static_cast<int>(r.u32());
    if (index.dimension < 1 || index.dimension > (1 << 20)) {
        throw IoError("index declares an implausible dimension " +
                      std::to_string(index.dimension));
    }
    index.embedder_fingerprint = r.str();
    // Counts are untrusted; the per-field bounds checks stop a lying
    // header, so no reserve() on them.
    const std::uint32_t doc_count = r.u32();
    for (std::uint32_t d = 0; d < doc_count; ++d) {
        SegmentedDocument doc;
        doc.doc_id = r.str();
        doc.raw_text = r.str();
        const std::uint32_t seg_count = r.u32();
        for (std::uint32_t s = 0; s < seg_count; ++s) {
            Segment seg;
            seg.text = r.str();
            seg.vector.resize(static_cast<std::size_t>(index.dimension));
            for (auto& f : seg.vector) f = r.f32();
            doc.segments.push_back(std::move(seg));
        }
        index.documents.push_back(std::move(doc));
    }
    if (r.pos() != payload_end) {
        throw IoError("index file has trailing bytes after the last document");
    }
    return index;
}

std::vector<std::pair<std::string, std::string>> load_id_text_jsonl(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open '" + path + "' for reading");
    std::vector<std::pair<std::string, std::string>> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        nlohmann::json record = nlohmann::json::parse(line, nullptr, false);
        if (record.is_discarded() || !record.is_object() || !record.contains("id") ||
            !record.contains("text")) {
            throw IoError(path + ":" + std::to_string(lineno) +
                          ": expected a JSON object with 'id' and 'text'");
        }
        out.emplace_back(record["id"].get<std::string>(), record["text"].get<std::string>());
    }
    return out;
}

std::map<std::string, std::set<std::string>> load_ground_truth(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open '" + path + "' for reading");
    std::map<std::string, std::set<std::string>> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        const auto tab = line.find('\t');
        if (tab == std::string::npos) {
            throw IoError(path + ":" + std::to_string(lineno) +
                          ": expected 'query-id<TAB>doc-id,doc-id,...'");
        }
        const std::string qid = trim(line.substr(0, tab));
        std::set<std::string> golds;
        std::stringstream rest(line.substr(tab + 1));
        std::string piece;
        while (std::getline(rest, piece, ',')) {
            piece = trim(piece);
            if (!piece.empty()) golds.insert(piece);
        }
        if (qid.empty() || golds.empty()) {
            throw IoError(path + ":" + std::to_string(lineno) + ": empty query id or gold set");
        }
        out[qid] = std::move(golds);
    }
    return out;
}

} // namespace poqd
