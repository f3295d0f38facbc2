#pragma once

#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "poqd/embed.hpp"

namespace poqd {

struct Segment {
    std::string text;
    EmbeddingVector vector;
};

/// A document split into segments with one vector each.
struct SegmentedDocument {
    std::string doc_id;
    std::string raw_text;
    std::vector<Segment> segments;
};

/// The searchable corpus. Immutable after build; concurrent reads are safe.
struct MultiVectorIndex {
    int dimension = 0;
    std::string embedder_fingerprint;
    std::vector<SegmentedDocument> documents;
};

/// Excess segments beyond this are truncated with a warning on stderr.
inline constexpr std::size_t kMaxSegmentsPerDocument = 512;

/// Splits on '.', '!' or '?' followed by whitespace or end of text; the
/// terminator stays with its segment; segments are trimmed and empties
/// dropped. Text without a terminator yields one segment. No abbreviation
/// handling: "Dr. Smith arrived." splits after "Dr.".
std::vector<std::string> segment_document(const std::string& text);

/// Segments and embeds every document. Throws InvariantError on duplicate
/// or empty doc ids; embed/segment errors carry the offending doc id.
MultiVectorIndex build_index(const std::vector<std::pair<std::string, std::string>>& docs,
                             const EmbedderSpec& spec);

/// Binary index file: magic "POQD", u16 version, then dimension,
/// fingerprint and per-document records; vectors as raw little-endian
/// f32 runs; trailing CRC-32. Round trips are byte-identical.
void save_index(const MultiVectorIndex& index, const std::string& path);
MultiVectorIndex load_index(const std::string& path);

/// Line-delimited corpus/query file: one JSON object per line with
/// "id" and "text" fields.
std::vector<std::pair<std::string, std::string>> load_id_text_jsonl(const std::string& path);

/// Ground-truth file: query-id, tab, comma-separated gold doc ids.
std::map<std::string, std::set<std::string>> load_ground_truth(const std::string& path);

} // namespace poqd
