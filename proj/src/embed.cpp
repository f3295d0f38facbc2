#include "poqd/embed.hpp"

#include <cmath>
#include <future>

#include <nlohmann/json.hpp>

#include "poqd/errors.hpp"
#include "poqd/http.hpp"
#include "poqd/rng.hpp"
#include "poqd/text.hpp"

namespace poqd {

double l2_norm(const EmbeddingVector& v) {
    double s = 0.0;
    for (float x : v) s += static_cast<double>(x) * static_cast<double>(x);
    return std::sqrt(s);
}

void EmbedderSpec::validate() const {
    if (dimension < 2) {
        throw ConfigError("embedder dimension must be >= 2, got " + std::to_string(dimension));
    }
    if (kind == EmbedderKind::kRemote && trim(endpoint_url).empty()) {
        throw ConfigError("remote embedder requires a non-empty endpoint-url");
    }
    if (max_in_flight < 1) {
        throw ConfigError("embedder max-in-flight must be >= 1");
    }
}

std::string EmbedderSpec::fingerprint() const {
    std::string kind_name = kind == EmbedderKind::kDeterministic ? "deterministic-test" : "remote";
    return kind_name + ":" + model_name + ":d" + std::to_string(dimension);
}

namespace {

void check_texts(const std::vector<std::string>& texts) {
    if (texts.empty()) {
        throw InvariantError("embed_text: texts must be non-empty");
    }
    for (std::size_t i = 0; i < texts.size(); ++i) {
        if (trim(texts[i]).empty()) {
            throw InvariantError("embed_text: text at position " + std::to_string(i) +
                                 " is empty after trimming");
        }
    }
}

EmbeddingVector to_unit_f32(const std::vector<double>& acc, std::uint64_t fallback_seed) {
    double norm = 0.0;
    for (double x : acc) norm += x * x;
    norm = std::sqrt(norm);

    EmbeddingVector out(acc.size());
    if (norm < 1e-12) {
        // Degenerate cancellation; fall back to a seeded direction so the
        // unit-norm invariant always holds.
        Rng rng(fallback_seed);
        std::vector<double> v(acc.size());
        double n = 0.0;
        for (auto& x : v) {
            x = rng.gaussian();
            n += x * x;
        }
        n = std::sqrt(n);
        for (std::size_t i = 0; i < v.size(); ++i) out[i] = static_cast<float>(v[i] / n);
        return out;
    }
    for (std::size_t i = 0; i < acc.size(); ++i) out[i] = static_cast<float>(acc[i] / norm);
    return out;
}

class DeterministicEmbedder final : public Embedder {
public:
    explicit DeterministicEmbedder(const EmbedderSpec& spec) : dimension_(spec.dimension) {}

    std::vector<EmbeddingVector> embed(const std::vector<std::string>& texts) override {
        check_texts(texts);
        std::vector<EmbeddingVector> out;
        out.reserve(texts.size());
        for (const auto& t : texts) out.push_back(deterministic_embedding(t, dimension_));
        return out;
    }

    int dimension() const override { return dimension_; }

private:
    int dimension_;
};

class RemoteEmbedder final : public Embedder {
public:
    explicit RemoteEmbedder(EmbedderSpec spec)
        : spec_(std::move(spec)), api_key_(api_key_from_env(kEmbedApiKeyEnv)) {}

    std::vector<EmbeddingVector> embed(const std::vector<std::string>& texts) override {
        check_texts(texts);

        std::vector<std::vector<std::string>> chunks;
        for (std::size_t i = 0; i < texts.size(); i += kChunkSize) {
            chunks.emplace_back(texts.begin() + static_cast<std::ptrdiff_t>(i),
                                texts.begin() +
                                    static_cast<std::ptrdiff_t>(std::min(i + kChunkSize, texts.size())));
        }

        // Bounded fan-out; results land at fixed chunk slots so output
        // order matches input order regardless of completion order.
        std::vector<std::vector<EmbeddingVector>> results(chunks.size());
        const std::size_t window = static_cast<std::size_t>(spec_.max_in_flight);
        for (std::size_t base = 0; base < chunks.size(); base += window) {
            const std::size_t end = std::min(base + window, chunks.size());
            std::vector<std::future<std::vector<EmbeddingVector>>> inflight;
            for (std::size_t c = base; c < end; ++c) {
                inflight.push_back(std::async(std::launch::async,
                                              [this, &chunks, c] { return embed_chunk(chunks[c]); }));
            }
            for (std::size_t c = base; c < end; ++c) {
                results[c] = inflight[c - base].get();
            }
        }

        std::vector<EmbeddingVector> out;
        out.reserve(texts.size());
        for (auto& r : results) {
            for (auto& v : r) out.push_back(std::move(v));
        }
        return out;
    }

    int dimension() const override { return spec_.dimension; }

private:
    static constexpr std::size_t kChunkSize = 32;

    std::vector<EmbeddingVector> embed_chunk(const std::vector<std::string>& texts) {
        nlohmann::json body{{"model", spec_.model_name}, {"input", texts}};
        const std::string raw = post_json(spec_.endpoint_url, "/v1/embeddings", body, api_key_);

        nlohmann::json reply = nlohmann::json::parse(raw, nullptr, false);
        if (reply.is_discarded() || !reply.contains("data") || !reply["data"].is_array()) {
            throw ProtocolError("embeddings reply is not a JSON object with a 'data' array");
        }
        const auto& data = reply["data"];
        if (data.size() != texts.size()) {
            throw ProtocolError("embeddings reply has " + std::to_string(data.size()) +
                                " entries for " + std::to_string(texts.size()) + " inputs");
        }

        std::vector<EmbeddingVector> out(texts.size());
        std::vector<bool> seen(texts.size(), false);
        for (std::size_t i = 0; i < data.size(); ++i) {
            const auto& entry = data[i];
            std::size_t slot = i;
            if (entry.contains("index") && entry["index"].is_number_unsigned()) {
                slot = entry["index"].get<std::size_t>();
            }
            if (slot >= out.size() || seen[slot]) {
                throw ProtocolError("embeddings reply has a bad or duplicate index " +
                                    std::to_string(slot));
            }
            if (!entry.contains("embedding") || !entry["embedding"].is_array()) {
                throw ProtocolError("embeddings reply entry is missing 'embedding'");
            }
            const auto& emb = entry["embedding"];
            if (static_cast<int>(emb.size()) != spec_.dimension) {
                throw ProtocolError("embeddings reply dimension " + std::to_string(emb.size()) +
                                    " does not match configured dimension " +
                                    std::to_string(spec_.dimension));
            }
            std::vector<double> acc(emb.size());
            for (std::size_t j = 0; j < emb.size(); ++j) {
                acc[j] = emb[j].get<double>();
                if (!std::isfinite(acc[j])) {
                    throw ProtocolError("embeddings reply contains a non-finite value");
                }
            }
            seen[slot] = true;
            out[slot] = to_unit_f32(acc, fnv1a64(texts[slot]));
        }
        return out;
    }

    EmbedderSpec spec_;
    std::string api_key_;
};

} // namespace

EmbeddingVector deterministic_embedding(const std::string& text, int dimension) {
    if (dimension < 2) {
        throw ConfigError("embedder dimension must be >= 2, got " + std::to_string(dimension));
    }
    const auto tokens = split_whitespace(to_lower(text));
    if (tokens.empty()) {
        throw InvariantError("embed_text: text is empty after trimming");
    }

    std::vector<double> acc(static_cast<std::size_t>(dimension), 0.0);
    for (std::size_t p = 0; p < tokens.size(); ++p) {
        Rng rng(fnv1a64(tokens[p]) + 0x9E3779B97F4A7C15ULL * static_cast<std::uint64_t>(p + 1));
        std::vector<double> v(acc.size());
        double norm = 0.0;
        for (auto& x : v) {
            x = rng.gaussian();
            norm += x * x;
        }
        norm = std::sqrt(norm);
        if (norm < 1e-12) {
            v[0] = 1.0;
            norm = 1.0;
        }
        const double scale = 1.0 / (static_cast<double>(p) + 1.0);
        for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += scale * v[i] / norm;
    }
    return to_unit_f32(acc, fnv1a64(text));
}

std::unique_ptr<Embedder> make_embedder(const EmbedderSpec& spec) {
    spec.validate();
    if (spec.kind == EmbedderKind::kDeterministic) {
        return std::make_unique<DeterministicEmbedder>(spec);
    }
    return std::make_unique<RemoteEmbedder>(spec);
}

std::vector<EmbeddingVector> embed_text(const EmbedderSpec& spec,
                                        const std::vector<std::string>& texts) {
    return make_embedder(spec)->embed(texts);
}

} // namespace poqd
