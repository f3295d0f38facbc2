#pragma once

#include <memory>
#include <string>
#include <vector>

namespace poqd {

/// Unit-norm embedding stored as 32-bit floats (the index storage format).
/// All scoring accumulates in double.
using EmbeddingVector = std::vector<float>;

double l2_norm(const EmbeddingVector& v);

enum class EmbedderKind {
    kDeterministic, ///< built-in hash embedder, pure function of (text, dimension)
    kRemote,        ///< POST {endpoint}/v1/embeddings
};

struct EmbedderSpec {
    EmbedderKind kind = EmbedderKind::kDeterministic;
    std::string endpoint_url; ///< remote only
    std::string model_name;   ///< remote only
    int dimension = 64;
    int max_in_flight = 8; ///< bound on concurrent remote requests

    /// Throws ConfigError when the spec is unusable (dimension < 2,
    /// remote without endpoint).
    void validate() const;

    /// Identity string recorded in indexes so a stale index cannot be
    /// silently queried with a different embedder.
    std::string fingerprint() const;
};

/// Text-to-vector backend behind EmbedderSpec. Implementations are
/// stateless per call and safe to share across threads.
class Embedder {
public:
    virtual ~Embedder() = default;

    /// One unit-norm vector per input text, same order. Throws
    /// InvariantError on empty input or blank texts, TransportError /
    /// ProtocolError on remote failures.
    virtual std::vector<EmbeddingVector> embed(const std::vector<std::string>& texts) = 0;

    virtual int dimension() const = 0;
};

std::unique_ptr<Embedder> make_embedder(const EmbedderSpec& spec);

/// Convenience wrapper: build the backend for `spec` and embed `texts`.
std::vector<EmbeddingVector> embed_text(const EmbedderSpec& spec,
                                        const std::vector<std::string>& texts);

/// The deterministic test embedder. Lowercases, splits on whitespace, sums
/// per-(token, position) pseudorandom unit vectors scaled by 1/(position+1),
/// then normalizes. Order-sensitive and reproducible without any model.
EmbeddingVector deterministic_embedding(const std::string& text, int dimension);

/// Env var consulted for the remote embedder bearer token.
inline constexpr const char* kEmbedApiKeyEnv = "POQD_EMBED_API_KEY";

} // namespace poqd
