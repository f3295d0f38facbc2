#pragma once

#include <cstdint>
#include <string>

#include "poqd/decompose.hpp"
#include "poqd/embed.hpp"
#include "poqd/llm_client.hpp"
#include "poqd/optimizer.hpp"
#include "poqd/trainer.hpp"

namespace poqd {

/// Which downstream evaluator a train/optimize run drives.
enum class EvaluatorKind {
    kRetrievalSurrogate,
    kSyntheticPL,
};

struct SyntheticConfig {
    int n = 8;
    int prompt_count = 3;
};

struct PathsConfig {
    std::string index;
    std::string corpus;
    std::string queries;
    std::string ground_truth;
    std::string cache;
    std::string log;
};

/// Everything a command needs, loadable from an INI-style file with
/// sections; command-line flags override file values.
struct RunConfig {
    EmbedderSpec embedder;
    LlmClientSpec decomposer_llm;                     ///< temperature defaults to 0
    LlmClientSpec optimizer_llm = make_optimizer_spec(); ///< temperature defaults to 1
    OptimizerConfig optimizer;
    TrainerConfig trainer;
    EvaluatorKind evaluator = EvaluatorKind::kSyntheticPL;
    double surrogate_temperature = 1.0;
    SyntheticConfig synthetic;
    int retrieval_k = 2; ///< text-corpus default
    PathsConfig paths;
    std::uint64_t seed = 0;
    std::string task_description = kDefaultTaskDescription;

    static LlmClientSpec make_optimizer_spec() {
        LlmClientSpec s;
        s.temperature = 1.0; // proposals must vary
        return s;
    }
};

/// Parses the INI-style config file. Unknown sections or keys are
/// ConfigErrors so typos fail loudly. Script entries for scripted LLMs
/// come from repeated `script = ...` keys or a `script-file` (one
/// response per line, "\n" escapes allowed).
RunConfig load_config(const std::string& path);

} // namespace poqd
