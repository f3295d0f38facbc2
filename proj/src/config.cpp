#include "poqd/config.hpp"

#include <fstream>
#include <vector>

#include "poqd/errors.hpp"
#include "poqd/text.hpp"

namespace poqd {

namespace {

struct Item {
    std::string section;
    std::string key;
    std::string value;
    std::size_t lineno;
};

std::vector<Item> parse_ini(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config file '" + path + "'");
    std::vector<Item> items;
    std::string line;
    std::string section;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::string t = trim(line);
        if (t.empty() || t[0] == '#' || t[0] == ';') continue;
        if (t.front() == '[') {
            if (t.back() != ']') {
                throw ConfigError(path + ":" + std::to_string(lineno) + ": unterminated section");
            }
            section = trim(t.substr(1, t.size() - 2));
            continue;
        }
        const auto eq = t.find('=');
        if (eq == std::string::npos) {
            throw ConfigError(path + ":" + std::to_string(lineno) + ": expected 'key = value'");
        }
        items.push_back({section, trim(t.substr(0, eq)), trim(t.substr(eq + 1)), lineno});
    }
    return items;
}

double parse_double(const Item& it) {
    try {
        std::size_t used = 0;
        const double v = std::stod(it.value, &used);
        if (used != it.value.size()) throw std::invalid_argument("trailing");
        return v;
    } catch (const std::exception&) {
        throw ConfigError("[" + it.section + "] " + it.key + ": '" + it.value +
                          "' is not a number");
    }
}

long long parse_int(const Item& it) {
    try {
        std::size_t used = 0;
        const long long v = std::stoll(it.value, &used);
        if (used != it.value.size()) throw std::invalid_argument("trailing");
        return v;
    } catch (const std::exception&) {
        throw ConfigError("[" + it.section + "] " + it.key + ": '" + it.value +
                          "' is not an integer");
    }
}

std::string unescape_newlines(const std::string& s) {
    std::string out;
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (s[i] == '\\' && i + 1 < s.size() && s[i + 1] == 'n') {
            out.push_back('\n');
            ++i;
        } else {
            out.push_back(s[i]);
        }
    }
    return out;
}

std::vector<std::string> load_script_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open script file '" + path + "'");
    std::vector<std::string> script;
    std::string line;
    while (std::getline(in, line)) {
        if (trim(line).empty()) continue;
        script.push_back(unescape_newlines(line));
    }
    return script;
}

void apply_llm_item(LlmClientSpec& spec, const Item& it) {
    if (it.key == "kind") {
        if (it.value == "remote") {
            spec.kind = LlmKind::kRemote;
        } else if (it.value == "scripted" || it.value == "scripted-mock") {
            spec.kind = LlmKind::kScriptedMock;
        } else {
            throw ConfigError("[" + it.section + "] kind: '" + it.value +
                              "' is not 'remote' or 'scripted'");
        }
    } else if (it.key == "endpoint-url") {
        spec.endpoint_url = it.value;
    } else if (it.key == "model-name") {
        spec.model_name = it.value;
    } else if (it.key == "temperature") {
        spec.temperature = parse_double(it);
    } else if (it.key == "max-tokens") {
        spec.max_tokens = static_cast<int>(parse_int(it));
    } else if (it.key == "script") {
        spec.script.push_back(unescape_newlines(it.value));
    } else if (it.key == "script-file") {
        for (auto& s : load_script_file(it.value)) spec.script.push_back(std::move(s));
    } else {
        throw ConfigError("[" + it.section + "] unknown key '" + it.key + "'");
    }
}

} // namespace

RunConfig load_config(const std::string& path) {
    RunConfig cfg;
    for (const auto& it : parse_ini(path)) {
        if (it.section == "embedder") {
            if (it.key == "kind") {
                if (it.value == "deterministic" || it.value == "deterministic-test") {
                    cfg.embedder.kind = EmbedderKind::kDeterministic;
                } else if (it.value == "remote") {
                    cfg.embedder.kind = EmbedderKind::kRemote;
                } else {
                    throw ConfigError("[embedder] kind: '" + it.value +
                                      "' is not 'deterministic' or 'remote'");
                }
            } else if (it.key == "endpoint-url") {
                cfg.embedder.endpoint_url = it.value;
            } else if (it.key == "model-name") {
                cfg.embedder.model_name = it.value;
            } else if (it.key == "dimension") {
                cfg.embedder.dimension = static_cast<int>(parse_int(it));
            } else if (it.key == "max-in-flight") {
                cfg.embedder.max_in_flight = static_cast<int>(parse_int(it));
            } else {
                throw ConfigError("[embedder] unknown key '" + it.key + "'");
            }
        } else if (it.section == "llm-decomposer") {
            apply_llm_item(cfg.decomposer_llm, it);
        } else if (it.section == "llm-optimizer") {
            apply_llm_item(cfg.optimizer_llm, it);
        } else if (it.section == "optimizer") {
            if (it.key == "alpha") {
                cfg.optimizer.alpha = parse_double(it);
            } else if (it.key == "kappa") {
                cfg.optimizer.kappa = static_cast<int>(parse_int(it));
            } else if (it.key == "meta-prompt-header") {
                cfg.optimizer.meta_prompt_header = unescape_newlines(it.value);
            } else if (it.key == "meta-prompt-footer") {
                cfg.optimizer.meta_prompt_footer = unescape_newlines(it.value);
            } else {
                throw ConfigError("[optimizer] unknown key '" + it.key + "'");
            }
        } else if (it.section == "trainer") {
            if (it.key == "tau") {
                cfg.trainer.tau = static_cast<int>(parse_int(it));
            } else if (it.key == "eta") {
                cfg.trainer.eta = parse_double(it);
            } else if (it.key == "epsilon") {
                cfg.trainer.convergence_epsilon = parse_double(it);
            } else if (it.key == "max-iterations") {
                cfg.trainer.max_total_iterations = static_cast<int>(parse_int(it));
            } else if (it.key == "outer-cap") {
                cfg.trainer.outer_loop_cap = static_cast<int>(parse_int(it));
            } else if (it.key == "evaluator") {
                if (it.value == "synthetic-pl") {
                    cfg.evaluator = EvaluatorKind::kSyntheticPL;
                } else if (it.value == "retrieval-surrogate") {
                    cfg.evaluator = EvaluatorKind::kRetrievalSurrogate;
                } else {
                    throw ConfigError("[trainer] evaluator: '" + it.value +
                                      "' is not 'synthetic-pl' or 'retrieval-surrogate'");
                }
            } else if (it.key == "surrogate-temperature") {
                cfg.surrogate_temperature = parse_double(it);
            } else {
                throw ConfigError("[trainer] unknown key '" + it.key + "'");
            }
        } else if (it.section == "synthetic") {
            if (it.key == "n") {
                cfg.synthetic.n = static_cast<int>(parse_int(it));
            } else if (it.key == "prompts") {
                cfg.synthetic.prompt_count = static_cast<int>(parse_int(it));
            } else {
                throw ConfigError("[synthetic] unknown key '" + it.key + "'");
            }
        } else if (it.section == "retrieval") {
            if (it.key == "k") {
                cfg.retrieval_k = static_cast<int>(parse_int(it));
            } else {
                throw ConfigError("[retrieval] unknown key '" + it.key + "'");
            }
        } else if (it.section == "paths") {
            if (it.key == "index") {
                cfg.paths.index = it.value;
            } else if (it.key == "corpus") {
                cfg.paths.corpus = it.value;
            } else if (it.key == "queries") {
                cfg.paths.queries = it.value;
            } else if (it.key == "ground-truth") {
                cfg.paths.ground_truth = it.value;
            } else if (it.key == "cache") {
                cfg.paths.cache = it.value;
            } else if (it.key == "log") {
                cfg.paths.log = it.value;
            } else {
                throw ConfigError("[paths] unknown key '" + it.key + "'");
            }
        } else if (it.section == "run") {
            if (it.key == "seed") {
                cfg.seed = static_cast<std::uint64_t>(parse_int(it));
            } else if (it.key == "task-description") {
                cfg.task_description = unescape_newlines(it.value);
            } else {
                throw ConfigError("[run] unknown key '" + it.key + "'");
            }
        } else {
            throw ConfigError(path + ":" + std::to_string(it.lineno) + ": unknown section [" +
                              it.section + "]");
        }
    }
    return cfg;
}

} // namespace poqd
