#pragma once

#include <chrono>
#include <memory>
#include <string>

#include <nlohmann/json.hpp>

namespace poqd {

/// Line-delimited JSON run log shared by the optimizer and trainer.
/// Phases: opt-iter, gd-step, full-train, theorem-check, event.
///
/// With deterministic backends (scripted LLMs, built-in embedder) the
/// wall-ms field is forced to 0 so that identically seeded runs produce
/// byte-identical logs.
class RunLog {
public:
    RunLog() = default; ///< disabled sink; records are dropped

    static RunLog to_file(const std::string& path, bool deterministic_time);

    bool enabled() const { return out_ != nullptr; }

    /// Writes one record; adds "phase" and "wall-ms".
    void record(const std::string& phase, nlohmann::json fields);

    void opt_iter(int iteration, const std::string& prefix, const nlohmann::json& loss,
                  bool accepted, bool evaluated);
    void gd_step(int step, double loss);
    void full_train_step(int step, double loss);

private:
    std::shared_ptr<std::ofstream> out_;
    bool deterministic_time_ = true;
    std::chrono::steady_clock::time_point start_{};
};

} // namespace poqd
