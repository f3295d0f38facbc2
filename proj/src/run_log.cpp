#include "poqd/run_log.hpp"

#include <fstream>

#include "poqd/errors.hpp"

namespace poqd {

RunLog RunLog::to_file(const std::string& path, bool deterministic_time) {
    RunLog log;
    log.out_ = std::make_shared<std::ofstream>(path, std::ios::trunc);
    if (!*log.out_) {
        throw IoError("cannot open run log '" + path + "' for writing");
    }
    log.deterministic_time_ = deterministic_time;
    log.start_ = std::chrono::steady_clock::now();
    return log;
}

void RunLog::record(const std::string& phase, nlohmann::json fields) {
    if (!enabled()) return;
    fields["phase"] = phase;
    long long wall_ms = 0;
    if (!deterministic_time_) {
        wall_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                      std::chrono::steady_clock::now() - start_)
                      .count();
    }
    fields["wall-ms"] = wall_ms;
    *out_ << fields.dump() << "\n";
    out_->flush();
}

void RunLog::opt_iter(int iteration, const std::string& prefix, const nlohmann::json& loss,
                      bool accepted, bool evaluated) {
    record("opt-iter", {{"iter", iteration},
                        {"prefix", prefix},
                        {"loss", loss},
                        {"accepted", accepted},
                        {"evaluated", evaluated}});
}

void RunLog::gd_step(int step, double loss) {
    record("gd-step", {{"step", step}, {"loss", loss}});
}

void RunLog::full_train_step(int step, double loss) {
    record("full-train", {{"step", step}, {"loss", loss}});
}

} // namespace poqd
