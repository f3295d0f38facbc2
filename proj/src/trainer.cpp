#include "poqd/trainer.hpp"

#include <algorithm>
#include <cmath>

#include "poqd/errors.hpp"
#include "poqd/rng.hpp"

namespace poqd {

// ---------------------------------------------------------------------------
// SyntheticPLModel
// ---------------------------------------------------------------------------

const Eigen::VectorXd& SyntheticPLModel::target(const std::string& prompt_id) const {
    const auto it = targets.find(prompt_id);
    if (it == targets.end()) {
        throw InvariantError("synthetic model has no prompt id '" + prompt_id + "'");
    }
    return it->second;
}

double SyntheticPLModel::loss(const std::string& prompt_id) const {
    return 0.5 * (a * theta - target(prompt_id)).squaredNorm();
}

Eigen::VectorXd SyntheticPLModel::gradient(const std::string& prompt_id) const {
    return a.transpose() * (a * theta - target(prompt_id));
}

namespace {

Eigen::VectorXd gram_eigenvalues(const Eigen::MatrixXd& a) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(a.transpose() * a);
    if (solver.info() != Eigen::Success) {
        throw InvariantError("eigendecomposition of A^T A failed");
    }
    return solver.eigenvalues();
}

} // namespace

double SyntheticPLModel::mu() const { return gram_eigenvalues(a).minCoeff(); }

double SyntheticPLModel::smoothness() const { return gram_eigenvalues(a).maxCoeff(); }

double SyntheticPLModel::max_loss_over_prompts() const {
    if (targets.empty()) {
        throw InvariantError("synthetic model has an empty prompt table");
    }
    double m = 0.0;
    for (const auto& [id, _] : targets) m = std::max(m, loss(id));
    return m;
}

// ---------------------------------------------------------------------------
// Gradient descent
// ---------------------------------------------------------------------------

void TrainerConfig::validate() const {
    if (tau < 0) throw ConfigError("trainer tau must be >= 0");
    if (convergence_epsilon <= 0.0) throw ConfigError("trainer epsilon must be > 0");
    if (max_total_iterations < 1) throw ConfigError("trainer max-iterations must be >= 1");
    if (outer_loop_cap < 1) throw ConfigError("trainer outer-cap must be >= 1");
}

double resolve_eta(const SyntheticPLModel& model, double eta) {
    if (eta > 0.0) return eta;
    return 1.0 / model.smoothness();
}

SyntheticPLModel gd_step(const SyntheticPLModel& model, double eta) {
    if (eta <= 0.0) {
        throw InvariantError("gd_step: eta must be > 0");
    }
    const Eigen::VectorXd grad = model.gradient(model.active_prompt);
    if (!grad.allFinite()) {
        throw InvariantError("gd_step: gradient is not finite");
    }
    SyntheticPLModel next = model;
    next.theta = model.theta - eta * grad;
    return next;
}

TrainTrace train_steps(SyntheticPLModel model, int tau, double eta) {
    if (tau < 0) throw InvariantError("train_steps: tau must be >= 0");
    TrainTrace trace;
    trace.losses.push_back(model.loss());
    for (int t = 0; t < tau; ++t) {
        model = gd_step(model, eta);
        trace.losses.push_back(model.loss());
    }
    trace.steps = tau;
    trace.model = std::move(model);
    return trace;
}

TrainTrace train_to_convergence(SyntheticPLModel model, double eta, double epsilon, int cap) {
    if (epsilon <= 0.0) throw InvariantError("train_to_convergence: epsilon must be > 0");
    if (cap < 1) throw InvariantError("train_to_convergence: cap must be >= 1");

    TrainTrace trace;
    double prev = model.loss();
    trace.losses.push_back(prev);
    trace.converged = false;
    while (trace.steps < cap) {
        model = gd_step(model, eta);
        ++trace.steps;
        const double cur = model.loss();
        trace.losses.push_back(cur);
        if (prev - cur < epsilon) {
            trace.converged = true;
            break;
        }
        prev = cur;
    }
    trace.model = std::move(model);
    return trace;
}

// ---------------------------------------------------------------------------
// Evaluators
// ---------------------------------------------------------------------------

RetrievalSurrogateEvaluator::RetrievalSurrogateEvaluator(const MultiVectorIndex& index,
                                                         Embedder& embedder, double temperature)
    : index_(index), embedder_(embedder), temperature_(temperature) {
    if (temperature <= 0.0) {
        throw ConfigError("surrogate temperature must be > 0");
    }
    if (index.documents.empty()) {
        throw InvariantError("surrogate evaluator: index is empty");
    }
}

double RetrievalSurrogateEvaluator::query_loss(const TrainQuery& query,
                                               const std::vector<std::string>& sub_queries,
                                               const PromptPrefix& /*prefix*/) {
    if (query.gold_doc_ids.empty()) {
        throw InvariantError("query '" + query.id + "' has no gold doc ids");
    }
    const auto vectors = embedder_.embed(sub_queries);

    std::vector<double> scaled;
    scaled.reserve(index_.documents.size());
    double max_scaled = -std::numeric_limits<double>::infinity();
    double gold_mass_max = -std::numeric_limits<double>::infinity();
    std::vector<double> gold_scaled;
    std::size_t golds_found = 0;
    for (const auto& doc : index_.documents) {
        const double s = maxsim_score(vectors, doc) / temperature_;
        scaled.push_back(s);
        max_scaled = std::max(max_scaled, s);
        if (std::find(query.gold_doc_ids.begin(), query.gold_doc_ids.end(), doc.doc_id) !=
            query.gold_doc_ids.end()) {
            gold_scaled.push_back(s);
            gold_mass_max = std::max(gold_mass_max, s);
            ++golds_found;
        }
    }
    if (golds_found == 0) {
        throw InvariantError("query '" + query.id + "': no gold doc id exists in the index");
    }

    // -log softmax mass of the gold documents, via log-sum-exp.
    double denom = 0.0;
    for (double s : scaled) denom += std::exp(s - max_scaled);
    double numer = 0.0;
    for (double s : gold_scaled) numer += std::exp(s - max_scaled);
    return -(std::log(numer) - std::log(denom));
}

double SyntheticPLEvaluator::query_loss(const TrainQuery& /*query*/,
                                        const std::vector<std::string>& /*sub_queries*/,
                                        const PromptPrefix& prefix) {
    return model_.loss(prefix.text);
}

// ---------------------------------------------------------------------------
// Algorithm: alternating prompt search and downstream training
// ---------------------------------------------------------------------------

TrainResult train_poqd(const TrainerConfig& trainer_config, const OptimizerConfig& optimizer_config,
                       const PromptPrefix& p_init, const std::vector<TrainQuery>& queries,
                       DownstreamEvaluator& evaluator, LlmClient& optimizer_llm,
                       LlmClient* decomposer, DecompositionCache* cache, RunLog* log) {
    trainer_config.validate();
    optimizer_config.validate();

    auto* synthetic = dynamic_cast<SyntheticPLEvaluator*>(&evaluator);

    TrainResult result;
    result.has_model = synthetic != nullptr;
    PromptPrefix p_old = p_init;

    while (result.outer_iterations < trainer_config.outer_loop_cap) {
        ++result.outer_iterations;

        OptimizeResult opt = optimize_prompt(optimizer_config, p_old, queries, evaluator,
                                             optimizer_llm, decomposer, cache, log);
        result.optimizer_proposals += opt.proposals;
        if (!opt.updated) {
            result.final_loss = opt.history.pairs.front().loss; // incumbent's loss
            result.final_decompositions = std::move(opt.decompositions);
            break;
        }
        result.final_loss = opt.history.pairs.back().loss;

        AcceptedUpdate update;
        update.prompt_old = p_old.text;
        update.prompt_new = opt.prefix.text;
        update.loss_old = opt.history.pairs.front().loss;
        update.loss_new = opt.history.pairs.back().loss;
        if (synthetic != nullptr) {
            update.theta_at_acceptance = synthetic->model().theta;
        }
        result.accepted_updates.push_back(std::move(update));
        result.final_decompositions = std::move(opt.decompositions);

        if (synthetic != nullptr) {
            auto& model = synthetic->model();
            model.active_prompt = opt.prefix.text;
            const double eta = resolve_eta(model, trainer_config.eta);
            TrainTrace trace = train_steps(model, trainer_config.tau, eta);
            if (log != nullptr) {
                for (int s = 1; s <= trace.steps; ++s) {
                    log->gd_step(result.alternating_gd_steps + s, trace.losses[s]);
                }
            }
            result.alternating_gd_steps += trace.steps;
            if (trace.steps > 0) result.step_loss_traces.push_back(trace.losses);
            model = std::move(trace.model);
            result.final_loss = model.loss();
        }

        p_old = opt.prefix;

        if (result.outer_iterations == trainer_config.outer_loop_cap) {
            result.outer_cap_hit = true;
            if (log != nullptr) log->record("event", {{"what", "outer-loop-cap-reached"}});
        }
    }

    result.final_prefix = p_old;

    // Full training with the final prompt fixed.
    if (synthetic != nullptr) {
        auto& model = synthetic->model();
        model.active_prompt = p_old.text;
        const double eta = resolve_eta(model, trainer_config.eta);
        TrainTrace trace = train_to_convergence(model, eta, trainer_config.convergence_epsilon,
                                                trainer_config.max_total_iterations);
        if (log != nullptr) {
            for (int s = 1; s <= trace.steps; ++s) {
                log->full_train_step(s, trace.losses[s]);
            }
            if (!trace.converged) {
                log->record("event", {{"what", "full-train-cap-reached"}});
            }
        }
        result.full_train_steps = trace.steps;
        result.full_train_converged = trace.converged;
        if (trace.steps > 0) result.step_loss_traces.push_back(trace.losses);
        model = std::move(trace.model);
        result.final_loss = model.loss();
        result.final_model = model;
    }

    if (log != nullptr) {
        log->record("event", {{"what", "run-complete"},
                              {"final-prefix", result.final_prefix.text},
                              {"final-loss", result.final_loss},
                              {"accepted-updates", result.accepted_updates.size()}});
    }
    return result;
}

// ---------------------------------------------------------------------------
// Theorem verification
// ---------------------------------------------------------------------------

double theorem_bound_rhs(double alpha, int tau, double mu, double smoothness, double loss_bound) {
    if (tau < 0) throw InvariantError("theorem_bound_rhs: tau must be >= 0");
    const double rate = 1.0 - mu / (2.0 * smoothness);
    return alpha - std::pow(rate, tau) * loss_bound;
}

namespace {

/// (loss_{k+1}) <= rate * (loss_k) + 1e-12, valid per step when eta = 1/L
/// and the minimum loss is zero.
bool lemma_holds_on_trace(const std::vector<double>& losses, double rate, int* steps_checked) {
    for (std::size_t i = 0; i + 1 < losses.size(); ++i) {
        ++*steps_checked;
        if (losses[i + 1] > rate * losses[i] + 1e-12) return false;
    }
    return true;
}

} // namespace

TheoremReport verify_theorem_bound(const SyntheticPLModel& instance,
                                   const std::vector<AcceptedUpdate>& updates, double alpha,
                                   int tau, double convergence_epsilon, int cap) {
    TheoremReport report;
    report.alpha = alpha;
    report.tau = tau;
    report.mu = instance.mu();
    report.smoothness = instance.smoothness();
    report.loss_bound = instance.loss_bound;
    const double rhs =
        theorem_bound_rhs(alpha, tau, report.mu, report.smoothness, report.loss_bound);
    report.bound_positive = rhs > 0.0;

    if (updates.empty()) {
        report.applicable = false;
        return report;
    }
    report.applicable = true;

    const double eta = 1.0 / report.smoothness;
    const double rate = 1.0 - report.mu / (2.0 * report.smoothness);

    for (const auto& update : updates) {
        auto converge_under = [&](const std::string& prompt) {
            SyntheticPLModel m = instance;
            m.theta = update.theta_at_acceptance;
            m.active_prompt = prompt;
            TrainTrace trace = train_to_convergence(std::move(m), eta, convergence_epsilon, cap);
            const bool ok =
                lemma_holds_on_trace(trace.losses, rate, &report.lemma_steps_checked);
            report.lemma_holds = report.lemma_holds && ok;
            return trace.model.loss();
        };

        TheoremCheck check;
        check.update = update;
        check.converged_loss_old = converge_under(update.prompt_old);
        check.converged_loss_new = converge_under(update.prompt_new);
        check.bound_rhs = rhs;
        check.holds =
            (check.converged_loss_old - check.converged_loss_new) >= rhs - kTheoremSlack;
        report.all_hold = report.all_hold && check.holds;
        report.checks.push_back(std::move(check));
    }
    return report;
}

// ---------------------------------------------------------------------------
// Seeded instances and the suite
// ---------------------------------------------------------------------------

SyntheticPLModel make_synthetic_instance(std::uint64_t seed, int n, int prompt_count) {
    if (n < 1) throw InvariantError("make_synthetic_instance: n must be >= 1");
    if (prompt_count < 2) {
        throw InvariantError("make_synthetic_instance: need at least 2 prompts");
    }
    Rng rng(seed);

    // A = Q1 * diag(s) * Q2^T with singular values in [1, 3]: full rank
    // with a moderate condition number, so 1 - mu/2L stays away from 1.
    auto random_orthogonal = [&](int size) {
        Eigen::MatrixXd g(size, size);
        for (int i = 0; i < size; ++i) {
            for (int j = 0; j < size; ++j) g(i, j) = rng.gaussian();
        }
        return Eigen::HouseholderQR<Eigen::MatrixXd>(g).householderQ() *
               Eigen::MatrixXd::Identity(size, size);
    };
    const Eigen::MatrixXd q1 = random_orthogonal(n);
    const Eigen::MatrixXd q2 = random_orthogonal(n);
    Eigen::VectorXd singular(n);
    for (int i = 0; i < n; ++i) singular(i) = rng.uniform(1.0, 3.0);

    SyntheticPLModel model;
    model.a = q1 * singular.asDiagonal() * q2.transpose();
    model.theta = Eigen::VectorXd::NullaryExpr(n, [&](Eigen::Index) { return rng.gaussian(); });

    // Targets with descending initial losses: 1.0 for p0, then gaps of at
    // least 0.25 so a scripted optimizer always has an acceptable move.
    std::vector<double> losses(static_cast<std::size_t>(prompt_count));
    losses[0] = 1.0;
    for (int p = 1; p < prompt_count; ++p) {
        const double lo = 0.05;
        const double hi = losses[static_cast<std::size_t>(p - 1)] - 0.25;
        losses[static_cast<std::size_t>(p)] = rng.uniform(lo, std::max(lo + 0.01, hi));
    }

    const Eigen::VectorXd a_theta = model.a * model.theta;
    for (int p = 0; p < prompt_count; ++p) {
        Eigen::VectorXd dir =
            Eigen::VectorXd::NullaryExpr(n, [&](Eigen::Index) { return rng.gaussian(); });
        const double norm = dir.norm();
        if (norm < 1e-12) {
            dir = Eigen::VectorXd::Unit(n, 0);
        } else {
            dir /= norm;
        }
        // loss(theta0; p) = 0.5 * c^2 with residual c * dir.
        const double c = std::sqrt(2.0 * losses[static_cast<std::size_t>(p)]);
        model.targets["p" + std::to_string(p)] = a_theta - c * dir;
    }
    model.active_prompt = "p0";
    model.loss_bound = model.max_loss_over_prompts();
    return model;
}

SyntheticSuiteResult run_theorem_suite(const SyntheticSuiteConfig& config, RunLog* log) {
    if (config.seeds < 1) throw InvariantError("theorem suite needs at least one seed");
    if (config.n_min < 1 || config.n_max < config.n_min) {
        throw InvariantError("theorem suite: bad dimension range");
    }

    SyntheticSuiteResult result;
    result.total = config.seeds;

    for (int s = 0; s < config.seeds; ++s) {
        const std::uint64_t seed = config.base_seed + static_cast<std::uint64_t>(s);
        Rng pick(seed ^ 0xA5A5A5A5A5A5A5A5ULL);
        const int n = pick.uniform_int(config.n_min, config.n_max);

        SyntheticPLModel instance = make_synthetic_instance(seed, n, config.prompt_count);

        LlmClientSpec optimizer_spec;
        optimizer_spec.kind = LlmKind::kScriptedMock;
        for (int p = 1; p < config.prompt_count; ++p) {
            optimizer_spec.script.push_back("p" + std::to_string(p));
        }
        LlmClient optimizer_llm(optimizer_spec);

        TrainerConfig trainer_config;
        trainer_config.tau = config.tau;
        trainer_config.convergence_epsilon = config.run_epsilon;
        trainer_config.max_total_iterations = config.run_cap;

        OptimizerConfig optimizer_config;
        optimizer_config.alpha = config.alpha;
        optimizer_config.kappa = config.kappa;

        SyntheticPLEvaluator evaluator(instance);
        const std::vector<TrainQuery> queries{{"synthetic", "synthetic", {}}};

        TrainResult run = train_poqd(trainer_config, optimizer_config, PromptPrefix{"p0"},
                                     queries, evaluator, optimizer_llm, nullptr, nullptr, log);

        SyntheticRunOutcome outcome;
        outcome.seed = seed;
        outcome.accepted_updates = static_cast<int>(run.accepted_updates.size());
        outcome.report = verify_theorem_bound(instance, run.accepted_updates, config.alpha,
                                              config.tau);
        outcome.bound_holds = outcome.report.applicable && outcome.report.all_hold;

        // Per-step linear rate over the run's own gradient phases too.
        const double rate = 1.0 - instance.mu() / (2.0 * instance.smoothness());
        outcome.lemma_holds = outcome.report.lemma_holds;
        outcome.lemma_steps_checked = outcome.report.lemma_steps_checked;
        for (const auto& trace : run.step_loss_traces) {
            int checked = 0;
            if (!lemma_holds_on_trace(trace, rate, &checked)) outcome.lemma_holds = false;
            outcome.lemma_steps_checked += checked;
        }

        if (log != nullptr) {
            log->record("theorem-check", {{"seed", seed},
                                          {"n", n},
                                          {"accepted-updates", outcome.accepted_updates},
                                          {"bound-holds", outcome.bound_holds},
                                          {"lemma-holds", outcome.lemma_holds}});
        }

        if (outcome.bound_holds) ++result.bound_satisfied;
        if (outcome.lemma_holds) ++result.lemma_satisfied;
        result.runs.push_back(std::move(outcome));
    }
    return result;
}

} // namespace poqd
