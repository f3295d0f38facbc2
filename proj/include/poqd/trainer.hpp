#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "poqd/mvr.hpp"
#include "poqd/optimizer.hpp"

namespace poqd {

/// Quadratic loss family L(theta; p) = 0.5 * ||A theta - b(p)||^2 with a
/// full-rank square A and one target vector per prompt id. The smallest /
/// largest eigenvalues of A^T A give the curvature constants mu and L;
/// since A is full rank each prompt's minimum loss is exactly zero, so the
/// gradient-dominance bound holds in its starred form.
struct SyntheticPLModel {
    Eigen::MatrixXd a;
    std::map<std::string, Eigen::VectorXd> targets; ///< b(p) per prompt id
    Eigen::VectorXd theta;
    std::string active_prompt;

    /// Max loss over the prompt table at the construction theta; targets
    /// are chosen so every loss encountered during training stays below it.
    double loss_bound = 0.0;

    int dim() const { return static_cast<int>(theta.size()); }

    const Eigen::VectorXd& target(const std::string& prompt_id) const;
    double loss(const std::string& prompt_id) const;
    double loss() const { return loss(active_prompt); }
    Eigen::VectorXd gradient(const std::string& prompt_id) const;

    double mu() const;         ///< smallest eigenvalue of A^T A
    double smoothness() const; ///< largest eigenvalue of A^T A

    /// Max loss over the prompt table at the current theta.
    double max_loss_over_prompts() const;
};

struct TrainerConfig {
    int tau = 3;         ///< downstream steps between prompt updates
    double eta = 0.0;    ///< learning rate; <= 0 selects 1/L
    double convergence_epsilon = 1e-8; ///< stop when per-step loss decrease falls below
    int max_total_iterations = 100000; ///< safety cap for convergence training
    int outer_loop_cap = 50;           ///< safety cap on prompt updates

    void validate() const;
};

double resolve_eta(const SyntheticPLModel& model, double eta);

/// One exact gradient-descent update on the active prompt's loss.
SyntheticPLModel gd_step(const SyntheticPLModel& model, double eta);

/// losses[0] is the loss before the first step, losses[i] after step i.
struct TrainTrace {
    SyntheticPLModel model;
    std::vector<double> losses;
    bool converged = true; ///< false when the iteration cap cut training short
    int steps = 0;
};

/// Exactly `tau` gradient steps (tau == 0 returns the model unchanged).
TrainTrace train_steps(SyntheticPLModel model, int tau, double eta);

/// Trains until the per-step loss decrease drops below `epsilon` or `cap`
/// steps were taken, and reports which one stopped it.
TrainTrace train_to_convergence(SyntheticPLModel model, double eta, double epsilon, int cap);

// ---------------------------------------------------------------------------
// Downstream evaluators
// ---------------------------------------------------------------------------

/// Softmax cross-entropy over MaxSim scores: per query, the loss is
/// -log of the probability mass the gold documents receive under a
/// temperature-T softmax across the whole corpus. Sensitive to the
/// decomposition, cheap at desk scale, no trainable state.
class RetrievalSurrogateEvaluator final : public DownstreamEvaluator {
public:
    RetrievalSurrogateEvaluator(const MultiVectorIndex& index, Embedder& embedder,
                                double temperature = 1.0);

    bool needs_decompositions() const override { return true; }
    double query_loss(const TrainQuery& query, const std::vector<std::string>& sub_queries,
                      const PromptPrefix& prefix) override;

private:
    const MultiVectorIndex& index_;
    Embedder& embedder_;
    double temperature_;
};

/// Evaluates candidate prompt ids against the synthetic model's current
/// theta. Ignores queries and sub-queries entirely.
class SyntheticPLEvaluator final : public DownstreamEvaluator {
public:
    explicit SyntheticPLEvaluator(SyntheticPLModel model) : model_(std::move(model)) {}

    bool needs_decompositions() const override { return false; }
    double query_loss(const TrainQuery& query, const std::vector<std::string>& sub_queries,
                      const PromptPrefix& prefix) override;

    SyntheticPLModel& model() { return model_; }
    const SyntheticPLModel& model() const { return model_; }

private:
    SyntheticPLModel model_;
};

// ---------------------------------------------------------------------------
// End-to-end training
// ---------------------------------------------------------------------------

struct AcceptedUpdate {
    std::string prompt_old;
    std::string prompt_new;
    Eigen::VectorXd theta_at_acceptance; ///< synthetic runs only
    double loss_old = 0.0;               ///< evaluated loss of prompt_old at acceptance
    double loss_new = 0.0;               ///< evaluated loss of prompt_new at acceptance
};

struct TrainResult {
    PromptPrefix final_prefix;
    SyntheticPLModel final_model; ///< meaningful when has_model
    bool has_model = false;
    std::map<std::string, DecomposedQuery> final_decompositions;

    std::vector<AcceptedUpdate> accepted_updates;
    int outer_iterations = 0;
    int optimizer_proposals = 0;  ///< total optimizer LLM iterations
    int alternating_gd_steps = 0; ///< tau-phase gradient steps
    int full_train_steps = 0;
    bool full_train_converged = true;
    bool outer_cap_hit = false;
    double final_loss = 0.0;

    /// Loss sequences of every fixed-prompt training phase (tau phases and
    /// the final convergence phase), each including the pre-step loss.
    std::vector<std::vector<double>> step_loss_traces;

    /// Proposals plus tau-phase gradient steps: the work spent before the
    /// final convergence phase.
    int optimizer_phase_iterations() const { return optimizer_proposals + alternating_gd_steps; }
};

/// Alternating training: repeat { prompt search; if the prompt did not
/// change, stop; otherwise take tau gradient steps under the new prompt }
/// and finally train to convergence with the last prompt fixed. The
/// gradient phases apply only to evaluators with trainable state (the
/// synthetic testbed); for stateless evaluators the loop degenerates to
/// repeated prompt search.
TrainResult train_poqd(const TrainerConfig& trainer_config, const OptimizerConfig& optimizer_config,
                       const PromptPrefix& p_init, const std::vector<TrainQuery>& queries,
                       DownstreamEvaluator& evaluator, LlmClient& optimizer_llm,
                       LlmClient* decomposer = nullptr, DecompositionCache* cache = nullptr,
                       RunLog* log = nullptr);

// ---------------------------------------------------------------------------
// Convergence-bound verification
// ---------------------------------------------------------------------------

/// alpha - (1 - mu/2L)^tau * M
double theorem_bound_rhs(double alpha, int tau, double mu, double smoothness, double loss_bound);

struct TheoremCheck {
    AcceptedUpdate update;
    double converged_loss_old = 0.0; ///< loss after full training under prompt_old
    double converged_loss_new = 0.0; ///< loss after full training under prompt_new
    double bound_rhs = 0.0;
    bool holds = false;
};

struct TheoremReport {
    bool applicable = false; ///< false when the run accepted no update
    double mu = 0.0;
    double smoothness = 0.0;
    double loss_bound = 0.0;
    double alpha = 0.0;
    int tau = 0;
    bool bound_positive = false; ///< the right-hand side is > 0
    std::vector<TheoremCheck> checks;
    bool all_hold = true;
    bool lemma_holds = true; ///< per-step linear-rate check over verification training
    int lemma_steps_checked = 0;
};

inline constexpr double kTheoremSlack = 1e-9;

/// For every accepted update, retrains copies of the instance from the
/// recorded acceptance state to convergence under the old and new prompt
/// and checks converged_old - converged_new >= alpha - (1-mu/2L)^tau * M
/// within kTheoremSlack. Also validates the per-step linear contraction
/// (1 - mu/2L) of those training runs with eta = 1/L.
TheoremReport verify_theorem_bound(const SyntheticPLModel& instance,
                                   const std::vector<AcceptedUpdate>& updates, double alpha,
                                   int tau, double convergence_epsilon = 1e-12,
                                   int cap = 1000000);

// ---------------------------------------------------------------------------
// Seeded synthetic instances and the multi-seed verification suite
// ---------------------------------------------------------------------------

/// Random full-rank instance: A with singular values in [1, 3], theta
/// drawn from a unit gaussian and `prompt_count` targets "p0", "p1", ...
/// whose initial losses descend from 1.0 with gaps comfortably above the
/// default alpha, so a scripted optimizer always finds an accepted update.
/// loss_bound is the max initial loss (1.0 by construction).
SyntheticPLModel make_synthetic_instance(std::uint64_t seed, int n, int prompt_count = 3);

struct SyntheticSuiteConfig {
    int seeds = 100;
    int n_min = 4;
    int n_max = 16;
    double alpha = 0.02;
    int tau = 3;
    int kappa = 5;
    int prompt_count = 3;
    std::uint64_t base_seed = 1;
    double run_epsilon = 1e-10;  ///< convergence epsilon for the training runs
    int run_cap = 200000;
};

struct SyntheticRunOutcome {
    std::uint64_t seed = 0;
    int accepted_updates = 0;
    bool bound_holds = true;
    bool lemma_holds = true;
    int lemma_steps_checked = 0;
    TheoremReport report;
};

struct SyntheticSuiteResult {
    std::vector<SyntheticRunOutcome> runs;
    int bound_satisfied = 0;
    int lemma_satisfied = 0;
    int total = 0;
    bool all_hold() const { return bound_satisfied == total && lemma_satisfied == total; }
};

/// Runs the full alternating-training pipeline on `seeds` random
/// instances and verifies the convergence bound and the per-step linear
/// rate on each. The per-step check also covers every gradient step of
/// the training runs themselves.
SyntheticSuiteResult run_theorem_suite(const SyntheticSuiteConfig& config, RunLog* log = nullptr);

} // namespace poqd
