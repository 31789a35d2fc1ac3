#pragma once

// REINFORCE with a tabular masked-softmax policy on the placement MDP.

#include "physprior/dpp.hpp"
#include "physprior/shaping.hpp"

#include <Eigen/Core>

#include <optional>
#include <vector>

namespace physprior::rl {

/// One logit per cell; probabilities renormalized over legal actions.
struct Policy {
    Eigen::VectorXd logits;

    static Policy uniform(int cells) { return {Eigen::VectorXd::Zero(cells)}; }
};

/// pi(. | s) over legal_actions(s), in that order.
Eigen::VectorXd action_probabilities(const Policy& p, const dpp::PlacementState& s);

struct ShapingConfig {
    shaping::PotentialSpec potential;
    shaping::BetaSchedule schedule;
};

enum class Baseline { none, running_mean };

struct ReinforceConfig {
    int episodes = 1000;
    int batch_size = 16;
    double learning_rate = 0.2;
    double gamma = 1.0;
    Baseline baseline = Baseline::running_mean;
    double baseline_decay = 0.99;
    std::optional<ShapingConfig> shaping;
    std::uint64_t seed = 0;
    int eval_interval = 100;
    int eval_rollouts = 64;

    void validate() const;
};

/// Rolls out one episode. Shaped rewards are filled only when `shaping` is set.
dpp::Trajectory sample_trajectory(const Policy& p, const std::shared_ptr<const dpp::DppInstance>& inst,
                                  dpp::Rng& rng, const ShapingConfig* shaping = nullptr,
                                  double beta = 0.0, double gamma = 1.0,
                                  dpp::RewardCache* cache = nullptr);

/// Per-timestep return-to-go, from shaped rewards when present.
std::vector<double> returns_to_go(const dpp::Trajectory& traj, double gamma);

/// Running per-timestep baseline. Starts from the first batch mean.
struct BaselineState {
    std::vector<double> values;
    bool initialized = false;
};

/// Advantages A[b][t] = G_t - baseline_t for one batch; updates the baseline
/// afterwards (first batch: initialized to the batch mean before use).
std::vector<std::vector<double>> advantages(const std::vector<dpp::Trajectory>& batch,
                                            const ReinforceConfig& cfg, BaselineState& baseline);

/// (1 / B) sum_b sum_t A[b][t] log pi(a_t | s_t) with the advantages held fixed.
double surrogate(const Policy& p, const std::vector<dpp::Trajectory>& batch,
                 const std::vector<std::vector<double>>& adv);

/// Analytic gradient of `surrogate` with respect to the logits.
Eigen::VectorXd surrogate_gradient(const Policy& p, const std::vector<dpp::Trajectory>& batch,
                                   const std::vector<std::vector<double>>& adv);

/// One gradient-ascent step on the surrogate.
Policy reinforce_update(const Policy& p, const std::vector<dpp::Trajectory>& batch,
                        const ReinforceConfig& cfg, BaselineState& baseline);

/// Mean unshaped terminal reward over n stochastic rollouts.
double evaluate(const Policy& p, const std::shared_ptr<const dpp::DppInstance>& inst, int n_rollouts,
                std::uint64_t seed, dpp::RewardCache* cache = nullptr);

struct LogEntry {
    int episode;
    double mean_return;         // unshaped
    double mean_shaped_return;  // undiscounted sum of shaped rewards; equals mean_return without shaping
    double beta;
    double seconds;
};

struct TrainingLog {
    std::vector<LogEntry> entries;
    Policy policy;
};

/// Evaluates at episode 0 and after every eval_interval episodes, so the log
/// has episodes / eval_interval + 1 entries.
TrainingLog train(const std::shared_ptr<const dpp::DppInstance>& inst, const ReinforceConfig& cfg,
                  dpp::RewardCache* cache = nullptr);

/// Trapezoid area under mean_return over episodes, divided by the episode span.
double area_under_curve(const TrainingLog& log);

}  // namespace physprior::rl
