#include "physprior/rl.hpp"

#include <chrono>
#include <cmath>
#include <stdexcept>

namespace physprior::rl {

namespace {

constexpr std::uint64_t kEvalStream = 0xE7A1'5EED'0000'0001ull;

struct Rollouts {
    double mean_return;
    double mean_shaped;
};

}  // namespace

void ReinforceConfig::validate() const {
    if (episodes < 0) throw std::invalid_argument("rl: episodes must be non-negative");
    if (batch_size < 1) throw std::invalid_argument("rl: batch_size must be >= 1");
    if (!(learning_rate > 0.0) || !std::isfinite(learning_rate))
        throw std::invalid_argument("rl: learning_rate must be positive");
    if (!(gamma > 0.0 && gamma <= 1.0)) throw std::invalid_argument("rl: gamma must lie in (0, 1]");
    if (!(baseline_decay >= 0.0 && baseline_decay < 1.0))
        throw std::invalid_argument("rl: baseline_decay must lie in [0, 1)");
    if (eval_interval < 1 || eval_rollouts < 1)
        throw std::invalid_argument("rl: eval_interval and eval_rollouts must be >= 1");
    if (shaping) {
        shaping->potential.validate();
        shaping->schedule.validate();
        if (shaping->potential.kind != shaping::PotentialKind::dpp)
            throw std::invalid_argument("rl: only the dpp potential applies to placement states");
    }
}

Eigen::VectorXd action_probabilities(const Policy& p, const dpp::PlacementState& s) {
    const auto legal = dpp::legal_actions(s);
    Eigen::VectorXd z(legal.size());
    for (size_t i = 0; i < legal.size(); ++i) z(i) = p.logits(legal[i]);
    z.array() -= z.maxCoeff();
    z = z.array().exp();
    return z / z.sum();
}

dpp::Trajectory sample_trajectory(const Policy& p, const std::shared_ptr<const dpp::DppInstance>& inst,
                                  dpp::Rng& rng, const ShapingConfig* shaping, double beta, double gamma,
                                  dpp::RewardCache* cache) {
    if (p.logits.size() != inst->cells()) throw std::invalid_argument("rl: policy size does not match grid");
    dpp::Trajectory traj;
    dpp::PlacementState s(inst);
    traj.states.push_back(s);
    if (shaping) traj.shaped_rewards.emplace();
    double phi_s = shaping ? shaping::phi_dpp(s, shaping->potential) : 0.0;
    while (!s.terminal()) {
        const auto legal = dpp::legal_actions(s);
        const Eigen::VectorXd pi = action_probabilities(p, s);
        const double u = rng.uniform();
        size_t pick = legal.size() - 1;
        double acc = 0.0;
        for (size_t i = 0; i < legal.size(); ++i) {
            acc += pi(i);
            if (u < acc) {
                pick = i;
                break;
            }
        }
        auto res = dpp::step(s, legal[pick], cache);
        traj.actions.push_back(legal[pick]);
        traj.rewards.push_back(res.reward);
        if (shaping) {
            const double phi_next = shaping::phi_dpp(res.next, shaping->potential);
            traj.shaped_rewards->push_back(shaping::shape_reward(res.reward, phi_s, phi_next, gamma, beta));
            phi_s = phi_next;
        }
        if (res.terminal) traj.terminal_reward = res.reward;
        s = std::move(res.next);
        traj.states.push_back(s);
    }
    return traj;
}

std::vector<double> returns_to_go(const dpp::Trajectory& traj, double gamma) {
    const auto& r = traj.shaped_rewards ? *traj.shaped_rewards : traj.rewards;
    std::vector<double> g(r.size());
    double acc = 0.0;
    for (size_t t = r.size(); t-- > 0;) {
        acc = r[t] + gamma * acc;
        g[t] = acc;
    }
    return g;
}

std::vector<std::vector<double>> advantages(const std::vector<dpp::Trajectory>& batch,
                                            const ReinforceConfig& cfg, BaselineState& baseline) {
    if (batch.empty()) throw std::invalid_argument("rl: empty batch");
    std::vector<std::vector<double>> adv;
    for (const auto& traj : batch) adv.push_back(returns_to_go(traj, cfg.gamma));
    if (cfg.baseline == Baseline::none) return adv;

    const size_t T = adv.front().size();
    std::vector<double> mean(T, 0.0);
    for (const auto& g : adv) {
        if (g.size() != T) throw std::invalid_argument("rl: trajectories differ in length");
        for (size_t t = 0; t < T; ++t) mean[t] += g[t] / batch.size();
    }
    if (!baseline.initialized) {
        baseline.values = mean;
        baseline.initialized = true;
    }
    for (auto& g : adv)
        for (size_t t = 0; t < T; ++t) g[t] -= baseline.values[t];
    for (size_t t = 0; t < T; ++t)
        baseline.values[t] = cfg.baseline_decay * baseline.values[t] + (1.0 - cfg.baseline_decay) * mean[t];
    return adv;
}

double surrogate(const Policy& p, const std::vector<dpp::Trajectory>& batch,
                 const std::vector<std::vector<double>>& adv) {
    double total = 0.0;
    for (size_t b = 0; b < batch.size(); ++b) {
        const auto& traj = batch[b];
        for (size_t t = 0; t < traj.actions.size(); ++t) {
            const auto legal = dpp::legal_actions(traj.states[t]);
            double m = -INFINITY;
            for (int a : legal) m = std::max(m, p.logits(a));
            double z = 0.0;
            for (int a : legal) z += std::exp(p.logits(a) - m);
            total += adv[b][t] * (p.logits(traj.actions[t]) - m - std::log(z));
        }
    }
    return total / batch.size();
}

Eigen::VectorXd surrogate_gradient(const Policy& p, const std::vector<dpp::Trajectory>& batch,
                                   const std::vector<std::vector<double>>& adv) {
    Eigen::VectorXd g = Eigen::VectorXd::Zero(p.logits.size());
    for (size_t b = 0; b < batch.size(); ++b) {
        const auto& traj = batch[b];
        for (size_t t = 0; t < traj.actions.size(); ++t) {
            const double a_t = adv[b][t];
            if (a_t == 0.0) continue;
            const auto legal = dpp::legal_actions(traj.states[t]);
            const Eigen::VectorXd pi = action_probabilities(p, traj.states[t]);
            for (size_t i = 0; i < legal.size(); ++i) g(legal[i]) -= a_t * pi(i);
            g(traj.actions[t]) += a_t;
        }
    }
    return g / static_cast<double>(batch.size());
}

Policy reinforce_update(const Policy& p, const std::vector<dpp::Trajectory>& batch,
                        const ReinforceConfig& cfg, BaselineState& baseline) {
    const auto adv = advantages(batch, cfg, baseline);
    Policy out = p;
    out.logits += cfg.learning_rate * surrogate_gradient(p, batch, adv);
    return out;
}

namespace {

Rollouts run_rollouts(const Policy& p, const std::shared_ptr<const dpp::DppInstance>& inst, int n,
                      std::uint64_t seed, const ShapingConfig* shaping, double beta, double gamma,
                      dpp::RewardCache* cache) {
    if (n < 1) throw std::invalid_argument("rl: n_rollouts must be >= 1");
    double sum = 0.0, shaped = 0.0;
    for (int i = 0; i < n; ++i) {
        dpp::Rng rng(dpp::Rng::split(seed, i));
        const auto traj = sample_trajectory(p, inst, rng, shaping, beta, gamma, cache);
        sum += traj.terminal_reward;
        if (traj.shaped_rewards)
            for (double r : *traj.shaped_rewards) shaped += r;
        else
            shaped += traj.terminal_reward;
    }
    return {sum / n, shaped / n};
}

}  // namespace

double evaluate(const Policy& p, const std::shared_ptr<const dpp::DppInstance>& inst, int n_rollouts,
                std::uint64_t seed, dpp::RewardCache* cache) {
    return run_rollouts(p, inst, n_rollouts, seed, nullptr, 0.0, 1.0, cache).mean_return;
}

TrainingLog train(const std::shared_ptr<const dpp::DppInstance>& inst, const ReinforceConfig& cfg,
                  dpp::RewardCache* cache) {
    cfg.validate();
    const auto start = std::chrono::steady_clock::now();
    const ShapingConfig* shaping = cfg.shaping ? &*cfg.shaping : nullptr;
    auto beta_for = [&](long episode) { return shaping ? shaping::beta_at(shaping->schedule, episode) : 0.0; };
    const std::uint64_t eval_seed = dpp::Rng::split(cfg.seed, kEvalStream);

    TrainingLog log;
    log.policy = Policy::uniform(inst->cells());
    auto record = [&](int episode) {
        const int k = static_cast<int>(log.entries.size());
        const double beta = beta_for(episode);
        const auto r = run_rollouts(log.policy, inst, cfg.eval_rollouts, dpp::Rng::split(eval_seed, k),
                                    shaping, beta, cfg.gamma, cache);
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        log.entries.push_back({episode, r.mean_return, r.mean_shaped, beta, secs});
    };

    record(0);
    BaselineState baseline;
    int episode = 0;
    while (episode < cfg.episodes) {
        const int nb = std::min(cfg.batch_size, cfg.episodes - episode);
        std::vector<dpp::Trajectory> batch;
        batch.reserve(nb);
        for (int i = 0; i < nb; ++i) {
            dpp::Rng rng(dpp::Rng::split(cfg.seed, episode + i));
            batch.push_back(sample_trajectory(log.policy, inst, rng, shaping, beta_for(episode + i),
                                              cfg.gamma, cache));
        }
        log.policy = reinforce_update(log.policy, batch, cfg, baseline);
        const int before = episode;
        episode += nb;
        for (int m = (before / cfg.eval_interval + 1) * cfg.eval_interval; m <= episode; m += cfg.eval_interval)
            record(m);
    }
    return log;
}

double area_under_curve(const TrainingLog& log) {
    const auto& e = log.entries;
    if (e.empty()) throw std::invalid_argument("rl: empty log");
    if (e.size() == 1) return e.front().mean_return;
    double area = 0.0;
    for (size_t i = 1; i < e.size(); ++i)
        area += 0.5 * (e[i].mean_return + e[i - 1].mean_return) * (e[i].episode - e[i - 1].episode);
    return area / (e.back().episode - e.front().episode);
}

}  // namespace physprior::rl
