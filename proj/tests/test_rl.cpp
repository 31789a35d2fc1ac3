#include "physprior/rl.hpp"

#include "doctest.h"

#include <cmath>

using namespace physprior;
using namespace physprior::rl;

namespace {

std::shared_ptr<const dpp::DppInstance> grid(int w, int h, int probe, int k) {
    auto inst = std::make_shared<dpp::DppInstance>();
    inst->width = w;
    inst->height = h;
    inst->mesh.width = w;
    inst->mesh.height = h;
    inst->probe = probe;
    inst->k_caps = k;
    inst->validate();
    return inst;
}

std::vector<dpp::Trajectory> batch_of(const Policy& p, const std::shared_ptr<const dpp::DppInstance>& inst,
                                      int n, std::uint64_t seed, dpp::RewardCache& cache) {
    std::vector<dpp::Trajectory> out;
    for (int i = 0; i < n; ++i) {
        dpp::Rng rng(dpp::Rng::split(seed, i));
        out.push_back(sample_trajectory(p, inst, rng, nullptr, 0.0, 1.0, &cache));
    }
    return out;
}

}  // namespace

TEST_CASE("masked softmax") {
    auto inst = grid(3, 3, 4, 2);
    Policy p = Policy::uniform(9);
    p.logits(0) = 100.0;
    const dpp::PlacementState s = dpp::PlacementState(inst).with(0);
    const auto pi = action_probabilities(p, s);
    REQUIRE(pi.size() == 7);
    CHECK(pi.sum() == doctest::Approx(1.0));
    CHECK(pi.maxCoeff() == doctest::Approx(1.0 / 7));
}

TEST_CASE("sampling is reproducible and uniform under zero logits") {
    auto inst = grid(3, 3, 4, 1);
    dpp::RewardCache cache(inst);
    const Policy p = Policy::uniform(9);
    dpp::Rng a(3), b(3);
    for (int i = 0; i < 20; ++i)
        CHECK(sample_trajectory(p, inst, a, nullptr, 0, 1, &cache).actions ==
              sample_trajectory(p, inst, b, nullptr, 0, 1, &cache).actions);

    std::vector<int> counts(9, 0);
    dpp::Rng rng(99);
    const int n = 10000;
    for (int i = 0; i < n; ++i) ++counts[sample_trajectory(p, inst, rng, nullptr, 0, 1, &cache).actions[0]];
    CHECK(counts[4] == 0);
    const double sd = std::sqrt(n * (1.0 / 8) * (7.0 / 8));
    for (int c = 0; c < 9; ++c)
        if (c != 4) CHECK(std::abs(counts[c] - n / 8.0) < 4 * sd);
}

TEST_CASE("trajectory shape and shaping with zero beta") {
    auto inst = grid(4, 4, 5, 3);
    dpp::RewardCache cache(inst);
    const Policy p = Policy::uniform(16);
    ShapingConfig sc;
    dpp::Rng a(1), b(1);
    const auto plain = sample_trajectory(p, inst, a, nullptr, 0.0, 0.9, &cache);
    const auto shaped = sample_trajectory(p, inst, b, &sc, 0.0, 0.9, &cache);
    CHECK(!plain.shaped_rewards);
    REQUIRE(shaped.shaped_rewards);
    CHECK(*shaped.shaped_rewards == shaped.rewards);
    CHECK(plain.states.size() == 4);
    CHECK(plain.rewards[0] == 0.0);
    CHECK(plain.rewards[1] == 0.0);
    CHECK(plain.rewards[0] + plain.rewards[1] + plain.rewards[2] == plain.terminal_reward);
    CHECK(plain.terminal_reward == cache(plain.states.back().placed_set()));

    dpp::Rng c(1);
    const auto b1 = sample_trajectory(p, inst, c, &sc, 0.8, 1.0, &cache);
    double diff = 0.0;
    for (size_t t = 0; t < 3; ++t) diff += (*b1.shaped_rewards)[t] - b1.rewards[t];
    const double expect = 0.8 * (shaping::phi_dpp(b1.states.back(), sc.potential) -
                                 shaping::phi_dpp(b1.states.front(), sc.potential));
    CHECK(diff == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("equal returns give a zero update") {
    auto inst = grid(3, 3, 4, 1);
    dpp::RewardCache cache(inst);
    Policy p = Policy::uniform(9);
    p.logits(0) = 5.0;
    std::vector<dpp::Trajectory> batch;
    for (int i = 0; i < 8; ++i) {
        dpp::Trajectory t;
        t.states = {dpp::PlacementState(inst), dpp::PlacementState(inst).with(i < 4 ? 0 : 1)};
        t.actions = {i < 4 ? 0 : 1};
        t.rewards = {1.25};
        t.terminal_reward = 1.25;
        batch.push_back(t);
    }
    ReinforceConfig cfg;
    BaselineState bl;
    const Policy q = reinforce_update(p, batch, cfg, bl);
    CHECK((q.logits - p.logits).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("positive advantage raises the taken logits") {
    auto inst = grid(3, 3, 4, 2);
    dpp::RewardCache cache(inst);
    const Policy p = Policy::uniform(9);
    auto batch = batch_of(p, inst, 1, 5, cache);
    const auto& acts = batch[0].actions;
    const std::vector<std::vector<double>> adv{{1.0, 1.0}};
    const auto g = surrogate_gradient(p, batch, adv);
    for (int a : acts) CHECK(g(a) > 0.0);
    ReinforceConfig cfg;
    cfg.baseline = Baseline::none;
    BaselineState bl;
    const Policy q = reinforce_update(p, batch, cfg, bl);
    for (int a : acts) CHECK(q.logits(a) > p.logits(a));
}

TEST_CASE("policy gradient matches finite differences") {
    auto inst = grid(4, 4, 5, 3);
    dpp::RewardCache cache(inst);
    Policy p = Policy::uniform(16);
    dpp::Rng init(4);
    for (int i = 0; i < 16; ++i) p.logits(i) = init.uniform(-1.0, 1.0);
    const auto batch = batch_of(p, inst, 6, 21, cache);
    ReinforceConfig cfg;
    BaselineState bl;
    bl.values = {0.5, 0.3, 0.1};
    bl.initialized = true;
    const auto adv = advantages(batch, cfg, bl);
    const Eigen::VectorXd g = surrogate_gradient(p, batch, adv);
    Eigen::VectorXd fd(16);
    const double h = 1e-5;
    for (int i = 0; i < 16; ++i) {
        Policy a = p, b = p;
        a.logits(i) += h;
        b.logits(i) -= h;
        fd(i) = (surrogate(a, batch, adv) - surrogate(b, batch, adv)) / (2 * h);
    }
    CHECK((g - fd).cwiseAbs().maxCoeff() / g.cwiseAbs().maxCoeff() <= 1e-5);
}

TEST_CASE("evaluation") {
    auto inst = grid(3, 3, 4, 1);
    dpp::RewardCache cache(inst);
    Policy onehot = Policy::uniform(9);
    onehot.logits(1) = 1000.0;
    CHECK(evaluate(onehot, inst, 50, 3, &cache) == doctest::Approx(cache({1})).epsilon(1e-14));
    CHECK(evaluate(onehot, inst, 50, 3, &cache) == evaluate(onehot, inst, 50, 4, &cache));

    const auto opt = dpp::exhaustive_optimum(*inst, &cache);
    CHECK(evaluate(Policy::uniform(9), inst, 200, 3, &cache) <= opt.reward);

    // standard error of the uniform-policy estimate shrinks like 1/sqrt(n)
    auto spread = [&](int n) {
        double m = 0.0, m2 = 0.0;
        for (int r = 0; r < 30; ++r) {
            const double e = evaluate(Policy::uniform(9), inst, n, 500 + r, &cache);
            m += e;
            m2 += e * e;
        }
        m /= 30;
        return std::sqrt(m2 / 30 - m * m);
    };
    const double s10 = spread(10), s100 = spread(100), s1000 = spread(1000);
    CHECK(s100 < s10);
    CHECK(s1000 < s100);
    CHECK(s10 / s1000 == doctest::Approx(10.0).epsilon(0.5));
}

TEST_CASE("training log") {
    auto inst = grid(3, 3, 4, 2);
    dpp::RewardCache cache(inst);
    ReinforceConfig cfg;
    cfg.episodes = 0;
    CHECK(train(inst, cfg, &cache).entries.size() == 1);

    cfg.episodes = 200;
    cfg.eval_interval = 50;
    cfg.eval_rollouts = 16;
    cfg.seed = 12;
    const auto a = train(inst, cfg, &cache);
    const auto b = train(inst, cfg, &cache);
    REQUIRE(a.entries.size() == 5);
    for (size_t i = 0; i < a.entries.size(); ++i) {
        CHECK(a.entries[i].episode == static_cast<int>(50 * i));
        CHECK(a.entries[i].mean_return == b.entries[i].mean_return);
        CHECK(a.entries[i].mean_shaped_return == a.entries[i].mean_return);
    }
    CHECK(a.policy.logits == b.policy.logits);

    // beta identically zero: same log as the unshaped run
    ReinforceConfig zero = cfg;
    zero.shaping = ShapingConfig{shaping::PotentialSpec{}, shaping::BetaSchedule{0.0, 0.0, 200}};
    const auto z = train(inst, zero, &cache);
    for (size_t i = 0; i < a.entries.size(); ++i) {
        CHECK(z.entries[i].mean_return == a.entries[i].mean_return);
        CHECK(z.entries[i].mean_shaped_return == a.entries[i].mean_shaped_return);
    }

    const auto opt = dpp::exhaustive_optimum(*inst, &cache);
    for (const auto& e : a.entries) CHECK(e.mean_return <= opt.reward + 1e-9);
}
