#include "physprior/shaping.hpp"

#include "doctest.h"

#include <cmath>
#include <random>

using namespace physprior;
using namespace physprior::shaping;

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

}  // namespace

TEST_CASE("phi_dpp closed forms") {
    const Coord2D probe{0.5, 0.5};
    CHECK(phi_dpp(std::vector<Coord2D>{}, probe, 1.5, 0.5) == 0.0);
    CHECK(phi_dpp(std::vector<Coord2D>{probe}, probe, 1.5, 0.5) == 1.0);
    // two caps at distance 1 from the probe, distance 2 from each other
    const std::vector<Coord2D> two{{0.0, 0.0}, {1.0, 1.0}};
    CHECK(phi_dpp(two, probe, 1.5, 0.5) == doctest::Approx(0.421366).epsilon(1e-6));
    CHECK(phi_dpp(two, probe, 1.5, 0.5) == doctest::Approx(2 * std::exp(-1.5) - 0.5 * std::exp(-3.0)).epsilon(1e-15));

    PotentialSpec wrong;
    wrong.kind = PotentialKind::hpwl;
    wrong.nets = {{1.0, {0, 1}}};
    dpp::PlacementState s(grid(3, 3, 4, 2));
    CHECK_THROWS_AS(phi_dpp(s, wrong), std::invalid_argument);
}

TEST_CASE("delta_phi composes to the full potential") {
    auto inst = grid(5, 4, 7, 6);
    PotentialSpec spec;
    std::mt19937_64 rng(2);
    for (int trial = 0; trial < 50; ++trial) {
        dpp::PlacementState s(inst);
        double running = 0.0;
        while (!s.terminal()) {
            auto acts = dpp::legal_actions(s);
            const int a = acts[rng() % acts.size()];
            const double d = delta_phi(s, a, spec);
            if (s.placed().empty())
                CHECK(d == doctest::Approx(std::exp(-spec.alpha * kernel::manhattan_distance(
                                                         kernel::cell_center(a, 5, 4),
                                                         kernel::cell_center(7, 5, 4)))));
            running += d;
            s = s.with(a);
            CHECK(std::abs(phi_dpp(s, spec) - running) <= 1e-12);
        }
    }
    PotentialSpec zeroed;
    zeroed.terminal_zeroed = true;
    dpp::PlacementState t = dpp::PlacementState(grid(3, 3, 4, 1)).with(0);
    CHECK(phi_dpp(t, zeroed) == 0.0);
    CHECK(phi_dpp(t, PotentialSpec{}) > 0.0);

    PotentialSpec nodisp;
    nodisp.lambda = 0.0;
    dpp::PlacementState u = dpp::PlacementState(inst).with(0).with(19);
    CHECK(delta_phi(u, 6, nodisp) == delta_phi(dpp::PlacementState(inst), 6, nodisp));
}

TEST_CASE("net potentials") {
    PotentialSpec conn;
    conn.kind = PotentialKind::connectivity;
    conn.alpha = 2.0;
    conn.nets = {{0.7, {0, 1}}};
    Placed pins{Coord2D{0.1, 0.2}, std::nullopt};
    CHECK(phi_connectivity(pins, conn) == 0.0);
    pins[1] = Coord2D{0.4, 0.6};
    CHECK(phi_connectivity(pins, conn) == doctest::Approx(0.7 * std::exp(-2.0 * 0.7)));

    PotentialSpec wl = conn;
    wl.kind = PotentialKind::hpwl;
    wl.nets = {{1.0, {0, 1}}};
    CHECK(phi_hpwl(pins, wl) == doctest::Approx(-0.7).epsilon(1e-15));
    wl.nets = {{1.0, {0, 1, 2}}};
    Placed tri{Coord2D{0, 0}, Coord2D{1, 0}, Coord2D{0, 1}};
    CHECK(phi_hpwl(tri, wl) == -2.0);
    Placed single{Coord2D{0.3, 0.3}, std::nullopt, std::nullopt};
    CHECK(phi_hpwl(single, wl) == 0.0);

    // brute-force pair loop over random nets
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Placed many;
    for (int i = 0; i < 12; ++i)
        many.push_back(u(rng) < 0.8 ? std::optional<Coord2D>(Coord2D{u(rng), u(rng)}) : std::nullopt);
    PotentialSpec five = conn;
    five.nets.clear();
    for (int e = 0; e < 5; ++e) {
        Net n{0.5 + u(rng), {}};
        for (int i = 0; i < 12; ++i)
            if (u(rng) < 0.4) n.pins.push_back(i);
        five.nets.push_back(n);
    }
    double brute = 0.0;
    for (const auto& n : five.nets)
        for (size_t i = 0; i < n.pins.size(); ++i)
            for (size_t j = 0; j < n.pins.size(); ++j)
                if (i < j && many[n.pins[i]] && many[n.pins[j]])
                    brute += n.weight * std::exp(-five.alpha * kernel::manhattan_distance(*many[n.pins[i]], *many[n.pins[j]]));
    CHECK(std::abs(phi_connectivity(many, five) - brute) <= 1e-12);
}

TEST_CASE("connectivity and wirelength agree to second order") {
    PotentialSpec spec;
    spec.kind = PotentialKind::connectivity;
    spec.alpha = 0.1;
    spec.nets = {{1.0, {0, 1}}};
    Placed pins{Coord2D{0.2, 0.2}, Coord2D{0.5, 0.4}};
    const auto g = conn_hpwl_gap(pins, spec);
    CHECK(g.gap == doctest::Approx(std::exp(-0.05) - 1 + 0.05).epsilon(1e-9));
    CHECK(g.gap == doctest::Approx(0.00123).epsilon(0.01));
    CHECK(g.bound == doctest::Approx(0.00125));
    CHECK(g.gap <= g.bound);

    Placed same{Coord2D{0.3, 0.3}, Coord2D{0.3, 0.3}};
    const auto z = conn_hpwl_gap(same, spec);
    CHECK(z.gap == 0.0);
    CHECK(z.bound == 0.0);

    spec.nets = {{1.0, {0, 1, 0}}};
    CHECK_THROWS_AS(conn_hpwl_gap(pins, spec), std::invalid_argument);
}

TEST_CASE("beta schedule") {
    const BetaSchedule s{1.0, 0.0, 100};
    CHECK(beta_at(s, 0) == 1.0);
    CHECK(beta_at(s, 100) == 0.0);
    CHECK(beta_at(s, 50) == 0.5);
    CHECK(beta_at(s, 500) == 0.0);
    const BetaSchedule odd{0.8, 0.1, 7};
    double prev = INFINITY;
    for (int t = 0; t <= 10; ++t) {
        CHECK(beta_at(odd, t) <= prev);
        prev = beta_at(odd, t);
    }
    CHECK_THROWS_AS(beta_at(BetaSchedule{0.1, 0.5, 10}, 1), std::invalid_argument);
}

TEST_CASE("shape_reward") {
    CHECK(shape_reward(0.3, 5.0, 7.0, 0.9, 0.0) == 0.3);
    CHECK(shape_reward(0.3, 2.0, 2.0, 1.0, 0.7) == 0.3);
    CHECK(shape_reward(0.0, 1.0, 2.0, 0.5, 2.0) == 0.0);
}

TEST_CASE("telescoping residual") {
    std::vector<double> zero(26, 0.0);
    CHECK(telescoping_residual(zero, 0.9) == 0.0);
    std::mt19937_64 rng(4);
    std::normal_distribution<double> n;
    for (double gamma : {0.9, 0.99, 1.0}) {
        for (int trial = 0; trial < 100; ++trial) {
            std::vector<double> phi(26);
            for (auto& p : phi) p = n(rng);
            CHECK(std::abs(telescoping_residual(phi, gamma)) <= 1e-12);
        }
    }
    dpp::Trajectory traj;
    traj.states.assign(3, dpp::PlacementState(grid(3, 3, 4, 2)));
    traj.actions = {0, 1};
    CHECK_THROWS_AS(telescoping_residual(traj, std::vector<double>(2), 0.9), std::invalid_argument);
}

TEST_CASE("shaped Q identity") {
    auto inst = grid(3, 3, 4, 2);
    dpp::RewardCache cache(inst);
    auto none = [](const std::vector<int>&) { return 0.0; };
    const auto z = shaped_q_check(*inst, none, true, 0.9, 1.0, &cache);
    CHECK(z.max_deviation == 0.0);
    CHECK(z.greedy_identical);

    PotentialSpec spec;
    spec.terminal_zeroed = true;
    for (double gamma : {0.9, 1.0}) {
        const auto q = shaped_q_check(*inst, spec, gamma, 1.0, &cache);
        CHECK(q.max_deviation <= 1e-10);
        CHECK(q.greedy_identical);
        CHECK(q.states == 1 + 8);
    }

    auto big = grid(4, 4, 5, 2);
    const auto q4 = shaped_q_check(*big, spec, 0.9);
    CHECK(q4.max_deviation <= 1e-10);
    CHECK(q4.greedy_identical);

    auto huge = grid(8, 8, 0, 4);
    CHECK_THROWS_AS(shaped_q_check(*huge, spec, 0.9), std::invalid_argument);
}
