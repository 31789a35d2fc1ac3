#include "physprior/kernel.hpp"

#include "doctest.h"

#include <cmath>
#include <limits>
#include <random>
#include <vector>

using namespace physprior::kernel;

namespace {
const DecayRates kZeroRate{std::numeric_limits<double>::denorm_min(),
                           std::numeric_limits<double>::denorm_min()};
}

TEST_CASE("coordinates outside the unit square are rejected") {
    CHECK_THROWS_AS(Coord2D(-0.01, 0.5), std::invalid_argument);
    CHECK_THROWS_AS(Coord2D(0.5, 1.0001), std::invalid_argument);
    CHECK_THROWS_AS(Coord2D(std::nan(""), 0.5), std::invalid_argument);
    CHECK_NOTHROW(Coord2D(0.0, 1.0));
}

TEST_CASE("cell centers") {
    const auto c = cell_center(0, 0, 4, 2);
    CHECK(c.x() == doctest::Approx(0.125));
    CHECK(c.y() == doctest::Approx(0.25));
    const auto last = cell_center(7, 4, 2);
    CHECK(last.x() == doctest::Approx(0.875));
    CHECK(last.y() == doctest::Approx(0.75));
    CHECK_THROWS(cell_center(4, 0, 4, 2));
}

TEST_CASE("manhattan distance") {
    CHECK(manhattan_distance({0.3, 0.7}, {0.3, 0.7}) == 0.0);
    CHECK(manhattan_distance({0, 0}, {1, 1}) == 2.0);
    CHECK(manhattan_distance({0.2, 0.5}, {0.7, 0.1}) == doctest::Approx(0.9).epsilon(1e-15));

    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int i = 0; i < 1000; ++i) {
        const Coord2D a{u(rng), u(rng)}, b{u(rng), u(rng)}, c{u(rng), u(rng)};
        CHECK(manhattan_distance(a, b) == manhattan_distance(b, a));
        CHECK(manhattan_distance(a, c) <= manhattan_distance(a, b) + manhattan_distance(b, c) + 1e-15);
    }
}

TEST_CASE("decay weight") {
    const DecayRates r{1.5, 1.5};
    CHECK(decay_weight({0.4, 0.4}, {0.4, 0.4}, r) == 1.0);
    CHECK(decay_weight({0, 0}, {1, 1}, kZeroRate) == 1.0);
    CHECK(decay_weight({0, 0}, {1, 0}, r) == doctest::Approx(0.22313016014842982).epsilon(1e-15));

    SUBCASE("separable into per-axis factors") {
        const DecayRates aniso{1.3, 0.4};
        const Coord2D a{0.1, 0.9}, b{0.65, 0.2};
        const double wx = decay_weight(a, {b.x(), a.y()}, aniso);
        const double wy = decay_weight(a, {a.x(), b.y()}, aniso);
        CHECK(decay_weight(a, b, aniso) == doctest::Approx(wx * wy).epsilon(1e-15));
    }
    SUBCASE("strictly decreasing along each axis") {
        const DecayRates aniso{1.3, 0.4};
        double prev_x = 2.0, prev_y = 2.0;
        for (int i = 0; i <= 10; ++i) {
            const double t = 0.1 * i;
            const double wx = decay_weight({0, 0}, {t, 0}, aniso);
            const double wy = decay_weight({0, 0}, {0, t}, aniso);
            CHECK(wx < prev_x);
            CHECK(wy < prev_y);
            prev_x = wx;
            prev_y = wy;
        }
    }
}

TEST_CASE("reparameterization") {
    CHECK(reparameterize({0.0, 0.0, 1.2, 1.8}).alpha_x() == doctest::Approx(1.5).epsilon(1e-15));
    CHECK(reparameterize({2.0, 0.0, 1.2, 1.8}).alpha_x() ==
          doctest::Approx(1.7284782467867292).epsilon(1e-14));

    const auto low = reparameterize({-1e6, 1e6, 1.2, 1.8});
    CHECK(low.alpha_x() > 1.2);
    CHECK(low.alpha_x() == doctest::Approx(1.2));
    CHECK(low.alpha_y() < 1.8);

    CHECK_THROWS_AS(reparameterize({0, 0, 1.8, 1.2}), std::invalid_argument);
    CHECK_THROWS_AS(reparameterize({0, 0, 1.2, std::numeric_limits<double>::infinity()}),
                    std::invalid_argument);

    SUBCASE("range and monotonicity over a million draws") {
        std::mt19937_64 rng(11);
        std::normal_distribution<double> raw(0.0, 20.0);
        bool inside = true;
        for (int i = 0; i < 1'000'000; ++i) {
            const double a = reparameterize({raw(rng), 0.0, 1.2, 1.8}).alpha_x();
            inside = inside && a > 1.2 && a < 1.8;
        }
        CHECK(inside);
        double prev = 0.0;
        for (double z = -10.0; z <= 10.0; z += 0.25) {
            const double a = reparameterize({z, 0.0, 1.2, 1.8}).alpha_x();
            CHECK(a > prev);
            prev = a;
        }
    }
    SUBCASE("derivative") {
        const double s = 1.0 / (1.0 + std::exp(-0.7));
        CHECK(reparameterize_derivative(0.7, 1.2, 1.8) == doctest::Approx(0.6 * s * (1 - s)));
        CHECK(reparameterize_derivative(30.0, 1.2, 1.8) < 1e-12);
    }
}

TEST_CASE("bias factors") {
    SUBCASE("single token at the origin") {
        const std::vector<Coord2D> p{{0, 0}};
        const auto [dq, dk] = bias_factors(p, {1.5, 1.5});
        CHECK(dq[0] == 1.0);
        CHECK(dk[0] == 1.0);
    }
    SUBCASE("zero-rate limit") {
        const std::vector<Coord2D> p{{0.1, 0.2}, {0.9, 0.4}};
        const auto [dq, dk] = bias_factors(p, kZeroRate);
        CHECK(dq.isOnes());
        CHECK(dk.isOnes());
    }
    SUBCASE("two tokens along x") {
        const std::vector<Coord2D> p{{0, 0}, {1, 0}};
        const auto [dq, dk] = bias_factors(p, {1.5, std::numeric_limits<double>::denorm_min()});
        CHECK(dq[1] == doctest::Approx(std::exp(-1.5)));
        CHECK(dk[1] == doctest::Approx(std::exp(1.5)));
        CHECK(dq[0] * dk[1] == doctest::Approx(std::exp(1.5)));
    }
    SUBCASE("rank-1 identity and bounds") {
        std::mt19937_64 rng(5);
        std::uniform_real_distribution<double> u(0.0, 1.0);
        std::vector<Coord2D> p;
        for (int i = 0; i < 40; ++i) {
            p.emplace_back(u(rng), u(rng));
        }
        const DecayRates r{1.7, 1.3};
        const auto [dq, dk] = bias_factors(p, r);
        for (size_t i = 0; i < p.size(); ++i) {
            CHECK(dq[i] >= std::exp(-2 * 1.8));
            CHECK(dk[i] <= std::exp(2 * 1.8));
            for (size_t j = 0; j < p.size(); ++j) {
                const double expect = std::exp(1.7 * (p[j].x() - p[i].x()) + 1.3 * (p[j].y() - p[i].y()));
                CHECK(dq[i] * dk[j] == doctest::Approx(expect).epsilon(1e-14));
            }
        }
    }
}
