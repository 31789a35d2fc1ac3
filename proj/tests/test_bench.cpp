#include "physprior/bench.hpp"

#include "doctest.h"

#include <cmath>

using namespace physprior::bench;

namespace {

std::vector<BenchRecord> synthetic(Mechanism m, double c, double power) {
    std::vector<BenchRecord> out;
    for (long L : {512L, 1024L, 2048L, 4096L, 8192L})
        out.push_back({m, L, 64, 9, c * std::pow(static_cast<double>(L), power), 0.0, 0.0});
    return out;
}

}  // namespace

TEST_CASE("mechanism names round trip") {
    for (auto m : {Mechanism::softmax, Mechanism::linear, Mechanism::psla_rank1,
                   Mechanism::psla_symmetric_grid, Mechanism::dense_symmetric})
        CHECK(parse_mechanism(to_string(m)) == m);
    CHECK_THROWS_AS(parse_mechanism("flash"), std::invalid_argument);
}

TEST_CASE("bench grid") {
    CHECK(bench_grid(512).width == 16);
    CHECK(bench_grid(512).height == 32);
    CHECK(bench_grid(4096).width == 64);
    CHECK(bench_grid(7).width == 1);
}

TEST_CASE("memory model closed forms") {
    CHECK(memory_model(Mechanism::softmax, 10000, 64, 64) == 8.0 * (1e8 + 2 * 1e4 * 64 + 1e4 * 64));
    const double psla = memory_model(Mechanism::psla_rank1, 10000, 64, 64);
    CHECK(psla == 8.0 * (64 * 64 + 1e4 * (2 * 64 + 64) + 2e4));
    CHECK(psla == doctest::Approx(15.5e6).epsilon(0.01));
    CHECK(memory_model(Mechanism::softmax, 10000, 64, 64) / psla >= 50.0);
    // linear in L: equal second differences
    const double a = memory_model(Mechanism::psla_rank1, 1000, 64, 64);
    const double b = memory_model(Mechanism::psla_rank1, 2000, 64, 64);
    const double c = memory_model(Mechanism::psla_rank1, 3000, 64, 64);
    CHECK(c - b == b - a);
}

TEST_CASE("scaling fits on synthetic records") {
    const auto quad = synthetic(Mechanism::softmax, 1e-9, 2.0);
    const auto f2 = fit_scaling(quad);
    CHECK(f2.slope == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(f2.r_squared == doctest::Approx(1.0).epsilon(1e-12));
    const auto f1 = fit_scaling(synthetic(Mechanism::psla_rank1, 1e-6, 1.0));
    CHECK(f1.slope == doctest::Approx(1.0).epsilon(1e-12));

    const std::vector<BenchRecord> few(quad.begin(), quad.begin() + 3);
    CHECK_THROWS_AS(fit_scaling(few), std::invalid_argument);
    auto narrow = quad;
    for (size_t i = 0; i < narrow.size(); ++i) narrow[i].length = 1000 + 100 * static_cast<long>(i);
    CHECK_THROWS_AS(fit_scaling(narrow), std::invalid_argument);
}

TEST_CASE("crossover on synthetic records") {
    const auto quad = synthetic(Mechanism::softmax, 1.0, 2.0);
    CHECK(!find_crossover(quad, quad).has_value());
    const auto lin = synthetic(Mechanism::psla_rank1, 1000.0, 1.0);
    // c2 / c1 = 1000: b is faster once L > 1000
    CHECK(find_crossover(quad, lin) == 1024);
    auto shifted = lin;
    shifted.pop_back();
    CHECK_THROWS_AS(find_crossover(quad, shifted), std::invalid_argument);
}

TEST_CASE("benchmarked kernels agree with their oracles") {
    for (auto m : {Mechanism::softmax, Mechanism::linear, Mechanism::psla_rank1,
                   Mechanism::psla_symmetric_grid, Mechanism::dense_symmetric})
        CHECK(cross_check(m, 128, 16, 5) <= 1e-9);
}

TEST_CASE("timing records") {
    const auto r = time_forward(Mechanism::psla_rank1, 1024, 32, 5, 1);
    CHECK(r.reps == 5);
    CHECK(r.median_s > 0.0);
    CHECK(r.trimmed_mean_s > 0.0);
    CHECK(r.modeled_bytes == memory_model(Mechanism::psla_rank1, 1024, 32, 32));
    CHECK_THROWS_AS(time_forward(Mechanism::psla_rank1, 64, 8, 4, 1), std::invalid_argument);
    CHECK_THROWS_AS(time_forward(Mechanism::dense_symmetric, kBenchDenseGuard + 1, 4, 5, 1), std::length_error);

    const auto again = time_forward(Mechanism::psla_rank1, 1024, 32, 5, 1);
    CHECK(std::abs(again.median_s - r.median_s) <= 0.2 * r.median_s);
}
