#pragma once

// Wall-clock scaling of attention forward passes and closed-form memory accounting.

#include "physprior/attention.hpp"

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace physprior::bench {

enum class Mechanism { softmax, linear, psla_rank1, psla_symmetric_grid, dense_symmetric };

std::string to_string(Mechanism m);
/// Throws std::invalid_argument on an unknown name.
Mechanism parse_mechanism(const std::string& name);

struct BenchRecord {
    Mechanism mechanism;
    long length;
    long dim;
    int reps;
    double median_s;
    double trimmed_mean_s;
    double modeled_bytes;
};

/// The dense symmetric reference refuses longer inputs.
inline constexpr long kBenchDenseGuard = 16384;

/// Grid used for grid-shaped inputs: width is the largest divisor of L not above sqrt(L).
attention::GridShape bench_grid(long length);

/// q, k, v uniform in [-1, 1] with d_v = d; positions are the row-major
/// cell centers of bench_grid(L). Identical for every mechanism.
attention::AttentionBatch bench_inputs(long length, long dim, std::uint64_t seed);

attention::Matrix run_mechanism(Mechanism m, const attention::AttentionBatch& b);

/// Pins the calling thread to the CPU it is running on and limits Eigen to
/// one thread. Throws std::runtime_error if pinning fails.
void pin_single_thread();

/// Two warm-up runs, then `reps` timed runs (reps >= 5).
BenchRecord time_forward(Mechanism m, long length, long dim, int reps, std::uint64_t seed);

/// Max |output - oracle| for one mechanism on bench inputs.
double cross_check(Mechanism m, long length, long dim, std::uint64_t seed);

/// Modeled bytes: L^2 + 2Ld + L d_v values for the quadratic mechanisms,
/// d d_v + L(2d + d_v) + 2L for the linear ones; 8 bytes per value.
double memory_model(Mechanism m, long length, long dim, long value_dim);

struct ScalingFit {
    double slope;
    double intercept;
    double r_squared;
};

/// OLS of log(median) on log(L). Needs >= 4 distinct L spanning >= 8x.
ScalingFit fit_scaling(std::span<const BenchRecord> records);

/// Smallest shared L where b is strictly faster than a; grids must match.
std::optional<long> find_crossover(std::span<const BenchRecord> a, std::span<const BenchRecord> b);

}  // namespace physprior::bench
