#include "physprior/bench.hpp"

#include "physprior/rng.hpp"

#include <Eigen/Core>
#include <sched.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>
#include <set>
#include <stdexcept>

namespace physprior::bench {

using attention::AttentionBatch;
using attention::HeadConfig;
using attention::Matrix;

namespace {

const std::pair<Mechanism, const char*> kNames[] = {
    {Mechanism::softmax, "softmax"},
    {Mechanism::linear, "linear"},
    {Mechanism::psla_rank1, "psla_rank1"},
    {Mechanism::psla_symmetric_grid, "psla_symmetric_grid"},
    {Mechanism::dense_symmetric, "dense_symmetric"},
};

bool quadratic(Mechanism m) { return m == Mechanism::softmax || m == Mechanism::dense_symmetric; }

}  // namespace

std::string to_string(Mechanism m) {
    for (const auto& [k, name] : kNames)
        if (k == m) return name;
    throw std::invalid_argument("bench: unknown mechanism");
}

Mechanism parse_mechanism(const std::string& name) {
    for (const auto& [k, n] : kNames)
        if (name == n) return k;
    throw std::invalid_argument("bench: unknown mechanism '" + name + "'");
}

attention::GridShape bench_grid(long length) {
    if (length < 1) throw std::invalid_argument("bench: length must be positive");
    long w = static_cast<long>(std::sqrt(static_cast<double>(length)));
    while (w > 1 && length % w != 0) --w;
    return {static_cast<int>(w), static_cast<int>(length / w)};
}

AttentionBatch bench_inputs(long length, long dim, std::uint64_t seed) {
    if (dim < 1) throw std::invalid_argument("bench: dim must be positive");
    Rng rng(seed);
    AttentionBatch b;
    auto fill = [&](Matrix& m) {
        m.resize(length, dim);
        for (long i = 0; i < length; ++i)
            for (long j = 0; j < dim; ++j) m(i, j) = rng.uniform(-1.0, 1.0);
    };
    fill(b.q);
    fill(b.k);
    fill(b.v);
    const auto g = bench_grid(length);
    b.positions.reserve(length);
    for (long i = 0; i < length; ++i)
        b.positions.push_back(kernel::cell_center(static_cast<int>(i), g.width, g.height));
    return b;
}

Matrix run_mechanism(Mechanism m, const AttentionBatch& b) {
    const HeadConfig head;
    switch (m) {
        case Mechanism::softmax: return attention::softmax_attention(b);
        case Mechanism::linear: return attention::linear_attention(b, head.feature_map);
        case Mechanism::psla_rank1: return attention::psla_rank1(b, head);
        case Mechanism::psla_symmetric_grid:
            return attention::psla_symmetric_grid(b, head, bench_grid(b.length()));
        case Mechanism::dense_symmetric:
            return attention::dense_psla_reference(b, head, attention::BiasMode::symmetric, false,
                                                   kBenchDenseGuard);
    }
    throw std::invalid_argument("bench: unknown mechanism");
}

void pin_single_thread() {
    const int cpu = sched_getcpu();
    if (cpu < 0) throw std::runtime_error(std::string("bench: sched_getcpu failed: ") + std::strerror(errno));
    cpu_set_t set;
    CPU_ZERO(&set);
    CPU_SET(cpu, &set);
    if (sched_setaffinity(0, sizeof(set), &set) != 0)
        throw std::runtime_error(std::string("bench: cannot pin to one CPU: ") + std::strerror(errno));
    Eigen::setNbThreads(1);
    if (Eigen::nbThreads() != 1) throw std::runtime_error("bench: Eigen is not single-threaded");
}

BenchRecord time_forward(Mechanism m, long length, long dim, int reps, std::uint64_t seed) {
    if (reps < 5) throw std::invalid_argument("bench: reps must be >= 5");
    if (m == Mechanism::dense_symmetric && length > kBenchDenseGuard)
        throw std::length_error("bench: L exceeds the dense guard");
    pin_single_thread();
    const AttentionBatch b = bench_inputs(length, dim, seed);
    double sink = 0.0;
    for (int i = 0; i < 2; ++i) sink += run_mechanism(m, b)(0, 0);
    std::vector<double> t(reps);
    for (int i = 0; i < reps; ++i) {
        const auto t0 = std::chrono::steady_clock::now();
        const Matrix out = run_mechanism(m, b);
        t[i] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        sink += out(0, 0);
    }
    if (!std::isfinite(sink)) throw std::runtime_error("bench: non-finite output");
    std::sort(t.begin(), t.end());
    const double median = reps % 2 ? t[reps / 2] : 0.5 * (t[reps / 2 - 1] + t[reps / 2]);
    const int trim = std::max(1, reps / 10);
    double sum = 0.0;
    for (int i = trim; i < reps - trim; ++i) sum += t[i];
    return {m, length, dim, reps, median, sum / (reps - 2 * trim), memory_model(m, length, dim, dim)};
}

double cross_check(Mechanism m, long length, long dim, std::uint64_t seed) {
    const AttentionBatch b = bench_inputs(length, dim, seed);
    const HeadConfig head;
    Matrix oracle;
    switch (m) {
        case Mechanism::softmax: {
            // explicit row softmax
            oracle.resize(length, dim);
            const double scale = 1.0 / std::sqrt(static_cast<double>(dim));
            for (long i = 0; i < length; ++i) {
                Eigen::VectorXd s = (b.k * b.q.row(i).transpose()) * scale;
                s = (s.array() - s.maxCoeff()).exp();
                oracle.row(i) = (s.transpose() * b.v) / s.sum();
            }
            break;
        }
        case Mechanism::linear: {
            const Matrix pq = attention::feature_map(b.q, head.feature_map);
            const Matrix pk = attention::feature_map(b.k, head.feature_map);
            const Matrix w = pq * pk.transpose();
            oracle = (w * b.v).array().colwise() / w.rowwise().sum().array();
            break;
        }
        case Mechanism::psla_rank1:
            oracle = attention::dense_psla_reference(b, head, attention::BiasMode::directional);
            break;
        case Mechanism::psla_symmetric_grid:
        case Mechanism::dense_symmetric:
            oracle = attention::dense_psla_reference(b, head, attention::BiasMode::symmetric);
            break;
    }
    return (run_mechanism(m, b) - oracle).cwiseAbs().maxCoeff();
}

double memory_model(Mechanism m, long length, long dim, long value_dim) {
    if (length < 1 || dim < 1 || value_dim < 1) throw std::invalid_argument("bench: dims must be positive");
    const double L = static_cast<double>(length), d = static_cast<double>(dim), dv = static_cast<double>(value_dim);
    const double values = quadratic(m) ? L * L + 2 * L * d + L * dv : d * dv + L * (2 * d + dv) + 2 * L;
    return 8.0 * values;
}

ScalingFit fit_scaling(std::span<const BenchRecord> records) {
    std::set<long> lengths;
    for (const auto& r : records) {
        if (r.mechanism != records.front().mechanism)
            throw std::invalid_argument("fit_scaling: records mix mechanisms");
        if (!(r.median_s > 0.0)) throw std::invalid_argument("fit_scaling: non-positive time");
        lengths.insert(r.length);
    }
    if (lengths.size() < 4 || *lengths.rbegin() < 8 * *lengths.begin())
        throw std::invalid_argument("fit_scaling: need >= 4 lengths spanning >= 8x");
    const double n = static_cast<double>(records.size());
    double mx = 0, my = 0;
    for (const auto& r : records) {
        mx += std::log(static_cast<double>(r.length)) / n;
        my += std::log(r.median_s) / n;
    }
    double sxx = 0, sxy = 0, syy = 0;
    for (const auto& r : records) {
        const double x = std::log(static_cast<double>(r.length)) - mx, y = std::log(r.median_s) - my;
        sxx += x * x;
        sxy += x * y;
        syy += y * y;
    }
    ScalingFit f;
    f.slope = sxy / sxx;
    f.intercept = my - f.slope * mx;
    f.r_squared = syy > 0 ? (sxy * sxy) / (sxx * syy) : 1.0;
    return f;
}

std::optional<long> find_crossover(std::span<const BenchRecord> a, std::span<const BenchRecord> b) {
    auto sorted = [](std::span<const BenchRecord> r) {
        std::vector<BenchRecord> v(r.begin(), r.end());
        std::sort(v.begin(), v.end(), [](const auto& x, const auto& y) { return x.length < y.length; });
        return v;
    };
    const auto sa = sorted(a), sb = sorted(b);
    if (sa.size() != sb.size()) throw std::invalid_argument("find_crossover: length grids differ");
    for (size_t i = 0; i < sa.size(); ++i)
        if (sa[i].length != sb[i].length) throw std::invalid_argument("find_crossover: length grids differ");
    for (size_t i = 0; i < sa.size(); ++i)
        if (sb[i].median_s < sa[i].median_s) return sa[i].length;
    return std::nullopt;
}

}  // namespace physprior::bench
