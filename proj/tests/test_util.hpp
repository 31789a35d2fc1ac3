#pragma once

// Shared fixtures and scalar-loop oracles for the test suites. The oracles
// deliberately avoid the library's vectorized code paths.

#include "physprior/attention.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <functional>
#include <random>
#include <vector>

namespace testutil {

using physprior::attention::AttentionBatch;
using physprior::attention::HeadConfig;
using physprior::attention::Matrix;
using physprior::attention::Vector;
using physprior::kernel::Coord2D;

enum class Layout { scattered, row_sorted, grid };

inline Matrix random_matrix(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng,
                            double scale = 1.0) {
    std::normal_distribution<double> n(0.0, scale);
    return Matrix::NullaryExpr(rows, cols, [&]() { return n(rng); });
}

inline std::vector<Coord2D> positions(Eigen::Index length, Layout layout, std::mt19937_64& rng,
                                      int grid_width = 0) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<Coord2D> p;
    if (layout == Layout::scattered) {
        for (Eigen::Index i = 0; i < length; ++i) {
            p.emplace_back(u(rng), u(rng));
        }
    } else if (layout == Layout::row_sorted) {
        std::vector<double> xs;
        for (Eigen::Index i = 0; i < length; ++i) {
            xs.push_back(u(rng));
        }
        std::sort(xs.begin(), xs.end());
        const double y = u(rng);
        for (double x : xs) {
            p.emplace_back(x, y);
        }
    } else {
        const int w = grid_width;
        const int h = static_cast<int>(length) / w;
        for (int r = 0; r < h; ++r) {
            for (int c = 0; c < w; ++c) {
                p.push_back(physprior::kernel::cell_center(c, r, w, h));
            }
        }
    }
    return p;
}

inline AttentionBatch random_batch(Eigen::Index length, Eigen::Index d, Eigen::Index dv, unsigned seed,
                                   Layout layout = Layout::scattered, int grid_width = 0) {
    std::mt19937_64 rng(seed);
    AttentionBatch b;
    b.q = random_matrix(length, d, rng);
    b.k = random_matrix(length, d, rng);
    b.v = random_matrix(length, dv, rng);
    b.positions = positions(length, layout, rng, grid_width);
    return b;
}

inline HeadConfig plain_head(double alpha_raw_x = 0.0, double alpha_raw_y = 0.0, double lo = 1.2,
                             double hi = 1.8) {
    HeadConfig h;
    h.decay = {alpha_raw_x, alpha_raw_y, lo, hi};
    return h;
}

/// Head with gates and pre-map normalization, all with random parameters.
inline HeadConfig full_head(Eigen::Index d, unsigned seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> n(0.0, 0.5);
    HeadConfig h;
    h.decay = {n(rng), n(rng), 1.2, 1.8};
    for (auto* g : {&h.gate_q, &h.gate_k}) {
        physprior::attention::GateParams p;
        const Eigen::Index hidden = d + 1;
        p.w1 = random_matrix(d, hidden, rng, 0.5);
        p.b1 = random_matrix(hidden, 1, rng, 0.1);
        p.w2 = random_matrix(hidden, d, rng, 0.5);
        p.b2 = random_matrix(d, 1, rng, 0.5);
        p.b2.array() -= 2.0;
        *g = p;
    }
    for (auto* nm : {&h.norm_q, &h.norm_k}) {
        physprior::attention::PreMapNorm p;
        p.weight = Matrix::Identity(d, d) + random_matrix(d, d, rng, 0.3);
        p.bias = random_matrix(d, 1, rng, 0.2);
        *nm = p;
    }
    return h;
}

// ---- scalar oracles ------------------------------------------------------

inline double phi_scalar(double x, double eps) {
    return (x > 0.0 ? x : std::exp(x) - 1.0) + 1.0 + eps;
}

inline double sigmoid_scalar(double z) { return 1.0 / (1.0 + std::exp(-z)); }

/// Scalar-loop head features (normalization, phi, gate), one row at a time.
inline Matrix oracle_features(const Matrix& x, const HeadConfig& h,
                              const std::optional<physprior::attention::GateParams>& gate,
                              const std::optional<physprior::attention::PreMapNorm>& norm) {
    const Eigen::Index n = x.rows(), d = x.cols();
    Matrix pre = x;
    if (norm) {
        for (Eigen::Index i = 0; i < n; ++i) {
            double mean = 0.0;
            for (Eigen::Index c = 0; c < d; ++c) mean += x(i, c);
            mean /= static_cast<double>(d);
            double var = 0.0;
            for (Eigen::Index c = 0; c < d; ++c) var += (x(i, c) - mean) * (x(i, c) - mean);
            var /= static_cast<double>(d);
            for (Eigen::Index c = 0; c < d; ++c) {
                double acc = norm->bias[c];
                for (Eigen::Index r = 0; r < d; ++r) {
                    acc += (x(i, r) - mean) / std::sqrt(var + norm->eps) * norm->weight(r, c);
                }
                pre(i, c) = acc;
            }
        }
    }
    Matrix out(n, d);
    for (Eigen::Index i = 0; i < n; ++i) {
        std::vector<double> hidden;
        if (gate) {
            for (Eigen::Index u = 0; u < gate->w1.cols(); ++u) {
                double acc = gate->b1[u];
                for (Eigen::Index c = 0; c < d; ++c) acc += pre(i, c) * gate->w1(c, u);
                hidden.push_back(std::tanh(acc));
            }
        }
        for (Eigen::Index c = 0; c < d; ++c) {
            double g = 1.0;
            if (gate) {
                double acc = gate->b2[c];
                for (size_t u = 0; u < hidden.size(); ++u) acc += hidden[u] * gate->w2(static_cast<Eigen::Index>(u), c);
                g = sigmoid_scalar(acc);
            }
            out(i, c) = g * phi_scalar(pre(i, c), h.feature_map.epsilon);
        }
    }
    return out;
}

/// out_i = sum_j w_ij v_j / sum_j w_ij with w_ij = phi_q_i . phi_k_j * bias(i, j).
inline Matrix oracle_weighted(const Matrix& phi_q, const Matrix& phi_k, const Matrix& v,
                              const std::function<double(Eigen::Index, Eigen::Index)>& bias,
                              bool causal = false) {
    const Eigen::Index n = phi_q.rows();
    Matrix out = Matrix::Zero(n, v.cols());
    for (Eigen::Index i = 0; i < n; ++i) {
        double total = 0.0;
        for (Eigen::Index j = 0; j < (causal ? i + 1 : n); ++j) {
            double dot = 0.0;
            for (Eigen::Index c = 0; c < phi_q.cols(); ++c) dot += phi_q(i, c) * phi_k(j, c);
            const double w = dot * bias(i, j);
            total += w;
            for (Eigen::Index c = 0; c < v.cols(); ++c) out(i, c) += w * v(j, c);
        }
        for (Eigen::Index c = 0; c < v.cols(); ++c) out(i, c) /= total;
    }
    return out;
}

enum class Bias { none, directional, symmetric };

inline Matrix oracle_head(const AttentionBatch& b, const HeadConfig& h, Bias bias, bool causal = false) {
    const Matrix pq = oracle_features(b.q, h, h.gate_q, h.norm_q);
    const Matrix pk = oracle_features(b.k, h, h.gate_k, h.norm_k);
    const double sx = physprior::kernel::sigmoid(h.decay.alpha_raw_x);
    const double sy = physprior::kernel::sigmoid(h.decay.alpha_raw_y);
    const double ax = h.decay.alpha_min + (h.decay.alpha_max - h.decay.alpha_min) * sx;
    const double ay = h.decay.alpha_min + (h.decay.alpha_max - h.decay.alpha_min) * sy;
    const auto& p = b.positions;
    return oracle_weighted(pq, pk, b.v, [&](Eigen::Index i, Eigen::Index j) {
        const auto& pi = p[static_cast<size_t>(i)];
        const auto& pj = p[static_cast<size_t>(j)];
        switch (bias) {
            case Bias::none: return 1.0;
            case Bias::directional: return std::exp(ax * (pj.x() - pi.x()) + ay * (pj.y() - pi.y()));
            case Bias::symmetric:
                return std::exp(-ax * std::abs(pj.x() - pi.x()) - ay * std::abs(pj.y() - pi.y()));
        }
        return 0.0;
    }, causal);
}

inline Matrix oracle_softmax(const AttentionBatch& b) {
    const Eigen::Index n = b.length(), d = b.dim();
    Matrix out = Matrix::Zero(n, b.value_dim());
    for (Eigen::Index i = 0; i < n; ++i) {
        std::vector<double> s(static_cast<size_t>(n));
        double mx = -1e300;
        for (Eigen::Index j = 0; j < n; ++j) {
            double dot = 0.0;
            for (Eigen::Index c = 0; c < d; ++c) dot += b.q(i, c) * b.k(j, c);
            s[static_cast<size_t>(j)] = dot / std::sqrt(static_cast<double>(d));
            mx = std::max(mx, s[static_cast<size_t>(j)]);
        }
        double total = 0.0;
        for (auto& x : s) {
            x = std::exp(x - mx);
            total += x;
        }
        for (Eigen::Index j = 0; j < n; ++j)
            for (Eigen::Index c = 0; c < b.value_dim(); ++c)
                out(i, c) += s[static_cast<size_t>(j)] / total * b.v(j, c);
    }
    return out;
}

inline double max_abs_diff(const Matrix& a, const Matrix& b) { return (a - b).cwiseAbs().maxCoeff(); }

}  // namespace testutil
