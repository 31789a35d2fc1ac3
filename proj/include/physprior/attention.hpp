#pragma once

// Attention mechanisms over tokens that carry 2D chip coordinates.
//
// Every normalized variant computes
//
//     out_i = sum_j w(i, j) v_j / sum_j w(i, j)
//
// with w(i, j) = phi(q_i) . phi(k_j) * bias(i, j). The linear-time kernels
// never materialize an L x L matrix; the dense_* functions do, and exist as
// reference implementations for testing and benchmarking.

#include "physprior/kernel.hpp"

#include <Eigen/Core>

#include <optional>
#include <vector>

namespace physprior::attention {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using kernel::Coord2D;

struct AttentionBatch {
    Matrix q;  // L x d
    Matrix k;  // L x d
    Matrix v;  // L x d_v
    std::vector<Coord2D> positions;

    Eigen::Index length() const { return q.rows(); }
    Eigen::Index dim() const { return q.cols(); }
    Eigen::Index value_dim() const { return v.cols(); }

    /// Throws std::invalid_argument on shape mismatch, empty batch or non-finite entries.
    void validate() const;
};

struct FeatureMapConfig {
    double epsilon = 1e-6;
};

/// Two-layer perceptron gate: sigmoid(tanh(x W1 + b1) W2 + b2), applied per row.
struct GateParams {
    Matrix w1;  // d x d_h
    Vector b1;  // d_h
    Matrix w2;  // d_h x d
    Vector b2;  // d

    /// Freshly initialized gate: small random W1, zero W2 and b2 = -2.
    static GateParams fresh(Eigen::Index d, Eigen::Index hidden, unsigned seed);
};

/// Per-token standardization followed by a learned affine map x W + b.
struct PreMapNorm {
    Matrix weight;  // d x d
    Vector bias;    // d
    double eps = 1e-5;

    static PreMapNorm identity(Eigen::Index d);
};

struct HeadConfig {
    kernel::DecayParams decay;
    FeatureMapConfig feature_map;
    std::optional<GateParams> gate_q;
    std::optional<GateParams> gate_k;
    // Pre-map normalization is enabled iff both are present.
    std::optional<PreMapNorm> norm_q;
    std::optional<PreMapNorm> norm_k;

    bool pre_map_normalization() const { return norm_q.has_value() && norm_k.has_value(); }
    void validate(Eigen::Index d) const;
};

enum class BiasMode { directional, symmetric };

/// ELU(x) + 1 + epsilon, element-wise.
Matrix feature_map(const Matrix& x, const FeatureMapConfig& cfg);

/// sigmoid(perceptron(raw_x)) (.) phi_x.
Matrix apply_gate(const Matrix& phi_x, const Matrix& raw_x, const GateParams& g);

/// Gate values sigmoid(perceptron(raw_x)), L x d.
Matrix gate_values(const Matrix& raw_x, const GateParams& g);

/// Row standardization + affine map.
Matrix pre_map_normalize(const Matrix& x, const PreMapNorm& n);

/// Feature rows of one head before the positional bias: optional
/// normalization, phi, then optional gate.
struct HeadFeatures {
    Matrix phi_q;
    Matrix phi_k;
};
HeadFeatures head_features(const AttentionBatch& b, const HeadConfig& head);

Matrix softmax_attention(const AttentionBatch& b);

Matrix linear_attention(const AttentionBatch& b, const FeatureMapConfig& cfg);

/// Rank-1 biased linear attention. With `causal` set, token i only attends
/// to j <= i.
Matrix psla_rank1(const AttentionBatch& b, const HeadConfig& head, bool causal = false);

inline constexpr Eigen::Index kDenseLengthGuard = 4096;

/// O(L^2) reference with explicit pairwise weights. Throws std::length_error
/// if L exceeds `max_length`.
Matrix dense_psla_reference(const AttentionBatch& b, const HeadConfig& head, BiasMode mode,
                            bool causal = false, Eigen::Index max_length = kDenseLengthGuard);

/// Exact symmetric decay exp(-alpha_x |x_i - x_j|) in two linear scans.
/// Tokens must be sorted by x and share one y coordinate.
Matrix psla_symmetric_1d(const AttentionBatch& b, const HeadConfig& head);

struct GridShape {
    int width = 0;
    int height = 0;
};

/// Exact symmetric Manhattan decay on a regular grid (tokens are the cell
/// centers in row-major order), via per-axis bidirectional scans.
Matrix psla_symmetric_grid(const AttentionBatch& b, const HeadConfig& head, GridShape grid);

struct MultiHeadProjections {
    std::vector<Matrix> w_q;  // each d_model x d_head
    std::vector<Matrix> w_k;
    std::vector<Matrix> w_v;  // each d_model_v x d_head_v
    Matrix w_o;               // (heads * d_head_v) x d_out
};

/// Per-head rank-1 attention on projected inputs, concatenated in head order
/// and projected by w_o.
Matrix multihead_psla(const std::vector<HeadConfig>& heads, const MultiHeadProjections& proj,
                      const AttentionBatch& b);

}  // namespace physprior::attention
