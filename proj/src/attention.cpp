#include "physprior/attention.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>
#include <string>

namespace physprior::attention {

namespace {

using Index = Eigen::Index;

void require(bool ok, const char* what) {
    if (!ok) {
        throw std::invalid_argument(what);
    }
}

Vector column_scale_denominator(const Matrix& features_q, const Vector& key_sum) {
    return features_q * key_sum;
}

// out_i = num_i / den_i, row-wise.
Matrix normalize_rows(const Matrix& num, const Vector& den) {
    return den.cwiseInverse().asDiagonal() * num;
}

Matrix augment_with_ones(const Matrix& v) {
    Matrix out(v.rows(), v.cols() + 1);
    out.leftCols(v.cols()) = v;
    out.col(v.cols()).setOnes();
    return out;
}

// out.col(idx[i]) = sum_j exp(-alpha |coord[i] - coord[j]|) in.col(idx[j]), using
// one forward and one backward recurrence over the ordered index list.
void bidirectional_scan(const Matrix& in, Matrix& out, const std::vector<Index>& idx,
                        const std::vector<double>& coord, double alpha) {
    const size_t n = idx.size();
    Vector carry = Vector::Zero(in.rows());
    for (size_t i = 0; i < n; ++i) {
        if (i > 0) {
            carry *= std::exp(-alpha * (coord[i] - coord[i - 1]));
        }
        carry += in.col(idx[i]);
        out.col(idx[i]) = carry;
    }
    carry.setZero();
    for (size_t i = n - 1; i-- > 0;) {
        carry = std::exp(-alpha * (coord[i + 1] - coord[i])) * (carry + in.col(idx[i + 1]));
        out.col(idx[i]) += carry;
    }
}

}  // namespace

void AttentionBatch::validate() const {
    require(q.rows() >= 1 && q.cols() >= 1, "AttentionBatch: need L >= 1 and d >= 1");
    require(k.rows() == q.rows() && k.cols() == q.cols(), "AttentionBatch: q and k shapes differ");
    require(v.rows() == q.rows() && v.cols() >= 1, "AttentionBatch: v must have L rows");
    require(static_cast<Index>(positions.size()) == q.rows(),
            "AttentionBatch: positions length differs from L");
    require(q.allFinite() && k.allFinite() && v.allFinite(), "AttentionBatch: non-finite entry");
}

GateParams GateParams::fresh(Index d, Index hidden, unsigned seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0 / std::sqrt(static_cast<double>(d)));
    GateParams g;
    g.w1 = Matrix::NullaryExpr(d, hidden, [&]() { return normal(rng); });
    g.b1 = Vector::Zero(hidden);
    g.w2 = Matrix::Zero(hidden, d);
    g.b2 = Vector::Constant(d, -2.0);
    return g;
}

PreMapNorm PreMapNorm::identity(Index d) {
    return {Matrix::Identity(d, d), Vector::Zero(d), 1e-5};
}

void HeadConfig::validate(Index d) const {
    decay.validate();
    require(feature_map.epsilon > 0.0, "HeadConfig: epsilon must be positive");
    for (const auto* g : {&gate_q, &gate_k}) {
        if (!g->has_value()) {
            continue;
        }
        const auto& p = **g;
        require(p.w1.rows() == d && p.b1.size() == p.w1.cols() && p.w2.rows() == p.w1.cols() &&
                    p.w2.cols() == d && p.b2.size() == d,
                "HeadConfig: gate parameter shapes do not match d");
    }
    require(norm_q.has_value() == norm_k.has_value(),
            "HeadConfig: pre-map normalization needs both query and key parameters");
    for (const auto* n : {&norm_q, &norm_k}) {
        if (n->has_value()) {
            require((*n)->weight.rows() == d && (*n)->weight.cols() == d && (*n)->bias.size() == d &&
                        (*n)->eps > 0.0,
                    "HeadConfig: pre-map normalization shapes do not match d");
        }
    }
}

Matrix feature_map(const Matrix& x, const FeatureMapConfig& cfg) {
    // ELU(v) + 1 is exp(v) for v <= 0; evaluating it that way keeps the tail above epsilon resolvable.
    const double eps = cfg.epsilon;
    return x.unaryExpr([eps](double v) { return (v > 0.0 ? v + 1.0 : std::exp(v)) + eps; });
}

Matrix gate_values(const Matrix& raw_x, const GateParams& g) {
    require(raw_x.cols() == g.w1.rows() && g.w2.cols() == raw_x.cols(),
            "apply_gate: gate parameters do not match the feature width");
    Matrix hidden = (raw_x * g.w1).rowwise() + g.b1.transpose();
    hidden = hidden.array().tanh().matrix();
    Matrix logits = (hidden * g.w2).rowwise() + g.b2.transpose();
    return logits.unaryExpr([](double z) { return kernel::sigmoid(z); });
}

Matrix apply_gate(const Matrix& phi_x, const Matrix& raw_x, const GateParams& g) {
    require(phi_x.rows() == raw_x.rows() && phi_x.cols() == raw_x.cols(),
            "apply_gate: phi_x and raw_x shapes differ");
    return gate_values(raw_x, g).cwiseProduct(phi_x);
}

Matrix pre_map_normalize(const Matrix& x, const PreMapNorm& n) {
    const auto d = static_cast<double>(x.cols());
    Matrix z(x.rows(), x.cols());
    for (Index i = 0; i < x.rows(); ++i) {
        const double mean = x.row(i).sum() / d;
        const auto centered = (x.row(i).array() - mean).matrix();
        const double var = centered.squaredNorm() / d;
        z.row(i) = centered / std::sqrt(var + n.eps);
    }
    return (z * n.weight).rowwise() + n.bias.transpose();
}

HeadFeatures head_features(const AttentionBatch& b, const HeadConfig& head) {
    b.validate();
    head.validate(b.dim());
    const Matrix xq = head.pre_map_normalization() ? pre_map_normalize(b.q, *head.norm_q) : b.q;
    const Matrix xk = head.pre_map_normalization() ? pre_map_normalize(b.k, *head.norm_k) : b.k;
    HeadFeatures f{feature_map(xq, head.feature_map), feature_map(xk, head.feature_map)};
    if (head.gate_q) {
        f.phi_q = apply_gate(f.phi_q, xq, *head.gate_q);
    }
    if (head.gate_k) {
        f.phi_k = apply_gate(f.phi_k, xk, *head.gate_k);
    }
    return f;
}

Matrix softmax_attention(const AttentionBatch& b) {
    b.validate();
    const Index n = b.length();
    const double scale = 1.0 / std::sqrt(static_cast<double>(b.dim()));
    constexpr Index kBlock = 64;
    Matrix out(n, b.value_dim());
    Matrix scores;
    for (Index start = 0; start < n; start += kBlock) {
        const Index rows = std::min(kBlock, n - start);
        scores.noalias() = b.q.middleRows(start, rows) * b.k.transpose();
        scores *= scale;
        for (Index r = 0; r < rows; ++r) {
            const double mx = scores.row(r).maxCoeff();
            scores.row(r) = (scores.row(r).array() - mx).exp().matrix();
            scores.row(r) /= scores.row(r).sum();
        }
        out.middleRows(start, rows).noalias() = scores * b.v;
    }
    return out;
}

Matrix linear_attention(const AttentionBatch& b, const FeatureMapConfig& cfg) {
    b.validate();
    const Matrix phi_q = feature_map(b.q, cfg);
    const Matrix phi_k = feature_map(b.k, cfg);
    const Matrix kv = phi_k.transpose() * b.v;
    const Vector key_sum = phi_k.colwise().sum().transpose();
    return normalize_rows(phi_q * kv, column_scale_denominator(phi_q, key_sum));
}

Matrix psla_rank1(const AttentionBatch& b, const HeadConfig& head, bool causal) {
    const HeadFeatures f = head_features(b, head);
    const auto [d_q, d_k] = kernel::bias_factors(b.positions, kernel::reparameterize(head.decay));
    const Matrix q_tilde = d_q.asDiagonal() * f.phi_q;
    const Matrix k_tilde = d_k.asDiagonal() * f.phi_k;

    if (!causal) {
        const Matrix kv = k_tilde.transpose() * b.v;
        const Vector key_sum = k_tilde.colwise().sum().transpose();
        return normalize_rows(q_tilde * kv, column_scale_denominator(q_tilde, key_sum));
    }

    Matrix state = Matrix::Zero(b.dim(), b.value_dim());
    Vector key_sum = Vector::Zero(b.dim());
    Matrix out(b.length(), b.value_dim());
    for (Index i = 0; i < b.length(); ++i) {
        state.noalias() += k_tilde.row(i).transpose() * b.v.row(i);
        key_sum += k_tilde.row(i).transpose();
        out.row(i) = (q_tilde.row(i) * state) / q_tilde.row(i).dot(key_sum);
    }
    return out;
}

Matrix dense_psla_reference(const AttentionBatch& b, const HeadConfig& head, BiasMode mode,
                            bool causal, Index max_length) {
    b.validate();
    if (b.length() > max_length) {
        throw std::length_error("dense_psla_reference: L = " + std::to_string(b.length()) +
                                " exceeds the dense guard of " + std::to_string(max_length));
    }
    const HeadFeatures f = head_features(b, head);
    const kernel::DecayRates rates = kernel::reparameterize(head.decay);
    const Index n = b.length();
    Matrix out(n, b.value_dim());
    Vector weights(n);
    for (Index i = 0; i < n; ++i) {
        const auto& pi = b.positions[static_cast<size_t>(i)];
        const Index last = causal ? i + 1 : n;
        for (Index j = 0; j < last; ++j) {
            const auto& pj = b.positions[static_cast<size_t>(j)];
            double bias = 0.0;
            if (mode == BiasMode::directional) {
                bias = std::exp(rates.alpha_x() * (pj.x() - pi.x()) + rates.alpha_y() * (pj.y() - pi.y()));
            } else {
                bias = kernel::decay_weight(pi, pj, rates);
            }
            weights[j] = f.phi_q.row(i).dot(f.phi_k.row(j)) * bias;
        }
        const auto w = weights.head(last);
        out.row(i) = (w.transpose() * b.v.topRows(last)) / w.sum();
    }
    return out;
}

Matrix psla_symmetric_1d(const AttentionBatch& b, const HeadConfig& head) {
    b.validate();
    const Index n = b.length();
    for (Index i = 1; i < n; ++i) {
        const auto& prev = b.positions[static_cast<size_t>(i - 1)];
        const auto& cur = b.positions[static_cast<size_t>(i)];
        require(prev.x() <= cur.x(), "psla_symmetric_1d: positions are not sorted by x");
        require(prev.y() == cur.y(), "psla_symmetric_1d: positions do not share one y coordinate");
    }
    const HeadFeatures f = head_features(b, head);
    const double alpha = kernel::reparameterize(head.decay).alpha_x();
    const Matrix v_aug = augment_with_ones(b.v);
    const Index m = v_aug.cols();

    // Per-token contractions phi(q_i) S_i; only the d x m carried state is kept.
    Matrix partial(n, m);
    Matrix state = Matrix::Zero(b.dim(), m);
    for (Index i = 0; i < n; ++i) {
        if (i > 0) {
            state *= std::exp(-alpha * (b.positions[static_cast<size_t>(i)].x() -
                                        b.positions[static_cast<size_t>(i - 1)].x()));
        }
        state.noalias() += f.phi_k.row(i).transpose() * v_aug.row(i);
        partial.row(i).noalias() = f.phi_q.row(i) * state;
    }
    state.setZero();
    for (Index i = n - 1; i-- > 0;) {
        state.noalias() += f.phi_k.row(i + 1).transpose() * v_aug.row(i + 1);
        state *= std::exp(-alpha * (b.positions[static_cast<size_t>(i + 1)].x() -
                                    b.positions[static_cast<size_t>(i)].x()));
        partial.row(i).noalias() += f.phi_q.row(i) * state;
    }
    return normalize_rows(partial.leftCols(m - 1), partial.col(m - 1));
}

Matrix psla_symmetric_grid(const AttentionBatch& b, const HeadConfig& head, GridShape grid) {
    b.validate();
    require(grid.width >= 1 && grid.height >= 1, "psla_symmetric_grid: empty grid");
    require(static_cast<Index>(grid.width) * grid.height == b.length(),
            "psla_symmetric_grid: L differs from W * H");
    for (int r = 0; r < grid.height; ++r) {
        for (int c = 0; c < grid.width; ++c) {
            const auto& p = b.positions[static_cast<size_t>(r) * grid.width + c];
            const auto expect = kernel::cell_center(c, r, grid.width, grid.height);
            require(std::abs(p.x() - expect.x()) <= 1e-12 && std::abs(p.y() - expect.y()) <= 1e-12,
                    "psla_symmetric_grid: positions are not the row-major cell centers of the grid");
        }
    }
    const HeadFeatures f = head_features(b, head);
    const kernel::DecayRates rates = kernel::reparameterize(head.decay);
    const Matrix v_aug = augment_with_ones(b.v);
    const Index d = b.dim();
    const Index m = v_aug.cols();
    const Index n = b.length();

    // Column t holds vec(phi(k_t)^T [v_t, 1]).
    Matrix outer(d * m, n);
    for (Index t = 0; t < n; ++t) {
        Eigen::Map<Matrix>(outer.col(t).data(), d, m).noalias() =
            f.phi_k.row(t).transpose() * v_aug.row(t);
    }

    Matrix along_y(d * m, n);
    std::vector<Index> idx(static_cast<size_t>(grid.height));
    std::vector<double> coord(static_cast<size_t>(grid.height));
    for (int c = 0; c < grid.width; ++c) {
        for (int r = 0; r < grid.height; ++r) {
            idx[static_cast<size_t>(r)] = static_cast<Index>(r) * grid.width + c;
            coord[static_cast<size_t>(r)] = b.positions[static_cast<size_t>(idx[static_cast<size_t>(r)])].y();
        }
        bidirectional_scan(outer, along_y, idx, coord, rates.alpha_y());
    }

    Matrix both(d * m, n);
    idx.resize(static_cast<size_t>(grid.width));
    coord.resize(static_cast<size_t>(grid.width));
    for (int r = 0; r < grid.height; ++r) {
        for (int c = 0; c < grid.width; ++c) {
            idx[static_cast<size_t>(c)] = static_cast<Index>(r) * grid.width + c;
            coord[static_cast<size_t>(c)] = b.positions[static_cast<size_t>(idx[static_cast<size_t>(c)])].x();
        }
        bidirectional_scan(along_y, both, idx, coord, rates.alpha_x());
    }

    Matrix partial(n, m);
    for (Index t = 0; t < n; ++t) {
        partial.row(t).noalias() = f.phi_q.row(t) * Eigen::Map<const Matrix>(both.col(t).data(), d, m);
    }
    return normalize_rows(partial.leftCols(m - 1), partial.col(m - 1));
}

Matrix multihead_psla(const std::vector<HeadConfig>& heads, const MultiHeadProjections& proj,
                      const AttentionBatch& b) {
    b.validate();
    const size_t h = heads.size();
    require(h >= 1, "multihead_psla: need at least one head");
    require(proj.w_q.size() == h && proj.w_k.size() == h && proj.w_v.size() == h,
            "multihead_psla: one projection triple per head required");
    Index total_v = 0;
    for (size_t i = 0; i < h; ++i) {
        require(proj.w_q[i].rows() == b.dim() && proj.w_k[i].rows() == b.dim() &&
                    proj.w_q[i].cols() == proj.w_k[i].cols() && proj.w_v[i].rows() == b.value_dim(),
                "multihead_psla: projection shapes do not match the batch");
        total_v += proj.w_v[i].cols();
    }
    require(proj.w_o.rows() == total_v, "multihead_psla: output projection rows != concat width");

    Matrix concat(b.length(), total_v);
    Index offset = 0;
    for (size_t i = 0; i < h; ++i) {
        AttentionBatch sub{b.q * proj.w_q[i], b.k * proj.w_k[i], b.v * proj.w_v[i], b.positions};
        const Index width = proj.w_v[i].cols();
        concat.middleCols(offset, width) = psla_rank1(sub, heads[i]);
        offset += width;
    }
    return concat * proj.w_o;
}

}  // namespace physprior::attention
