#include "physprior/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace physprior::autodiff {

namespace {

using Index = Eigen::Index;

Tape& same_tape(const Var& a, const Var& b) {
    if (a.tape() == nullptr || a.tape() != b.tape()) {
        throw std::invalid_argument("autodiff: operands belong to different tapes");
    }
    return *a.tape();
}

bool broadcastable(Index r, Index c, Index to_r, Index to_c) {
    return (r == to_r || r == 1) && (c == to_c || c == 1);
}

std::pair<Index, Index> broadcast_shape(const Matrix& a, const Matrix& b) {
    const Index r = std::max(a.rows(), b.rows());
    const Index c = std::max(a.cols(), b.cols());
    if (!broadcastable(a.rows(), a.cols(), r, c) || !broadcastable(b.rows(), b.cols(), r, c)) {
        throw std::invalid_argument("autodiff: shapes " + std::to_string(a.rows()) + "x" +
                                    std::to_string(a.cols()) + " and " + std::to_string(b.rows()) + "x" +
                                    std::to_string(b.cols()) + " do not broadcast");
    }
    return {r, c};
}

Matrix expand(const Matrix& m, Index r, Index c) {
    if (m.rows() == r && m.cols() == c) {
        return m;
    }
    return m.replicate(r / m.rows(), c / m.cols());
}

// Sums a broadcast gradient back down to the operand's shape.
Matrix reduce_to(const Matrix& g, Index r, Index c) {
    if (g.rows() == r && g.cols() == c) {
        return g;
    }
    if (r == 1 && c == 1) {
        return Matrix::Constant(1, 1, g.sum());
    }
    if (r == 1) {
        return g.colwise().sum();
    }
    return g.rowwise().sum();
}

template <typename F>
Var elementwise_binary(const Var& a, const Var& b, OpKind op, F f) {
    Tape& t = same_tape(a, b);
    const auto [r, c] = broadcast_shape(a.value(), b.value());
    Matrix out = f(expand(a.value(), r, c).array(), expand(b.value(), r, c).array()).matrix();
    return t.record(op, std::move(out), a.id(), b.id());
}

template <typename F>
Var elementwise_unary(const Var& a, OpKind op, F f, double scalar = 0.0) {
    Matrix out = a.value().unaryExpr(f);
    return a.tape()->record(op, std::move(out), a.id(), -1, scalar);
}

}  // namespace

const Matrix& Var::value() const { return tape_->node(id_).value; }

Var Tape::record(OpKind op, Matrix value, int lhs, int rhs, double scalar) {
    TapeNode n;
    n.op = op;
    n.inputs = {lhs, rhs};
    n.value = std::move(value);
    n.scalar = scalar;
    nodes_.push_back(std::move(n));
    return Var(this, static_cast<int>(nodes_.size()) - 1);
}

Var Tape::variable(const std::string& name, Matrix value) {
    if (name.empty()) {
        throw std::invalid_argument("autodiff: variables need a name");
    }
    Var v = record(OpKind::leaf, std::move(value), -1);
    nodes_.back().name = name;
    return v;
}

Var Tape::constant(Matrix value) { return record(OpKind::leaf, std::move(value), -1); }

ParamMap Tape::backward(const Var& loss) {
    if (loss.tape() != this) {
        throw std::invalid_argument("autodiff: loss belongs to another tape");
    }
    if (loss.rows() != 1 || loss.cols() != 1) {
        throw std::invalid_argument("autodiff: loss must be a scalar, got " + std::to_string(loss.rows()) + "x" +
                                    std::to_string(loss.cols()));
    }
    for (auto& n : nodes_) {
        n.adjoint = Matrix::Zero(n.value.rows(), n.value.cols());
    }
    nodes_[static_cast<size_t>(loss.id())].adjoint(0, 0) = 1.0;
    for (int i = loss.id(); i >= 0; --i) {
        propagate(nodes_[static_cast<size_t>(i)]);
    }
    ParamMap grads;
    for (const auto& n : nodes_) {
        if (!n.name.empty()) {
            grads[n.name] = n.adjoint;
        }
    }
    return grads;
}

void Tape::propagate(const TapeNode& n) {
    if (n.op == OpKind::leaf) {
        return;
    }
    const Matrix& g = n.adjoint;
    TapeNode& a = nodes_[static_cast<size_t>(n.inputs[0])];
    TapeNode* b = n.inputs[1] >= 0 ? &nodes_[static_cast<size_t>(n.inputs[1])] : nullptr;
    const Index r = n.value.rows();
    const Index c = n.value.cols();

    switch (n.op) {
        case OpKind::leaf:
            break;
        case OpKind::add:
            a.adjoint += reduce_to(g, a.value.rows(), a.value.cols());
            b->adjoint += reduce_to(g, b->value.rows(), b->value.cols());
            break;
        case OpKind::sub:
            a.adjoint += reduce_to(g, a.value.rows(), a.value.cols());
            b->adjoint -= reduce_to(g, b->value.rows(), b->value.cols());
            break;
        case OpKind::mul: {
            const Matrix av = expand(a.value, r, c);
            const Matrix bv = expand(b->value, r, c);
            a.adjoint += reduce_to(g.cwiseProduct(bv), a.value.rows(), a.value.cols());
            b->adjoint += reduce_to(g.cwiseProduct(av), b->value.rows(), b->value.cols());
            break;
        }
        case OpKind::div: {
            const Matrix bv = expand(b->value, r, c);
            const Matrix ga = g.cwiseQuotient(bv);
            a.adjoint += reduce_to(ga, a.value.rows(), a.value.cols());
            // d(a/b)/db = -(a/b)/b
            b->adjoint -= reduce_to(ga.cwiseProduct(n.value), b->value.rows(), b->value.cols());
            break;
        }
        case OpKind::matmul:
            a.adjoint.noalias() += g * b->value.transpose();
            b->adjoint.noalias() += a.value.transpose() * g;
            break;
        case OpKind::transpose:
            a.adjoint += g.transpose();
            break;
        case OpKind::exp:
            a.adjoint += g.cwiseProduct(n.value);
            break;
        case OpKind::elu:
            a.adjoint += g.cwiseProduct(a.value.unaryExpr([](double x) { return x > 0.0 ? 1.0 : std::exp(x); }));
            break;
        case OpKind::sigmoid:
            a.adjoint += g.cwiseProduct(n.value.unaryExpr([](double s) { return s * (1.0 - s); }));
            break;
        case OpKind::tanh:
            a.adjoint += g.cwiseProduct(n.value.unaryExpr([](double t) { return 1.0 - t * t; }));
            break;
        case OpKind::sqrt:
            a.adjoint += g.cwiseQuotient(2.0 * n.value);
            break;
        case OpKind::add_scalar:
            a.adjoint += g;
            break;
        case OpKind::scale:
            a.adjoint += n.scalar * g;
            break;
        case OpKind::sum:
            a.adjoint.array() += g(0, 0);
            break;
        case OpKind::row_sum:
            a.adjoint += g.replicate(1, a.value.cols());
            break;
    }
}

Var add(const Var& a, const Var& b) {
    return elementwise_binary(a, b, OpKind::add, [](const auto& x, const auto& y) { return x + y; });
}

Var sub(const Var& a, const Var& b) {
    return elementwise_binary(a, b, OpKind::sub, [](const auto& x, const auto& y) { return x - y; });
}

Var mul(const Var& a, const Var& b) {
    return elementwise_binary(a, b, OpKind::mul, [](const auto& x, const auto& y) { return x * y; });
}

Var div(const Var& a, const Var& b) {
    return elementwise_binary(a, b, OpKind::div, [](const auto& x, const auto& y) { return x / y; });
}

Var matmul(const Var& a, const Var& b) {
    Tape& t = same_tape(a, b);
    if (a.cols() != b.rows()) {
        throw std::invalid_argument("autodiff: matmul inner dimensions differ");
    }
    return t.record(OpKind::matmul, a.value() * b.value(), a.id(), b.id());
}

Var transpose(const Var& a) { return a.tape()->record(OpKind::transpose, a.value().transpose(), a.id()); }

Var exp(const Var& a) {
    return elementwise_unary(a, OpKind::exp, [](double x) { return std::exp(x); });
}

Var elu(const Var& a) {
    return elementwise_unary(a, OpKind::elu, [](double x) { return x > 0.0 ? x : std::expm1(x); });
}

Var sigmoid(const Var& a) {
    return elementwise_unary(a, OpKind::sigmoid, [](double x) {
        return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
    });
}

Var tanh(const Var& a) {
    return elementwise_unary(a, OpKind::tanh, [](double x) { return std::tanh(x); });
}

Var sqrt(const Var& a) {
    return elementwise_unary(a, OpKind::sqrt, [](double x) { return std::sqrt(x); });
}

Var add_scalar(const Var& a, double s) {
    return elementwise_unary(a, OpKind::add_scalar, [s](double x) { return x + s; }, s);
}

Var scale(const Var& a, double s) {
    return elementwise_unary(a, OpKind::scale, [s](double x) { return s * x; }, s);
}

Var sum(const Var& a) { return a.tape()->record(OpKind::sum, Matrix::Constant(1, 1, a.value().sum()), a.id()); }

Var row_sum(const Var& a) { return a.tape()->record(OpKind::row_sum, a.value().rowwise().sum(), a.id()); }

ParamMap finite_difference(const ScalarFn& f, const ParamMap& params, double h) {
    if (!(h > 0.0)) {
        throw std::invalid_argument("finite_difference: step must be positive");
    }
    ParamMap work = params;
    ParamMap grads;
    for (auto& [name, value] : work) {
        Matrix g(value.rows(), value.cols());
        for (Index i = 0; i < value.size(); ++i) {
            const double saved = value(i);
            value(i) = saved + h;
            const double up = f(work);
            value(i) = saved - h;
            const double down = f(work);
            value(i) = saved;
            g(i) = (up - down) / (2.0 * h);
        }
        grads[name] = std::move(g);
    }
    return grads;
}

GradReport check_gradients(const ScalarFn& f, const GradientFn& analytic, const ParamMap& params,
                           const GradTolerance& tol) {
    const ParamMap numeric = finite_difference(f, params, tol.step);
    const ParamMap exact = analytic(params);
    GradReport report;
    for (const auto& [name, value] : params) {
        ParamGradCheck c;
        c.name = name;
        c.numeric = numeric.at(name);
        const auto it = exact.find(name);
        c.analytic = it == exact.end() ? Matrix::Zero(value.rows(), value.cols()) : it->second;
        if (c.analytic.rows() != value.rows() || c.analytic.cols() != value.cols()) {
            throw std::invalid_argument("check_gradients: analytic gradient for '" + name + "' has the wrong shape");
        }
        c.abs_error = (c.analytic - c.numeric).cwiseAbs();
        const Matrix denom = c.analytic.cwiseAbs().cwiseMax(c.numeric.cwiseAbs()).cwiseMax(1e-12);
        c.rel_error = c.abs_error.cwiseQuotient(denom);
        c.max_abs_error = c.abs_error.size() ? c.abs_error.maxCoeff() : 0.0;
        const double magnitude = c.abs_error.size() ? std::max({c.analytic.cwiseAbs().maxCoeff(),
                                                                c.numeric.cwiseAbs().maxCoeff(), 1e-12})
                                                    : 1.0;
        c.max_rel_error = c.max_abs_error / magnitude;
        c.passed = c.max_rel_error <= tol.relative || c.max_abs_error <= tol.absolute;
        report.worst_rel_error = std::max(report.worst_rel_error, c.max_rel_error);
        report.passed = report.passed && c.passed;
        report.params.push_back(std::move(c));
    }
    return report;
}

}  // namespace physprior::autodiff
