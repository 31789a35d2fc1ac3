#pragma once

// Reverse-mode differentiation over dense matrices.
//
// A Tape records each primitive as a node holding its forward value; the
// backward sweep walks the nodes in reverse insertion order, which is a
// topological order because inputs always precede their consumers.
// Element-wise binary primitives support a fixed set of broadcasts: equal
// shapes, a 1x1 operand, an L x 1 column against L x n, or a 1 x n row
// against m x n.

#include <Eigen/Core>

#include <array>
#include <functional>
#include <map>
#include <string>
#include <vector>

namespace physprior::autodiff {

using Matrix = Eigen::MatrixXd;
using ParamMap = std::map<std::string, Matrix>;

enum class OpKind {
    leaf,
    add,
    sub,
    mul,
    div,
    matmul,
    transpose,
    exp,
    elu,
    sigmoid,
    tanh,
    sqrt,
    add_scalar,
    scale,
    sum,
    row_sum,
};

class Tape;

/// Handle to a tape node. Cheap to copy; valid as long as its tape lives.
class Var {
public:
    const Matrix& value() const;
    Eigen::Index rows() const { return value().rows(); }
    Eigen::Index cols() const { return value().cols(); }
    Tape* tape() const { return tape_; }
    int id() const { return id_; }

private:
    friend class Tape;
    Var(Tape* tape, int id) : tape_(tape), id_(id) {}
    Tape* tape_ = nullptr;
    int id_ = -1;
};

struct TapeNode {
    OpKind op = OpKind::leaf;
    std::array<int, 2> inputs{-1, -1};
    Matrix value;
    Matrix adjoint;
    double scalar = 0.0;  // operand of add_scalar / scale
    std::string name;     // non-empty for named variables
};

class Tape {
public:
    /// Differentiable input; its gradient is reported under `name`.
    Var variable(const std::string& name, Matrix value);
    Var constant(Matrix value);

    /// Zeroes every adjoint, seeds d loss / d loss = 1 and sweeps backwards.
    /// Throws std::invalid_argument unless `loss` is a 1x1 node of this tape.
    ParamMap backward(const Var& loss);

    const Matrix& adjoint(const Var& v) const { return nodes_.at(static_cast<size_t>(v.id())).adjoint; }
    const TapeNode& node(int id) const { return nodes_.at(static_cast<size_t>(id)); }
    size_t size() const { return nodes_.size(); }

    // Used by the primitive builders below.
    Var record(OpKind op, Matrix value, int lhs, int rhs = -1, double scalar = 0.0);

private:
    void propagate(const TapeNode& n);

    std::vector<TapeNode> nodes_;
};

Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var div(const Var& a, const Var& b);
Var matmul(const Var& a, const Var& b);
Var transpose(const Var& a);
Var exp(const Var& a);
Var elu(const Var& a);
Var sigmoid(const Var& a);
Var tanh(const Var& a);
Var sqrt(const Var& a);
Var add_scalar(const Var& a, double s);
Var scale(const Var& a, double s);
Var sum(const Var& a);      // 1 x 1
Var row_sum(const Var& a);  // L x 1

inline Var operator+(const Var& a, const Var& b) { return add(a, b); }
inline Var operator-(const Var& a, const Var& b) { return sub(a, b); }
inline Var operator*(const Var& a, const Var& b) { return mul(a, b); }
inline Var operator/(const Var& a, const Var& b) { return div(a, b); }

// ---- gradient checking ----------------------------------------------------

using ScalarFn = std::function<double(const ParamMap&)>;
using GradientFn = std::function<ParamMap(const ParamMap&)>;

/// Central differences (f(theta + h e) - f(theta - h e)) / 2h, per coordinate.
ParamMap finite_difference(const ScalarFn& f, const ParamMap& params, double h = 1e-5);

struct ParamGradCheck {
    std::string name;
    Matrix analytic;
    Matrix numeric;
    Matrix abs_error;
    Matrix rel_error;  // |a - n| / max(|a|, |n|, 1e-12), entry-wise (diagnostic)
    double max_abs_error = 0.0;
    // max |a - n| / max(max |a|, max |n|, 1e-12): the error relative to the
    // parameter's gradient scale. This is the pass/fail quantity.
    double max_rel_error = 0.0;
    bool passed = false;
};

struct GradReport {
    std::vector<ParamGradCheck> params;
    double worst_rel_error = 0.0;
    bool passed = true;
};

struct GradTolerance {
    double relative = 1e-4;
    double step = 1e-5;
    // A parameter whose max absolute error is at or below this also passes.
    // Off by default; only meaningful for gradients that vanish structurally.
    double absolute = 0.0;
};

GradReport check_gradients(const ScalarFn& f, const GradientFn& analytic, const ParamMap& params,
                           const GradTolerance& tol = {});

}  // namespace physprior::autodiff
