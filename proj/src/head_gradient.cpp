#include "physprior/head_gradient.hpp"

#include <cmath>

namespace physprior::autodiff {

namespace {

using attention::GateParams;
using attention::PreMapNorm;

Matrix as_row(const Eigen::VectorXd& v) { return v.transpose(); }

void add_gate(ParamMap& out, const std::string& prefix, const std::optional<GateParams>& g) {
    if (!g) {
        return;
    }
    out[prefix + ".w1"] = g->w1;
    out[prefix + ".b1"] = as_row(g->b1);
    out[prefix + ".w2"] = g->w2;
    out[prefix + ".b2"] = as_row(g->b2);
}

void add_norm(ParamMap& out, const std::string& prefix, const std::optional<PreMapNorm>& n) {
    if (!n) {
        return;
    }
    out[prefix + ".weight"] = n->weight;
    out[prefix + ".bias"] = as_row(n->bias);
}

Var taped_norm(const Var& x, const PreMapNorm& structure, const Var& weight, const Var& bias) {
    const double inv_d = 1.0 / static_cast<double>(x.cols());
    const Var mean = scale(row_sum(x), inv_d);
    const Var centered = sub(x, mean);
    const Var var = scale(row_sum(mul(centered, centered)), inv_d);
    const Var z = div(centered, sqrt(add_scalar(var, structure.eps)));
    return add(matmul(z, weight), bias);
}

Var taped_gate(const Var& raw, const std::map<std::string, Var>& vars, const std::string& prefix) {
    const Var hidden = tanh(add(matmul(raw, vars.at(prefix + ".w1")), vars.at(prefix + ".b1")));
    return sigmoid(add(matmul(hidden, vars.at(prefix + ".w2")), vars.at(prefix + ".b2")));
}

Var taped_features(Tape& t, const Var& x, const HeadProblem& s, const std::map<std::string, Var>& vars,
                   char which) {
    const std::string tag(1, which);
    const auto& norm = which == 'q' ? s.head.norm_q : s.head.norm_k;
    const auto& gate = which == 'q' ? s.head.gate_q : s.head.gate_k;
    Var pre = x;
    if (s.head.pre_map_normalization()) {
        pre = taped_norm(x, *norm, vars.at("norm_" + tag + ".weight"), vars.at("norm_" + tag + ".bias"));
    }
    Var phi = add_scalar(elu(pre), 1.0 + s.head.feature_map.epsilon);
    if (gate) {
        phi = mul(taped_gate(pre, vars, "gate_" + tag), phi);
    }
    return phi;
}

Var rate(const Var& raw, const kernel::DecayParams& d) {
    return add_scalar(scale(sigmoid(raw), d.alpha_max - d.alpha_min), d.alpha_min);
}

}  // namespace

ParamMap head_parameters(const HeadProblem& p) {
    ParamMap out;
    out["q"] = p.batch.q;
    out["k"] = p.batch.k;
    out["v"] = p.batch.v;
    out["alpha_raw_x"] = Matrix::Constant(1, 1, p.head.decay.alpha_raw_x);
    out["alpha_raw_y"] = Matrix::Constant(1, 1, p.head.decay.alpha_raw_y);
    add_gate(out, "gate_q", p.head.gate_q);
    add_gate(out, "gate_k", p.head.gate_k);
    add_norm(out, "norm_q", p.head.norm_q);
    add_norm(out, "norm_k", p.head.norm_k);
    return out;
}

HeadProblem with_parameters(const HeadProblem& p, const ParamMap& params) {
    HeadProblem out = p;
    out.batch.q = params.at("q");
    out.batch.k = params.at("k");
    out.batch.v = params.at("v");
    out.head.decay.alpha_raw_x = params.at("alpha_raw_x")(0, 0);
    out.head.decay.alpha_raw_y = params.at("alpha_raw_y")(0, 0);
    const auto set_gate = [&](std::optional<GateParams>& g, const std::string& prefix) {
        if (g) {
            g->w1 = params.at(prefix + ".w1");
            g->b1 = params.at(prefix + ".b1").transpose();
            g->w2 = params.at(prefix + ".w2");
            g->b2 = params.at(prefix + ".b2").transpose();
        }
    };
    const auto set_norm = [&](std::optional<PreMapNorm>& n, const std::string& prefix) {
        if (n) {
            n->weight = params.at(prefix + ".weight");
            n->bias = params.at(prefix + ".bias").transpose();
        }
    };
    set_gate(out.head.gate_q, "gate_q");
    set_gate(out.head.gate_k, "gate_k");
    set_norm(out.head.norm_q, "norm_q");
    set_norm(out.head.norm_k, "norm_k");
    return out;
}

Var taped_head_loss(Tape& t, const HeadProblem& s, const std::map<std::string, Var>& vars) {
    const Eigen::Index n = s.batch.length();
    Matrix xs(n, 1), ys(n, 1);
    for (Eigen::Index i = 0; i < n; ++i) {
        xs(i, 0) = s.batch.positions[static_cast<size_t>(i)].x();
        ys(i, 0) = s.batch.positions[static_cast<size_t>(i)].y();
    }
    const Var alpha_x = rate(vars.at("alpha_raw_x"), s.head.decay);
    const Var alpha_y = rate(vars.at("alpha_raw_y"), s.head.decay);
    const Var exponent = add(mul(alpha_x, t.constant(xs)), mul(alpha_y, t.constant(ys)));
    const Var d_q = exp(scale(exponent, -1.0));
    const Var d_k = exp(exponent);

    const Var q_tilde = mul(taped_features(t, vars.at("q"), s, vars, 'q'), d_q);
    const Var k_tilde = mul(taped_features(t, vars.at("k"), s, vars, 'k'), d_k);
    const Var k_t = transpose(k_tilde);
    const Var numerator = matmul(q_tilde, matmul(k_t, vars.at("v")));
    const Var denominator = matmul(q_tilde, matmul(k_t, t.constant(Matrix::Ones(n, 1))));
    const Var out = div(numerator, denominator);
    return sum(mul(out, t.constant(s.loss_weights)));
}

double head_loss(const HeadProblem& p, const ParamMap& params) {
    const HeadProblem q = with_parameters(p, params);
    return attention::psla_rank1(q.batch, q.head).cwiseProduct(q.loss_weights).sum();
}

ParamMap head_loss_gradient(const HeadProblem& p, const ParamMap& params) {
    Tape tape;
    std::map<std::string, Var> vars;
    for (const auto& [name, value] : params) {
        vars.emplace(name, tape.variable(name, value));
    }
    return tape.backward(taped_head_loss(tape, p, vars));
}

GradReport check_head_gradients(const HeadProblem& p, const GradTolerance& tol) {
    return check_gradients([&](const ParamMap& m) { return head_loss(p, m); },
                           [&](const ParamMap& m) { return head_loss_gradient(p, m); }, head_parameters(p), tol);
}

}  // namespace physprior::autodiff
