#pragma once

// One rank-1 biased attention head expressed on the tape, so that every
// learnable quantity (Q, K, V, the raw decay rates, gate and pre-map
// normalization parameters) receives an analytic gradient.

#include "physprior/attention.hpp"
#include "physprior/autodiff.hpp"

namespace physprior::autodiff {

/// A scalar training-style objective: loss = sum(out (.) loss_weights)
/// where out is the head's rank-1 output.
struct HeadProblem {
    attention::AttentionBatch batch;
    attention::HeadConfig head;
    Matrix loss_weights;  // L x d_v
};

/// Flattens every learnable quantity of the problem. Vectors become 1 x n rows.
/// Names: q, k, v, alpha_raw_x, alpha_raw_y, gate_{q,k}.{w1,b1,w2,b2},
/// norm_{q,k}.{weight,bias}.
ParamMap head_parameters(const HeadProblem& p);

/// Inverse of head_parameters: returns a copy of `p` with the values replaced.
HeadProblem with_parameters(const HeadProblem& p, const ParamMap& params);

/// Records the head forward pass and the loss on `tape`.
Var taped_head_loss(Tape& tape, const HeadProblem& structure, const std::map<std::string, Var>& vars);

/// Loss evaluated through attention::psla_rank1 (no tape).
double head_loss(const HeadProblem& p, const ParamMap& params);

/// Analytic gradient of head_loss via the tape.
ParamMap head_loss_gradient(const HeadProblem& p, const ParamMap& params);

GradReport check_head_gradients(const HeadProblem& p, const GradTolerance& tol = {});

}  // namespace physprior::autodiff
