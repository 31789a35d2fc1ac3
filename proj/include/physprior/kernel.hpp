#pragma once

// Geometric primitives shared by the attention bias and the shaping
// potentials: normalized chip coordinates, Manhattan distance, the separable
// exponential decay kernel, and the bounded decay-rate reparameterization.

#include <Eigen/Core>

#include <span>
#include <utility>

namespace physprior::kernel {

/// Normalized chip coordinate. Both components lie in [0, 1]; the
/// constructor throws std::invalid_argument otherwise.
class Coord2D {
public:
    Coord2D() = default;
    Coord2D(double x, double y);

    double x() const { return x_; }
    double y() const { return y_; }

    friend bool operator==(const Coord2D&, const Coord2D&) = default;

private:
    double x_ = 0.0;
    double y_ = 0.0;
};

/// Per-direction decay constants, per unit of normalized distance.
/// Strictly positive; a vanishing rate is represented by a tiny positive value.
class DecayRates {
public:
    DecayRates(double alpha_x, double alpha_y);

    double alpha_x() const { return alpha_x_; }
    double alpha_y() const { return alpha_y_; }

private:
    double alpha_x_;
    double alpha_y_;
};

/// Unbounded learnable decay parameters mapped into (alpha_min, alpha_max)
/// through a sigmoid.
struct DecayParams {
    double alpha_raw_x = 0.0;
    double alpha_raw_y = 0.0;
    double alpha_min = 1.2;
    double alpha_max = 1.8;

    /// Throws std::invalid_argument unless 0 <= alpha_min < alpha_max, both finite.
    void validate() const;
};

double sigmoid(double z);

/// Cell (col, row) of a W x H grid maps to its cell center
/// ((col + 0.5) / W, (row + 0.5) / H).
Coord2D cell_center(int col, int row, int width, int height);

/// Cell index `row * width + col` to its center coordinate.
Coord2D cell_center(int index, int width, int height);

double manhattan_distance(const Coord2D& a, const Coord2D& b);

/// exp(-alpha_x |dx| - alpha_y |dy|).
double decay_weight(const Coord2D& a, const Coord2D& b, const DecayRates& r);

/// alpha = alpha_min + (alpha_max - alpha_min) * sigmoid(alpha_raw), kept
/// strictly inside the open interval even when the sigmoid saturates.
DecayRates reparameterize(const DecayParams& p);

/// Derivative of a reparameterized rate with respect to its raw parameter.
double reparameterize_derivative(double alpha_raw, double alpha_min, double alpha_max);

/// Per-token factors with d_q[i] * d_k[j] = exp(alpha_x (x_j - x_i) + alpha_y (y_j - y_i)).
std::pair<Eigen::VectorXd, Eigen::VectorXd> bias_factors(std::span<const Coord2D> positions,
                                                         const DecayRates& r);

}  // namespace physprior::kernel
