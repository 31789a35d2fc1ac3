#include "physprior/kernel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace physprior::kernel {

Coord2D::Coord2D(double x, double y) : x_(x), y_(y) {
    if (!(x >= 0.0 && x <= 1.0) || !(y >= 0.0 && y <= 1.0)) {
        throw std::invalid_argument("Coord2D: coordinate (" + std::to_string(x) + ", " +
                                    std::to_string(y) + ") outside the unit square");
    }
}

DecayRates::DecayRates(double alpha_x, double alpha_y) : alpha_x_(alpha_x), alpha_y_(alpha_y) {
    if (!(alpha_x > 0.0) || !(alpha_y > 0.0) || !std::isfinite(alpha_x) || !std::isfinite(alpha_y)) {
        throw std::invalid_argument("DecayRates: rates must be finite and positive");
    }
}

void DecayParams::validate() const {
    if (!std::isfinite(alpha_min) || !std::isfinite(alpha_max) || !(alpha_min < alpha_max) ||
        alpha_min < 0.0) {
        throw std::invalid_argument("DecayParams: need finite 0 <= alpha_min < alpha_max");
    }
    if (std::isnan(alpha_raw_x) || std::isnan(alpha_raw_y)) {
        throw std::invalid_argument("DecayParams: raw rate is NaN");
    }
}

double sigmoid(double z) {
    if (z >= 0.0) {
        return 1.0 / (1.0 + std::exp(-z));
    }
    const double e = std::exp(z);
    return e / (1.0 + e);
}

Coord2D cell_center(int col, int row, int width, int height) {
    if (width < 1 || height < 1 || col < 0 || col >= width || row < 0 || row >= height) {
        throw std::invalid_argument("cell_center: cell outside grid");
    }
    return {(col + 0.5) / width, (row + 0.5) / height};
}

Coord2D cell_center(int index, int width, int height) {
    if (width < 1 || index < 0) {
        throw std::invalid_argument("cell_center: bad cell index");
    }
    return cell_center(index % width, index / width, width, height);
}

double manhattan_distance(const Coord2D& a, const Coord2D& b) {
    return std::abs(a.x() - b.x()) + std::abs(a.y() - b.y());
}

double decay_weight(const Coord2D& a, const Coord2D& b, const DecayRates& r) {
    return std::exp(-r.alpha_x() * std::abs(a.x() - b.x()) - r.alpha_y() * std::abs(a.y() - b.y()));
}

namespace {

double bounded_rate(double raw, double lo, double hi) {
    const double v = lo + (hi - lo) * sigmoid(raw);
    // The open interval must hold even once the sigmoid rounds to 0 or 1.
    const double inner_lo = std::nextafter(lo, hi);
    const double inner_hi = std::nextafter(hi, lo);
    return std::min(std::max(v, inner_lo), inner_hi);
}

}  // namespace

DecayRates reparameterize(const DecayParams& p) {
    p.validate();
    return {bounded_rate(p.alpha_raw_x, p.alpha_min, p.alpha_max),
            bounded_rate(p.alpha_raw_y, p.alpha_min, p.alpha_max)};
}

double reparameterize_derivative(double alpha_raw, double alpha_min, double alpha_max) {
    const double s = sigmoid(alpha_raw);
    return (alpha_max - alpha_min) * s * (1.0 - s);
}

std::pair<Eigen::VectorXd, Eigen::VectorXd> bias_factors(std::span<const Coord2D> positions,
                                                         const DecayRates& r) {
    const auto n = static_cast<Eigen::Index>(positions.size());
    Eigen::VectorXd d_q(n);
    Eigen::VectorXd d_k(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto& p = positions[static_cast<size_t>(i)];
        const double s = r.alpha_x() * p.x() + r.alpha_y() * p.y();
        d_q[i] = std::exp(-s);
        d_k[i] = std::exp(s);
    }
    return {std::move(d_q), std::move(d_k)};
}

}  // namespace physprior::kernel
