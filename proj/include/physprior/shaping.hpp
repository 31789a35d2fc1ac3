#pragma once

// Potential functions over placements and the potential-based reward transform.

#include "physprior/dpp.hpp"
#include "physprior/kernel.hpp"

#include <functional>
#include <optional>
#include <span>
#include <vector>

namespace physprior::shaping {

using kernel::Coord2D;

enum class PotentialKind { dpp, connectivity, hpwl };

struct Net {
    double weight = 1.0;
    std::vector<int> pins;  // indices into the coordinate list
};

struct PotentialSpec {
    PotentialKind kind = PotentialKind::dpp;
    double alpha = 1.5;
    double lambda = 0.5;
    std::vector<Net> nets;
    bool terminal_zeroed = false;

    void validate() const;
};

/// sum_i exp(-alpha d(i, probe)) - lambda sum_{i<j} exp(-alpha d(i, j)).
double phi_dpp(std::span<const Coord2D> placed, const Coord2D& probe, double alpha, double lambda);

/// Potential of a placement state using normalized cell centers. Zero on
/// terminal states when spec.terminal_zeroed is set.
double phi_dpp(const dpp::PlacementState& s, const PotentialSpec& spec);

/// Potential of a placed set (sorted cell indices) on an instance.
double phi_dpp_set(const dpp::DppInstance& inst, std::span<const int> cells, const PotentialSpec& spec);

/// phi(s + a) - phi(s) in O(|placed|), ignoring terminal zeroing.
double delta_phi(const dpp::PlacementState& s, int action, const PotentialSpec& spec);

using Placed = std::vector<std::optional<Coord2D>>;

/// sum_e w_e sum over placed pin pairs of exp(-alpha d).
double phi_connectivity(const Placed& pins, const PotentialSpec& spec);

/// -sum_e w_e HPWL_e over placed pins.
double phi_hpwl(const Placed& pins, const PotentialSpec& spec);

struct GapBound {
    double gap;
    double bound;
};

/// |phi_conn - sum w_e + alpha sum w_e HPWL_e| and its second-order bound
/// sum w_e alpha^2 d_e^2 / 2. Two-pin nets with both pins placed only.
GapBound conn_hpwl_gap(const Placed& pins, const PotentialSpec& spec);

struct BetaSchedule {
    double beta_init = 1.0;
    double beta_min = 0.0;
    int t_anneal = 1;

    void validate() const;
};

/// Cosine annealing from beta_init at t = 0 to beta_min at t >= t_anneal.
double beta_at(const BetaSchedule& sched, long t);

inline double shape_reward(double r, double phi_s, double phi_next, double gamma, double beta) {
    return r + beta * (gamma * phi_next - phi_s);
}

/// sum_t gamma^t (gamma phi_{t+1} - phi_t) - (gamma^T phi_T - phi_0).
/// phi holds one value per state, T + 1 in total.
double telescoping_residual(std::span<const double> phi, double gamma);

/// Same, checked against a trajectory's state count.
double telescoping_residual(const dpp::Trajectory& traj, std::span<const double> phi, double gamma);

using SetPotential = std::function<double(const std::vector<int>& sorted_cells)>;

struct QCheck {
    double max_deviation = 0.0;   // max |Q'(s,a) - (Q(s,a) - beta phi(s))|
    bool greedy_identical = true; // same argmax at every non-terminal state
    long states = 0;
};

inline constexpr long kStateGuard = 100000;

/// Exact Q and shaped Q' by backward induction over placed sets. `phi` is
/// evaluated on non-terminal sets; terminal sets use 0 when terminal_zeroed.
QCheck shaped_q_check(const dpp::DppInstance& inst, const SetPotential& phi, bool terminal_zeroed,
                      double gamma, double beta = 1.0, dpp::RewardCache* cache = nullptr);

QCheck shaped_q_check(const dpp::DppInstance& inst, const PotentialSpec& spec, double gamma,
                      double beta = 1.0, dpp::RewardCache* cache = nullptr);

}  // namespace physprior::shaping
