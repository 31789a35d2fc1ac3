#include "physprior/shaping.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <unordered_map>

namespace physprior::shaping {

using kernel::manhattan_distance;

void PotentialSpec::validate() const {
    if (!(alpha > 0.0) || !std::isfinite(alpha)) throw std::invalid_argument("shaping: alpha must be positive");
    if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw std::invalid_argument("shaping: lambda must be non-negative");
    if (kind != PotentialKind::dpp) {
        if (nets.empty()) throw std::invalid_argument("shaping: net potentials need nets");
        for (const auto& n : nets)
            if (!(n.weight > 0.0)) throw std::invalid_argument("shaping: net weights must be positive");
    }
}

double phi_dpp(std::span<const Coord2D> placed, const Coord2D& probe, double alpha, double lambda) {
    double attract = 0.0, disperse = 0.0;
    for (size_t i = 0; i < placed.size(); ++i) {
        attract += std::exp(-alpha * manhattan_distance(placed[i], probe));
        for (size_t j = i + 1; j < placed.size(); ++j)
            disperse += std::exp(-alpha * manhattan_distance(placed[i], placed[j]));
    }
    return attract - lambda * disperse;
}

namespace {

void require_kind(const PotentialSpec& spec, PotentialKind k) {
    if (spec.kind != k) throw std::invalid_argument("shaping: potential kind mismatch");
    spec.validate();
}

Coord2D center(const dpp::DppInstance& inst, int cell) {
    return kernel::cell_center(cell, inst.width, inst.height);
}

}  // namespace

double phi_dpp_set(const dpp::DppInstance& inst, std::span<const int> cells, const PotentialSpec& spec) {
    require_kind(spec, PotentialKind::dpp);
    std::vector<Coord2D> pts;
    pts.reserve(cells.size());
    for (int c : cells) pts.push_back(center(inst, c));
    return phi_dpp(pts, center(inst, inst.probe), spec.alpha, spec.lambda);
}

double phi_dpp(const dpp::PlacementState& s, const PotentialSpec& spec) {
    require_kind(spec, PotentialKind::dpp);
    if (spec.terminal_zeroed && s.terminal()) return 0.0;
    return phi_dpp_set(s.instance(), s.placed(), spec);
}

double delta_phi(const dpp::PlacementState& s, int action, const PotentialSpec& spec) {
    require_kind(spec, PotentialKind::dpp);
    const auto& inst = s.instance();
    if (s.terminal()) throw std::logic_error("shaping: no actions in a terminal state");
    if (action < 0 || action >= inst.cells() || inst.is_blocked(action) || s.contains(action))
        throw std::invalid_argument("shaping: illegal action");
    const Coord2D a = center(inst, action);
    double pair = 0.0;
    for (int c : s.placed()) pair += std::exp(-spec.alpha * manhattan_distance(a, center(inst, c)));
    return std::exp(-spec.alpha * manhattan_distance(a, center(inst, inst.probe))) - spec.lambda * pair;
}

namespace {

std::vector<Coord2D> placed_pins(const Placed& pins, const Net& net) {
    std::vector<Coord2D> out;
    for (int p : net.pins) {
        if (p < 0 || p >= static_cast<int>(pins.size()))
            throw std::invalid_argument("shaping: net pin out of range");
        if (pins[p]) out.push_back(*pins[p]);
    }
    return out;
}

double hpwl(const std::vector<Coord2D>& pts) {
    if (pts.size() < 2) return 0.0;
    double x0 = pts[0].x(), x1 = x0, y0 = pts[0].y(), y1 = y0;
    for (const auto& p : pts) {
        x0 = std::min(x0, p.x());
        x1 = std::max(x1, p.x());
        y0 = std::min(y0, p.y());
        y1 = std::max(y1, p.y());
    }
    return (x1 - x0) + (y1 - y0);
}

}  // namespace

double phi_connectivity(const Placed& pins, const PotentialSpec& spec) {
    require_kind(spec, PotentialKind::connectivity);
    double total = 0.0;
    for (const auto& net : spec.nets) {
        const auto pts = placed_pins(pins, net);
        double s = 0.0;
        for (size_t i = 0; i < pts.size(); ++i)
            for (size_t j = i + 1; j < pts.size(); ++j)
                s += std::exp(-spec.alpha * manhattan_distance(pts[i], pts[j]));
        total += net.weight * s;
    }
    return total;
}

double phi_hpwl(const Placed& pins, const PotentialSpec& spec) {
    require_kind(spec, PotentialKind::hpwl);
    double total = 0.0;
    for (const auto& net : spec.nets) total += net.weight * hpwl(placed_pins(pins, net));
    return -total;
}

GapBound conn_hpwl_gap(const Placed& pins, const PotentialSpec& spec) {
    PotentialSpec conn = spec, wl = spec;
    conn.kind = PotentialKind::connectivity;
    wl.kind = PotentialKind::hpwl;
    double wsum = 0.0, bound = 0.0;
    for (const auto& net : spec.nets) {
        if (net.pins.size() != 2) throw std::invalid_argument("conn_hpwl_gap: nets must have two pins");
        const auto pts = placed_pins(pins, net);
        if (pts.size() != 2) throw std::invalid_argument("conn_hpwl_gap: both pins must be placed");
        const double d = manhattan_distance(pts[0], pts[1]);
        wsum += net.weight;
        bound += net.weight * spec.alpha * spec.alpha * d * d / 2.0;
    }
    // phi_hpwl is already negated
    const double gap = std::abs(phi_connectivity(pins, conn) - wsum - spec.alpha * phi_hpwl(pins, wl));
    return {gap, bound};
}

void BetaSchedule::validate() const {
    if (!(beta_min >= 0.0) || !(beta_init >= beta_min) || !std::isfinite(beta_init))
        throw std::invalid_argument("shaping: need beta_init >= beta_min >= 0");
    if (t_anneal < 1) throw std::invalid_argument("shaping: t_anneal must be >= 1");
}

double beta_at(const BetaSchedule& sched, long t) {
    sched.validate();
    if (t < 0) throw std::invalid_argument("beta_at: t must be non-negative");
    if (t == 0) return sched.beta_init;
    if (t >= sched.t_anneal) return sched.beta_min;
    const double w = 2 * t == sched.t_anneal
                         ? 0.5
                         : 0.5 * (1.0 + std::cos(std::numbers::pi * static_cast<double>(t) / sched.t_anneal));
    return sched.beta_min + (sched.beta_init - sched.beta_min) * w;
}

double telescoping_residual(std::span<const double> phi, double gamma) {
    if (phi.empty()) throw std::invalid_argument("telescoping_residual: no potentials");
    const size_t T = phi.size() - 1;
    double sum = 0.0, g = 1.0;
    for (size_t t = 0; t < T; ++t) {
        sum += g * (gamma * phi[t + 1] - phi[t]);
        g *= gamma;
    }
    return sum - (g * phi[T] - phi[0]);
}

double telescoping_residual(const dpp::Trajectory& traj, std::span<const double> phi, double gamma) {
    if (phi.size() != traj.states.size() || traj.states.size() != traj.actions.size() + 1)
        throw std::invalid_argument("telescoping_residual: length mismatch");
    return telescoping_residual(phi, gamma);
}

namespace {

struct Values {
    double v;
    double v_shaped;
};

}  // namespace

QCheck shaped_q_check(const dpp::DppInstance& inst, const SetPotential& phi, bool terminal_zeroed,
                      double gamma, double beta, dpp::RewardCache* cache) {
    inst.validate();
    if (!(gamma > 0.0 && gamma <= 1.0)) throw std::invalid_argument("shaped_q_check: gamma must lie in (0, 1]");
    if (inst.cells() > 64) throw std::invalid_argument("shaped_q_check: grid too large");
    std::vector<int> free;
    for (int c = 0; c < inst.cells(); ++c)
        if (!inst.is_blocked(c)) free.push_back(c);
    double count = 0.0;
    for (int j = 0; j <= inst.k_caps; ++j) count += dpp::binomial(static_cast<int>(free.size()), j);
    if (count > kStateGuard) throw std::invalid_argument("shaped_q_check: state count exceeds guard");

    auto owned = std::make_shared<const dpp::DppInstance>(inst);
    dpp::RewardCache local(owned);
    dpp::RewardCache& rewards = cache ? *cache : local;

    auto cells_of = [&](std::uint64_t mask) {
        std::vector<int> out;
        for (int c = 0; c < inst.cells(); ++c)
            if (mask >> c & 1u) out.push_back(c);
        return out;
    };
    auto potential = [&](std::uint64_t mask, bool terminal) {
        return terminal && terminal_zeroed ? 0.0 : phi(cells_of(mask));
    };

    QCheck out;
    std::unordered_map<std::uint64_t, Values> memo;
    std::function<Values(std::uint64_t, int)> solve = [&](std::uint64_t mask, int depth) -> Values {
        if (depth == inst.k_caps) return {0.0, 0.0};
        if (auto it = memo.find(mask); it != memo.end()) return it->second;
        const double phi_s = potential(mask, false);
        std::vector<double> q, qs;
        for (int a : free) {
            if (mask >> a & 1u) continue;
            const std::uint64_t next = mask | (std::uint64_t{1} << a);
            const bool term = depth + 1 == inst.k_caps;
            const double r = term ? rewards(cells_of(next)) : 0.0;
            const Values nv = solve(next, depth + 1);
            const double qa = r + gamma * nv.v;
            const double qsa = r + beta * (gamma * potential(next, term) - phi_s) + gamma * nv.v_shaped;
            q.push_back(qa);
            qs.push_back(qsa);
            out.max_deviation = std::max(out.max_deviation, std::abs(qsa - (qa - beta * phi_s)));
        }
        auto greedy = [](const std::vector<double>& v) {
            const double m = *std::max_element(v.begin(), v.end());
            const double tol = 1e-9 * std::max(1.0, std::abs(m));
            for (size_t i = 0; i < v.size(); ++i)
                if (v[i] >= m - tol) return i;
            return v.size();
        };
        if (greedy(q) != greedy(qs)) out.greedy_identical = false;
        const Values res{*std::max_element(q.begin(), q.end()), *std::max_element(qs.begin(), qs.end())};
        memo.emplace(mask, res);
        ++out.states;
        return res;
    };
    solve(0, 0);
    return out;
}

QCheck shaped_q_check(const dpp::DppInstance& inst, const PotentialSpec& spec, double gamma, double beta,
                      dpp::RewardCache* cache) {
    require_kind(spec, PotentialKind::dpp);
    auto phi = [&](const std::vector<int>& cells) { return phi_dpp_set(inst, cells, spec); };
    return shaped_q_check(inst, phi, spec.terminal_zeroed, gamma, beta, cache);
}

}  // namespace physprior::shaping
