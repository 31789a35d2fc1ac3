#include "physprior/pdn.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>
#include <stdexcept>

namespace physprior::pdn {

namespace {

constexpr double kMinRcond = 1e-14;

double omega(double f) { return 2.0 * std::numbers::pi * f; }

void check_node(const MeshPdnSpec& spec, int node) {
    if (node < 0 || node >= spec.nodes())
        throw std::invalid_argument("pdn: node index out of range");
}

}  // namespace

void MeshPdnSpec::validate() const {
    if (width < 2 || height < 2)
        throw std::invalid_argument("pdn: mesh must be at least 2x2");
    for (double v : {r_seg, l_seg, c_node, g_node})
        if (!(v > 0.0) || !std::isfinite(v))
            throw std::invalid_argument("pdn: electrical values must be positive and finite");
}

void FrequencyBand::validate() const {
    if (!(f_min > 0.0) || !(f_max > f_min) || !std::isfinite(f_max))
        throw std::invalid_argument("pdn: band requires 0 < f_min < f_max");
    if (n_points < 2) throw std::invalid_argument("pdn: band needs at least 2 points");
}

std::vector<double> FrequencyBand::points() const {
    validate();
    std::vector<double> out(n_points);
    const double lo = std::log(f_min), hi = std::log(f_max);
    for (int i = 0; i < n_points; ++i)
        out[i] = std::exp(lo + (hi - lo) * i / (n_points - 1));
    out.front() = f_min;
    out.back() = f_max;
    return out;
}

double FrequencyBand::geometric_mean() const { return std::sqrt(f_min * f_max); }

void CapacitorModel::validate() const {
    if (!(c_val > 0.0) || !std::isfinite(c_val))
        throw std::invalid_argument("pdn: capacitor c_val must be positive");
    if (!(esr >= 0.0) || !(esl >= 0.0) || !std::isfinite(esr) || !std::isfinite(esl))
        throw std::invalid_argument("pdn: capacitor esr and esl must be non-negative");
}

Complex CapacitorModel::admittance(double f) const {
    const double w = omega(f);
    const Complex z(esr, w * esl - 1.0 / (w * c_val));
    return 1.0 / z;
}

ComplexMatrix build_admittance(const MeshPdnSpec& spec, double f,
                               const std::vector<Placement>& placements) {
    spec.validate();
    if (!(f > 0.0) || !std::isfinite(f)) throw std::invalid_argument("pdn: frequency must be positive");
    const int n = spec.nodes();
    const double w = omega(f);
    const Complex ys = 1.0 / Complex(spec.r_seg, w * spec.l_seg);
    const Complex yn(spec.g_node, w * spec.c_node);

    ComplexMatrix y = ComplexMatrix::Zero(n, n);
    auto link = [&](int a, int b) {
        y(a, a) += ys;
        y(b, b) += ys;
        y(a, b) -= ys;
        y(b, a) -= ys;
    };
    for (int r = 0; r < spec.height; ++r) {
        for (int c = 0; c < spec.width; ++c) {
            const int i = r * spec.width + c;
            y(i, i) += yn;
            if (c + 1 < spec.width) link(i, i + 1);
            if (r + 1 < spec.height) link(i, i + spec.width);
        }
    }

    std::vector<int> seen;
    for (const auto& [node, cap] : placements) {
        check_node(spec, node);
        if (std::find(seen.begin(), seen.end(), node) != seen.end())
            throw std::invalid_argument("pdn: duplicate placement node");
        seen.push_back(node);
        cap.validate();
        y(node, node) += cap.admittance(f);
    }
    return y;
}

ComplexMatrix kron_reduce(const ComplexMatrix& y, const std::vector<int>& probe_nodes) {
    const int n = static_cast<int>(y.rows());
    if (y.cols() != n) throw std::invalid_argument("kron_reduce: matrix must be square");
    if (probe_nodes.empty()) throw std::invalid_argument("kron_reduce: empty probe set");
    std::vector<char> is_probe(n, 0);
    for (int p : probe_nodes) {
        if (p < 0 || p >= n) throw std::invalid_argument("kron_reduce: probe index out of range");
        if (is_probe[p]) throw std::invalid_argument("kron_reduce: duplicate probe index");
        is_probe[p] = 1;
    }
    std::vector<int> internal;
    for (int i = 0; i < n; ++i)
        if (!is_probe[i]) internal.push_back(i);

    const int np = static_cast<int>(probe_nodes.size());
    const int nc = static_cast<int>(internal.size());
    ComplexMatrix ypp = y(probe_nodes, probe_nodes);
    if (nc > 0) {
        ComplexMatrix ycc = y(internal, internal);
        ComplexMatrix ycp = y(internal, probe_nodes);
        ComplexMatrix ypc = y(probe_nodes, internal);
        Eigen::PartialPivLU<ComplexMatrix> lu(ycc);
        const double rc = lu.rcond();
        if (!(rc > kMinRcond)) {
            std::ostringstream msg;
            msg << "kron_reduce: internal block singular (rcond estimate " << rc
                << ", condition ~" << (rc > 0 ? 1.0 / rc : INFINITY) << ")";
            throw std::runtime_error(msg.str());
        }
        ypp -= ypc * lu.solve(ycp);
    }
    Eigen::PartialPivLU<ComplexMatrix> lu(ypp);
    if (!(lu.rcond() > kMinRcond))
        throw std::runtime_error("kron_reduce: reduced port matrix singular");
    return lu.solve(ComplexMatrix::Identity(np, np));
}

Eigen::VectorXcd impedance_column(const MeshPdnSpec& spec, double f, int probe) {
    check_node(spec, probe);
    const ComplexMatrix y = build_admittance(spec, f);
    Eigen::VectorXcd e = Eigen::VectorXcd::Zero(spec.nodes());
    e(probe) = 1.0;
    return y.partialPivLu().solve(e);
}

Complex transfer_impedance(const MeshPdnSpec& spec, double f, int source, int probe) {
    check_node(spec, source);
    check_node(spec, probe);
    // Always solve from the smaller index so Z(i,j) and Z(j,i) are bit-identical.
    const int lo = std::min(source, probe), hi = std::max(source, probe);
    return impedance_column(spec, f, lo)(hi);
}

Complex probe_impedance(const MeshPdnSpec& spec, double f, int probe,
                        const std::vector<Placement>& placements) {
    check_node(spec, probe);
    return kron_reduce(build_admittance(spec, f, placements), {probe})(0, 0);
}

double dpp_reward(const MeshPdnSpec& spec, const std::vector<Placement>& placements,
                  const FrequencyBand& band, int probe) {
    if (placements.empty()) return 0.0;
    // Sort so the result does not depend on list order.
    std::vector<Placement> sorted = placements;
    std::sort(sorted.begin(), sorted.end(),
              [](const Placement& a, const Placement& b) { return a.first < b.first; });
    double total = 0.0;
    for (double f : band.points()) {
        const double z0 = std::abs(probe_impedance(spec, f, probe, {}));
        const double z1 = std::abs(probe_impedance(spec, f, probe, sorted));
        total += (z0 - z1) / f * 1e9;
    }
    return total;
}

double dpp_reward(const MeshPdnSpec& spec, const std::vector<int>& cells,
                  const CapacitorModel& cap, const FrequencyBand& band, int probe) {
    std::vector<Placement> placements;
    placements.reserve(cells.size());
    for (int c : cells) placements.emplace_back(c, cap);
    return dpp_reward(spec, placements, band, probe);
}

int grid_manhattan(int width, int a, int b) {
    return std::abs(a % width - b % width) + std::abs(a / width - b / width);
}

DecayFit fit_decay(const MeshPdnSpec& spec, double f, int probe) {
    if (spec.width < 4 || spec.height < 4)
        throw std::invalid_argument("fit_decay: mesh must be at least 4x4");
    const Eigen::VectorXcd z = impedance_column(spec, f, probe);
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    int n = 0;
    std::vector<std::pair<double, double>> pts;
    for (int i = 0; i < spec.nodes(); ++i) {
        if (i == probe) continue;
        const double x = grid_manhattan(spec.width, i, probe);
        const double yv = std::log(std::abs(z(i)));
        pts.emplace_back(x, yv);
        sx += x; sy += yv; sxx += x * x; sxy += x * yv;
        ++n;
    }
    const double mx = sx / n, my = sy / n;
    const double vxx = sxx / n - mx * mx;
    DecayFit out;
    out.slope = (sxy / n - mx * my) / vxx;
    out.intercept = my - out.slope * mx;
    double ss_res = 0, ss_tot = 0;
    for (auto [x, yv] : pts) {
        const double e = yv - (out.intercept + out.slope * x);
        ss_res += e * e;
        ss_tot += (yv - my) * (yv - my);
    }
    out.r_squared = ss_tot > 0 ? 1.0 - ss_res / ss_tot : 1.0;
    return out;
}

}  // namespace physprior::pdn
