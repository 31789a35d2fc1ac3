#pragma once

// Frequency-domain power delivery network on a W x H lumped RLC mesh.
// Node index is row * width + col.

#include <Eigen/Dense>

#include <complex>
#include <utility>
#include <vector>

namespace physprior::pdn {

using Complex = std::complex<double>;
using ComplexMatrix = Eigen::MatrixXcd;

struct MeshPdnSpec {
    int width = 8;
    int height = 8;
    double r_seg = 0.5;     // ohm
    double l_seg = 1e-11;   // H
    double c_node = 1e-10;  // F
    double g_node = 0.5;    // S

    int nodes() const { return width * height; }
    /// Throws std::invalid_argument on a mesh smaller than 2x2 or a
    /// non-positive electrical value.
    void validate() const;
};

struct FrequencyBand {
    double f_min = 1e8;
    double f_max = 2e9;
    int n_points = 20;

    void validate() const;
    /// Log-spaced points, endpoints exact.
    std::vector<double> points() const;
    double geometric_mean() const;
};

struct CapacitorModel {
    double c_val = 1e-7;
    double esr = 1e-2;
    double esl = 1e-10;

    void validate() const;
    /// Series RLC branch admittance at frequency f.
    Complex admittance(double f) const;
};

using Placement = std::pair<int, CapacitorModel>;

/// Nodal admittance matrix at frequency f. Throws std::invalid_argument on
/// a non-positive frequency, an out-of-range node or a duplicated placement.
ComplexMatrix build_admittance(const MeshPdnSpec& spec, double f,
                               const std::vector<Placement>& placements = {});

/// Schur complement onto the probe ports, inverted: the port impedance matrix.
/// Throws std::runtime_error with a condition estimate when the internal block
/// is numerically singular.
ComplexMatrix kron_reduce(const ComplexMatrix& y, const std::vector<int>& probe_nodes);

/// Entry (probe, source) of Y(f)^-1 on the bare mesh. Reciprocal by construction.
Complex transfer_impedance(const MeshPdnSpec& spec, double f, int source, int probe);

/// Driving-point impedance at probe, Kron-reduced, with the given placements.
Complex probe_impedance(const MeshPdnSpec& spec, double f, int probe,
                        const std::vector<Placement>& placements);

/// sum_f (|Z_init(f)| - |Z_final(f)|) / f * 1e9.
double dpp_reward(const MeshPdnSpec& spec, const std::vector<Placement>& placements,
                  const FrequencyBand& band, int probe);

/// Same reward with every placement using one capacitor model.
double dpp_reward(const MeshPdnSpec& spec, const std::vector<int>& cells,
                  const CapacitorModel& cap, const FrequencyBand& band, int probe);

struct DecayFit {
    double slope = 0.0;
    double intercept = 0.0;
    double r_squared = 0.0;
};

/// OLS of ln|Z(i, probe)| against grid Manhattan distance over all i != probe.
DecayFit fit_decay(const MeshPdnSpec& spec, double f, int probe);

/// One column of Y(f)^-1: transfer impedance from every node to probe.
Eigen::VectorXcd impedance_column(const MeshPdnSpec& spec, double f, int probe);

int grid_manhattan(int width, int a, int b);

}  // namespace physprior::pdn
