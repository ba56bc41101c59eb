#pragma once

#include <cmath>

#include <Eigen/Eigenvalues>

#include "adagad/graph.hpp"

namespace adagad {

/// Attribute, structural, and total anomaly magnitude of a graph. The total
/// is always the sum of the two constituents, never computed independently.
struct AnomalyMagnitudes {
    double attribute = 0.0;   // Rayleigh energy of the attribute signal
    double structural = 0.0;  // Rayleigh energy of the degree signal
    double graph() const { return attribute + structural; }
};

namespace detail {

// y^T L y = sum over edges (y_u - y_v)^2 for L = D - A; generalizes to
// multi-column signals as trace(Y^T L Y) = sum over edges ||y_u - y_v||^2.
inline double laplacian_quadratic(const Graph& g, const Matrix& Y) {
    double acc = 0.0;
    for (const auto& [u, v] : g.edges()) acc += (Y.row(u) - Y.row(v)).squaredNorm();
    return acc;
}

inline double rayleigh(const Graph& g, const Matrix& Y, const char* what) {
    const double denom = Y.squaredNorm();
    if (denom <= 0.0)
        throw DegenerateSignalError(std::string("zero-norm signal in ") + what);
    return laplacian_quadratic(g, Y) / denom;
}

}  // namespace detail

/// Rayleigh quotient y^T L y / y^T y of a length-n signal.
inline double high_frequency_area(const Graph& g, const Vector& y) {
    require(y.size() == g.num_nodes(), "signal length must equal node count");
    return detail::rayleigh(g, y, "high_frequency_area");
}

/// trace(X^T L X) / trace(X^T X) — the multi-column generalization of the
/// attribute energy; reduces to high_frequency_area for d = 1.
inline double attribute_anomaly_magnitude(const Graph& g) {
    return detail::rayleigh(g, g.attributes(), "attribute_anomaly_magnitude");
}

/// Rayleigh quotient of the degree vector. Zero for any regular graph.
inline double structural_anomaly_magnitude(const Graph& g) {
    if (g.num_edges() == 0)
        throw DegenerateSignalError("structural magnitude undefined on an empty edge set");
    Vector d(g.num_nodes());
    for (int i = 0; i < g.num_nodes(); ++i) d[i] = g.degree(i);
    return detail::rayleigh(g, d, "structural_anomaly_magnitude");
}

inline AnomalyMagnitudes graph_anomaly_magnitude(const Graph& g) {
    AnomalyMagnitudes m;
    m.attribute = attribute_anomaly_magnitude(g);
    m.structural = structural_anomaly_magnitude(g);
    return m;
}

/// Full spectrum of L with the normalized graph-Fourier energies of a signal.
/// Diagnostic only — dense eigendecomposition, guarded to small graphs.
struct SpectralEnergy {
    Vector eigenvalues;  // ascending
    Vector energies;     // squared Fourier coefficients, normalized to sum 1
};

inline SpectralEnergy spectral_energy(const Graph& g, const Vector& y,
                                      int max_nodes = 4096) {
    const int n = g.num_nodes();
    require(y.size() == n, "signal length must equal node count");
    if (n > max_nodes)
        throw ValidationError("graph too large for dense eigendecomposition");
    const double total = y.squaredNorm();
    if (total <= 0.0) throw DegenerateSignalError("zero-norm signal in spectral_energy");

    Eigen::SelfAdjointEigenSolver<Matrix> solver(dense_laplacian(g));
    SpectralEnergy out;
    out.eigenvalues = solver.eigenvalues();
    const Vector coeffs = solver.eigenvectors().transpose() * y;
    out.energies = coeffs.array().square() / total;
    return out;
}

}  // namespace adagad
