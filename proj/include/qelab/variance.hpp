// Quantum variances, the bounded-range discrepancy of the adjacency theorem and
// the diagnostics of the non-backtracking (zeta-weighted) variant.
#pragma once

#include <Eigen/Dense>
#include <Eigen/SparseCore>
#include <functional>
#include <optional>
#include <vector>

#include "qelab/kernels.hpp"
#include "qelab/spectral.hpp"

namespace qelab {

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
  bool contains(double x) const { return x >= lo && x <= hi; }
};

struct VarianceReport {
  double value = 0.0;          // mean of terms
  std::vector<double> terms;   // one per eigenfunction (zero outside the interval)
  std::optional<Interval> interval;
  double eta0 = 0.0;
};

// (1/N) sum_j |<psi_j, K_G psi_j>|^2.
VarianceReport quantum_variance(const EigenSystem& es, const NbKernel& k);

// ---- Bounded-range matrix kernels ------------------------------------------------
struct KernelEntry {
  Vertex x = 0;
  Vertex y = 0;
  Complex value = 0.0;
};

struct BoundedKernel {
  int n = 0;
  int range = 0;
  std::vector<KernelEntry> entries;  // K(x, y); absent pairs are zero

  Eigen::SparseMatrix<Complex> matrix() const;
};

// Diagonal a = chi_L - |L|/N with L the first N/2 vertices of a seeded permutation.
BoundedKernel centered_half_set(const Graph& g, std::uint64_t seed);
BoundedKernel identity_kernel(const Graph& g);
// Entries uniform in the unit disc on every pair at distance <= range.
BoundedKernel random_bounded(const Graph& g, int range, std::uint64_t seed);
// K(x, y) = 1 for every edge (range 1).
BoundedKernel nearest_neighbour(const Graph& g);

// Checks range and |K| <= 1; throws KernelError on violation.
void validate_bounded(const Graph& g, const BoundedKernel& k);

// <K>_lambda = (1/N) sum_{x,y} K(x, y) Phi(lambda, d(x, y)) on a regular graph.
Complex kernel_average(const Graph& g, const BoundedKernel& k, double lambda);

// Path lift: K_r(x_0; x_r) = K(x_0, x_r) on every path of B_r, r <= range.
NbKernel lift_kernel(std::shared_ptr<const DirectedEdgeSpace> space, const BoundedKernel& k);

struct QeReport {
  double discrepancy = 0.0;          // (1/N) sum_j |<psi_j, K psi_j> - <K>_{lambda_j}|^2
  std::vector<double> per_eigen;     // the summands
  double lifted_variance = 0.0;      // var(K_lift - sum_r <K_r> S_r)
  double lift_error = 0.0;           // |lifted_variance - discrepancy|, (BST) effect
  double commutator_residual = 0.0;  // max_j |<psi_j, ((nabla K)_G + (nabla* K)_G) psi_j>|
};

QeReport qe_discrepancy(const EigenSystem& es, std::shared_ptr<const DirectedEdgeSpace> space, const BoundedKernel& k);
// Discrepancy alone (no path lift), usable on large graphs.
double qe_discrepancy_value(const EigenSystem& es, const Graph& g, const BoundedKernel& k);

// ---- Zeta data on directed edges ------------------------------------------------------
// zeta[e] = zeta_{tail(e)}(head(e)); the reversed map iota zeta[e] = zeta[reverse(e)].
using ZetaProvider = std::function<Eigen::VectorXcd(Complex gamma)>;

// Root of q z^2 - gamma z + 1 = 0 on the physical branch (Im z < 0 off the real
// axis; the decaying root outside the bulk on the real axis).
Complex regular_tree_zeta(int q, Complex gamma);
ZetaProvider regular_zeta_provider(const DirectedEdgeSpace& d);

// f_j(x0, x1) = psi(x1) - zeta_{x0}(x1) psi(x0),  f*_j(x0, x1) = psi(x0) - zeta_{x1}(x0) psi(x1).
Eigen::VectorXcd nb_f(const DirectedEdgeSpace& d, const Eigen::VectorXcd& zeta, const Eigen::VectorXd& psi);
Eigen::VectorXcd nb_f_star(const DirectedEdgeSpace& d, const Eigen::VectorXcd& zeta, const Eigen::VectorXd& psi);

struct NbEigenvectorReport {
  std::vector<double> exact_residual;       // ||zeta B f - f + i eta0 zeta tau+ psi||
  std::vector<double> exact_residual_star;  // ||iota zeta B* f* - f* + i eta0 iota zeta tau- psi||
  std::vector<double> plain_residual;       // ||zeta B f - f||
  std::vector<double> plain_residual_star;  // ||iota zeta B* f* - f*||
  std::vector<double> tau_plus_norm;        // ||tau+ psi||
  std::vector<double> tau_minus_norm;       // ||tau- psi||
  double max_exact = 0.0;
};

// gamma_j = lambda_j + i eta0 for each eigenpair j in `indices` (all if empty).
NbEigenvectorReport nb_eigenvectors(const DirectedEdgeSpace& d, const EigenSystem& es, const ZetaProvider& zeta,
                                    double eta0, const std::vector<int>& indices = {});

// (1/N) sum_{lambda_j in I} |<f*_j, K_B f_j>|.
VarianceReport nb_quantum_variance(const DirectedEdgeSpace& d, const EigenSystem& es, const ZetaProvider& zeta,
                                   double eta0, const NbKernel& k, std::optional<Interval> interval = std::nullopt);

// ---- Weighted transfer operator ---------------------------------------------------------
// (S_gamma K)(x0; xk) = |z_{x1}(x0)|^2 / |Im z_{x1}(x0)| sum_{x-1} |Im z_{x0}(x-1)| K(x-1; x_{k-1}).
Eigen::SparseMatrix<double, Eigen::RowMajor> s_gamma_matrix(const DirectedEdgeSpace& d, const Eigen::VectorXcd& zeta, int k);

struct SGammaDiagnostics {
  double max_sum_rule_residual = 0.0;
  double max_row_sum_deviation = 0.0;  // against 1 - eta0 |z|^2 / |Im z|
  Eigen::VectorXd row_sums;            // grade k
  Eigen::VectorXcd theta;              // e^{i theta} on grade k
  double max_theta_modulus_error = 0.0;
  Eigen::VectorXcd c_gamma;            // -1 / (2 g(x0, xk)) on grade k
};

// gamma supplies eta0 = Im gamma (zero on the real axis) and the diagonal Green
// function used for C_gamma.
SGammaDiagnostics s_gamma_diagnostics(const DirectedEdgeSpace& d, Complex gamma, const Eigen::VectorXcd& zeta, int k = 1);

// Left Perron vector of S_gamma (probability measure), by power iteration.
Eigen::VectorXd s_gamma_invariant_measure(const Eigen::SparseMatrix<double, Eigen::RowMajor>& s, int iterations = 2000,
                                          double tol = 1e-13);

// Green function on the universal cover assembled from edge zeta data:
// G(v, v) = -1 / (gamma - W(v) - sum_u zeta_v(u)), G(v0, vn) = G(v0, v0) prod zeta_{v_{i-1}}(v_i).
Eigen::VectorXcd cover_diagonal(const DirectedEdgeSpace& d, Complex gamma, const Eigen::VectorXcd& zeta);
Complex cover_green_along(const DirectedEdgeSpace& d, Complex gamma, const Eigen::VectorXcd& zeta,
                         std::span<const Vertex> path);

}  // namespace qelab
