// Dense eigensystems of H = A + W, random-walk spectral gap and the
// non-backtracking matrix.
#pragma once

#include <Eigen/Dense>
#include <Eigen/SparseCore>
#include <array>
#include <complex>
#include <iosfwd>
#include <string>

#include "qelab/graph.hpp"
#include "qelab/paths.hpp"

namespace qelab {

using Complex = std::complex<double>;

class SpectralError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class OperatorKind { adjacency, adjacency_plus_potential };

constexpr int kDenseBudget = 6000;

struct EigenSystem {
  Eigen::VectorXd values;   // ascending
  Eigen::MatrixXd vectors;  // column j is the eigenvector for values(j)
  OperatorKind kind = OperatorKind::adjacency;

  int size() const { return static_cast<int>(values.size()); }
};

struct EigenCheck {
  double max_residual = 0.0;  // max_j ||H psi_j - lambda_j psi_j||
  double gram_error = 0.0;    // max |Psi^T Psi - I|
  double operator_norm = 0.0;
};

// Dense matrix of A + W (W omitted if the graph carries no potential).
Eigen::MatrixXd hamiltonian_matrix(const Graph& g);

// Full eigendecomposition via LAPACK dsyevd. Eigenvectors are real and each is
// sign-normalized so that its entry of largest modulus is positive.
EigenSystem eigensystem(const Graph& g, int budget = kDenseBudget);

// Eigenvalues only (ascending) of a dense symmetric matrix.
Eigen::VectorXd symmetric_eigenvalues(Eigen::MatrixXd matrix);

EigenCheck verify_eigensystem(const Graph& g, const EigenSystem& es);

struct ExpReport {
  double beta = 0.0;             // 1 - max |mu| over the non-top spectrum
  double beta_one_sided = 0.0;   // 1 - second largest mu (diagnostic only)
  Eigen::VectorXd p_spectrum;    // ascending
  bool is_expander(double beta_min) const { return beta >= beta_min; }
};

ExpReport walk_spectral_gap(const Graph& g, int budget = kDenseBudget);

// 2 sqrt(D - 1) / d with D, d the maximal and minimal degrees.
double rho_p_bound(const Graph& g);

// Sparse non-backtracking matrix: (B f)(x0, x1) = sum_{x2 ~ x1, x2 != x0} f(x1, x2).
Eigen::SparseMatrix<double, Eigen::RowMajor> nb_matrix(const DirectedEdgeSpace& d);
Eigen::VectorXcd nb_apply(const DirectedEdgeSpace& d, const Eigen::VectorXcd& f);
Eigen::VectorXcd nb_apply_adjoint(const DirectedEdgeSpace& d, const Eigen::VectorXcd& f);

// (tau_- psi)(x0, x1) = psi(x0), (tau_+ psi)(x0, x1) = psi(x1).
Eigen::VectorXcd tau_minus(const DirectedEdgeSpace& d, const Eigen::VectorXcd& psi);
Eigen::VectorXcd tau_plus(const DirectedEdgeSpace& d, const Eigen::VectorXcd& psi);

// Residual norms of  B tau_- psi = q tau_+ psi,  B tau_+ psi = lambda tau_+ psi - tau_- psi,
// B* tau_- psi = lambda tau_- psi - tau_+ psi,  B* tau_+ psi = q tau_- psi.
std::array<double, 4> check_ultra(const DirectedEdgeSpace& d, const Eigen::VectorXd& psi, double lambda);

struct NbEigenpairCheck {
  std::array<Complex, 2> epsilon{};   // roots of q e^2 - lambda e + 1 = 0
  std::array<double, 2> residual{};   // ||B v - v / e||, v = tau_+ psi - e tau_- psi
};
NbEigenpairCheck nb_eigenpair_residuals(const DirectedEdgeSpace& d, const Eigen::VectorXd& psi, double lambda);

// CSV "index,eigenvalue" and a binary eigenvector blob:
//   8 bytes magic "QELABEV1", uint64 N, uint64 count, count*N float64 values
//   (eigenvector j stored contiguously), all little-endian.
void write_spectrum_csv(std::ostream& out, const EigenSystem& es);
void write_eigenvector_blob(const std::string& path, const EigenSystem& es, int count = -1);
Eigen::MatrixXd read_eigenvector_blob(const std::string& path);  // N x count

}  // namespace qelab
