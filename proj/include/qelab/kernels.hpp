// Graded kernels on non-backtracking paths and the operators acting on them.
#pragma once

#include <Eigen/Dense>
#include <Eigen/SparseCore>
#include <complex>
#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include "qelab/paths.hpp"

namespace qelab {

using Complex = std::complex<double>;

class KernelError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Element of H_{<=k}: one complex value per path of each present grade.
// Absent grades are identically zero.
class NbKernel {
 public:
  NbKernel() = default;
  explicit NbKernel(std::shared_ptr<const DirectedEdgeSpace> space);

  static NbKernel zero(std::shared_ptr<const DirectedEdgeSpace> space) { return NbKernel(std::move(space)); }
  static NbKernel constant(std::shared_ptr<const DirectedEdgeSpace> space, int grade, Complex value);
  static NbKernel from_values(std::shared_ptr<const DirectedEdgeSpace> space, int grade, std::vector<Complex> values);
  // Independent entries uniform in [-1,1] + i[-1,1] (real part only if
  // real_valued); optionally projected onto mean zero.
  static NbKernel random(std::shared_ptr<const DirectedEdgeSpace> space, int grade, std::uint64_t seed,
                         bool mean_zero = false, bool real_valued = false);

  const DirectedEdgeSpace& space() const;
  const std::shared_ptr<const DirectedEdgeSpace>& space_ptr() const { return space_; }
  int vertex_count() const { return space().vertex_count(); }

  int max_grade() const;  // -1 if no grade is present
  bool has_grade(int j) const;
  std::vector<int> present_grades() const;
  std::span<const Complex> grade(int j) const;  // empty if absent
  std::vector<Complex>& mutable_grade(int j);   // allocates zeros if absent
  NbKernel component(int j) const;

  Complex mean(int j) const;  // <K_j> = (1/N) sum over B_j
  double sup_norm() const;
  double h_norm_squared(int j) const;
  double h_norm_squared() const;
  double h_norm() const;

  NbKernel& operator+=(const NbKernel& other);
  NbKernel& operator-=(const NbKernel& other);
  NbKernel& operator*=(Complex s);
  friend NbKernel operator+(NbKernel a, const NbKernel& b) { return a += b; }
  friend NbKernel operator-(NbKernel a, const NbKernel& b) { return a -= b; }
  friend NbKernel operator*(Complex s, NbKernel a) { return a *= s; }

 private:
  void check_same_space(const NbKernel& other) const;
  std::shared_ptr<const DirectedEdgeSpace> space_;
  std::vector<std::vector<Complex>> grades_;
};

// Normalized inner product sum_j (1/N) sum_{B_j} conj(a) b.
Complex inner(const NbKernel& a, const NbKernel& b);

// q for a (q+1)-regular graph; throws KernelError otherwise.
int regular_q(const Graph& g);

// ---- Spherical function ------------------------------------------------------
double spherical_phi(int q, double lambda, int r);
// Chebyshev closed form (complex evaluation, valid for every real lambda).
double spherical_phi_closed(int q, double lambda, int r);
// Phi(A_G, k) by the three-term recursion applied to the adjacency matrix.
Eigen::MatrixXd spherical_matrix(const Graph& g, int k);
// S_k: constant 1/((q+1) q^{k-1}) on B_k (S_0 = 1).
NbKernel sphere_kernel(std::shared_ptr<const DirectedEdgeSpace> space, int k);

// ---- K_G and K_B -----------------------------------------------------------------
Eigen::MatrixXcd matrix_kg(const NbKernel& k);
Eigen::SparseMatrix<Complex> sparse_kg(const NbKernel& k);
Eigen::VectorXcd apply_kg(const NbKernel& k, const Eigen::VectorXcd& psi);
Complex kg_form(const NbKernel& k, const Eigen::VectorXcd& phi, const Eigen::VectorXcd& psi);
// <psi_j, K_G psi_j> for every column of a real eigenvector matrix.
Eigen::VectorXcd kg_diagonal_forms(const NbKernel& k, const Eigen::MatrixXd& psi);

Eigen::VectorXcd apply_kb(const NbKernel& k, const Eigen::VectorXcd& g);
Complex kb_form(const NbKernel& k, const Eigen::VectorXcd& f, const Eigen::VectorXcd& g);

struct KernelNorms {
  double h_norm = 0.0;
  double hsn_norm = 0.0;
  double sup_norm = 0.0;
};
KernelNorms norms(const NbKernel& k);

struct TwoNormCheck {
  double hsn_squared = 0.0;
  double h_squared = 0.0;
  double c_kq = 0.0;
  double bad_fraction = 0.0;  // #{x : rho(x) < k} / N
  double slack = 0.0;         // h^2 + c * bad * sup^2 - hsn^2 (>= 0 expected)
};
TwoNormCheck check_2norms(const NbKernel& k);
double c_kq(int k, int q);

// ---- Proof operators (gradewise linear extensions) -------------------------------
NbKernel nabla(const NbKernel& k);           // H_{j-1} -> H_j
NbKernel nabla_star(const NbKernel& k);      // H_{j+1} -> H_j; grade 0 input is an underflow
NbKernel extend(const NbKernel& k);          // i_k : H_k -> H_{k+1}
NbKernel m_star(const NbKernel& k);          // H_k -> H_{k+2}, regular graphs
NbKernel transfer(const NbKernel& k);        // S, regular graphs
NbKernel transfer_adjoint(const NbKernel& k);
NbKernel s_t(const NbKernel& k, int t);        // (1/T) sum_{r<T} (T - r) S^r K
NbKernel s_tilde_t(const NbKernel& k, int t);  // (1/T) sum_{1<=r<=T} S^r K
NbKernel sigma_n(const NbKernel& k, int n);    // (1/n) sum_{r=1}^n M*^r K
// Closed form of nabla* Sigma^n K on each grade k + 2r - 1.
NbKernel nabla_star_sigma_n_closed(const NbKernel& k, int n);

// Operator norm of S^power on mean-zero kernels of grade k, by power iteration
// on (S^power)* S^power. power <= 0 selects k + 1.
double s_norm_meanzero(std::shared_ptr<const DirectedEdgeSpace> space, int k, int power = 0, int iterations = 400,
                       std::uint64_t seed = 1);

}  // namespace qelab
