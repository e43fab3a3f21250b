#include "qelab/spectral.hpp"

#include <lapacke.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <ostream>

namespace qelab {

namespace {

void check_budget(const Graph& g, int budget) {
  if (g.size() == 0) throw SpectralError("eigensystem of an empty graph");
  if (g.size() > budget) {
    throw SpectralError("graph with " + std::to_string(g.size()) + " vertices exceeds the dense-solver budget of " +
                        std::to_string(budget));
  }
}

void run_dsyevd(char job, Eigen::MatrixXd& a, Eigen::VectorXd& w) {
  const auto n = static_cast<lapack_int>(a.rows());
  w.resize(n);
  const lapack_int info = LAPACKE_dsyevd(LAPACK_COL_MAJOR, job, 'U', n, a.data(), n, w.data());
  if (info != 0) throw SpectralError("dsyevd failed with info = " + std::to_string(info));
}

int require_regular_q(const Graph& g) {
  if (!g.is_regular()) throw SpectralError("operation requires a regular graph");
  return g.min_degree() - 1;
}

template <typename T>
void put_le(std::ofstream& out, T value) {
  auto bytes = std::bit_cast<std::array<unsigned char, sizeof(T)>>(value);
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
  out.write(reinterpret_cast<const char*>(bytes.data()), sizeof(T));
}

template <typename T>
T get_le(std::ifstream& in) {
  std::array<unsigned char, sizeof(T)> bytes{};
  in.read(reinterpret_cast<char*>(bytes.data()), sizeof(T));
  if (!in) throw SpectralError("truncated eigenvector blob");
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
  return std::bit_cast<T>(bytes);
}

constexpr char kBlobMagic[8] = {'Q', 'E', 'L', 'A', 'B', 'E', 'V', '1'};

}  // namespace

Eigen::MatrixXd hamiltonian_matrix(const Graph& g) {
  const int n = g.size();
  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(n, n);
  for (Vertex x = 0; x < n; ++x) {
    for (Vertex y : g.neighbours(x)) h(x, y) = 1.0;
    h(x, x) = g.potential(x);
  }
  return h;
}

EigenSystem eigensystem(const Graph& g, int budget) {
  check_budget(g, budget);
  EigenSystem es;
  es.kind = g.has_potential() ? OperatorKind::adjacency_plus_potential : OperatorKind::adjacency;
  es.vectors = hamiltonian_matrix(g);
  run_dsyevd('V', es.vectors, es.values);
  for (Eigen::Index j = 0; j < es.vectors.cols(); ++j) {
    Eigen::Index arg = 0;
    es.vectors.col(j).cwiseAbs().maxCoeff(&arg);
    if (es.vectors(arg, j) < 0) es.vectors.col(j) *= -1.0;
  }
  return es;
}

Eigen::VectorXd symmetric_eigenvalues(Eigen::MatrixXd matrix) {
  if (matrix.rows() != matrix.cols()) throw SpectralError("symmetric_eigenvalues needs a square matrix");
  Eigen::VectorXd w;
  run_dsyevd('N', matrix, w);
  return w;
}

EigenCheck verify_eigensystem(const Graph& g, const EigenSystem& es) {
  const Eigen::MatrixXd h = hamiltonian_matrix(g);
  EigenCheck check;
  check.operator_norm = es.values.cwiseAbs().maxCoeff();
  const Eigen::MatrixXd r = h * es.vectors - es.vectors * es.values.asDiagonal();
  check.max_residual = r.colwise().norm().maxCoeff();
  const Eigen::MatrixXd gram = es.vectors.transpose() * es.vectors;
  check.gram_error = (gram - Eigen::MatrixXd::Identity(gram.rows(), gram.cols())).cwiseAbs().maxCoeff();
  return check;
}

ExpReport walk_spectral_gap(const Graph& g, int budget) {
  check_budget(g, budget);
  if (g.min_degree() < 1) throw SpectralError("walk operator needs every degree >= 1");
  const int n = g.size();
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(n, n);
  for (Vertex x = 0; x < n; ++x) {
    for (Vertex y : g.neighbours(x)) m(x, y) = 1.0 / std::sqrt(static_cast<double>(g.degree(x)) * g.degree(y));
  }
  ExpReport report;
  report.p_spectrum = symmetric_eigenvalues(std::move(m));
  const double top = report.p_spectrum(n - 1);
  if (n >= 2 && report.p_spectrum(n - 2) > 1.0 - 1e-9) {
    throw SpectralError("walk operator has eigenvalue 1 with multiplicity > 1: graph is disconnected");
  }
  if (std::abs(top - 1.0) > 1e-9) throw SpectralError("walk operator top eigenvalue differs from 1");
  double worst = 0.0;
  for (int i = 0; i + 1 < n; ++i) worst = std::max(worst, std::abs(report.p_spectrum(i)));
  report.beta = 1.0 - worst;
  report.beta_one_sided = n >= 2 ? 1.0 - report.p_spectrum(n - 2) : 1.0;
  return report;
}

double rho_p_bound(const Graph& g) {
  const int d = g.min_degree();
  const int big_d = g.max_degree();
  if (d < 1) throw SpectralError("rho_P bound needs minimum degree >= 1");
  return 2.0 * std::sqrt(static_cast<double>(big_d - 1)) / d;
}

Eigen::SparseMatrix<double, Eigen::RowMajor> nb_matrix(const DirectedEdgeSpace& d) {
  const auto m = static_cast<Eigen::Index>(d.edge_count());
  std::vector<Eigen::Triplet<double>> entries;
  for (std::size_t e = 0; e < d.edge_count(); ++e) {
    for (std::size_t s : d.successors(e)) entries.emplace_back(static_cast<Eigen::Index>(e), static_cast<Eigen::Index>(s), 1.0);
  }
  Eigen::SparseMatrix<double, Eigen::RowMajor> b(m, m);
  b.setFromTriplets(entries.begin(), entries.end());
  return b;
}

Eigen::VectorXcd nb_apply(const DirectedEdgeSpace& d, const Eigen::VectorXcd& f) {
  if (static_cast<std::size_t>(f.size()) != d.edge_count()) throw SpectralError("edge vector has wrong length");
  Eigen::VectorXcd out(f.size());
  for (std::size_t e = 0; e < d.edge_count(); ++e) {
    Complex s = 0.0;
    for (std::size_t t : d.successors(e)) s += f(static_cast<Eigen::Index>(t));
    out(static_cast<Eigen::Index>(e)) = s;
  }
  return out;
}

Eigen::VectorXcd nb_apply_adjoint(const DirectedEdgeSpace& d, const Eigen::VectorXcd& f) {
  if (static_cast<std::size_t>(f.size()) != d.edge_count()) throw SpectralError("edge vector has wrong length");
  Eigen::VectorXcd out(f.size());
  for (std::size_t e = 0; e < d.edge_count(); ++e) {
    Complex s = 0.0;
    for (std::size_t t : d.predecessors(e)) s += f(static_cast<Eigen::Index>(t));
    out(static_cast<Eigen::Index>(e)) = s;
  }
  return out;
}

Eigen::VectorXcd tau_minus(const DirectedEdgeSpace& d, const Eigen::VectorXcd& psi) {
  Eigen::VectorXcd out(static_cast<Eigen::Index>(d.edge_count()));
  for (std::size_t e = 0; e < d.edge_count(); ++e) out(static_cast<Eigen::Index>(e)) = psi(d.tail(e));
  return out;
}

Eigen::VectorXcd tau_plus(const DirectedEdgeSpace& d, const Eigen::VectorXcd& psi) {
  Eigen::VectorXcd out(static_cast<Eigen::Index>(d.edge_count()));
  for (std::size_t e = 0; e < d.edge_count(); ++e) out(static_cast<Eigen::Index>(e)) = psi(d.head(e));
  return out;
}

std::array<double, 4> check_ultra(const DirectedEdgeSpace& d, const Eigen::VectorXd& psi, double lambda) {
  const double q = require_regular_q(d.graph());
  if (psi.size() != d.vertex_count()) throw SpectralError("vertex vector has wrong length");
  const Eigen::VectorXcd p = psi.cast<Complex>();
  const Eigen::VectorXcd tm = tau_minus(d, p);
  const Eigen::VectorXcd tp = tau_plus(d, p);
  return {(nb_apply(d, tm) - q * tp).norm(), (nb_apply(d, tp) - lambda * tp + tm).norm(),
          (nb_apply_adjoint(d, tm) - lambda * tm + tp).norm(), (nb_apply_adjoint(d, tp) - q * tm).norm()};
}

NbEigenpairCheck nb_eigenpair_residuals(const DirectedEdgeSpace& d, const Eigen::VectorXd& psi, double lambda) {
  const double q = require_regular_q(d.graph());
  const Eigen::VectorXcd p = psi.cast<Complex>();
  const Eigen::VectorXcd tm = tau_minus(d, p);
  const Eigen::VectorXcd tp = tau_plus(d, p);
  const Complex disc = std::sqrt(Complex(lambda * lambda - 4.0 * q, 0.0));
  NbEigenpairCheck out;
  out.epsilon = {(lambda + disc) / (2.0 * q), (lambda - disc) / (2.0 * q)};
  for (int i = 0; i < 2; ++i) {
    const Complex eps = out.epsilon[static_cast<std::size_t>(i)];
    const Eigen::VectorXcd v = tp - eps * tm;
    out.residual[static_cast<std::size_t>(i)] = (nb_apply(d, v) - v / eps).norm();
  }
  return out;
}

void write_spectrum_csv(std::ostream& out, const EigenSystem& es) {
  out << "index,eigenvalue\n";
  char buf[64];
  for (int j = 0; j < es.size(); ++j) {
    std::snprintf(buf, sizeof buf, "%.17g", es.values(j));
    out << j << ',' << buf << '\n';
  }
}

void write_eigenvector_blob(const std::string& path, const EigenSystem& es, int count) {
  const int n = es.size();
  if (count < 0 || count > n) count = n;
  std::ofstream out(path, std::ios::binary);
  if (!out) throw SpectralError("cannot write eigenvector blob '" + path + "'");
  out.write(kBlobMagic, sizeof kBlobMagic);
  put_le<std::uint64_t>(out, static_cast<std::uint64_t>(n));
  put_le<std::uint64_t>(out, static_cast<std::uint64_t>(count));
  for (int j = 0; j < count; ++j)
    for (int x = 0; x < n; ++x) put_le<double>(out, es.vectors(x, j));
  if (!out) throw SpectralError("failed while writing eigenvector blob '" + path + "'");
}

Eigen::MatrixXd read_eigenvector_blob(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw SpectralError("cannot open eigenvector blob '" + path + "'");
  char magic[8];
  in.read(magic, sizeof magic);
  if (!in || std::memcmp(magic, kBlobMagic, sizeof magic) != 0) throw SpectralError("bad eigenvector blob magic");
  const auto n = get_le<std::uint64_t>(in);
  const auto count = get_le<std::uint64_t>(in);
  Eigen::MatrixXd out(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(count));
  for (std::uint64_t j = 0; j < count; ++j)
    for (std::uint64_t x = 0; x < n; ++x) out(static_cast<Eigen::Index>(x), static_cast<Eigen::Index>(j)) = get_le<double>(in);
  return out;
}

}  // namespace qelab
