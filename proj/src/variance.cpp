#include "qelab/variance.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <random>

namespace qelab {

namespace {

std::mt19937_64 seeded(std::uint64_t seed, std::uint32_t purpose) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), purpose};
  return std::mt19937_64(seq);
}

// <psi_j, M psi_j> for every column of a real matrix psi.
Eigen::VectorXcd diagonal_forms(const Eigen::SparseMatrix<Complex>& m, const Eigen::MatrixXd& psi) {
  const Eigen::SparseMatrix<double> re = m.real();
  const Eigen::SparseMatrix<double> im = m.imag();
  const Eigen::VectorXd fr = psi.cwiseProduct(re * psi).colwise().sum().transpose();
  const Eigen::VectorXd fi = psi.cwiseProduct(im * psi).colwise().sum().transpose();
  Eigen::VectorXcd out(fr.size());
  for (Eigen::Index j = 0; j < fr.size(); ++j) out(j) = {fr(j), fi(j)};
  return out;
}

void check_eigensystem(const EigenSystem& es, int n) {
  if (es.size() != n || es.vectors.rows() != n) throw KernelError("eigensystem does not match the graph");
}

// Per-distance sums s_r = sum_{d(x,y) = r} K(x, y).
std::vector<Complex> distance_sums(const Graph& g, const BoundedKernel& k) {
  std::vector<Complex> sums(static_cast<std::size_t>(k.range) + 1, Complex(0.0));
  std::map<Vertex, std::vector<const KernelEntry*>> by_row;
  for (const auto& e : k.entries) {
    if (e.x == e.y) {
      sums[0] += e.value;
    } else {
      by_row[e.x].push_back(&e);
    }
  }
  for (const auto& [x, row] : by_row) {
    const auto dist = bfs_distances(g, x, k.range);
    for (const KernelEntry* e : row) {
      const int r = dist[static_cast<std::size_t>(e->y)];
      if (r < 0) throw KernelError("kernel entry beyond its declared range");
      sums[static_cast<std::size_t>(r)] += e->value;
    }
  }
  return sums;
}

}  // namespace

VarianceReport quantum_variance(const EigenSystem& es, const NbKernel& k) {
  check_eigensystem(es, k.vertex_count());
  const Eigen::VectorXcd forms = kg_diagonal_forms(k, es.vectors);
  VarianceReport report;
  report.terms.resize(static_cast<std::size_t>(forms.size()));
  double s = 0.0;
  for (Eigen::Index j = 0; j < forms.size(); ++j) {
    report.terms[static_cast<std::size_t>(j)] = std::norm(forms(j));
    s += std::norm(forms(j));
  }
  report.value = s / static_cast<double>(forms.size());
  return report;
}

// ---- Bounded-range kernels ------------------------------------------------------------

Eigen::SparseMatrix<Complex> BoundedKernel::matrix() const {
  std::vector<Eigen::Triplet<Complex>> t;
  t.reserve(entries.size());
  for (const auto& e : entries) t.emplace_back(e.x, e.y, e.value);
  Eigen::SparseMatrix<Complex> m(n, n);
  m.setFromTriplets(t.begin(), t.end());
  return m;
}

BoundedKernel centered_half_set(const Graph& g, std::uint64_t seed) {
  const int n = g.size();
  std::vector<Vertex> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  auto rng = seeded(seed, 11);
  std::shuffle(order.begin(), order.end(), rng);
  const int half = n / 2;
  const double shift = static_cast<double>(half) / n;
  std::vector<double> a(static_cast<std::size_t>(n), -shift);
  for (int i = 0; i < half; ++i) a[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])] += 1.0;
  BoundedKernel k{n, 0, {}};
  for (Vertex x = 0; x < n; ++x) k.entries.push_back({x, x, a[static_cast<std::size_t>(x)]});
  return k;
}

BoundedKernel identity_kernel(const Graph& g) {
  BoundedKernel k{g.size(), 0, {}};
  for (Vertex x = 0; x < g.size(); ++x) k.entries.push_back({x, x, 1.0});
  return k;
}

BoundedKernel random_bounded(const Graph& g, int range, std::uint64_t seed) {
  if (range < 0) throw KernelError("kernel range must be nonnegative");
  BoundedKernel k{g.size(), range, {}};
  auto rng = seeded(seed, 12);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (Vertex x = 0; x < g.size(); ++x) {
    const auto dist = bfs_distances(g, x, range);
    for (Vertex y = 0; y < g.size(); ++y) {
      if (dist[static_cast<std::size_t>(y)] < 0) continue;
      double re = 0.0, im = 0.0;
      do {
        re = u(rng);
        im = u(rng);
      } while (re * re + im * im > 1.0);
      k.entries.push_back({x, y, {re, im}});
    }
  }
  return k;
}

BoundedKernel nearest_neighbour(const Graph& g) {
  BoundedKernel k{g.size(), 1, {}};
  for (Vertex x = 0; x < g.size(); ++x)
    for (Vertex y : g.neighbours(x)) k.entries.push_back({x, y, 1.0});
  return k;
}

void validate_bounded(const Graph& g, const BoundedKernel& k) {
  if (k.n != g.size()) throw KernelError("kernel size does not match the graph");
  if (k.range < 0) throw KernelError("kernel range must be nonnegative");
  for (const auto& e : k.entries) {
    g.check_vertex(e.x);
    g.check_vertex(e.y);
    if (std::abs(e.value) > 1.0 + 1e-12) throw KernelError("kernel entry exceeds the bound |K| <= 1");
  }
  distance_sums(g, k);  // throws on range violation
}

Complex kernel_average(const Graph& g, const BoundedKernel& k, double lambda) {
  const int q = regular_q(g);
  const auto sums = distance_sums(g, k);
  Complex s = 0.0;
  for (std::size_t r = 0; r < sums.size(); ++r) s += sums[r] * spherical_phi(q, lambda, static_cast<int>(r));
  return s / static_cast<double>(g.size());
}

NbKernel lift_kernel(std::shared_ptr<const DirectedEdgeSpace> space, const BoundedKernel& k) {
  const Graph& g = space->graph();
  if (k.n != g.size()) throw KernelError("kernel size does not match the graph");
  std::map<std::pair<Vertex, Vertex>, Complex> lookup;
  for (const auto& e : k.entries) lookup[{e.x, e.y}] += e.value;
  NbKernel out(space);
  for (int r = 0; r <= k.range; ++r) {
    const PathSpace& b = space->paths(r);
    std::vector<Complex> vals(b.size(), Complex(0.0));
    bool any = false;
    for (std::size_t i = 0; i < b.size(); ++i) {
      auto it = lookup.find({b.origin(i), b.terminus(i)});
      if (it != lookup.end()) {
        vals[i] = it->second;
        any = true;
      }
    }
    if (any) out.mutable_grade(r) = std::move(vals);
  }
  return out;
}

double qe_discrepancy_value(const EigenSystem& es, const Graph& g, const BoundedKernel& k) {
  check_eigensystem(es, g.size());
  validate_bounded(g, k);
  const int q = regular_q(g);
  const auto sums = distance_sums(g, k);
  const Eigen::VectorXcd forms = diagonal_forms(k.matrix(), es.vectors);
  double s = 0.0;
  for (int j = 0; j < es.size(); ++j) {
    Complex avg = 0.0;
    for (std::size_t r = 0; r < sums.size(); ++r) avg += sums[r] * spherical_phi(q, es.values(j), static_cast<int>(r));
    s += std::norm(forms(j) - avg / static_cast<double>(g.size()));
  }
  return s / es.size();
}

QeReport qe_discrepancy(const EigenSystem& es, std::shared_ptr<const DirectedEdgeSpace> space, const BoundedKernel& k) {
  const Graph& g = space->graph();
  check_eigensystem(es, g.size());
  validate_bounded(g, k);
  const int q = regular_q(g);
  const int n = g.size();
  QeReport report;
  const auto sums = distance_sums(g, k);
  const Eigen::VectorXcd forms = diagonal_forms(k.matrix(), es.vectors);
  report.per_eigen.resize(static_cast<std::size_t>(es.size()));
  double s = 0.0;
  for (int j = 0; j < es.size(); ++j) {
    Complex avg = 0.0;
    for (std::size_t r = 0; r < sums.size(); ++r) avg += sums[r] * spherical_phi(q, es.values(j), static_cast<int>(r));
    const double term = std::norm(forms(j) - avg / static_cast<double>(n));
    report.per_eigen[static_cast<std::size_t>(j)] = term;
    s += term;
  }
  report.discrepancy = s / es.size();

  const NbKernel lifted = lift_kernel(space, k);
  NbKernel centred = lifted;
  for (int r : lifted.present_grades()) centred -= lifted.mean(r) * sphere_kernel(space, r);
  report.lifted_variance = quantum_variance(es, centred).value;
  report.lift_error = std::abs(report.lifted_variance - report.discrepancy);

  NbKernel comm = nabla(lifted);
  NbKernel upper(space);
  for (int r : lifted.present_grades())
    if (r >= 1) upper += lifted.component(r);
  if (upper.max_grade() >= 1) comm += nabla_star(upper);
  const Eigen::VectorXcd cf = kg_diagonal_forms(comm, es.vectors);
  report.commutator_residual = cf.size() ? cf.cwiseAbs().maxCoeff() : 0.0;
  return report;
}

// ---- Zeta data ------------------------------------------------------------------------------

Complex regular_tree_zeta(int q, Complex gamma) {
  if (q < 1) throw KernelError("regular_tree_zeta needs q >= 1");
  const Complex disc = std::sqrt(gamma * gamma - 4.0 * q);
  const Complex a = (gamma + disc) / (2.0 * q);
  const Complex b = (gamma - disc) / (2.0 * q);
  if (gamma.imag() > 0.0) return a.imag() < b.imag() ? a : b;
  if (gamma.imag() < 0.0) return a.imag() > b.imag() ? a : b;
  if (std::abs(gamma.real()) < 2.0 * std::sqrt(static_cast<double>(q))) return a.imag() < b.imag() ? a : b;
  return std::abs(a) < std::abs(b) ? a : b;
}

ZetaProvider regular_zeta_provider(const DirectedEdgeSpace& d) {
  const int q = regular_q(d.graph());
  const auto m = static_cast<Eigen::Index>(d.edge_count());
  return [q, m](Complex gamma) { return Eigen::VectorXcd::Constant(m, regular_tree_zeta(q, gamma)); };
}

namespace {

Eigen::VectorXcd reversed(const DirectedEdgeSpace& d, const Eigen::VectorXcd& zeta) {
  Eigen::VectorXcd out(zeta.size());
  for (std::size_t e = 0; e < d.edge_count(); ++e)
    out(static_cast<Eigen::Index>(e)) = zeta(static_cast<Eigen::Index>(d.reverse(e)));
  return out;
}

void check_zeta(const DirectedEdgeSpace& d, const Eigen::VectorXcd& zeta) {
  if (static_cast<std::size_t>(zeta.size()) != d.edge_count()) throw KernelError("missing zeta data: wrong edge count");
}

}  // namespace

Eigen::VectorXcd nb_f(const DirectedEdgeSpace& d, const Eigen::VectorXcd& zeta, const Eigen::VectorXd& psi) {
  check_zeta(d, zeta);
  const Eigen::VectorXcd p = psi.cast<Complex>();
  return tau_plus(d, p) - zeta.cwiseProduct(tau_minus(d, p));
}

Eigen::VectorXcd nb_f_star(const DirectedEdgeSpace& d, const Eigen::VectorXcd& zeta, const Eigen::VectorXd& psi) {
  check_zeta(d, zeta);
  const Eigen::VectorXcd p = psi.cast<Complex>();
  return tau_minus(d, p) - reversed(d, zeta).cwiseProduct(tau_plus(d, p));
}

NbEigenvectorReport nb_eigenvectors(const DirectedEdgeSpace& d, const EigenSystem& es, const ZetaProvider& zeta,
                                    double eta0, const std::vector<int>& indices) {
  check_eigensystem(es, d.vertex_count());
  if (!zeta) throw KernelError("missing zeta data");
  std::vector<int> which = indices;
  if (which.empty()) {
    which.resize(static_cast<std::size_t>(es.size()));
    std::iota(which.begin(), which.end(), 0);
  }
  const Complex i_eta(0.0, eta0);
  NbEigenvectorReport r;
  for (int j : which) {
    const Eigen::VectorXcd z = zeta(Complex(es.values(j), eta0));
    check_zeta(d, z);
    const Eigen::VectorXcd iz = reversed(d, z);
    const Eigen::VectorXd psi = es.vectors.col(j);
    const Eigen::VectorXcd p = psi.cast<Complex>();
    const Eigen::VectorXcd tp = tau_plus(d, p);
    const Eigen::VectorXcd tm = tau_minus(d, p);
    const Eigen::VectorXcd f = tp - z.cwiseProduct(tm);
    const Eigen::VectorXcd fs = tm - iz.cwiseProduct(tp);
    const Eigen::VectorXcd zbf = z.cwiseProduct(nb_apply(d, f));
    const Eigen::VectorXcd zbfs = iz.cwiseProduct(nb_apply_adjoint(d, fs));
    r.exact_residual.push_back((zbf - f + i_eta * z.cwiseProduct(tp)).norm());
    r.exact_residual_star.push_back((zbfs - fs + i_eta * iz.cwiseProduct(tm)).norm());
    r.plain_residual.push_back((zbf - f).norm());
    r.plain_residual_star.push_back((zbfs - fs).norm());
    r.tau_plus_norm.push_back(tp.norm());
    r.tau_minus_norm.push_back(tm.norm());
    r.max_exact = std::max({r.max_exact, r.exact_residual.back(), r.exact_residual_star.back()});
  }
  return r;
}

VarianceReport nb_quantum_variance(const DirectedEdgeSpace& d, const EigenSystem& es, const ZetaProvider& zeta,
                                   double eta0, const NbKernel& k, std::optional<Interval> interval) {
  check_eigensystem(es, d.vertex_count());
  if (&k.space() != &d) throw KernelError("kernel is bound to a different graph");
  if (!zeta) throw KernelError("missing zeta data");
  VarianceReport report;
  report.interval = interval;
  report.eta0 = eta0;
  report.terms.assign(static_cast<std::size_t>(es.size()), 0.0);
  double s = 0.0;
  for (int j = 0; j < es.size(); ++j) {
    if (interval && !interval->contains(es.values(j))) continue;
    const Eigen::VectorXcd z = zeta(Complex(es.values(j), eta0));
    const Eigen::VectorXd psi = es.vectors.col(j);
    const Eigen::VectorXcd f = nb_f(d, z, psi);
    const Eigen::VectorXcd fs = nb_f_star(d, z, psi);
    const double t = std::abs(kb_form(k, fs, f));
    report.terms[static_cast<std::size_t>(j)] = t;
    s += t;
  }
  report.value = s / es.size();
  return report;
}

// ---- S_gamma ------------------------------------------------------------------------------------

Eigen::SparseMatrix<double, Eigen::RowMajor> s_gamma_matrix(const DirectedEdgeSpace& d, const Eigen::VectorXcd& zeta, int k) {
  check_zeta(d, zeta);
  if (k < 1) throw KernelError("S_gamma is defined on grades k >= 1");
  const PathSpace& b = d.paths(k);
  std::vector<Eigen::Triplet<double>> t;
  std::vector<Vertex> q(static_cast<std::size_t>(k) + 1);
  for (std::size_t i = 0; i < b.size(); ++i) {
    const auto e = static_cast<std::size_t>(b.first_edge[i]);
    const Complex zr = zeta(static_cast<Eigen::Index>(d.reverse(e)));
    if (zr.imag() == 0.0) throw KernelError("zeta with zero imaginary part: outside the usable spectral region");
    const double a = std::norm(zr) / std::abs(zr.imag());
    const auto p = b.path(i);
    for (std::size_t f : d.predecessors(e)) {
      const double w = std::abs(zeta(static_cast<Eigen::Index>(d.reverse(f))).imag());
      PathIndex col = 0;
      if (k == 1) {
        col = static_cast<PathIndex>(f);
      } else {
        q[0] = d.tail(f);
        std::copy(p.begin(), p.end() - 1, q.begin() + 1);
        col = d.index_of(q);
      }
      t.emplace_back(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(col), a * w);
    }
  }
  const auto n = static_cast<Eigen::Index>(b.size());
  Eigen::SparseMatrix<double, Eigen::RowMajor> s(n, n);
  s.setFromTriplets(t.begin(), t.end());
  return s;
}

Eigen::VectorXcd cover_diagonal(const DirectedEdgeSpace& d, Complex gamma, const Eigen::VectorXcd& zeta) {
  check_zeta(d, zeta);
  const Graph& g = d.graph();
  Eigen::VectorXcd out(g.size());
  for (Vertex v = 0; v < g.size(); ++v) {
    Complex s = 0.0;
    const std::size_t begin = g.slot_begin(v);
    for (int t = 0; t < g.degree(v); ++t) s += zeta(static_cast<Eigen::Index>(begin + static_cast<std::size_t>(t)));
    out(v) = -1.0 / (gamma - g.potential(v) - s);
  }
  return out;
}

Complex cover_green_along(const DirectedEdgeSpace& d, Complex gamma, const Eigen::VectorXcd& zeta,
                         std::span<const Vertex> path) {
  check_zeta(d, zeta);
  if (path.empty()) throw KernelError("empty path");
  const Graph& g = d.graph();
  Complex s = 0.0;
  const Vertex v0 = path[0];
  for (int t = 0; t < g.degree(v0); ++t) s += zeta(static_cast<Eigen::Index>(g.slot_begin(v0) + static_cast<std::size_t>(t)));
  Complex out = -1.0 / (gamma - g.potential(v0) - s);
  for (std::size_t i = 1; i < path.size(); ++i) {
    if (i >= 2 && path[i] == path[i - 2]) throw KernelError("path backtracks");
    out *= zeta(static_cast<Eigen::Index>(d.edge_index(path[i - 1], path[i])));
  }
  return out;
}

SGammaDiagnostics s_gamma_diagnostics(const DirectedEdgeSpace& d, Complex gamma, const Eigen::VectorXcd& zeta, int k) {
  check_zeta(d, zeta);
  const double eta0 = gamma.imag();
  SGammaDiagnostics out;
  for (std::size_t e = 0; e < d.edge_count(); ++e) {
    const Complex z = zeta(static_cast<Eigen::Index>(e));
    if (z.imag() == 0.0) throw KernelError("zeta with zero imaginary part: outside the usable spectral region");
    double lhs = 0.0;
    for (std::size_t s : d.successors(e)) lhs += std::abs(zeta(static_cast<Eigen::Index>(s)).imag());
    const double rhs = std::abs(z.imag()) / std::norm(z) - eta0;
    out.max_sum_rule_residual = std::max(out.max_sum_rule_residual, std::abs(lhs - rhs));
  }
  const auto s = s_gamma_matrix(d, zeta, k);
  const PathSpace& b = d.paths(k);
  out.row_sums = s * Eigen::VectorXd::Ones(s.cols());
  out.theta.resize(static_cast<Eigen::Index>(b.size()));
  out.c_gamma.resize(static_cast<Eigen::Index>(b.size()));
  for (std::size_t i = 0; i < b.size(); ++i) {
    const auto e = static_cast<std::size_t>(b.first_edge[i]);
    const Complex zr = zeta(static_cast<Eigen::Index>(d.reverse(e)));
    const double expect = 1.0 - eta0 * std::norm(zr) / std::abs(zr.imag());
    out.max_row_sum_deviation =
        std::max(out.max_row_sum_deviation, std::abs(out.row_sums(static_cast<Eigen::Index>(i)) - expect));
    const Complex z = zeta(static_cast<Eigen::Index>(e));
    const Complex th = z / std::conj(z);
    out.theta(static_cast<Eigen::Index>(i)) = th;
    out.max_theta_modulus_error = std::max(out.max_theta_modulus_error, std::abs(std::abs(th) - 1.0));
    out.c_gamma(static_cast<Eigen::Index>(i)) = -1.0 / (2.0 * cover_green_along(d, gamma, zeta, b.path(i)));
  }
  return out;
}

Eigen::VectorXd s_gamma_invariant_measure(const Eigen::SparseMatrix<double, Eigen::RowMajor>& s, int iterations,
                                          double tol) {
  const Eigen::Index n = s.rows();
  Eigen::VectorXd nu = Eigen::VectorXd::Constant(n, 1.0 / static_cast<double>(n));
  const Eigen::SparseMatrix<double> st = s.transpose();
  for (int it = 0; it < iterations; ++it) {
    Eigen::VectorXd next = 0.5 * (nu + st * nu);  // lazy chain: same Perron vector, aperiodic
    const double total = next.sum();
    if (total <= 0.0) throw KernelError("S_gamma has no invariant measure (vanishing mass)");
    next /= total;
    const double change = (next - nu).lpNorm<1>();
    nu = std::move(next);
    if (change < tol) break;
  }
  return nu;
}

}  // namespace qelab
