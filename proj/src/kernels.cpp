#include "qelab/kernels.hpp"

#include <cmath>
#include <random>

#include "qelab/graph.hpp"

namespace qelab {

namespace {

std::size_t as_index(PathIndex i) { return static_cast<std::size_t>(i); }

}  // namespace

// ---- NbKernel ----------------------------------------------------------------------

NbKernel::NbKernel(std::shared_ptr<const DirectedEdgeSpace> space) : space_(std::move(space)) {
  if (!space_) throw KernelError("kernel needs a directed edge space");
}

NbKernel NbKernel::constant(std::shared_ptr<const DirectedEdgeSpace> space, int grade, Complex value) {
  NbKernel k(std::move(space));
  auto& v = k.mutable_grade(grade);
  std::fill(v.begin(), v.end(), value);
  return k;
}

NbKernel NbKernel::from_values(std::shared_ptr<const DirectedEdgeSpace> space, int grade, std::vector<Complex> values) {
  NbKernel k(std::move(space));
  auto& v = k.mutable_grade(grade);
  if (values.size() != v.size()) {
    throw KernelError("grade " + std::to_string(grade) + " needs " + std::to_string(v.size()) + " values, got " +
                      std::to_string(values.size()));
  }
  v = std::move(values);
  return k;
}

NbKernel NbKernel::random(std::shared_ptr<const DirectedEdgeSpace> space, int grade, std::uint64_t seed, bool mean_zero,
                          bool real_valued) {
  NbKernel k(std::move(space));
  auto& v = k.mutable_grade(grade);
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(grade)};
  std::mt19937_64 rng(seq);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (auto& z : v) {
    const double re = u(rng);
    const double im = real_valued ? 0.0 : u(rng);
    z = {re, im};
  }
  if (mean_zero && !v.empty()) {
    Complex avg = 0.0;
    for (const auto& z : v) avg += z;
    avg /= static_cast<double>(v.size());
    for (auto& z : v) z -= avg;
  }
  return k;
}

const DirectedEdgeSpace& NbKernel::space() const {
  if (!space_) throw KernelError("kernel is not bound to a graph");
  return *space_;
}

int NbKernel::max_grade() const {
  for (int j = static_cast<int>(grades_.size()) - 1; j >= 0; --j) {
    if (!grades_[static_cast<std::size_t>(j)].empty()) return j;
  }
  return -1;
}

bool NbKernel::has_grade(int j) const {
  return j >= 0 && j < static_cast<int>(grades_.size()) && !grades_[static_cast<std::size_t>(j)].empty();
}

std::vector<int> NbKernel::present_grades() const {
  std::vector<int> out;
  for (int j = 0; j < static_cast<int>(grades_.size()); ++j)
    if (has_grade(j)) out.push_back(j);
  return out;
}

std::span<const Complex> NbKernel::grade(int j) const {
  if (!has_grade(j)) return {};
  return grades_[static_cast<std::size_t>(j)];
}

std::vector<Complex>& NbKernel::mutable_grade(int j) {
  if (j < 0) throw KernelError("grade underflow: negative grade requested");
  if (static_cast<int>(grades_.size()) <= j) grades_.resize(static_cast<std::size_t>(j) + 1);
  auto& v = grades_[static_cast<std::size_t>(j)];
  if (v.empty()) v.assign(space().paths(j).size(), Complex(0.0));
  return v;
}

NbKernel NbKernel::component(int j) const {
  NbKernel out(space_);
  if (has_grade(j)) out.mutable_grade(j) = grades_[static_cast<std::size_t>(j)];
  return out;
}

Complex NbKernel::mean(int j) const {
  Complex s = 0.0;
  for (const auto& z : grade(j)) s += z;
  return s / static_cast<double>(vertex_count());
}

double NbKernel::sup_norm() const {
  double m = 0.0;
  for (const auto& g : grades_)
    for (const auto& z : g) m = std::max(m, std::abs(z));
  return m;
}

double NbKernel::h_norm_squared(int j) const {
  double s = 0.0;
  for (const auto& z : grade(j)) s += std::norm(z);
  return s / vertex_count();
}

double NbKernel::h_norm_squared() const {
  double s = 0.0;
  for (int j : present_grades()) s += h_norm_squared(j);
  return s;
}

double NbKernel::h_norm() const { return std::sqrt(h_norm_squared()); }

void NbKernel::check_same_space(const NbKernel& other) const {
  if (space_ != other.space_) throw KernelError("kernels are bound to different graphs");
}

NbKernel& NbKernel::operator+=(const NbKernel& other) {
  check_same_space(other);
  for (int j : other.present_grades()) {
    auto& mine = mutable_grade(j);
    const auto theirs = other.grade(j);
    for (std::size_t i = 0; i < mine.size(); ++i) mine[i] += theirs[i];
  }
  return *this;
}

NbKernel& NbKernel::operator-=(const NbKernel& other) {
  check_same_space(other);
  for (int j : other.present_grades()) {
    auto& mine = mutable_grade(j);
    const auto theirs = other.grade(j);
    for (std::size_t i = 0; i < mine.size(); ++i) mine[i] -= theirs[i];
  }
  return *this;
}

NbKernel& NbKernel::operator*=(Complex s) {
  for (auto& g : grades_)
    for (auto& z : g) z *= s;
  return *this;
}

Complex inner(const NbKernel& a, const NbKernel& b) {
  if (a.space_ptr() != b.space_ptr()) throw KernelError("kernels are bound to different graphs");
  Complex s = 0.0;
  for (int j : a.present_grades()) {
    const auto x = a.grade(j);
    const auto y = b.grade(j);
    if (y.empty()) continue;
    for (std::size_t i = 0; i < x.size(); ++i) s += std::conj(x[i]) * y[i];
  }
  return s / static_cast<double>(a.vertex_count());
}

int regular_q(const Graph& g) {
  if (!g.is_regular()) throw KernelError("operation requires a regular graph");
  const int q = g.min_degree() - 1;
  if (q < 1) throw KernelError("operation requires degree >= 2");
  return q;
}

// ---- Spherical function --------------------------------------------------------------

double spherical_phi(int q, double lambda, int r) {
  if (q < 2) throw KernelError("spherical function needs q >= 2");
  if (r < 0) throw KernelError("spherical function needs r >= 0");
  double prev = 1.0;
  if (r == 0) return prev;
  double cur = lambda / (q + 1);
  for (int s = 1; s < r; ++s) {
    const double next = (lambda * cur - prev) / q;
    prev = cur;
    cur = next;
  }
  return cur;
}

double spherical_phi_closed(int q, double lambda, int r) {
  if (q < 2) throw KernelError("spherical function needs q >= 2");
  const Complex c(lambda / (2.0 * std::sqrt(static_cast<double>(q))), 0.0);
  const Complex theta = std::acos(c);
  const Complex p = std::cos(static_cast<double>(r) * theta);
  const Complex s = std::sin(theta);
  const Complex qr = std::abs(s) > 1e-300 ? std::sin(static_cast<double>(r + 1) * theta) / s : Complex(r + 1.0);
  const Complex val = std::pow(static_cast<double>(q), -0.5 * r) * (2.0 / (q + 1) * p + (q - 1.0) / (q + 1) * qr);
  return val.real();
}

Eigen::MatrixXd spherical_matrix(const Graph& g, int k) {
  const int q = regular_q(g);
  const int n = g.size();
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n, n);
  for (Vertex x = 0; x < n; ++x)
    for (Vertex y : g.neighbours(x)) a(x, y) = 1.0;
  Eigen::MatrixXd prev = Eigen::MatrixXd::Identity(n, n);
  if (k == 0) return prev;
  Eigen::MatrixXd cur = a / (q + 1.0);
  for (int s = 1; s < k; ++s) {
    Eigen::MatrixXd next = (a * cur - prev) / static_cast<double>(q);
    prev = std::move(cur);
    cur = std::move(next);
  }
  return cur;
}

NbKernel sphere_kernel(std::shared_ptr<const DirectedEdgeSpace> space, int k) {
  const int q = regular_q(space->graph());
  const double v = k == 0 ? 1.0 : 1.0 / ((q + 1.0) * std::pow(static_cast<double>(q), k - 1));
  return NbKernel::constant(std::move(space), k, v);
}

// ---- K_G and K_B ---------------------------------------------------------------------

Eigen::MatrixXcd matrix_kg(const NbKernel& k) {
  const int n = k.vertex_count();
  Eigen::MatrixXcd m = Eigen::MatrixXcd::Zero(n, n);
  for (int j : k.present_grades()) {
    const PathSpace& b = k.space().paths(j);
    const auto vals = k.grade(j);
    for (std::size_t i = 0; i < b.size(); ++i) m(b.origin(i), b.terminus(i)) += vals[i];
  }
  return m;
}

Eigen::SparseMatrix<Complex> sparse_kg(const NbKernel& k) {
  const int n = k.vertex_count();
  std::vector<Eigen::Triplet<Complex>> entries;
  for (int j : k.present_grades()) {
    const PathSpace& b = k.space().paths(j);
    const auto vals = k.grade(j);
    for (std::size_t i = 0; i < b.size(); ++i) entries.emplace_back(b.origin(i), b.terminus(i), vals[i]);
  }
  Eigen::SparseMatrix<Complex> m(n, n);
  m.setFromTriplets(entries.begin(), entries.end());
  return m;
}

Eigen::VectorXcd apply_kg(const NbKernel& k, const Eigen::VectorXcd& psi) {
  if (psi.size() != k.vertex_count()) throw KernelError("vector length does not match the graph");
  Eigen::VectorXcd out = Eigen::VectorXcd::Zero(psi.size());
  for (int j : k.present_grades()) {
    const PathSpace& b = k.space().paths(j);
    const auto vals = k.grade(j);
    for (std::size_t i = 0; i < b.size(); ++i) out(b.origin(i)) += vals[i] * psi(b.terminus(i));
  }
  return out;
}

Complex kg_form(const NbKernel& k, const Eigen::VectorXcd& phi, const Eigen::VectorXcd& psi) {
  if (phi.size() != k.vertex_count()) throw KernelError("vector length does not match the graph");
  return phi.dot(apply_kg(k, psi));
}

Eigen::VectorXcd kg_diagonal_forms(const NbKernel& k, const Eigen::MatrixXd& psi) {
  if (psi.rows() != k.vertex_count()) throw KernelError("eigenvector matrix does not match the graph");
  const Eigen::SparseMatrix<Complex> m = sparse_kg(k);
  const Eigen::SparseMatrix<double> re = m.real();
  const Eigen::SparseMatrix<double> im = m.imag();
  const Eigen::VectorXd fr = psi.cwiseProduct(re * psi).colwise().sum().transpose();
  const Eigen::VectorXd fi = psi.cwiseProduct(im * psi).colwise().sum().transpose();
  Eigen::VectorXcd out(fr.size());
  for (Eigen::Index j = 0; j < fr.size(); ++j) out(j) = {fr(j), fi(j)};
  return out;
}

Eigen::VectorXcd apply_kb(const NbKernel& k, const Eigen::VectorXcd& g) {
  const DirectedEdgeSpace& d = k.space();
  if (static_cast<std::size_t>(g.size()) != d.edge_count()) throw KernelError("edge vector length does not match");
  if (k.has_grade(0)) throw KernelError("K_B is defined for grades >= 1 only");
  Eigen::VectorXcd out = Eigen::VectorXcd::Zero(g.size());
  for (int j : k.present_grades()) {
    const PathSpace& b = d.paths(j);
    const auto vals = k.grade(j);
    for (std::size_t i = 0; i < b.size(); ++i) {
      out(static_cast<Eigen::Index>(b.first_edge[i])) += vals[i] * g(static_cast<Eigen::Index>(b.last_edge[i]));
    }
  }
  return out;
}

Complex kb_form(const NbKernel& k, const Eigen::VectorXcd& f, const Eigen::VectorXcd& g) {
  return f.dot(apply_kb(k, g));
}

KernelNorms norms(const NbKernel& k) {
  KernelNorms out;
  out.h_norm = k.h_norm();
  out.sup_norm = k.sup_norm();
  const Eigen::SparseMatrix<Complex> m = sparse_kg(k);
  double s = 0.0;
  for (Eigen::Index c = 0; c < m.outerSize(); ++c)
    for (Eigen::SparseMatrix<Complex>::InnerIterator it(m, c); it; ++it) s += std::norm(it.value());
  out.hsn_norm = std::sqrt(s / k.vertex_count());
  return out;
}

double c_kq(int k, int q) {
  double ball = 1.0;
  double layer = q + 1.0;
  for (int j = 1; j <= k; ++j) {
    ball += layer;
    layer *= q;
  }
  return ball * ball;
}

TwoNormCheck check_2norms(const NbKernel& k) {
  TwoNormCheck out;
  const int top = std::max(k.max_grade(), 0);
  const Graph& g = k.space().graph();
  const auto n = norms(k);
  out.hsn_squared = n.hsn_norm * n.hsn_norm;
  out.h_squared = n.h_norm * n.h_norm;
  out.c_kq = c_kq(top, std::max(g.max_degree() - 1, 1));
  out.bad_fraction = bst_statistic(g, top);
  out.slack = out.h_squared + out.c_kq * out.bad_fraction * n.sup_norm * n.sup_norm - out.hsn_squared;
  return out;
}

// ---- Proof operators -----------------------------------------------------------------

NbKernel nabla(const NbKernel& k) {
  NbKernel out(k.space_ptr());
  for (int j : k.present_grades()) {
    const PathSpace& b = k.space().paths(j + 1);
    const auto in = k.grade(j);
    auto& dst = out.mutable_grade(j + 1);
    for (std::size_t i = 0; i < b.size(); ++i) dst[i] += in[as_index(b.suffix[i])] - in[as_index(b.prefix[i])];
  }
  return out;
}

NbKernel nabla_star(const NbKernel& k) {
  if (k.has_grade(0)) throw KernelError("grade underflow: nabla* is not defined on grade 0");
  NbKernel out(k.space_ptr());
  for (int j : k.present_grades()) {
    const PathSpace& b = k.space().paths(j);
    const auto in = k.grade(j);
    auto& dst = out.mutable_grade(j - 1);
    for (std::size_t i = 0; i < b.size(); ++i) {
      dst[as_index(b.suffix[i])] += in[i];
      dst[as_index(b.prefix[i])] -= in[i];
    }
  }
  return out;
}

NbKernel extend(const NbKernel& k) {
  NbKernel out(k.space_ptr());
  for (int j : k.present_grades()) {
    const PathSpace& b = k.space().paths(j + 1);
    const auto in = k.grade(j);
    auto& dst = out.mutable_grade(j + 1);
    for (std::size_t i = 0; i < b.size(); ++i) dst[i] += in[as_index(b.prefix[i])];
  }
  return out;
}

NbKernel m_star(const NbKernel& k) {
  const double q = regular_q(k.space().graph());
  NbKernel out(k.space_ptr());
  for (int j : k.present_grades()) {
    const PathSpace& b2 = k.space().paths(j + 2);
    const PathSpace& b1 = k.space().paths(j + 1);
    const auto in = k.grade(j);
    auto& dst = out.mutable_grade(j + 2);
    for (std::size_t i = 0; i < b2.size(); ++i) dst[i] += in[as_index(b1.suffix[as_index(b2.prefix[i])])] / q;
  }
  return out;
}

NbKernel transfer(const NbKernel& k) {
  const Graph& g = k.space().graph();
  const double q = regular_q(g);
  const DirectedEdgeSpace& d = k.space();
  NbKernel out(k.space_ptr());
  for (int j : k.present_grades()) {
    const auto in = k.grade(j);
    auto& dst = out.mutable_grade(j);
    if (j == 0) {
      for (Vertex x = 0; x < g.size(); ++x) {
        Complex s = 0.0;
        for (Vertex y : g.neighbours(x)) s += in[static_cast<std::size_t>(y)];
        dst[static_cast<std::size_t>(x)] += s / (q + 1.0);
      }
      continue;
    }
    const PathSpace& b = d.paths(j);
    std::vector<Complex> by_suffix(d.paths(j - 1).size(), Complex(0.0));
    for (std::size_t i = 0; i < b.size(); ++i) by_suffix[as_index(b.suffix[i])] += in[i];
    if (j == 1) {
      for (std::size_t e = 0; e < b.size(); ++e) {
        dst[e] += (by_suffix[static_cast<std::size_t>(d.tail(e))] - in[d.reverse(e)]) / q;
      }
    } else {
      for (std::size_t i = 0; i < b.size(); ++i) dst[i] += by_suffix[as_index(b.prefix[i])] / q;
    }
  }
  return out;
}

NbKernel transfer_adjoint(const NbKernel& k) {
  const Graph& g = k.space().graph();
  const double q = regular_q(g);
  const DirectedEdgeSpace& d = k.space();
  NbKernel out(k.space_ptr());
  for (int j : k.present_grades()) {
    const auto in = k.grade(j);
    auto& dst = out.mutable_grade(j);
    if (j == 0) {
      for (Vertex x = 0; x < g.size(); ++x) {
        Complex s = 0.0;
        for (Vertex y : g.neighbours(x)) s += in[static_cast<std::size_t>(y)];
        dst[static_cast<std::size_t>(x)] += s / (q + 1.0);
      }
      continue;
    }
    const PathSpace& b = d.paths(j);
    if (j == 1) {
      for (std::size_t e = 0; e < b.size(); ++e) {
        Complex s = 0.0;
        for (std::size_t f : d.successors(e)) s += in[f];
        dst[e] += s / q;
      }
    } else {
      const PathSpace& prev = d.paths(j - 1);
      for (std::size_t i = 0; i < b.size(); ++i) {
        const auto r = as_index(b.suffix[i]);
        Complex s = 0.0;
        for (auto c = prev.child_offset[r]; c < prev.child_offset[r + 1]; ++c) s += in[as_index(c)];
        dst[i] += s / q;
      }
    }
  }
  return out;
}

NbKernel s_t(const NbKernel& k, int t) {
  if (t < 1) throw KernelError("T must be >= 1");
  NbKernel acc = static_cast<double>(t) * k;
  NbKernel power = k;
  for (int r = 1; r < t; ++r) {
    power = transfer(power);
    acc += static_cast<double>(t - r) * power;
  }
  return Complex(1.0 / t) * acc;
}

NbKernel s_tilde_t(const NbKernel& k, int t) {
  if (t < 1) throw KernelError("T must be >= 1");
  NbKernel acc(k.space_ptr());
  NbKernel power = k;
  for (int r = 1; r <= t; ++r) {
    power = transfer(power);
    acc += power;
  }
  return Complex(1.0 / t) * acc;
}

NbKernel sigma_n(const NbKernel& k, int n) {
  if (n < 1) throw KernelError("n must be >= 1");
  NbKernel acc(k.space_ptr());
  NbKernel power = k;
  for (int r = 1; r <= n; ++r) {
    power = m_star(power);
    acc += power;
  }
  return Complex(1.0 / n) * acc;
}

NbKernel nabla_star_sigma_n_closed(const NbKernel& k, int n) {
  if (n < 1) throw KernelError("n must be >= 1");
  const double q = regular_q(k.space().graph());
  const DirectedEdgeSpace& d = k.space();
  const NbKernel grad = nabla(k);
  NbKernel out(k.space_ptr());
  for (int kk : k.present_grades()) {
    const auto gk = grad.grade(kk + 1);
    for (int r = 1; r <= n; ++r) {
      const int top = kk + 2 * r - 1;
      const PathSpace& b = d.paths(top);
      auto& dst = out.mutable_grade(top);
      const double scale = -1.0 / (n * std::pow(q, r - 1));
      for (std::size_t i = 0; i < b.size(); ++i) {
        std::size_t idx = i;
        for (int s = 0; s < r - 1; ++s) idx = as_index(d.paths(top - s).prefix[idx]);
        for (int s = 0; s < r - 1; ++s) idx = as_index(d.paths(top - (r - 1) - s).suffix[idx]);
        dst[i] += scale * gk[idx];
      }
    }
  }
  return out;
}

double s_norm_meanzero(std::shared_ptr<const DirectedEdgeSpace> space, int k, int power, int iterations,
                       std::uint64_t seed) {
  regular_q(space->graph());
  if (power <= 0) power = k + 1;
  NbKernel v = NbKernel::random(space, k, seed, true);
  v *= Complex(1.0 / v.h_norm());
  auto project = [k](NbKernel& x) {
    const Complex m = x.mean(k) * static_cast<double>(x.vertex_count()) / static_cast<double>(x.grade(k).size());
    for (auto& z : x.mutable_grade(k)) z -= m;
  };
  double estimate = 0.0;
  for (int it = 0; it < iterations; ++it) {
    NbKernel w = v;
    for (int p = 0; p < power; ++p) w = transfer(w);
    for (int p = 0; p < power; ++p) w = transfer_adjoint(w);
    project(w);
    estimate = std::real(inner(v, w));
    const double nw = w.h_norm();
    if (nw == 0.0) return 0.0;
    v = Complex(1.0 / nw) * w;
  }
  return std::sqrt(std::max(estimate, 0.0));
}

}  // namespace qelab
