#include "qelab/cone.hpp"

#include <Eigen/SparseCore>
#include <Eigen/SparseLU>
#include <algorithm>
#include <cmath>
#include <deque>
#include <istream>
#include <map>
#include <memory>
#include "json.hpp"
#include <numeric>
#include <ostream>
#include <limits>
#include <cstdio>
#include <sstream>

namespace qelab {

namespace {

using SpMat = Eigen::SparseMatrix<Complex>;

void require(bool cond, const std::string& msg) {
  if (!cond) throw ConeError(msg);
}

void normalise_rows(ConeSystem& c) {
  for (auto& row : c.rows) {
    std::map<int, int> merged;
    for (auto [k, m] : row) merged[k] += m;
    row.clear();
    for (auto [k, m] : merged)
      if (m != 0) row.emplace_back(k, m);
  }
}

}  // namespace

// ---- ConeSystem -------------------------------------------------------------------------------
int ConeSystem::entry(int j, int k) const {
  for (auto [l, m] : rows.at(static_cast<std::size_t>(j)))
    if (l == k) return m;
  return 0;
}

int ConeSystem::children(int j) const {
  int s = 0;
  for (auto [l, m] : rows.at(static_cast<std::size_t>(j))) s += m;
  return s;
}

Eigen::MatrixXi ConeSystem::dense() const {
  Eigen::MatrixXi m = Eigen::MatrixXi::Zero(size(), size());
  for (int j = 0; j < size(); ++j)
    for (auto [k, v] : rows[static_cast<std::size_t>(j)]) m(j, k) = v;
  return m;
}

ConeSystem ConeSystem::from_dense(const Eigen::MatrixXi& m, std::vector<std::string> labels, std::vector<int> root_labels,
                                  std::vector<double> root_measure, std::vector<double> potential) {
  require(m.rows() == m.cols(), "cone matrix must be square");
  ConeSystem c;
  const int n = static_cast<int>(m.rows());
  if (labels.empty())
    for (int j = 0; j < n; ++j) labels.push_back(std::to_string(j + 1));
  c.labels = std::move(labels);
  c.rows.resize(static_cast<std::size_t>(n));
  for (int j = 0; j < n; ++j)
    for (int k = 0; k < n; ++k) {
      require(m(j, k) >= 0, "cone matrix entries must be nonnegative");
      if (m(j, k) > 0) c.rows[static_cast<std::size_t>(j)].emplace_back(k, m(j, k));
    }
  c.potential = potential.empty() ? std::vector<double>(static_cast<std::size_t>(n), 0.0) : std::move(potential);
  c.root_labels = std::move(root_labels);
  c.root_measure = std::move(root_measure);
  c.validate();
  return c;
}

void ConeSystem::validate() const {
  const std::size_t n = labels.size();
  require(n > 0, "empty cone system");
  require(rows.size() == n, "cone system: row count differs from label count");
  require(potential.size() == n, "cone system: potential size differs from label count");
  for (const auto& row : rows)
    for (auto [k, m] : row) {
      require(k >= 0 && static_cast<std::size_t>(k) < n, "cone system: child label out of range");
      require(m >= 0, "cone matrix entries must be nonnegative");
    }
  require(!root_labels.empty(), "cone system without root label");
  require(root_labels.size() == root_measure.size(), "cone system: root measure not aligned with root labels");
  double total = 0.0;
  for (std::size_t i = 0; i < root_labels.size(); ++i) {
    require(root_labels[i] >= 0 && static_cast<std::size_t>(root_labels[i]) < n, "cone system: root label out of range");
    require(root_measure[i] >= 0.0, "cone system: negative root measure");
    total += root_measure[i];
  }
  require(std::abs(total - 1.0) < 1e-12, "cone system: root measure does not sum to 1");
}

void write_cone_json(std::ostream& out, const ConeSystem& c) {
  nlohmann::json j;
  j["labels"] = c.labels;
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& row : c.rows) {
    nlohmann::json r = nlohmann::json::array();
    for (auto [k, m] : row) r.push_back({k, m});
    rows.push_back(r);
  }
  j["rows"] = rows;
  j["potential"] = c.potential;
  j["root_labels"] = c.root_labels;
  j["root_measure"] = c.root_measure;
  out << j.dump(2) << '\n';
}

ConeSystem read_cone_json(std::istream& in) {
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConeError(std::string("malformed cone system JSON: ") + e.what());
  }
  ConeSystem c;
  try {
    c.labels = j.at("labels").get<std::vector<std::string>>();
    for (const auto& r : j.at("rows")) {
      std::vector<std::pair<int, int>> row;
      for (const auto& e : r) row.emplace_back(e.at(0).get<int>(), e.at(1).get<int>());
      c.rows.push_back(std::move(row));
    }
    c.potential = j.contains("potential") ? j["potential"].get<std::vector<double>>()
                                          : std::vector<double>(c.labels.size(), 0.0);
    c.root_labels = j.at("root_labels").get<std::vector<int>>();
    c.root_measure = j.at("root_measure").get<std::vector<double>>();
  } catch (const nlohmann::json::exception& e) {
    throw ConeError(std::string("malformed cone system JSON: ") + e.what());
  }
  normalise_rows(c);
  c.validate();
  return c;
}

// ---- Constructions -------------------------------------------------------------------------------
ConeSystem regular_tree_cone(int q) {
  require(q >= 1, "regular tree needs q >= 1");
  Eigen::MatrixXi m(2, 2);
  m << 0, q + 1, 0, q;
  return ConeSystem::from_dense(m, {"root", "edge"});
}

ConeSystem neighbour_to_cone(const Eigen::MatrixXi& a, int root_colour) {
  const int n = static_cast<int>(a.rows());
  require(a.rows() == a.cols(), "neighbour matrix must be square");
  require(n == 2 || n == 3, "neighbour matrix must have 2 or 3 colours");
  require(root_colour < n, "root colour out of range");
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      require(a(i, j) >= 0, "neighbour matrix entries must be nonnegative");
      require((a(i, j) > 0) == (a(j, i) > 0), "neighbour matrix: adjacency between colours must be symmetric");
    }
  for (int i = 0; i < n; ++i) require(a.row(i).sum() >= 2, "neighbour matrix: every colour needs degree >= 2");
  if (n == 3)
    require(static_cast<long>(a(2, 0)) * a(1, 2) * a(0, 1) == static_cast<long>(a(2, 1)) * a(0, 2) * a(1, 0),
            "neighbour matrix violates the unimodularity condition a31 a23 a12 = a32 a13 a21");

  // Detailed balance pi_i A_ij = pi_j A_ji, propagated along colour adjacency.
  std::vector<double> pi(static_cast<std::size_t>(n), -1.0);
  pi[0] = 1.0;
  std::deque<int> queue{0};
  while (!queue.empty()) {
    const int i = queue.front();
    queue.pop_front();
    for (int j = 0; j < n; ++j)
      if (a(i, j) > 0 && pi[static_cast<std::size_t>(j)] < 0.0) {
        pi[static_cast<std::size_t>(j)] = pi[static_cast<std::size_t>(i)] * a(i, j) / a(j, i);
        queue.push_back(j);
      }
  }
  for (double p : pi) require(p > 0.0, "neighbour matrix: colour graph is not connected");
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if (a(i, j) > 0)
        require(std::abs(pi[static_cast<std::size_t>(i)] * a(i, j) - pi[static_cast<std::size_t>(j)] * a(j, i)) <
                    1e-12 * (1.0 + pi[static_cast<std::size_t>(i)] * a(i, j)),
                "neighbour matrix admits no unimodular root measure");
  const double total = std::accumulate(pi.begin(), pi.end(), 0.0);

  ConeSystem c;
  std::vector<int> roots;
  if (root_colour >= 0) {
    roots.push_back(root_colour);
  } else {
    for (int i = 0; i < n; ++i) roots.push_back(i);
  }
  const auto colour_name = [](int i) { return std::string(1, static_cast<char>('a' + i)); };
  for (int r : roots) {
    c.labels.push_back("root:" + colour_name(r));
    c.root_labels.push_back(static_cast<int>(c.labels.size()) - 1);
    c.root_measure.push_back(root_colour >= 0 ? 1.0 : pi[static_cast<std::size_t>(r)] / total);
  }
  // Pair labels (parent -> child), sorted by child colour then parent colour.
  std::map<std::pair<int, int>, int> pair_label;
  for (int child = 0; child < n; ++child)
    for (int parent = 0; parent < n; ++parent)
      if (a(parent, child) > 0) {
        pair_label[{parent, child}] = static_cast<int>(c.labels.size());
        c.labels.push_back(colour_name(parent) + ">" + colour_name(child));
      }
  c.rows.resize(c.labels.size());
  c.potential.assign(c.labels.size(), 0.0);
  for (std::size_t i = 0; i < roots.size(); ++i) {
    const int r = roots[i];
    for (int b = 0; b < n; ++b)
      if (a(r, b) > 0) c.rows[i].emplace_back(pair_label.at({r, b}), a(r, b));
  }
  for (auto [pc, label] : pair_label) {
    const auto [pa, b] = pc;
    for (int cc = 0; cc < n; ++cc) {
      if (a(b, cc) == 0) continue;
      const int m = a(b, cc) - (cc == pa ? 1 : 0);
      if (m > 0) c.rows[static_cast<std::size_t>(label)].emplace_back(pair_label.at({b, cc}), m);
    }
  }
  normalise_rows(c);
  c.validate();
  // Drop pair labels that cannot occur below any root.
  if (root_colour >= 0) return rooted_subsystem(c, 0);
  return c;
}

namespace {

void check_cover_base(const Graph& g0) {
  require(g0.size() > 0, "empty base graph");
  require(g0.is_connected(), "universal cover needs a connected base graph");
  require(g0.min_degree() >= 2, "universal cover: base graph has a vertex of degree < 2");
  require(!g0.is_cycle(), "universal cover: base graph is a cycle (non-backtracking operator not irreducible)");
}

}  // namespace

ConeSystem cover_cone_matrix(const Graph& g0, int root) {
  check_cover_base(g0);
  require(root < g0.size(), "root vertex out of range");
  const DirectedEdgeSpace d(g0, 0);
  const int n = g0.size();
  const int roots = root < 0 ? n : 1;
  ConeSystem c;
  c.labels.reserve(static_cast<std::size_t>(roots) + d.edge_count());
  for (int r = 0; r < roots; ++r) {
    const Vertex v = root < 0 ? r : root;
    c.labels.push_back(std::to_string(v));
    c.potential.push_back(g0.potential(v));
    c.root_labels.push_back(r);
    c.root_measure.push_back(1.0 / roots);
  }
  for (std::size_t e = 0; e < d.edge_count(); ++e) {
    c.labels.push_back(std::to_string(d.tail(e)) + ">" + std::to_string(d.head(e)));
    c.potential.push_back(g0.potential(d.head(e)));
  }
  c.rows.resize(c.labels.size());
  for (int r = 0; r < roots; ++r) {
    const Vertex v = root < 0 ? r : root;
    const std::size_t begin = g0.slot_begin(v);
    for (int t = 0; t < g0.degree(v); ++t) c.rows[static_cast<std::size_t>(r)].emplace_back(roots + static_cast<int>(begin) + t, 1);
  }
  for (std::size_t e = 0; e < d.edge_count(); ++e)
    for (std::size_t s : d.successors(e)) c.rows[static_cast<std::size_t>(roots) + e].emplace_back(roots + static_cast<int>(s), 1);
  c.validate();
  return c;
}

int cover_edge_label(const Graph& g0, int root, std::size_t e) {
  return (root < 0 ? g0.size() : 1) + static_cast<int>(e);
}

ConeSystem rooted_subsystem(const ConeSystem& c, int root_index) {
  c.validate();
  require(root_index >= 0 && static_cast<std::size_t>(root_index) < c.root_labels.size(), "root index out of range");
  const int r = c.root_labels[static_cast<std::size_t>(root_index)];
  std::vector<int> order{r};
  std::vector<int> map(static_cast<std::size_t>(c.size()), -1);
  map[static_cast<std::size_t>(r)] = 0;
  for (std::size_t i = 0; i < order.size(); ++i)
    for (auto [k, m] : c.rows[static_cast<std::size_t>(order[i])])
      if (map[static_cast<std::size_t>(k)] < 0) {
        map[static_cast<std::size_t>(k)] = static_cast<int>(order.size());
        order.push_back(k);
      }
  // Keep the original relative order of the non-root labels.
  std::sort(order.begin() + 1, order.end());
  for (std::size_t i = 0; i < order.size(); ++i) map[static_cast<std::size_t>(order[i])] = static_cast<int>(i);
  ConeSystem out;
  for (int j : order) {
    out.labels.push_back(c.labels[static_cast<std::size_t>(j)]);
    out.potential.push_back(c.potential[static_cast<std::size_t>(j)]);
    std::vector<std::pair<int, int>> row;
    for (auto [k, m] : c.rows[static_cast<std::size_t>(j)]) row.emplace_back(map[static_cast<std::size_t>(k)], m);
    out.rows.push_back(std::move(row));
  }
  out.root_labels = {0};
  out.root_measure = {1.0};
  normalise_rows(out);
  return out;
}

ConeSystem reduce_cone_system(const ConeSystem& c) {
  c.validate();
  const int n = c.size();
  std::vector<char> is_root(static_cast<std::size_t>(n), 0);
  for (int r : c.root_labels) is_root[static_cast<std::size_t>(r)] = 1;
  std::vector<int> cls(static_cast<std::size_t>(n));
  {
    std::map<std::pair<double, int>, int> keys;
    for (int j = 0; j < n; ++j) {
      auto key = std::make_pair(c.potential[static_cast<std::size_t>(j)], static_cast<int>(is_root[static_cast<std::size_t>(j)]));
      auto it = keys.emplace(key, static_cast<int>(keys.size())).first;
      cls[static_cast<std::size_t>(j)] = it->second;
    }
  }
  int count = 0;
  for (;;) {
    std::map<std::pair<int, std::vector<std::pair<int, int>>>, int> sigs;
    std::vector<int> next(static_cast<std::size_t>(n));
    for (int j = 0; j < n; ++j) {
      std::map<int, int> agg;
      for (auto [k, m] : c.rows[static_cast<std::size_t>(j)]) agg[cls[static_cast<std::size_t>(k)]] += m;
      auto key = std::make_pair(cls[static_cast<std::size_t>(j)], std::vector<std::pair<int, int>>(agg.begin(), agg.end()));
      auto it = sigs.emplace(std::move(key), static_cast<int>(sigs.size())).first;
      next[static_cast<std::size_t>(j)] = it->second;
    }
    const int new_count = static_cast<int>(sigs.size());
    cls = std::move(next);
    if (new_count == count) break;
    count = new_count;
  }
  // Renumber classes by first occurrence.
  std::vector<int> renum(static_cast<std::size_t>(count), -1);
  std::vector<int> rep;
  for (int j = 0; j < n; ++j) {
    int& r = renum[static_cast<std::size_t>(cls[static_cast<std::size_t>(j)])];
    if (r < 0) {
      r = static_cast<int>(rep.size());
      rep.push_back(j);
    }
  }
  ConeSystem out;
  for (int j : rep) {
    out.labels.push_back(c.labels[static_cast<std::size_t>(j)]);
    out.potential.push_back(c.potential[static_cast<std::size_t>(j)]);
    std::map<int, int> agg;
    for (auto [k, m] : c.rows[static_cast<std::size_t>(j)]) agg[renum[static_cast<std::size_t>(cls[static_cast<std::size_t>(k)])]] += m;
    out.rows.emplace_back(agg.begin(), agg.end());
  }
  std::map<int, double> root_mass;
  for (std::size_t i = 0; i < c.root_labels.size(); ++i)
    root_mass[renum[static_cast<std::size_t>(cls[static_cast<std::size_t>(c.root_labels[i])])]] += c.root_measure[i];
  for (auto [r, m] : root_mass) {
    out.root_labels.push_back(r);
    out.root_measure.push_back(m);
  }
  out.validate();
  return out;
}

// ---- (C1), (C2) ------------------------------------------------------------------------------------
C1Report check_c1(const ConeSystem& c, int root_index) {
  const ConeSystem t = rooted_subsystem(c, root_index);
  const int m = t.size();
  C1Report rep;
  if (t.entry(0, 0) != 0) {
    rep.reason = "M_11 != 0";
    return rep;
  }
  if (t.children(0) == 0) {
    rep.reason = "root has no children";
    return rep;
  }
  const int k0 = 1;
  const int b = m - k0;
  rep.n_kl = Eigen::MatrixXi::Constant(b, b, -1);
  // Minimal walk lengths (>= 1) between non-root labels.
  for (int k = k0; k < m; ++k) {
    std::vector<int> dist(static_cast<std::size_t>(m), -1);
    std::deque<int> queue;
    for (auto [l, mult] : t.rows[static_cast<std::size_t>(k)])
      if (dist[static_cast<std::size_t>(l)] < 0) {
        dist[static_cast<std::size_t>(l)] = 1;
        queue.push_back(l);
      }
    while (!queue.empty()) {
      const int u = queue.front();
      queue.pop_front();
      for (auto [l, mult] : t.rows[static_cast<std::size_t>(u)])
        if (dist[static_cast<std::size_t>(l)] < 0) {
          dist[static_cast<std::size_t>(l)] = dist[static_cast<std::size_t>(u)] + 1;
          queue.push_back(l);
        }
    }
    for (int l = k0; l < m; ++l) {
      const int nkl = dist[static_cast<std::size_t>(l)];
      rep.n_kl(k - k0, l - k0) = nkl;
      if (nkl < 0 || nkl > m * m) rep.failing_pairs.emplace_back(k, l);
    }
  }
  rep.holds = rep.failing_pairs.empty();
  if (!rep.holds) {
    rep.reason = "labels not mutually reachable";
    return rep;
  }
  // Uniform exponent by boolean powers (small systems only).
  if (b > 0 && b <= 64) {
    Eigen::MatrixXi base(b, b);
    for (int k = 0; k < b; ++k)
      for (int l = 0; l < b; ++l) base(k, l) = t.entry(k + k0, l + k0) > 0 ? 1 : 0;
    Eigen::MatrixXi power = base;
    for (int n = 1; n <= m * m; ++n) {
      if ((power.array() > 0).all()) {
        rep.uniform_n = n;
        break;
      }
      power = ((power * base).array() > 0).cast<int>();
    }
  }
  return rep;
}

C2Report check_c2(const ConeSystem& c, int root_index) {
  const ConeSystem t = rooted_subsystem(c, root_index);
  C2Report rep;
  rep.witness.assign(static_cast<std::size_t>(t.size()), -1);
  for (int k = 0; k < t.size(); ++k) {
    for (auto [kp, mult] : t.rows[static_cast<std::size_t>(k)]) {
      bool dominates = true;
      for (auto [l, ml] : t.rows[static_cast<std::size_t>(k)])
        if (t.entry(kp, l) < 1) {
          dominates = false;
          break;
        }
      if (dominates) {
        rep.witness[static_cast<std::size_t>(k)] = kp;
        break;
      }
    }
    if (rep.witness[static_cast<std::size_t>(k)] < 0) rep.failing_labels.push_back(k);
  }
  rep.holds = rep.failing_labels.empty();
  return rep;
}

// ---- Newton continuation --------------------------------------------------------------------------
namespace {

class NewtonSystem {
 public:
  explicit NewtonSystem(const ConeSystem& c) : c_(c), n_(c.size()) {
    std::vector<Eigen::Triplet<Complex>> trip;
    for (int j = 0; j < n_; ++j) {
      trip.emplace_back(j, j, 1.0);
      for (auto [k, m] : c.rows[static_cast<std::size_t>(j)]) trip.emplace_back(j, k, 1.0);
    }
    jac_.resize(n_, n_);
    jac_.setFromTriplets(trip.begin(), trip.end());
    jac_.makeCompressed();
    lu_.analyzePattern(jac_);
  }

  Eigen::VectorXcd sums(const Eigen::VectorXcd& h) const {
    Eigen::VectorXcd s = Eigen::VectorXcd::Zero(n_);
    for (int j = 0; j < n_; ++j)
      for (auto [k, m] : c_.rows[static_cast<std::size_t>(j)]) s(j) += static_cast<double>(m) * h(k);
    return s;
  }

  Eigen::VectorXcd residual(Complex gamma, const Eigen::VectorXcd& h) const {
    const Eigen::VectorXcd s = sums(h);
    Eigen::VectorXcd f(n_);
    for (int j = 0; j < n_; ++j) f(j) = h(j) * s(j) - (gamma - c_.potential[static_cast<std::size_t>(j)]) * h(j) + 1.0;
    return f;
  }

  // Returns the number of iterations on success, -1 on failure.
  int solve(Complex gamma, Eigen::VectorXcd& h, const SolveOptions& opts, std::string* why = nullptr) {
    Eigen::VectorXcd x = h;
    for (int it = 0; it <= opts.max_newton; ++it) {
      const Eigen::VectorXcd s = sums(x);
      Eigen::VectorXcd f(n_);
      for (int j = 0; j < n_; ++j) f(j) = x(j) * s(j) - (gamma - c_.potential[static_cast<std::size_t>(j)]) * x(j) + 1.0;
      const double res = f.cwiseAbs().maxCoeff();
      if (!std::isfinite(res)) {
        if (why) *why = "Newton divergence (non-finite iterate)";
        return -1;
      }
      if (res < opts.tolerance) {
        for (int j = 0; j < n_; ++j)
          if (!(x(j).imag() < 0.0)) {
            if (why) *why = "branch left the Herglotz half-plane";
            return -1;
          }
        h = std::move(x);
        return it;
      }
      if (it == opts.max_newton) break;
      // J_jl = M_jl h_j + delta_jl (s_j - (gamma - w_j))
      for (int j = 0; j < n_; ++j) {
        for (SpMat::InnerIterator itc(jac_, j); itc; ++itc) itc.valueRef() = 0.0;
      }
      for (int j = 0; j < n_; ++j) {
        jac_.coeffRef(j, j) += s(j) - (gamma - c_.potential[static_cast<std::size_t>(j)]);
        for (auto [k, m] : c_.rows[static_cast<std::size_t>(j)]) jac_.coeffRef(j, k) += static_cast<double>(m) * x(j);
      }
      lu_.factorize(jac_);
      if (lu_.info() != Eigen::Success) {
        if (why) *why = "zero pivot in the Jacobian";
        return -1;
      }
      const Eigen::VectorXcd delta = lu_.solve(f);
      x -= delta;
      if (x.cwiseAbs().maxCoeff() > 1e8) {
        if (why) *why = "Newton divergence";
        return -1;
      }
    }
    if (why) *why = "Newton did not converge";
    return -1;
  }

 private:
  const ConeSystem& c_;
  int n_;
  SpMat jac_;
  Eigen::SparseLU<SpMat, Eigen::COLAMDOrdering<int>> lu_;
};

GreenState finish(const ConeSystem& c, Complex gamma, Eigen::VectorXcd h, std::vector<ContinuationStep> cert) {
  GreenState st;
  st.gamma = gamma;
  st.residual = green_residual(c, gamma, h);
  st.zeta = std::move(h);
  st.certificate = std::move(cert);
  return st;
}

}  // namespace

double green_residual(const ConeSystem& c, Complex gamma, const Eigen::VectorXcd& h) {
  require(h.size() == c.size(), "zeta vector size differs from label count");
  NewtonSystem sys(c);
  return sys.residual(gamma, h).cwiseAbs().maxCoeff();
}

GreenState solve_green(const ConeSystem& c, Complex gamma, const SolveOptions& opts) {
  c.validate();
  require(gamma.imag() > 0.0, "solve_green needs Im gamma > 0");
  NewtonSystem sys(c);
  double dmax = 0.0;
  double amax = 0.0;
  for (int j = 0; j < c.size(); ++j) {
    dmax = std::max(dmax, static_cast<double>(c.children(j)));
    amax = std::max(amax, std::abs(c.potential[static_cast<std::size_t>(j)]));
  }
  const double eta_start = std::max(4.0 * (dmax + amax), 4.0);
  const double eta_target = gamma.imag();
  double eta = std::max(eta_start, eta_target);
  Complex g(gamma.real(), eta);
  Eigen::VectorXcd h(c.size());
  for (int j = 0; j < c.size(); ++j) h(j) = 1.0 / (g - c.potential[static_cast<std::size_t>(j)]);
  std::vector<ContinuationStep> cert;
  std::string why;
  int its = sys.solve(g, h, opts, &why);
  if (its < 0) throw ConeError("continuation failure at the starting point: " + why);
  cert.push_back({g, its});
  double ratio = opts.shrink;
  int halvings = 0;
  while (eta > eta_target) {
    const double next = std::max(eta * ratio, eta_target);
    const Complex gn(gamma.real(), next);
    Eigen::VectorXcd trial = h;
    its = sys.solve(gn, trial, opts, &why);
    if (its < 0) {
      if (++halvings > opts.max_halvings) {
        std::ostringstream msg;
        msg << "continuation failure near gamma = " << gn.real() << " + " << gn.imag() << "i: " << why;
        throw ConeError(msg.str());
      }
      ratio = std::sqrt(ratio);
      continue;
    }
    h = std::move(trial);
    eta = next;
    cert.push_back({gn, its});
    ratio = std::max(ratio * ratio, opts.shrink);
  }
  return finish(c, gamma, std::move(h), std::move(cert));
}

GreenState solve_green(const ConeSystem& c, Complex gamma, const GreenState& from, const SolveOptions& opts) {
  require(gamma.imag() > 0.0, "solve_green needs Im gamma > 0");
  if (from.zeta.size() == c.size() && std::abs(gamma - from.gamma) <= 0.5 * gamma.imag()) {
    NewtonSystem sys(c);
    Eigen::VectorXcd h = from.zeta;
    const int its = sys.solve(gamma, h, opts);
    if (its >= 0) {
      auto cert = from.certificate;
      cert.push_back({gamma, its});
      return finish(c, gamma, std::move(h), std::move(cert));
    }
  }
  return solve_green(c, gamma, opts);
}

// ---- Spectrum detection ----------------------------------------------------------------------------
SpectrumReport detect_spectrum(const ConeSystem& c, const std::vector<double>& lambda_grid, double eta_final,
                               double threshold) {
  require(std::is_sorted(lambda_grid.begin(), lambda_grid.end()), "detect_spectrum needs a sorted grid");
  require(eta_final > 0.0 && eta_final <= 1e-3, "eta_final must lie in (0, 1e-3]");
  SpectrumReport r;
  r.lambda = lambda_grid;
  r.eta = eta_final;
  r.threshold = threshold;
  const std::size_t n = lambda_grid.size();
  r.min_im_zeta.assign(n, std::numeric_limits<double>::quiet_NaN());
  r.in_spectrum.assign(n, false);
  r.failed.assign(n, false);
  r.unreliable.assign(n, false);
  std::optional<GreenState> prev;
  for (std::size_t i = 0; i < n; ++i) {
    const Complex gamma(lambda_grid[i], eta_final);
    try {
      GreenState st = prev ? solve_green(c, gamma, *prev) : solve_green(c, gamma);
      double mn = std::numeric_limits<double>::infinity();
      for (Eigen::Index j = 0; j < st.zeta.size(); ++j) mn = std::min(mn, std::abs(st.zeta(j).imag()));
      r.min_im_zeta[i] = mn;
      r.in_spectrum[i] = mn > threshold;
      prev = std::move(st);
    } catch (const ConeError&) {
      r.failed[i] = true;
      r.unreliable[i] = true;
      prev.reset();
    }
  }
  std::vector<std::size_t> ends;
  for (std::size_t i = 0; i < n;) {
    if (!r.in_spectrum[i]) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j + 1 < n && r.in_spectrum[j + 1]) ++j;
    r.intervals.push_back({lambda_grid[i], lambda_grid[j]});
    ends.push_back(i);
    ends.push_back(j);
    i = j + 1;
  }
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t e : ends) {
      const std::size_t gap = i > e ? i - e : e - i;
      if (gap <= static_cast<std::size_t>(kEdgeGuardSteps)) r.unreliable[i] = true;
    }
  return r;
}

void write_spectrum_report_csv(std::ostream& out, const SpectrumReport& r) {
  out << "lambda,min_im_zeta,in_spectrum\n";
  char buf[96];
  for (std::size_t i = 0; i < r.lambda.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g,%d\n", r.lambda[i], r.min_im_zeta[i], r.in_spectrum[i] ? 1 : 0);
    out << buf;
  }
}

// ---- Universal covers --------------------------------------------------------------------------------
CoverGreen cover_green_from_state(const DirectedEdgeSpace& d, const GreenState& st) {
  const int n = d.vertex_count();
  const auto m = static_cast<Eigen::Index>(d.edge_count());
  require(st.zeta.size() == n + m, "state was not solved on the all-roots cover system");
  CoverGreen cg;
  cg.gamma = st.gamma;
  cg.residual = st.residual;
  cg.diag = -st.zeta.head(n);
  cg.zeta_edge = st.zeta.segment(n, m);
  return cg;
}

CoverGreen solve_cover_green(const DirectedEdgeSpace& d, Complex gamma, const SolveOptions& opts) {
  const ConeSystem c = cover_cone_matrix(d.graph(), -1);
  return cover_green_from_state(d, solve_green(c, gamma, opts));
}

ZetaProvider cover_zeta_provider(const DirectedEdgeSpace& d) {
  auto system = std::make_shared<const ConeSystem>(cover_cone_matrix(d.graph(), -1));
  auto last = std::make_shared<std::optional<GreenState>>();
  const int n = d.vertex_count();
  const auto m = static_cast<Eigen::Index>(d.edge_count());
  return [system, last, n, m](Complex gamma) {
    GreenState st = *last ? solve_green(*system, gamma, **last) : solve_green(*system, gamma);
    Eigen::VectorXcd out = st.zeta.segment(n, m);
    *last = std::move(st);
    return out;
  };
}

Complex green_on_cover(const DirectedEdgeSpace& d, const CoverGreen& cg, std::span<const Vertex> path) {
  require(!path.empty(), "empty path");
  require(cg.diag.size() == d.vertex_count() && static_cast<std::size_t>(cg.zeta_edge.size()) == d.edge_count(),
          "unsolved cover Green data");
  Complex out = cg.diag(path[0]);
  for (std::size_t i = 1; i < path.size(); ++i) {
    require(!(i >= 2 && path[i] == path[i - 2]), "path backtracks");
    out *= cg.zeta_edge(static_cast<Eigen::Index>(d.edge_index(path[i - 1], path[i])));
  }
  return out;
}

std::vector<Vertex> first_geodesic(const Graph& g, Vertex x, Vertex y) {
  g.check_vertex(x);
  g.check_vertex(y);
  const std::vector<int> dist = bfs_distances(g, y);
  require(dist[static_cast<std::size_t>(x)] >= 0, "vertices are not connected");
  std::vector<Vertex> path{x};
  Vertex v = x;
  while (v != y) {
    for (Vertex u : g.neighbours(v))
      if (dist[static_cast<std::size_t>(u)] == dist[static_cast<std::size_t>(v)] - 1) {
        v = u;
        break;
      }
    path.push_back(v);
  }
  return path;
}

Complex green_on_cover(const DirectedEdgeSpace& d, const CoverGreen& cg, Vertex x, Vertex y) {
  const auto path = first_geodesic(d.graph(), x, y);
  return green_on_cover(d, cg, path);
}

Eigen::VectorXd phi_diagonal(const CoverGreen& cg) {
  const Eigen::VectorXd im = cg.diag.imag();
  const double total = im.sum();
  require(total > 0.0, "nonpositive total spectral weight");
  return im / total;
}

double phi_weight(const DirectedEdgeSpace& d, const CoverGreen& cg, Vertex x, Vertex y) {
  const double total = cg.diag.imag().sum();
  require(total > 0.0, "nonpositive total spectral weight");
  return green_on_cover(d, cg, x, y).imag() / total;
}

Complex kbar(const DirectedEdgeSpace& d, const CoverGreen& cg, const BoundedKernel& k) {
  const double total = cg.diag.imag().sum();
  require(total > 0.0, "nonpositive total spectral weight");
  Complex s = 0.0;
  for (const auto& e : k.entries) s += e.value * green_on_cover(d, cg, e.x, e.y).imag();
  return s / total;
}

// ---- Moments -------------------------------------------------------------------------------------------
double green_moment_at(const ConeSystem& c, const GreenState& st, double s, double floor) {
  require(s >= 0.0, "moment order must be nonnegative");
  require(st.zeta.size() == c.size(), "state does not match the cone system");
  double total = 0.0;
  for (std::size_t i = 0; i < c.root_labels.size(); ++i) {
    double inner = 0.0;
    for (auto [k, m] : c.rows[static_cast<std::size_t>(c.root_labels[i])]) {
      const double im = std::abs(st.zeta(k).imag());
      if (im < floor) {
        std::ostringstream msg;
        msg << "|Im zeta| = " << im << " below the floor at lambda = " << st.gamma.real()
            << " (excluded region or outside the spectrum)";
        throw ConeError(msg.str());
      }
      inner += m * std::pow(im, -s);
    }
    total += c.root_measure[i] * inner;
  }
  return total;
}

GreenMomentReport green_moment(const ConeSystem& c, const std::vector<double>& lambda_grid,
                               const std::vector<double>& eta_grid, double s, const SpectrumReport* spectrum,
                               double floor) {
  require(s >= 0.0, "moment order must be nonnegative");
  require(!lambda_grid.empty() && !eta_grid.empty(), "empty grid");
  std::vector<double> etas = eta_grid;
  std::sort(etas.begin(), etas.end(), std::greater<>());
  GreenMomentReport rep;
  rep.value = -1.0;
  rep.lambda = lambda_grid;
  double step = 0.0;
  if (spectrum && spectrum->lambda.size() > 1)
    step = (spectrum->lambda.back() - spectrum->lambda.front()) / static_cast<double>(spectrum->lambda.size() - 1);
  for (double lam : lambda_grid) {
    double best = 0.0;
    std::optional<GreenState> prev;
    for (double eta : etas) {
      const Complex gamma(lam, eta);
      GreenState st = prev ? solve_green(c, gamma, *prev) : solve_green(c, gamma);
      const double v = green_moment_at(c, st, s, floor);
      best = std::max(best, v);
      if (v > rep.value) {
        rep.value = v;
        rep.argmax_lambda = lam;
        rep.argmax_eta = eta;
      }
      prev = std::move(st);
    }
    rep.per_lambda.push_back(best);
    bool flag = false;
    if (spectrum) {
      bool inside = false;
      for (const auto& iv : spectrum->intervals) {
        if (iv.contains(lam)) inside = true;
        if (std::abs(lam - iv.lo) <= kEdgeGuardSteps * step + 1e-12 || std::abs(lam - iv.hi) <= kEdgeGuardSteps * step + 1e-12)
          flag = true;
      }
      if (!inside) flag = true;
    }
    rep.unreliable.push_back(flag);
  }
  return rep;
}

// ---- Poisson kernel ----------------------------------------------------------------------------------------
int RayTree::distance(int a, int b) const {
  int d = 0;
  while (level[static_cast<std::size_t>(a)] > level[static_cast<std::size_t>(b)]) {
    a = parent[static_cast<std::size_t>(a)];
    ++d;
  }
  while (level[static_cast<std::size_t>(b)] > level[static_cast<std::size_t>(a)]) {
    b = parent[static_cast<std::size_t>(b)];
    ++d;
  }
  while (a != b) {
    a = parent[static_cast<std::size_t>(a)];
    b = parent[static_cast<std::size_t>(b)];
    d += 2;
  }
  return d;
}

RayTree make_ray_tree(int q, int depth) {
  require(q >= 1, "regular tree needs q >= 1");
  require(depth >= 2, "truncation too shallow: depth must be at least 2");
  RayTree t;
  t.q = q;
  t.depth = depth;
  t.parent.push_back(-1);
  t.level.push_back(0);
  t.meet.push_back(0);
  t.neighbours.emplace_back();
  t.ray.push_back(0);
  std::vector<char> on_ray{1};
  for (std::size_t i = 0; i < t.parent.size(); ++i) {
    const int lv = t.level[i];
    if (lv == depth) continue;
    const int kids = i == 0 ? q + 1 : q;
    for (int c = 0; c < kids; ++c) {
      const int id = static_cast<int>(t.parent.size());
      t.parent.push_back(static_cast<int>(i));
      t.level.push_back(lv + 1);
      const bool ray = on_ray[i] && c == 0;
      on_ray.push_back(ray ? 1 : 0);
      t.meet.push_back(ray ? lv + 1 : t.meet[i]);
      t.neighbours.emplace_back();
      t.neighbours[i].push_back(id);
      t.neighbours.back().push_back(static_cast<int>(i));
      if (ray) t.ray.push_back(id);
    }
  }
  return t;
}

Complex poisson_kernel(const RayTree& t, Complex gamma, int v) {
  require(v >= 0 && v < t.size(), "vertex outside the truncated tree");
  const Complex z = regular_tree_zeta(t.q, gamma);
  const Complex g0 = -1.0 / (gamma - static_cast<double>(t.q + 1) * z);
  const auto green = [&](int a, int b) { return g0 * std::pow(z, t.distance(a, b)); };
  const int c = t.ray[static_cast<std::size_t>(t.meet[static_cast<std::size_t>(v)])];
  return green(c, v) / green(0, c);
}

double poisson_residual(const RayTree& t, Complex gamma) {
  std::vector<Complex> p(static_cast<std::size_t>(t.size()));
  for (int v = 0; v < t.size(); ++v) p[static_cast<std::size_t>(v)] = poisson_kernel(t, gamma, v);
  double worst = 0.0;
  for (int v = 0; v < t.size(); ++v) {
    if (t.level[static_cast<std::size_t>(v)] >= t.depth) continue;
    Complex s = -gamma * p[static_cast<std::size_t>(v)];
    for (int u : t.neighbours[static_cast<std::size_t>(v)]) s += p[static_cast<std::size_t>(u)];
    worst = std::max(worst, std::abs(s));
  }
  return worst;
}

}  // namespace qelab
