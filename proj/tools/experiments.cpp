#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <exception>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>
#include <thread>

#include "json.hpp"
#include "qelab/anderson.hpp"
#include "qelab/cli.hpp"
#include "qelab/cone.hpp"
#include "qelab/generators.hpp"
#include "qelab/kernels.hpp"
#include "qelab/spectral.hpp"
#include "qelab/variance.hpp"

#ifndef QELAB_VERSION
#define QELAB_VERSION "unknown"
#endif

namespace qelab {

namespace {

using json = nlohmann::json;

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}
std::string fmt(int v) { return std::to_string(v); }
std::string fmt(std::uint64_t v) { return std::to_string(v); }
std::string fmt(bool v) { return v ? "1" : "0"; }
std::string fmt(const std::string& v) { return v; }

// Comma-joined fields of one CSV row.
class Row {
 public:
  template <class T>
  Row& operator<<(const T& v) {
    if (!text_.empty()) text_ += ',';
    text_ += fmt(v);
    return *this;
  }
  const std::string& str() const { return text_; }

 private:
  std::string text_;
};

struct Table {
  std::string file;
  std::vector<std::string> header;    // without config_hash
  std::vector<std::string> comments;  // '#' lines written before the header
  std::vector<std::string> rows;      // without config_hash
};

// Rows emitted by one sweep cell, one vector per table.
using CellRows = std::vector<std::vector<std::string>>;

// Runs cells 0..n-1 on a small work pool; results are merged in cell order so
// the output does not depend on scheduling. The lowest-index failure wins.
CellRows run_cells(std::size_t n, std::size_t tables, int threads, const std::function<CellRows(std::size_t)>& fn) {
  std::vector<CellRows> results(n);
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        results[i] = fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const int t = std::max(1, std::min<int>(threads, static_cast<int>(n)));
  if (t == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int i = 0; i < t; ++i) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);
  CellRows merged(tables);
  for (auto& r : results)
    for (std::size_t k = 0; k < r.size() && k < tables; ++k)
      merged[k].insert(merged[k].end(), std::make_move_iterator(r[k].begin()), std::make_move_iterator(r[k].end()));
  return merged;
}

// Runs fn, prefixing any failure with the stage name.
template <class F>
auto stage(const std::string& name, F&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const ExperimentError&) {
    throw;
  } catch (const std::exception& e) {
    throw ExperimentError("stage '" + name + "' failed: " + e.what());
  }
}

struct Aggregate {
  std::string table;
  std::vector<std::string> group_by;
  std::vector<std::string> values;
};

struct Outputs {
  std::vector<Table> tables;
  std::vector<std::pair<std::string, std::string>> extra_files;  // name, content
  Aggregate aggregate;
  std::vector<std::uint64_t> seeds;
};

double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return v.empty() ? std::nan("") : s / static_cast<double>(v.size());
}

double sample_sd(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = mean_of(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size() - 1));
}

// ---- Shared builders -------------------------------------------------------------------------

GeneratorSpec generator_spec(const ExperimentConfig& cfg, int n, std::uint64_t seed) {
  GeneratorSpec spec;
  spec.family = cfg.get("generator.family", "random_regular");
  spec.n = n;
  spec.degree = cfg.get_int("generator.degree", 3);
  spec.p1 = cfg.get_int("generator.p1", 3);
  spec.q1 = cfg.get_int("generator.q1", 4);
  spec.n_black = n;
  spec.base_file = cfg.get("generator.base_file", "");
  spec.base_family = cfg.get("generator.base_family", "");
  spec.seed = seed;
  return spec;
}

BoundedKernel make_kernel(const ExperimentConfig& cfg, const Graph& g, std::uint64_t seed) {
  const std::string kind = cfg.get("kernel.kind", "diagonal-indicator");
  if (kind == "diagonal-indicator") return centered_half_set(g, seed);
  if (kind == "random-bounded") return random_bounded(g, cfg.get_int("kernel.range", 1), seed);
  return nearest_neighbour(g);
}

Eigen::MatrixXi parse_matrix(const std::string& text) {
  std::vector<std::vector<int>> rows;
  std::stringstream in(text);
  std::string row;
  while (std::getline(in, row, ';')) {
    std::vector<int> r;
    std::stringstream rs(row);
    std::string item;
    while (std::getline(rs, item, ',')) {
      try {
        r.push_back(std::stoi(item));
      } catch (const std::exception&) {
        throw ConfigError("cone.matrix: bad entry '" + item + "'");
      }
    }
    rows.push_back(r);
  }
  const auto n = rows.size();
  if (n == 0) throw ConfigError("cone.matrix is empty");
  Eigen::MatrixXi m(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    if (rows[i].size() != n) throw ConfigError("cone.matrix must be square (rows separated by ';')");
    for (std::size_t j = 0; j < n; ++j) m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
  }
  return m;
}

ConeSystem make_cone(const ExperimentConfig& cfg) {
  return stage("cone construction", [&] {
    const std::string kind = cfg.get("cone.kind");
    ConeSystem c;
    if (kind == "regular") {
      c = regular_tree_cone(cfg.get_int("cone.q"));
    } else if (kind == "neighbour") {
      c = neighbour_to_cone(parse_matrix(cfg.get("cone.matrix")), cfg.get_int("cone.root_colour", -1));
    } else if (kind == "cover") {
      const auto seed = static_cast<std::uint64_t>(cfg.get_int("cone.seed", 1));
      const Graph g = generate(generator_spec(cfg, cfg.get_int("cone.n", 0), seed));
      c = cover_cone_matrix(g, cfg.get_int("cone.root", -1));
    } else {
      std::ifstream in(cfg.get("cone.file"));
      if (!in) throw ConfigError("cannot open cone.file " + cfg.get("cone.file"));
      c = read_cone_json(in);
    }
    if (cfg.get("cone.reduce", "false") == "true") c = reduce_cone_system(c);
    return c;
  });
}

PoolParams pool_params(const ExperimentConfig& cfg) {
  PoolParams p;
  p.pool_size = cfg.get_int("anderson.pool_size", p.pool_size);
  p.generations = cfg.get_int("anderson.generations", p.generations);
  p.burn_in = cfg.get_int("anderson.burn_in", p.burn_in);
  p.seed = static_cast<std::uint64_t>(cfg.get_int("anderson.seed", 1));
  p.replicas = cfg.get_int("anderson.replicas", p.replicas);
  return p;
}

Interval parse_interval(const ExperimentConfig& cfg) {
  std::vector<double> v;
  std::stringstream in(cfg.get("anderson.interval"));
  std::string item;
  while (std::getline(in, item, ',')) v.push_back(std::stod(item));
  if (v.size() != 2 || !(v[0] < v[1])) throw ConfigError("anderson.interval must be 'lo,hi' with lo < hi");
  return {v[0], v[1]};
}

std::vector<std::uint64_t> seed_list(const ExperimentConfig& cfg) {
  std::vector<std::uint64_t> out;
  for (int s : cfg.get_int_list("sweep.seeds")) {
    if (s < 0) throw ConfigError("sweep.seeds must be non-negative");
    out.push_back(static_cast<std::uint64_t>(s));
  }
  return out;
}

// Cover Green data along a lambda sweep, warm-started between neighbouring points.
class CoverSweep {
 public:
  explicit CoverSweep(const DirectedEdgeSpace& d) : d_(d), system_(cover_cone_matrix(d.graph(), -1)) {}
  CoverGreen at(Complex gamma) {
    state_ = state_ ? solve_green(system_, gamma, *state_) : solve_green(system_, gamma);
    return cover_green_from_state(d_, *state_);
  }

 private:
  const DirectedEdgeSpace& d_;
  ConeSystem system_;
  std::optional<GreenState> state_;
};

// ---- Experiments -------------------------------------------------------------------------------

Outputs qe_regular(const ExperimentConfig& cfg, int threads) {
  const auto ns = cfg.get_int_list("sweep.N");
  const auto seeds = seed_list(cfg);
  Outputs out;
  out.seeds = seeds;
  Table t{"qe_regular.csv", {"N", "seed", "discrepancy"}, {}, {}};
  const std::size_t cells = ns.size() * seeds.size();
  auto rows = run_cells(cells, 1, threads, [&](std::size_t i) {
    const int n = ns[i / seeds.size()];
    const std::uint64_t seed = seeds[i % seeds.size()];
    const Graph g = stage("generator", [&] { return generate(generator_spec(cfg, n, seed)); });
    const EigenSystem es = stage("eigensystem", [&] { return eigensystem(g); });
    const double value = stage("discrepancy", [&] { return qe_discrepancy_value(es, g, make_kernel(cfg, g, seed)); });
    return CellRows{{(Row() << n << seed << value).str()}};
  });
  t.rows = std::move(rows[0]);
  // Mean trend per N, relative to the smallest N.
  Table s{"qe_regular_summary.csv", {"N", "mean", "sd", "count", "ratio_to_first"}, {}, {}};
  double first = std::nan("");
  for (std::size_t a = 0; a < ns.size(); ++a) {
    std::vector<double> v;
    for (std::size_t b = 0; b < seeds.size(); ++b) {
      const std::string& r = t.rows[a * seeds.size() + b];
      v.push_back(std::stod(r.substr(r.rfind(',') + 1)));
    }
    const double m = mean_of(v);
    if (a == 0) first = m;
    s.rows.push_back((Row() << ns[a] << m << sample_sd(v) << static_cast<int>(v.size()) << m / first).str());
  }
  out.tables = {std::move(t), std::move(s)};
  out.aggregate = {"qe_regular.csv", {"N"}, {"discrepancy"}};
  return out;
}

Outputs qe_anderson(const ExperimentConfig& cfg, int threads) {
  const auto ns = cfg.get_int_list("sweep.N");
  const auto seeds = seed_list(cfg);
  const auto etas = cfg.get_list("sweep.eta0");
  const auto epss = cfg.get_list("sweep.epsilon");
  const PotentialLaw law = stage("potential law", [&] { return PotentialLaw::parse(cfg.get("anderson.law")); });
  const Interval iv = parse_interval(cfg);
  Outputs out;
  out.seeds = seeds;
  Table t{"qe_anderson.csv",
          {"N", "seed", "epsilon", "eta0", "interval_lo", "interval_hi", "count", "discrepancy"},
          {"# limit order: lim_{eta0 -> 0} lim_{N -> infinity}; read the (N, eta0) matrix along N first, then eta0"},
          {}};
  const std::size_t cells = ns.size() * seeds.size() * epss.size();
  auto rows = run_cells(cells, 1, threads, [&](std::size_t i) {
    const int n = ns[i / (seeds.size() * epss.size())];
    const std::uint64_t seed = seeds[(i / epss.size()) % seeds.size()];
    const double eps = epss[i % epss.size()];
    const Graph base = stage("generator", [&] { return generate(generator_spec(cfg, n, seed)); });
    const Graph g = stage("potential", [&] {
      return finite_anderson_attach(base, law, eps, seed ^ 0x9e3779b97f4a7c15ULL);
    });
    const EigenSystem es = stage("eigensystem", [&] { return eigensystem(g); });
    const BoundedKernel k = stage("kernel", [&] { return make_kernel(cfg, base, seed); });
    const Eigen::SparseMatrix<Complex> km = k.matrix();
    const DirectedEdgeSpace d(g);
    std::vector<std::string> r;
    for (double eta0 : etas) {
      const double value = stage("cover Green weights", [&] {
        CoverSweep sweep(d);
        double sum = 0.0;
        for (int j = 0; j < es.size(); ++j) {
          const double lambda = es.values(j);
          if (!iv.contains(lambda)) continue;
          const CoverGreen cg = sweep.at(Complex(lambda, eta0));
          const Eigen::VectorXcd psi = es.vectors.col(j).cast<Complex>();
          const Complex form = psi.dot(km * psi);
          sum += std::norm(form - kbar(d, cg, k));
        }
        return sum / static_cast<double>(g.size());
      });
      int count = 0;
      for (int j = 0; j < es.size(); ++j) count += iv.contains(es.values(j)) ? 1 : 0;
      r.push_back((Row() << n << seed << eps << eta0 << iv.lo << iv.hi << count << value).str());
    }
    return CellRows{std::move(r)};
  });
  t.rows = std::move(rows[0]);

  // (N, eta0) matrix of seed means, one block per epsilon.
  Table m{"qe_anderson_matrix.csv", {"epsilon", "eta0"}, t.comments, {}};
  for (int n : ns) m.header.push_back("N_" + std::to_string(n));
  for (std::size_t e = 0; e < epss.size(); ++e)
    for (std::size_t h = 0; h < etas.size(); ++h) {
      Row row;
      row << epss[e] << etas[h];
      for (std::size_t a = 0; a < ns.size(); ++a) {
        std::vector<double> v;
        for (std::size_t b = 0; b < seeds.size(); ++b) {
          const std::size_t cell = (a * seeds.size() + b) * epss.size() + e;
          const std::string& r = t.rows[cell * etas.size() + h];
          v.push_back(std::stod(r.substr(r.rfind(',') + 1)));
        }
        row << mean_of(v);
      }
      m.rows.push_back(row.str());
    }
  out.tables = {std::move(t), std::move(m)};
  out.aggregate = {"qe_anderson.csv", {"N", "eta0", "epsilon"}, {"discrepancy"}};
  return out;
}

std::string cone_json_text(const ConeSystem& c) {
  std::ostringstream s;
  write_cone_json(s, c);
  return s.str();
}

Outputs cone_solve(const ExperimentConfig& cfg, int threads) {
  const ConeSystem c = make_cone(cfg);
  const auto lambdas = cfg.get_list("sweep.lambda");
  const auto etas = cfg.get_list("sweep.eta");
  Outputs out;
  Table t{"cone_solve.csv", {"lambda", "eta", "label", "label_name", "re_zeta", "im_zeta", "residual"}, {}, {}};
  auto rows = run_cells(etas.size(), 1, threads, [&](std::size_t i) {
    const double eta = etas[i];
    std::vector<std::string> r;
    std::optional<GreenState> prev;
    for (double lambda : lambdas) {
      const Complex gamma(lambda, eta);
      prev = stage("green solve", [&] { return prev ? solve_green(c, gamma, *prev) : solve_green(c, gamma); });
      for (int j = 0; j < c.size(); ++j)
        r.push_back((Row() << lambda << eta << j << c.labels[static_cast<std::size_t>(j)] << prev->zeta(j).real()
                           << prev->zeta(j).imag() << prev->residual)
                        .str());
    }
    return CellRows{std::move(r)};
  });
  t.rows = std::move(rows[0]);
  out.tables = {std::move(t)};
  out.extra_files = {{"cone.json", cone_json_text(c)}};
  out.aggregate = {"cone_solve.csv", {"lambda", "eta", "label"}, {"im_zeta"}};
  return out;
}

Outputs cone_spectrum(const ExperimentConfig& cfg, int) {
  const ConeSystem c = make_cone(cfg);
  const auto lambdas = cfg.get_list("sweep.lambda");
  const double eta = cfg.get_double("spectrum.eta_final", kDefaultEtaFinal);
  const double thr = cfg.get_double("spectrum.threshold", kDefaultDetectThreshold);
  const SpectrumReport rep = stage("spectrum detection", [&] { return detect_spectrum(c, lambdas, eta, thr); });
  Outputs out;
  Table t{"spectrum.csv", {"lambda", "min_im_zeta", "in_spectrum", "failed", "unreliable"}, {}, {}};
  for (std::size_t i = 0; i < rep.lambda.size(); ++i)
    t.rows.push_back((Row() << rep.lambda[i] << rep.min_im_zeta[i] << static_cast<bool>(rep.in_spectrum[i])
                            << static_cast<bool>(rep.failed[i]) << static_cast<bool>(rep.unreliable[i]))
                         .str());
  Table iv{"intervals.csv", {"lo", "hi"}, {}, {}};
  for (const auto& x : rep.intervals) iv.rows.push_back((Row() << x.lo << x.hi).str());
  out.tables = {std::move(t), std::move(iv)};
  out.extra_files = {{"cone.json", cone_json_text(c)}};
  out.aggregate = {"spectrum.csv", {"lambda"}, {"min_im_zeta"}};
  return out;
}

Outputs green_moments(const ExperimentConfig& cfg, int threads) {
  const ConeSystem c = make_cone(cfg);
  const auto lambdas = cfg.get_list("sweep.lambda");
  const auto etas = cfg.get_list("sweep.eta");
  const auto ss = cfg.get_list("sweep.s");
  const double floor = cfg.get_double("spectrum.floor", kMomentFloor);
  Outputs out;
  Table t{"green_moments.csv", {"s", "lambda", "moment", "unreliable"}, {}, {}};
  Table sum{"green_moments_summary.csv", {"s", "sup_moment", "argmax_lambda", "argmax_eta"}, {}, {}};
  auto rows = run_cells(ss.size(), 2, threads, [&](std::size_t i) {
    const double s = ss[i];
    const auto rep = stage("green moments", [&] { return green_moment(c, lambdas, etas, s, nullptr, floor); });
    CellRows r(2);
    for (std::size_t k = 0; k < rep.lambda.size(); ++k)
      r[0].push_back((Row() << s << rep.lambda[k] << rep.per_lambda[k] << static_cast<bool>(rep.unreliable[k])).str());
    r[1].push_back((Row() << s << rep.value << rep.argmax_lambda << rep.argmax_eta).str());
    return r;
  });
  t.rows = std::move(rows[0]);
  sum.rows = std::move(rows[1]);
  out.tables = {std::move(t), std::move(sum)};
  out.aggregate = {"green_moments.csv", {"lambda", "s"}, {"moment"}};
  return out;
}

Outputs sigma_ac(const ExperimentConfig& cfg, int threads) {
  const ConeSystem c = make_cone(cfg);
  const PotentialLaw law = stage("potential law", [&] { return PotentialLaw::parse(cfg.get("anderson.law")); });
  const auto lambdas = cfg.get_list("sweep.lambda");
  const auto etas = cfg.get_list("sweep.eta");
  const auto epss = cfg.get_list("sweep.epsilon");
  const auto deltas = cfg.get_list("sweep.delta");
  const PoolParams params = pool_params(cfg);
  Outputs out;
  out.seeds = {params.seed};
  Table t{"sigma_ac.csv", {"epsilon", "delta", "lambda", "eta", "label", "frac_above_delta", "marked"}, {}, {}};
  Table m{"sigma_ac_marked.csv", {"epsilon", "delta", "lambda", "marked"}, {}, {}};
  auto rows = run_cells(epss.size() * deltas.size(), 2, threads, [&](std::size_t i) {
    const double eps = epss[i / deltas.size()];
    const double delta = deltas[i % deltas.size()];
    const auto scan = stage("population dynamics", [&] {
      return sigma_ac_scan(c, law, eps, delta, lambdas, etas, params);
    });
    CellRows r(2);
    for (const auto& x : scan.rows)
      r[0].push_back((Row() << eps << delta << x.lambda << x.eta << x.label << x.frac_above_delta << x.marked).str());
    for (std::size_t k = 0; k < scan.lambda.size(); ++k)
      r[1].push_back((Row() << eps << delta << scan.lambda[k] << static_cast<bool>(scan.marked[k])).str());
    return r;
  });
  t.rows = std::move(rows[0]);
  m.rows = std::move(rows[1]);
  out.tables = {std::move(t), std::move(m)};
  out.aggregate = {"sigma_ac.csv", {"lambda", "eta", "epsilon", "delta", "label"}, {"frac_above_delta"}};
  return out;
}

Outputs biregular_weights(const ExperimentConfig& cfg, int threads) {
  const int p = cfg.get_int("biregular.p");
  const int q = cfg.get_int("biregular.q");
  const auto ns = cfg.get_int_list("sweep.N");
  const auto seeds = seed_list(cfg);
  const auto lambdas = cfg.get_list("sweep.lambda");
  const auto etas = cfg.get_list("sweep.eta");
  Outputs out;
  out.seeds = seeds;
  Table t{"biregular_weights.csv",
          {"n_black", "seed", "N", "lambda", "eta", "ratio_bb_ww", "ratio_bb_bw", "ratio_ww_bw", "golden_bb_ww",
           "golden_bb_bw", "golden_ww_bw", "n_phi_black", "n_phi_white", "golden_n_phi_black", "golden_n_phi_white",
           "phi_sum"},
          {},
          {}};
  auto rows = run_cells(ns.size() * seeds.size(), 1, threads, [&](std::size_t i) {
    const int nb = ns[i / seeds.size()];
    const std::uint64_t seed = seeds[i % seeds.size()];
    const Graph g = stage("generator", [&] { return biregular(p + 1, q + 1, nb, seed); });
    const DirectedEdgeSpace d(g);
    const int n = g.size();
    const Vertex black = 0;
    Vertex white = -1;
    for (Vertex x = 0; x < n; ++x)
      if (g.colour(x) == 1) {
        white = x;
        break;
      }
    const Vertex black_nb = g.neighbours(black)[0];
    std::vector<std::string> r;
    for (double eta : etas) {
      CoverSweep sweep(d);
      for (double lambda : lambdas) {
        const CoverGreen cg = stage("cover Green function", [&] { return sweep.at(Complex(lambda, eta)); });
        const Eigen::VectorXd phi = phi_diagonal(cg);
        const double ibb = cg.diag(black).imag();
        const double iww = cg.diag(white).imag();
        const double ibw = green_on_cover(d, cg, black, black_nb).imag();
        const double gphi_b = (p + q + 2.0) / (2.0 * (q + 1));
        const double gphi_w = (p + q + 2.0) / (2.0 * (p + 1));
        r.push_back((Row() << nb << seed << n << lambda << eta << ibb / iww << ibb / ibw << iww / ibw
                           << (p + 1.0) / (q + 1.0) << (p + 1.0) / lambda << (q + 1.0) / lambda << n * phi(black)
                           << n * phi(white) << gphi_b << gphi_w << phi.sum())
                        .str());
      }
    }
    return CellRows{std::move(r)};
  });
  t.rows = std::move(rows[0]);
  out.tables = {std::move(t)};
  out.aggregate = {"biregular_weights.csv",
                   {"lambda", "n_black", "eta"},
                   {"ratio_bb_ww", "ratio_bb_bw", "ratio_ww_bw", "n_phi_black", "n_phi_white"}};
  return out;
}

double max_abs_diff(const NbKernel& a, const NbKernel& b) {
  double m = 0.0;
  const NbKernel diff = a - b;
  for (int j : diff.present_grades())
    for (const Complex& v : diff.grade(j)) m = std::max(m, std::abs(v));
  return m;
}

Outputs diagnostics(const ExperimentConfig& cfg, int threads) {
  const auto ns = cfg.get_int_list("sweep.N");
  const auto seeds = seed_list(cfg);
  const auto nlist = cfg.has("sweep.n") ? cfg.get_int_list("sweep.n") : std::vector<int>{1, 2, 3};
  const int tt = cfg.get_int("sweep.T", 8);
  const int radius = cfg.get_int("diagnostics.radius", 2);
  const Complex gamma(cfg.get_double("diagnostics.gamma_re", 1.0), cfg.get_double("diagnostics.gamma_im", 0.01));
  Outputs out;
  out.seeds = seeds;
  Table t{"diagnostics.csv",
          {"N", "seed", "size", "radius", "bst", "beta", "rho_p", "invariance_error", "decomposition_error",
           "sum_rule_residual", "row_sum_deviation"},
          {},
          {}};
  auto rows = run_cells(ns.size() * seeds.size(), 1, threads, [&](std::size_t i) {
    const int n = ns[i / seeds.size()];
    const std::uint64_t seed = seeds[i % seeds.size()];
    const Graph g = stage("generator", [&] { return generate(generator_spec(cfg, n, seed)); });
    const double bst = stage("bst", [&] { return bst_statistic(g, radius); });
    const double beta = stage("spectral gap", [&] { return walk_spectral_gap(g).beta; });
    const double rho = rho_p_bound(g);
    auto space = std::make_shared<const DirectedEdgeSpace>(g);
    double invariance = std::nan("");
    double decomposition = std::nan("");
    if (g.is_regular() && !g.has_potential()) {
      const EigenSystem es = stage("eigensystem", [&] { return eigensystem(g); });
      const NbKernel k = NbKernel::random(space, 1, seed, true, true);
      stage("variance invariance", [&] {
        const double base = quantum_variance(es, nabla_star(k)).value;
        invariance = 0.0;
        for (int m : nlist)
          invariance = std::max(invariance, std::abs(quantum_variance(es, nabla_star(sigma_n(k, m))).value - base));
        return 0;
      });
      decomposition = stage("decomposition", [&] {
        const NbKernel st = s_t(k, tt);
        return max_abs_diff((st - transfer(st)) + s_tilde_t(k, tt), k);
      });
    }
    const auto sg = stage("sum rule", [&] { return s_gamma_diagnostics(*space, gamma, cover_zeta_provider(*space)(gamma), 1); });
    return CellRows{{(Row() << n << seed << g.size() << radius << bst << beta << rho << invariance << decomposition
                            << sg.max_sum_rule_residual << sg.max_row_sum_deviation)
                         .str()}};
  });
  t.rows = std::move(rows[0]);
  out.tables = {std::move(t)};
  out.aggregate = {"diagnostics.csv",
                   {"N"},
                   {"bst", "beta", "rho_p", "invariance_error", "decomposition_error", "sum_rule_residual"}};
  return out;
}

std::string utc_now() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace

std::filesystem::path resolve_output(const ExperimentConfig& cfg, const RunOptions& opts) {
  if (!opts.output.empty()) return opts.output;
  const char* env = std::getenv("QELAB_OUTPUT_ROOT");
  const std::filesystem::path root = env && *env ? std::filesystem::path(env) : std::filesystem::current_path();
  if (cfg.has("experiment.output")) {
    const std::filesystem::path p = cfg.get("experiment.output");
    return p.is_absolute() ? p : root / p;
  }
  return root / (cfg.experiment() + "-" + cfg.hash().substr(0, 8));
}

RunResult run_experiment(const ExperimentConfig& cfg, const RunOptions& opts) {
  validate_config(cfg);
  const std::string name = cfg.experiment();
  const std::string hash = cfg.hash();
  const int threads = std::max(1, opts.threads);
  Outputs out;
  if (name == "qe-regular") out = qe_regular(cfg, threads);
  else if (name == "qe-anderson") out = qe_anderson(cfg, threads);
  else if (name == "cone-solve") out = cone_solve(cfg, threads);
  else if (name == "cone-spectrum") out = cone_spectrum(cfg, threads);
  else if (name == "green-moments") out = green_moments(cfg, threads);
  else if (name == "sigma-ac") out = sigma_ac(cfg, threads);
  else if (name == "biregular-weights") out = biregular_weights(cfg, threads);
  else out = diagnostics(cfg, threads);

  RunResult result;
  result.directory = resolve_output(cfg, opts);
  std::filesystem::create_directories(result.directory);
  for (const auto& t : out.tables) {
    std::ofstream f(result.directory / t.file, std::ios::binary);
    for (const auto& c : t.comments) f << c << '\n';
    f << "config_hash";
    for (const auto& h : t.header) f << ',' << h;
    f << '\n';
    for (const auto& r : t.rows) f << hash << ',' << r << '\n';
    if (!f) throw ExperimentError("cannot write " + (result.directory / t.file).string());
    result.files.push_back(t.file);
  }
  for (const auto& [file, content] : out.extra_files) {
    std::ofstream f(result.directory / file, std::ios::binary);
    f << content;
  }

  json manifest;
  manifest["experiment"] = name;
  manifest["config_hash"] = hash;
  manifest["config"] = cfg.values;
  manifest["canonical_config"] = cfg.canonical();
  manifest["seeds"] = out.seeds;
  manifest["version"] = QELAB_VERSION;
  #if defined(__clang__)
  manifest["compiler"] = std::string("clang ") + __clang_version__;
#else
  manifest["compiler"] = std::string("gcc ") + __VERSION__;
#endif
  manifest["eigen_version"] = std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                              std::to_string(EIGEN_MINOR_VERSION);
  manifest["created"] = utc_now();
  manifest["threads"] = threads;
  manifest["files"] = result.files;
  manifest["aggregate"] = {{"table", out.aggregate.table},
                           {"group_by", out.aggregate.group_by},
                           {"values", out.aggregate.values}};
  std::ofstream mf(result.directory / "manifest.json");
  mf << manifest.dump(2) << '\n';
  if (!mf) throw ExperimentError("cannot write manifest in " + result.directory.string());
  return result;
}

}  // namespace qelab
