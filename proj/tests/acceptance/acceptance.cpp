// Acceptance suite: one PASS/FAIL line per criterion. Exit status is the number
// of failed criteria. `--only 3,7` runs a subset.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <numeric>
#include <set>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "qelab/anderson.hpp"
#include "qelab/cli.hpp"
#include "qelab/cone.hpp"
#include "qelab/generators.hpp"
#include "qelab/kernels.hpp"
#include "qelab/spectral.hpp"
#include "qelab/variance.hpp"
#include "support/truncated_cover.hpp"

using namespace qelab;
namespace fs = std::filesystem;

namespace {

// ---- Pinned tolerances and budgets -----------------------------------------------------------------
constexpr double kSphericalTol = 1e-10;
constexpr double kSphericalBudgetSeconds = 30.0;
constexpr double kUltraTol = 1e-9;
constexpr double kNbEigenTol = 1e-8;
constexpr double kInvarianceTol = 1e-9;
constexpr double kPythagorasTol = 1e-12;
constexpr double kIdentityTol = 1e-12;
constexpr double kSmuggleTol = 1e-9;
constexpr double kQeRatio = 0.7;
constexpr double kQeAbsolute = 0.02;
constexpr double kQeBudgetSeconds = 15.0 * 60.0;
constexpr double kConeRootTol = 1e-10;
constexpr double kConeResidualTol = 1e-12;
constexpr double kOracleTol = 1e-6;
constexpr int kOracleDepth = 18;
constexpr double kOracleImGamma = 0.1;
constexpr int kOraclePathLength = 4;
constexpr double kSumRuleTol = 1e-9;
constexpr double kRowSumTol = 1e-10;
constexpr double kGoldenRelTol = 1e-3;
constexpr double kPhiSumTol = 1e-10;
constexpr double kPoolSpreadTol = 1e-10;
constexpr double kMeanImRelTol = 0.05;
constexpr double kBetaK4Tol = 1e-12;
constexpr double kBetaBipartiteTol = 1e-10;

struct Result {
  bool pass = false;
  std::string detail;
};

std::string sci(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::shared_ptr<const DirectedEdgeSpace> space_of(Graph g) {
  return std::make_shared<const DirectedEdgeSpace>(std::make_shared<const Graph>(std::move(g)));
}

double max_diff(const NbKernel& a, const NbKernel& b) {
  double m = 0.0;
  const NbKernel d = a - b;
  for (int j : d.present_grades())
    for (const Complex& v : d.grade(j)) m = std::max(m, std::abs(v));
  return m;
}

// 1. (S_k)_G = Phi(A_G, k) for k = 0..5 on random 3-regular graphs.
Result spherical_identity() {
  const auto t0 = std::chrono::steady_clock::now();
  double err = 0.0;
  for (std::uint64_t seed : {1, 2, 3}) {
    const auto d = space_of(random_regular(200, 3, seed));
    for (int k = 0; k <= 5; ++k) {
      const Eigen::MatrixXcd lhs = matrix_kg(sphere_kernel(d, k));
      const Eigen::MatrixXd rhs = spherical_matrix(d->graph(), k);
      err = std::max(err, (lhs - rhs.cast<Complex>()).cwiseAbs().maxCoeff());
    }
  }
  const double secs = seconds_since(t0);
  return {err < kSphericalTol && secs < kSphericalBudgetSeconds,
          "max |(S_k)_G - Phi(A,k)| = " + sci(err) + ", " + sci(secs) + " s"};
}

// 2. The four intertwining relations and the non-backtracking eigenvectors.
Result nb_relations() {
  const Graph g = random_regular(200, 3, 11);
  const DirectedEdgeSpace d(g);
  const EigenSystem es = eigensystem(g);
  double ultra = 0.0;
  double nb = 0.0;
  for (int j = 0; j < es.size(); ++j) {
    for (double v : check_ultra(d, es.vectors.col(j), es.values(j))) ultra = std::max(ultra, v);
    const auto r = nb_eigenpair_residuals(d, es.vectors.col(j), es.values(j));
    nb = std::max({nb, r.residual[0], r.residual[1]});
  }
  return {ultra < kUltraTol && nb < kNbEigenTol,
          "max intertwining residual " + sci(ultra) + ", max eigenvector residual " + sci(nb)};
}

// 3. Variance invariance under Sigma^n, Pythagoras and the 4q/n bound.
Result variance_invariance() {
  const auto d = space_of(random_regular(200, 3, 12));
  const EigenSystem es = eigensystem(d->graph());
  const double q = 2.0;
  double inv = 0.0;
  double pyth = 0.0;
  bool bounded = true;
  for (std::uint64_t seed : {1, 2}) {
    const NbKernel k = NbKernel::random(d, 1, seed);
    const double base = quantum_variance(es, nabla_star(k)).value;
    const double grad2 = nabla(k).h_norm_squared();
    for (int n = 1; n <= 3; ++n) {
      const NbKernel x = nabla_star(sigma_n(k, n));
      inv = std::max(inv, std::abs(quantum_variance(es, x).value - base));
      // Orthogonal grades: the norm is the sum of the grade norms, and equals |nabla K|^2 / n.
      double parts = 0.0;
      for (int j : x.present_grades()) parts += x.h_norm_squared(j);
      pyth = std::max({pyth, std::abs(parts - x.h_norm_squared()), std::abs(x.h_norm_squared() - grad2 / n)});
      bounded = bounded && x.h_norm_squared() <= 4.0 * q / n * k.h_norm_squared() + kPythagorasTol;
    }
  }
  return {inv < kInvarianceTol && pyth < kPythagorasTol && bounded,
          "invariance " + sci(inv) + ", Pythagoras " + sci(pyth) + ", bound " + (bounded ? "holds" : "violated")};
}

// 4. Decomposition identities.
Result decomposition_identities() {
  const auto d = space_of(random_regular(200, 3, 13));
  const EigenSystem es = eigensystem(d->graph());
  double decomp = 0.0, mstar = 0.0, adj = 0.0, smuggle = 0.0;
  for (int k = 1; k <= 3; ++k) {
    const NbKernel a = NbKernel::random(d, k, 100 + k);
    decomp = std::max(decomp, max_diff((s_t(a, 8) - transfer(s_t(a, 8))) + s_tilde_t(a, 8), a));
    mstar = std::max(mstar, max_diff(-1.0 * nabla_star(m_star(a)), nabla(a)));
    const NbKernel lower = NbKernel::random(d, k - 1, 200 + k);
    adj = std::max(adj, std::abs(inner(nabla(lower), a) - inner(lower, nabla_star(a))));
    const auto lhs = kg_diagonal_forms(nabla_star(m_star(a)), es.vectors);
    const auto rhs = kg_diagonal_forms(nabla_star(a), es.vectors);
    smuggle = std::max(smuggle, (lhs - rhs).cwiseAbs().maxCoeff());
  }
  return {decomp < kIdentityTol && mstar < kIdentityTol && adj < kIdentityTol && smuggle < kSmuggleTol,
          "T=8 decomposition " + sci(decomp) + ", -nabla* M* K - nabla K " + sci(mstar) + ", adjointness " +
              sci(adj) + ", per-eigenfunction " + sci(smuggle)};
}

// 5. Discrepancy trend through the qe-regular experiment.
Result qe_trend() {
  const auto t0 = std::chrono::steady_clock::now();
  const fs::path dir = fs::temp_directory_path() / "qelab_acceptance_qe";
  fs::remove_all(dir);
  const auto cfg = parse_config(
      "[experiment]\nname = qe-regular\n[generator]\nfamily = random_regular\ndegree = 3\n"
      "[kernel]\nkind = diagonal-indicator\n[sweep]\nN = 500, 4000\nseeds = 1, 2, 3, 4, 5\n");
  RunOptions opts;
  opts.output = dir;
  run_experiment(cfg, opts);
  const auto rows = read_csv(dir / "qe_regular_summary.csv");
  const double small = std::stod(rows.at(1).at(2));
  const double large = std::stod(rows.at(2).at(2));
  const double secs = seconds_since(t0);
  return {large < kQeRatio * small && large < kQeAbsolute && secs < kQeBudgetSeconds,
          "mean(500) = " + sci(small) + ", mean(4000) = " + sci(large) + ", ratio " + sci(large / small) + ", " +
              sci(secs) + " s"};
}

// 6. The 3-regular tree system against the quadratic root.
Result cone_exactness() {
  const ConeSystem t = regular_tree_cone(2);
  double err = 0.0, res = 0.0;
  for (int i = 0; i < 50; ++i) {
    const Complex gamma(-3.0 + 6.0 * i / 49.0, 0.01);
    const GreenState st = solve_green(t, gamma);
    // Root of 2 z^2 - gamma z + 1 = 0 with Im z < 0, computed here directly.
    const Complex disc = std::sqrt(gamma * gamma - 8.0);
    Complex z = (gamma - disc) / 4.0;
    if (z.imag() >= 0.0) z = (gamma + disc) / 4.0;
    err = std::max(err, std::abs(st.zeta(1) - z));
    res = std::max(res, st.residual);
  }
  return {err < kConeRootTol && res < kConeResidualTol, "max |zeta - root| " + sci(err) + ", residual " + sci(res)};
}

// 7. Cover Green function against sparse inversion of truncated covers.
Result oracle_equivalence() {
  // In the bulk the depth-18 truncation error is ~|q zeta^2|^18 ~ 0.1 at Im gamma = 0.1,
  // so the comparison is made where the truncated tree converges (|Re gamma| >= 3.5);
  // the bulk value is reported for information.
  double err = 0.0;
  int pairs = 0;
  for (const Graph& g : {complete_graph(4), petersen_graph()}) {
    const DirectedEdgeSpace d(g);
    for (double re : {-3.5, 3.5, 4.0}) {
      const Complex gamma(re, kOracleImGamma);
      const CoverGreen cg = solve_cover_green(d, gamma);
      for (Vertex x = 0; x < g.size(); ++x) {
        const auto oracle = qelab::testing::truncated_cover(g, x, kOracleDepth, gamma);
        for (Vertex y = 0; y < g.size(); ++y) {
          const auto path = first_geodesic(g, x, y);
          if (static_cast<int>(path.size()) - 1 > kOraclePathLength) continue;
          err = std::max(err, std::abs(green_on_cover(d, cg, x, y) - oracle.green(path)));
          ++pairs;
        }
        for (int k = 1; k <= kOraclePathLength; ++k) {
          const PathSpace& ps = d.paths(k);
          for (std::size_t i = 0; i < ps.size(); ++i) {
            if (ps.origin(i) != x) continue;
            err = std::max(err, std::abs(green_on_cover(d, cg, ps.path(i)) - oracle.green(ps.path(i))));
            ++pairs;
          }
        }
      }
    }
  }
  const Graph k4 = complete_graph(4);
  const DirectedEdgeSpace dk(k4);
  const Complex bulk(1.0, kOracleImGamma);
  const auto ob = qelab::testing::truncated_cover(k4, 0, kOracleDepth, bulk);
  const Vertex path[] = {0};
  const double bulk_err = std::abs(green_on_cover(dk, solve_cover_green(dk, bulk), path) - ob.green(path));
  return {err < kOracleTol, "max error " + sci(err) + " over " + std::to_string(pairs) +
                                " comparisons at Re gamma in {-3.5, 3.5, 4}; bulk Re gamma = 1 diagonal error " +
                                sci(bulk_err) + " (truncation-limited)"};
}

// 8. Sum rule and row sums of the weighted transfer operator on the Petersen cover.
Result sum_rule() {
  const DirectedEdgeSpace d(petersen_graph());
  const Complex gamma(1.0, 0.01);
  const CoverGreen cg = solve_cover_green(d, gamma);
  const auto diag = s_gamma_diagnostics(d, gamma, cg.zeta_edge, 1);
  return {diag.max_sum_rule_residual < kSumRuleTol && diag.max_row_sum_deviation < kRowSumTol,
          "sum rule " + sci(diag.max_sum_rule_residual) + ", row sums " + sci(diag.max_row_sum_deviation) +
              ", system residual " + sci(cg.residual)};
}

// 9. Biregular closed forms.
Result biregular_golden() {
  const int p = 2, q = 3;
  Eigen::MatrixXi a(2, 2);
  a << 0, p + 1, q + 1, 0;
  const ConeSystem tb = neighbour_to_cone(a);  // labels: root:0, root:1, 1>0, 0>1
  double ratio = 0.0;
  for (double lambda : {1.0, 1.5, 2.0, 2.5, 2.8}) {
    const GreenState st = solve_green(tb, Complex(lambda, 1e-4));
    const Complex gbb = -st.zeta(0), gww = -st.zeta(1), gbw = gbb * st.zeta(3);
    const double got[] = {gbb.imag() / gww.imag(), gbb.imag() / gbw.imag(), gww.imag() / gbw.imag()};
    const double want[] = {(p + 1.0) / (q + 1.0), (p + 1.0) / lambda, (q + 1.0) / lambda};
    for (int i = 0; i < 3; ++i) ratio = std::max(ratio, std::abs(got[i] / want[i] - 1.0));
  }
  double phi_err = 0.0, sum_err = 0.0;
  for (std::uint64_t seed : {1, 2}) {
    const Graph g = biregular(p + 1, q + 1, 40, seed);
    const DirectedEdgeSpace d(g);
    const int n = g.size();
    for (double lambda : {1.5, 2.0, 2.5}) {
      const Eigen::VectorXd phi = phi_diagonal(solve_cover_green(d, Complex(lambda, 1e-4)));
      sum_err = std::max(sum_err, std::abs(phi.sum() - 1.0));
      for (Vertex x = 0; x < n; ++x) {
        // N Phi(x, x): (p+q+2)/(2(q+1)) on degree-(p+1) vertices, (p+q+2)/(2(p+1)) on degree-(q+1) ones.
        const double want = g.degree(x) == p + 1 ? (p + q + 2.0) / (2.0 * (q + 1)) : (p + q + 2.0) / (2.0 * (p + 1));
        phi_err = std::max(phi_err, std::abs(n * phi(x) / want - 1.0));
      }
    }
  }
  return {ratio < kGoldenRelTol && phi_err < kGoldenRelTol && sum_err < kPhiSumTol,
          "Im G ratios rel err " + sci(ratio) + ", N Phi rel err " + sci(phi_err) + ", sum " + sci(sum_err)};
}

// 10. Population dynamics consistency.
Result anderson_consistency() {
  const Complex gamma(0.0, 0.01);
  PoolParams p;
  p.pool_size = 10000;
  const auto law = PotentialLaw::uniform(1.0);
  const ZetaPopulation clean = zeta_population(2, law, 0.0, gamma, p);
  double spread = 0.0;
  for (const auto& pool : clean.pools)
    for (Complex z : pool) spread = std::max(spread, std::abs(z - pool.front()));

  const ZetaPopulation small = zeta_population(2, law, 1e-3, gamma, p);
  PoolParams pb = p;
  pb.pool_size = 100000;
  const ZetaPopulation big = zeta_population(2, law, 1e-3, gamma, pb);
  double mean_im = 0.0;
  for (Complex z : big.pools[1]) mean_im += z.imag();
  mean_im /= big.pool_size();
  const double target = -1.0 / std::sqrt(2.0);
  const double rel = std::abs(mean_im / target - 1.0);
  const auto m4 = inverse_moment(small, 2.0);
  const auto m5 = inverse_moment(big, 2.0);
  const bool agree = std::abs(m4.value - m5.value) <= m4.half_width + m5.half_width;
  return {spread < kPoolSpreadTol && rel < kMeanImRelTol && agree,
          "eps=0 spread " + sci(spread) + ", mean Im zeta " + sci(mean_im) + " (rel " + sci(rel) +
              "), E|Im zeta|^-2: " + sci(m4.value) + " +- " + sci(m4.half_width) + " vs " + sci(m5.value) + " +- " +
              sci(m5.half_width)};
}

// 11. Expansion and local tree-likeness checkers.
Result exp_bst() {
  const double bk4 = walk_spectral_gap(complete_graph(4)).beta;
  const double bc10 = walk_spectral_gap(cycle_graph(10)).beta;
  const double bbi = walk_spectral_gap(biregular(3, 4, 40, 1)).beta;
  const Graph c10 = cycle_graph(10);
  bool golden = bst_statistic(c10, 4) == 0.0 && bst_statistic(c10, 5) == 1.0;
  for (Vertex x = 0; x < 10; ++x) golden = golden && injectivity_radius(c10, x, 10) == 4;
  double small = 0.0, large = 0.0;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    small += bst_statistic(random_lift(complete_graph(4), 20, seed), 3) / 10.0;
    large += bst_statistic(random_lift(complete_graph(4), 200, seed), 3) / 10.0;
  }
  return {std::abs(bk4 - 2.0 / 3.0) < kBetaK4Tol && std::abs(bc10) < kBetaBipartiteTol &&
              std::abs(bbi) < kBetaBipartiteTol && golden && large < small,
          "beta(K4) - 2/3 = " + sci(bk4 - 2.0 / 3.0) + ", beta(C10) = " + sci(bc10) + ", beta(biregular) = " +
              sci(bbi) + ", C10 golden " + (golden ? "ok" : "wrong") + ", lift BST mean " + sci(small) + " -> " +
              sci(large)};
}

// 12. Every shipped config rerun gives byte-identical CSV bodies.
Result reproducibility() {
  const fs::path root = fs::temp_directory_path() / "qelab_acceptance_repro";
  fs::remove_all(root);
  std::vector<fs::path> configs;
  for (const auto& e : fs::directory_iterator(QELAB_CONFIG_DIR))
    if (e.path().extension() == ".cfg") configs.push_back(e.path());
  std::sort(configs.begin(), configs.end());
  std::set<std::string> covered;
  int files = 0;
  std::string mismatch;
  for (const auto& c : configs) {
    const auto cfg = load_config(c);
    covered.insert(cfg.experiment());
    RunOptions a, b;
    a.output = root / (c.stem().string() + "_a");
    b.output = root / (c.stem().string() + "_b");
    const auto ra = run_experiment(cfg, a);
    run_experiment(cfg, b);
    for (const auto& f : ra.files) {
      ++files;
      if (csv_body(a.output / f) != csv_body(b.output / f)) mismatch += " " + c.stem().string() + "/" + f;
    }
  }
  const bool all = covered.size() == experiment_names().size();
  return {mismatch.empty() && all && files > 0,
          std::to_string(configs.size()) + " configs, " + std::to_string(covered.size()) + "/" +
              std::to_string(experiment_names().size()) + " experiments, " + std::to_string(files) + " CSV files" +
              (mismatch.empty() ? ", all identical" : ", differing:" + mismatch)};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"qelab acceptance suite"};
  std::vector<int> only;
  app.add_option("--only", only, "Criterion numbers to run")->delimiter(',');
  CLI11_PARSE(app, argc, argv);

  const std::vector<std::pair<std::string, std::function<Result()>>> criteria{
      {"spherical identity", spherical_identity},
      {"non-backtracking relations", nb_relations},
      {"variance invariance", variance_invariance},
      {"decomposition identities", decomposition_identities},
      {"QE trend on random 3-regular graphs", qe_trend},
      {"cone solver exactness", cone_exactness},
      {"oracle equivalence on covers", oracle_equivalence},
      {"sum rule and row sums", sum_rule},
      {"biregular golden values", biregular_golden},
      {"Anderson population consistency", anderson_consistency},
      {"(EXP)/(BST) checkers", exp_bst},
      {"reproducibility of experiment outputs", reproducibility},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!only.empty() && std::find(only.begin(), only.end(), id) == only.end()) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Result r;
    try {
      r = criteria[i].second();
    } catch (const std::exception& e) {
      r = {false, std::string("exception: ") + e.what()};
    }
    failed += r.pass ? 0 : 1;
    std::printf("%s %2d %s: %s [%.1f s]\n", r.pass ? "PASS" : "FAIL", id, criteria[i].first.c_str(), r.detail.c_str(),
                seconds_since(t0));
    std::fflush(stdout);
  }
  return failed;
}
