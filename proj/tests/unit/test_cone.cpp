#include <cmath>
#include <sstream>

#include "doctest.h"
#include "qelab/cone.hpp"
#include "qelab/generators.hpp"
#include "support/truncated_cover.hpp"

using namespace qelab;

namespace {

Complex quadratic_root(int q, Complex gamma) {
  const Complex disc = std::sqrt(gamma * gamma - 4.0 * q);
  const Complex a = (gamma + disc) / (2.0 * q);
  const Complex b = (gamma - disc) / (2.0 * q);
  return a.imag() < b.imag() ? a : b;
}

std::vector<double> grid(double lo, double hi, int n) {
  std::vector<double> out;
  for (int i = 0; i < n; ++i) out.push_back(lo + (hi - lo) * i / (n - 1));
  return out;
}

// All non-backtracking paths of length <= len starting at x.
void nb_paths(const Graph& g, std::vector<Vertex>& cur, int len, std::vector<std::vector<Vertex>>& out) {
  out.push_back(cur);
  if (static_cast<int>(cur.size()) - 1 == len) return;
  for (Vertex u : g.neighbours(cur.back())) {
    if (cur.size() >= 2 && u == cur[cur.size() - 2]) continue;
    cur.push_back(u);
    nb_paths(g, cur, len, out);
    cur.pop_back();
  }
}

}  // namespace

TEST_CASE("cone systems: regular tree, (C1)/(C2)") {
  const ConeSystem t = regular_tree_cone(2);
  CHECK(t.size() == 2);
  const auto c1 = check_c1(t);
  CHECK(c1.holds);
  CHECK(c1.uniform_n == 1);
  CHECK(check_c2(t).holds);

  Eigen::MatrixXi bad(2, 2);
  bad << 1, 2, 0, 2;
  const auto r = check_c1(ConeSystem::from_dense(bad));
  CHECK_FALSE(r.holds);
  CHECK(r.reason == "M_11 != 0");

  // Unreachable label pairs are reported.
  Eigen::MatrixXi split(3, 3);
  split << 0, 1, 1, 0, 2, 0, 0, 0, 2;
  const auto s = check_c1(ConeSystem::from_dense(split));
  CHECK_FALSE(s.holds);
  CHECK(s.failing_pairs.size() == 2);

  // (C2) fails when no child dominates: label 2 has children {2, 3}, neither has both.
  Eigen::MatrixXi c2bad(3, 3);
  c2bad << 0, 1, 0, 0, 0, 1, 0, 1, 0;
  CHECK_FALSE(check_c2(ConeSystem::from_dense(c2bad)).holds);
}

TEST_CASE("neighbour matrices: the two-colour 5x5 system and root measure") {
  const int a = 2, b = 3, c = 4, d = 2;
  Eigen::MatrixXi an(2, 2);
  an << a, b, c, d;
  const ConeSystem one = neighbour_to_cone(an, 0);
  Eigen::MatrixXi expected(5, 5);
  expected << 0, a, 0, b, 0,  //
      0, a - 1, 0, b, 0,      //
      0, a, 0, b - 1, 0,      //
      0, 0, c - 1, 0, d,      //
      0, 0, c, 0, d - 1;
  CHECK(one.dense() == expected);
  const auto c1 = check_c1(one);
  CHECK(c1.holds);
  CHECK(c1.uniform_n == 2);
  CHECK(check_c2(one).holds);

  const ConeSystem both = neighbour_to_cone(an);
  REQUIRE(both.root_labels.size() == 2);
  CHECK(both.root_measure[0] == doctest::Approx(double(c) / (b + c)).epsilon(1e-15));
  CHECK(both.root_measure[1] == doctest::Approx(double(b) / (b + c)).epsilon(1e-15));

  Eigen::MatrixXi bir(2, 2);
  bir << 0, 3, 4, 0;  // p = 2, q = 3
  const ConeSystem tb = neighbour_to_cone(bir, 0);
  CHECK(tb.size() == 3);
  CHECK(tb.children(0) == 3);
  CHECK(check_c1(tb).holds);
  CHECK(check_c1(tb).uniform_n == -1);  // bipartite: no common exponent

  Eigen::MatrixXi three(3, 3);
  three << 0, 2, 1, 1, 0, 2, 2, 1, 0;  // a31 a23 a12 = 2*2*2 vs a32 a13 a21 = 1*1*1
  CHECK_THROWS_AS(neighbour_to_cone(three), ConeError);
  Eigen::MatrixXi ok3(3, 3);
  ok3 << 0, 2, 2, 2, 0, 2, 2, 2, 0;
  const ConeSystem t3 = neighbour_to_cone(ok3);
  CHECK(t3.root_labels.size() == 3);
  CHECK(check_c1(t3).holds);
}

TEST_CASE("universal cover cone matrices") {
  const Graph k4 = complete_graph(4);
  const ConeSystem rooted = cover_cone_matrix(k4, 0);
  CHECK(rooted.size() == 13);
  CHECK(check_c1(rooted).holds);
  // Edge labels: a child edge (v>w) has the out-edges of w as children, never
  // those of v, so (C2) fails before label reduction and holds after it.
  CHECK_FALSE(check_c2(rooted).holds);
  CHECK(check_c2(reduce_cone_system(rooted)).holds);
  const ConeSystem all = cover_cone_matrix(k4);
  CHECK(all.size() == 16);
  const ConeSystem red = reduce_cone_system(all);
  CHECK(red.size() == 2);
  CHECK(red.root_measure.size() == 1);
  CHECK(red.dense() == regular_tree_cone(2).dense());

  const ConeSystem pet = cover_cone_matrix(petersen_graph(), 0);
  CHECK(pet.size() <= 31);
  CHECK(check_c1(pet).holds);

  CHECK_THROWS_AS(cover_cone_matrix(cycle_graph(6)), ConeError);
  CHECK_THROWS_AS(cover_cone_matrix(path_graph(5)), ConeError);
}

TEST_CASE("cone system JSON round trip") {
  Eigen::MatrixXi an(2, 2);
  an << 2, 3, 4, 2;
  const ConeSystem c = neighbour_to_cone(an);
  std::stringstream ss;
  write_cone_json(ss, c);
  const ConeSystem back = read_cone_json(ss);
  CHECK(back.labels == c.labels);
  CHECK(back.rows == c.rows);
  CHECK(back.root_labels == c.root_labels);
  CHECK(back.root_measure == c.root_measure);
  std::stringstream bad("{\"labels\": [\"a\"], \"rows\": [[]]}");
  CHECK_THROWS_AS(read_cone_json(bad), ConeError);
}

TEST_CASE("solve_green: regular tree against the quadratic root") {
  const ConeSystem t = regular_tree_cone(2);
  for (Complex gamma : {Complex(0.5, 0.01), Complex(-2.5, 0.01), Complex(3.5, 0.01), Complex(0.0, 1e-4)}) {
    const GreenState st = solve_green(t, gamma);
    const Complex z = quadratic_root(2, gamma);
    CHECK(std::abs(st.zeta(1) - z) < 1e-10);
    CHECK(st.residual < 1e-12);
    CHECK(st.zeta(0).imag() < 0.0);
    CHECK(st.zeta(1).imag() < 0.0);
    CHECK(!st.certificate.empty());
  }
  // Large spectral parameter: zeta ~ 1/gamma.
  const GreenState hi = solve_green(t, Complex(0.0, 10.0));
  CHECK(std::abs(hi.zeta(0) - 1.0 / Complex(0.0, 10.0)) < 0.05);
  CHECK(std::abs(hi.zeta(0) * Complex(0.0, 10.0) - 1.0) < 0.05);
  // Warm start agrees with a cold solve.
  const GreenState a = solve_green(t, Complex(0.3, 0.02));
  const GreenState b = solve_green(t, Complex(0.305, 0.02), a);
  const GreenState cold = solve_green(t, Complex(0.305, 0.02));
  CHECK((b.zeta - cold.zeta).cwiseAbs().maxCoeff() < 1e-12);
  CHECK_THROWS_AS(solve_green(t, Complex(0.5, 0.0)), ConeError);
}

TEST_CASE("solve_green: large-gamma behaviour matches a dense truncated tree") {
  // Herglotz-sign check of zeta ~ 1/gamma against an independent inversion.
  const Graph k4 = complete_graph(4);
  const Complex gamma(0.0, 10.0);
  const auto oracle = testing::truncated_cover(k4, 0, 10, gamma);
  DirectedEdgeSpace d(k4);
  const CoverGreen cg = solve_cover_green(d, gamma);
  const std::vector<Vertex> p0{0};
  CHECK(std::abs(oracle.green(p0) - cg.diag(0)) < 1e-12);
  CHECK(std::abs(cg.diag(0) - (-1.0 / (gamma - 3.0 * quadratic_root(2, gamma)))) < 1e-12);
}

TEST_CASE("spectrum detection") {
  const ConeSystem t = regular_tree_cone(2);
  const auto g1 = grid(-4.0, 4.0, 161);
  const SpectrumReport r = detect_spectrum(t, g1);
  REQUIRE(r.intervals.size() == 1);
  const double step = 0.05;
  CHECK(std::abs(r.intervals[0].lo + 2.0 * std::sqrt(2.0)) < 2 * step);
  CHECK(std::abs(r.intervals[0].hi - 2.0 * std::sqrt(2.0)) < 2 * step);
  const SpectrumReport fine = detect_spectrum(t, grid(-4.0, 4.0, 321));
  REQUIRE(fine.intervals.size() == 1);
  CHECK(std::abs(fine.intervals[0].lo - r.intervals[0].lo) < 2 * step);
  CHECK(std::abs(fine.intervals[0].hi - r.intervals[0].hi) < 2 * step);
  CHECK(detect_spectrum(t, g1, 1e-4, 1e300).intervals.empty());
  CHECK(r.unreliable[static_cast<std::size_t>(80)] == false);
  std::ostringstream csv;
  write_spectrum_report_csv(csv, r);
  CHECK(csv.str().rfind("lambda,min_im_zeta,in_spectrum\n", 0) == 0);

  Eigen::MatrixXi bir(2, 2);
  bir << 0, 3, 4, 0;
  const SpectrumReport br = detect_spectrum(neighbour_to_cone(bir), grid(-4.0, 4.0, 161));
  REQUIRE(br.intervals.size() >= 2);
  for (std::size_t i = 0; i < br.intervals.size(); ++i) {
    const auto& a = br.intervals[i];
    const auto& b = br.intervals[br.intervals.size() - 1 - i];
    CHECK(std::abs(a.lo + b.hi) < 1e-9);
  }
  const double edge = std::sqrt(3.0) + std::sqrt(2.0);
  CHECK(std::abs(br.intervals.back().hi - edge) < 2 * step);
}

TEST_CASE("cover Green functions: regular covers, recursion and sum rule") {
  const Graph k4 = complete_graph(4);
  DirectedEdgeSpace dk(k4);
  const Complex gamma(1.0, 0.1);
  const CoverGreen ck = solve_cover_green(dk, gamma);
  CHECK((ck.zeta_edge.array() - quadratic_root(2, gamma)).abs().maxCoeff() < 1e-12);

  // Petersen with a potential: compare with the truncated recursion iterated on the base graph.
  Graph pet = petersen_graph();
  std::vector<double> w;
  for (int i = 0; i < pet.size(); ++i) w.push_back(0.3 * std::sin(1.7 * i));
  pet = pet.with_potential(w);
  DirectedEdgeSpace dp(pet);
  for (Complex gp : {Complex(1.0, 0.01), Complex(-0.4, 0.05)}) {
    const CoverGreen cg = solve_cover_green(dp, gp);
    CHECK(cg.residual < 1e-12);
    Eigen::VectorXcd z = Eigen::VectorXcd::Zero(static_cast<Eigen::Index>(dp.edge_count()));
    for (int it = 0; it < 20000; ++it) {
      Eigen::VectorXcd next(z.size());
      for (std::size_t e = 0; e < dp.edge_count(); ++e) {
        Complex s = 0.0;
        for (std::size_t f : dp.successors(e)) s += z(static_cast<Eigen::Index>(f));
        next(static_cast<Eigen::Index>(e)) = 1.0 / (gp - pet.potential(dp.head(e)) - s);
      }
      z = next;
    }
    CHECK((z - cg.zeta_edge).cwiseAbs().maxCoeff() < 1e-8);
    for (Eigen::Index v = 0; v < cg.diag.size(); ++v) CHECK(cg.diag(v).imag() > 0.0);
    const auto diag = s_gamma_diagnostics(dp, gp, cg.zeta_edge, 1);
    CHECK(diag.max_sum_rule_residual < 1e-9);
    CHECK(diag.max_row_sum_deviation < 1e-10);
  }
}

TEST_CASE("cover Green functions against the truncated-cover oracle") {
  Graph k4 = complete_graph(4);
  k4 = k4.with_potential({0.2, -0.1, 0.0, 0.4});
  DirectedEdgeSpace d(k4);
  const Complex gamma(4.0, 0.1);
  const CoverGreen cg = solve_cover_green(d, gamma);
  for (Vertex root = 0; root < 4; ++root) {
    const auto oracle = testing::truncated_cover(k4, root, 14, gamma);
    std::vector<std::vector<Vertex>> paths;
    std::vector<Vertex> cur{root};
    nb_paths(k4, cur, 4, paths);
    for (const auto& p : paths) CHECK(std::abs(oracle.green(p) - green_on_cover(d, cg, p)) < 1e-9);
  }
  // Truncation error against depth: geometric at rate |q zeta^2| per level just
  // outside the bulk; in the bulk only its envelope decays (oscillating phase).
  const Graph plain = complete_graph(4);
  DirectedEdgeSpace d0(plain);
  const std::vector<Vertex> p{0, 1, 2};
  const auto error_at = [&](Complex g, int depth) {
    const CoverGreen c0 = solve_cover_green(d0, g);
    return std::abs(testing::truncated_cover(plain, 0, depth, g).green(p) - green_on_cover(d0, c0, p));
  };
  const Complex edge(3.0, 0.1);
  const double rate = 2.0 * std::norm(quadratic_root(2, edge));
  CHECK(error_at(edge, 14) / error_at(edge, 12) == doctest::Approx(rate * rate).epsilon(0.02));
  const Complex bulk(1.0, 0.1);
  double early = 0.0, late = 0.0;
  for (int depth = 4; depth <= 10; depth += 2) early = std::max(early, error_at(bulk, depth));
  for (int depth = 12; depth <= 18; depth += 2) late = std::max(late, error_at(bulk, depth));
  CHECK(late < early);
  CHECK(late > 1e-3);  // depth 18 cannot resolve the bulk at Im gamma = 0.1

  CHECK(first_geodesic(petersen_graph(), 0, 7).size() == 3);
}

TEST_CASE("spectral weights") {
  const Graph g = random_regular(40, 3, 5);
  DirectedEdgeSpace d(g);
  const CoverGreen cg = solve_cover_green(d, Complex(0.7, 0.05));
  const Eigen::VectorXd phi = phi_diagonal(cg);
  CHECK((phi.array() - 1.0 / 40).abs().maxCoeff() < 1e-12);
  CHECK(std::abs(kbar(d, cg, identity_kernel(g)) - 1.0) < 1e-12);

  // Biregular (p+1, q+1) = (3, 4): golden ratios of Im G and diagonal weights.
  const int p = 2, q = 3;
  Eigen::MatrixXi bir(2, 2);
  bir << 0, p + 1, q + 1, 0;
  const ConeSystem tb = neighbour_to_cone(bir);
  const double lambda = 2.0;
  const GreenState st = solve_green(tb, Complex(lambda, 1e-4));
  // Labels: root:a, root:b, b>a, a>b.
  const Complex gbb = -st.zeta(0);
  const Complex gww = -st.zeta(1);
  const Complex gbw = gbb * st.zeta(3);
  CHECK(gbb.imag() / gww.imag() == doctest::Approx(double(p + 1) / (q + 1)).epsilon(1e-3));
  CHECK(gbb.imag() / gbw.imag() == doctest::Approx((p + 1) / lambda).epsilon(1e-3));
  CHECK(gww.imag() / gbw.imag() == doctest::Approx((q + 1) / lambda).epsilon(1e-3));

  const Graph bg = biregular(p + 1, q + 1, 40, 3);
  const int n = bg.size();
  DirectedEdgeSpace db(bg);
  const CoverGreen cb = solve_cover_green(db, Complex(lambda, 1e-4));
  const Eigen::VectorXd pb = phi_diagonal(cb);
  CHECK(pb.sum() == doctest::Approx(1.0).epsilon(1e-12));
  for (Vertex x = 0; x < n; ++x) {
    const double expect = bg.degree(x) == p + 1 ? (p + q + 2.0) / (2.0 * n * (q + 1)) : (p + q + 2.0) / (2.0 * n * (p + 1));
    CHECK(pb(x) == doctest::Approx(expect).epsilon(1e-3));
  }
}

TEST_CASE("inverse moments of Im zeta") {
  const ConeSystem t = regular_tree_cone(2);
  const GreenState st = solve_green(t, Complex(0.0, 1e-6));
  CHECK(green_moment_at(t, st, 2.0) == doctest::Approx(6.0).epsilon(1e-5));
  CHECK(green_moment_at(t, st, 0.0) == doctest::Approx(3.0).epsilon(1e-15));
  const auto spec = detect_spectrum(t, grid(-4.0, 4.0, 161));
  const auto rep = green_moment(t, grid(-2.0, 2.0, 21), {1e-2, 1e-3}, 2.0, &spec);
  CHECK(std::isfinite(rep.value));
  CHECK(rep.value >= 6.0 - 1e-6);
  CHECK(std::count(rep.unreliable.begin(), rep.unreliable.end(), true) == 0);
  CHECK_THROWS_AS(green_moment(t, {3.5}, {1e-7}, 2.0), ConeError);

  Eigen::MatrixXi an(2, 2);
  an << 2, 3, 4, 2;
  const ConeSystem two = neighbour_to_cone(an);
  const GreenState s2 = solve_green(two, Complex(0.3, 0.01));
  CHECK(green_moment_at(two, s2, 0.0) == doctest::Approx(4.0 / 7 * 5 + 3.0 / 7 * 6).epsilon(1e-12));
}

TEST_CASE("Poisson kernel on the regular tree") {
  const RayTree t = make_ray_tree(2, 12);
  CHECK(t.size() == 1 + 3 * ((1 << 12) - 1));
  for (double lambda : {-2.5, 0.0, 0.7, 2.7}) {
    const Complex gamma(lambda, 0.0);
    CHECK(std::abs(poisson_kernel(t, gamma, 0) - 1.0) < 1e-15);
    CHECK(poisson_residual(t, gamma) < 1e-9);
  }
  const Complex gamma(0.7, 0.0);
  const double along = std::norm(poisson_kernel(t, gamma, t.ray[5])) / std::norm(poisson_kernel(t, gamma, t.ray[4]));
  CHECK(along > 1.0);
  // A vertex leaving the ray at o: |P|^2 decays.
  int off = -1;
  for (int v = 1; v < t.size(); ++v)
    if (t.level[static_cast<std::size_t>(v)] == 5 && t.meet[static_cast<std::size_t>(v)] == 0) off = v;
  REQUIRE(off > 0);
  const double decay = std::norm(poisson_kernel(t, gamma, off));
  CHECK(decay < 1.0);
  CHECK(std::log(along) == doctest::Approx(-std::log(std::pow(decay, 0.2))).epsilon(1e-12));
  CHECK_THROWS_AS(make_ray_tree(2, 1), ConeError);
}
