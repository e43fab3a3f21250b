// Trees of finite cone type: cone systems, the (C1)/(C2) conditions, the
// Green-function fixed point by Newton continuation, spectrum detection,
// universal-cover Green functions, spectral weights and the Poisson kernel.
#pragma once

#include <Eigen/Dense>
#include <complex>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "qelab/graph.hpp"
#include "qelab/paths.hpp"
#include "qelab/variance.hpp"

namespace qelab {

using Complex = std::complex<double>;

class ConeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A vertex with label j has M[j][k] children of label k. Each label carries the
// potential of its vertices. Root labels index the possible roots, weighted by
// root_measure (a probability vector aligned with root_labels).
struct ConeSystem {
  std::vector<std::string> labels;
  std::vector<std::vector<std::pair<int, int>>> rows;  // (child label, multiplicity > 0), sorted
  std::vector<double> potential;                       // per label
  std::vector<int> root_labels;
  std::vector<double> root_measure;

  int size() const { return static_cast<int>(labels.size()); }
  int entry(int j, int k) const;
  int children(int j) const;  // row sum
  Eigen::MatrixXi dense() const;
  static ConeSystem from_dense(const Eigen::MatrixXi& m, std::vector<std::string> labels = {},
                               std::vector<int> root_labels = {0}, std::vector<double> root_measure = {1.0},
                               std::vector<double> potential = {});
  void validate() const;
};

void write_cone_json(std::ostream& out, const ConeSystem& c);
ConeSystem read_cone_json(std::istream& in);

// [[0, q+1], [0, q]].
ConeSystem regular_tree_cone(int q);

// Coloured tree from a neighbour matrix: colour a has A[a][b] neighbours of
// colour b. Labels: one root label per root colour, then "a>b" for each
// ordered pair with A[a][b] > 0 (sorted by child colour, then parent colour).
// root_colour < 0 gives every colour as a root under the unimodular measure
// pi_a A[a][b] = pi_b A[b][a]; otherwise a single root of that colour.
ConeSystem neighbour_to_cone(const Eigen::MatrixXi& a, int root_colour = -1);

// Universal cover of a finite graph: labels are base vertices (roots) and
// directed edges "u>v". root < 0 keeps every vertex as a root with the uniform
// measure; otherwise the single root `root` (|B| + 1 labels).
ConeSystem cover_cone_matrix(const Graph& g0, int root = -1);
// Index of the label of directed edge e (DirectedEdgeSpace numbering) in a
// cover_cone_matrix system built with the same root argument.
int cover_edge_label(const Graph& g0, int root, std::size_t e);

// The rooted tree T(M, r): labels reachable from root label r, with r first.
ConeSystem rooted_subsystem(const ConeSystem& c, int root_index = 0);

// Coarsest partition of the labels that respects potential, root status and
// child counts per class; returns the quotient system.
ConeSystem reduce_cone_system(const ConeSystem& c);

struct C1Report {
  bool holds = false;
  std::string reason;
  std::vector<std::pair<int, int>> failing_pairs;  // (k, l) with no n <= m^2
  Eigen::MatrixXi n_kl;                            // minimal n per pair (-1 if none), non-root block
  int uniform_n = -1;                              // smallest n with (M^n)_{kl} >= 1 for all pairs
};
// Checked on the tree rooted at root_labels[root_index].
C1Report check_c1(const ConeSystem& c, int root_index = 0);

struct C2Report {
  bool holds = false;
  std::vector<int> failing_labels;
  std::vector<int> witness;  // k' per label (-1 if none)
};
C2Report check_c2(const ConeSystem& c, int root_index = 0);

// ---- Green fixed point ----------------------------------------------------------------------
struct ContinuationStep {
  Complex gamma;
  int newton_iterations = 0;
};

struct GreenState {
  Complex gamma;
  Eigen::VectorXcd zeta;  // one value per label
  double residual = 0.0;  // max_j |P_j(zeta)|
  std::vector<ContinuationStep> certificate;
};

struct SolveOptions {
  double shrink = 0.8;
  double tolerance = 1e-12;
  int max_newton = 60;
  int max_halvings = 40;
};

// Solves sum_k M_jk h_k h_j - (gamma - w_j) h_j + 1 = 0 on the physical branch
// (Im h_j < 0), continuing from gamma_0 = Re gamma + 4 (D + A) i down to Im gamma.
GreenState solve_green(const ConeSystem& c, Complex gamma, const SolveOptions& opts = {});
// Starts from a solved state; falls back to a cold solve if the direct Newton
// step from `from` fails or the target is far from it relative to Im gamma.
GreenState solve_green(const ConeSystem& c, Complex gamma, const GreenState& from, const SolveOptions& opts = {});
double green_residual(const ConeSystem& c, Complex gamma, const Eigen::VectorXcd& h);

struct SpectrumReport {
  std::vector<double> lambda;
  std::vector<double> min_im_zeta;  // NaN where the solver failed
  std::vector<bool> in_spectrum;
  std::vector<bool> failed;
  std::vector<bool> unreliable;     // within `edge_guard` grid steps of an interval endpoint
  std::vector<Interval> intervals;
  double eta = 0.0;
  double threshold = 0.0;
};

constexpr double kDefaultEtaFinal = 1e-4;
constexpr double kDefaultDetectThreshold = 1e-3;
constexpr int kEdgeGuardSteps = 5;

SpectrumReport detect_spectrum(const ConeSystem& c, const std::vector<double>& lambda_grid,
                               double eta_final = kDefaultEtaFinal, double threshold = kDefaultDetectThreshold);
void write_spectrum_report_csv(std::ostream& out, const SpectrumReport& r);

// ---- Universal covers -------------------------------------------------------------------------
struct CoverGreen {
  Complex gamma;
  Eigen::VectorXcd zeta_edge;  // per directed edge e of the base graph: zeta_{tail}(head)
  Eigen::VectorXcd diag;       // G(x~, x~) per base vertex
  double residual = 0.0;
};

CoverGreen solve_cover_green(const DirectedEdgeSpace& d, Complex gamma, const SolveOptions& opts = {});
// Unpacks a state solved on cover_cone_matrix(d.graph()) (all roots).
CoverGreen cover_green_from_state(const DirectedEdgeSpace& d, const GreenState& st);
ZetaProvider cover_zeta_provider(const DirectedEdgeSpace& d);

// Green function between the endpoints of the lift of a non-backtracking path.
Complex green_on_cover(const DirectedEdgeSpace& d, const CoverGreen& cg, std::span<const Vertex> path);
// Uses the lexicographically first shortest path from x to y in the base graph.
Complex green_on_cover(const DirectedEdgeSpace& d, const CoverGreen& cg, Vertex x, Vertex y);
std::vector<Vertex> first_geodesic(const Graph& g, Vertex x, Vertex y);

// ---- Spectral weights -----------------------------------------------------------------------------
// Phi(x, x) = Im g(x, x) / sum_z Im g(z, z).
Eigen::VectorXd phi_diagonal(const CoverGreen& cg);
// Phi(x, y) along the first geodesic.
double phi_weight(const DirectedEdgeSpace& d, const CoverGreen& cg, Vertex x, Vertex y);
// <K>_gamma = sum K(x, y) Phi(x, y).
Complex kbar(const DirectedEdgeSpace& d, const CoverGreen& cg, const BoundedKernel& k);

// ---- Inverse moments of Im zeta ---------------------------------------------------------------------
constexpr double kMomentFloor = 1e-6;

struct GreenMomentReport {
  double value = 0.0;  // sup over the grid
  double argmax_lambda = 0.0;
  double argmax_eta = 0.0;
  std::vector<double> lambda;
  std::vector<double> per_lambda;  // sup over eta for each lambda
  std::vector<bool> unreliable;
};

// E_P sum_{o' ~ o} |Im zeta_o(o')|^{-s} at one gamma.
double green_moment_at(const ConeSystem& c, const GreenState& st, double s, double floor = kMomentFloor);
GreenMomentReport green_moment(const ConeSystem& c, const std::vector<double>& lambda_grid,
                               const std::vector<double>& eta_grid, double s,
                               const SpectrumReport* spectrum = nullptr, double floor = kMomentFloor);

// ---- Poisson kernel on the regular tree ------------------------------------------------------------
// Ball of radius `depth` in T_q around o; the ray xi follows the first child
// at every level (vertex ray[i] at distance i from o).
struct RayTree {
  int q = 0;
  int depth = 0;
  std::vector<int> parent;       // -1 for o
  std::vector<int> level;        // distance from o
  std::vector<int> meet;         // |v ^ xi|: distance from o to the confluent with the ray
  std::vector<std::vector<int>> neighbours;
  std::vector<int> ray;

  int size() const { return static_cast<int>(parent.size()); }
  int distance(int a, int b) const;
};

RayTree make_ray_tree(int q, int depth);
// P(v) = G(v ^ xi, v) / G(o, v ^ xi) with the closed-form Green function of T_q.
Complex poisson_kernel(const RayTree& t, Complex gamma, int v);
// max |(A - gamma) P| over vertices strictly inside the ball.
double poisson_residual(const RayTree& t, Complex gamma);

}  // namespace qelab
