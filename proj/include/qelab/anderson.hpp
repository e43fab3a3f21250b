// The Anderson model on trees of finite cone type: potential laws, the random
// zeta recursion by population dynamics, inverse moments of Im zeta, scans of
// the set where Im zeta stays away from zero, and iid potentials on finite graphs.
#pragma once

#include <cstdint>
#include <iosfwd>
#include <random>
#include <string>
#include <vector>

#include "qelab/cone.hpp"

namespace qelab {

class AndersonError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct PotentialLaw {
  enum class Kind { Uniform, Triangular, Bernoulli, PointMass };
  Kind kind = Kind::Uniform;
  double a = 1.0;  // support bound A (uniform/triangular on [-A, A])
  double p = 0.5;  // Bernoulli: P(W = 1)
  double c = 0.0;  // point mass location

  static PotentialLaw uniform(double a);
  static PotentialLaw triangular(double a);
  static PotentialLaw bernoulli(double p);
  static PotentialLaw point_mass(double c);
  // "uniform:A", "triangular:A", "bernoulli:p", "point_mass:c".
  static PotentialLaw parse(const std::string& text);
  std::string describe() const;

  double support_bound() const;
  // Holder continuity nu(J) <= C |J|^b; false for Bernoulli and point masses.
  bool satisfies_pot() const;
  double holder_c() const;  // C_nu (NaN when the law violates the condition)
  double holder_b() const;
  double cdf(double x) const;
  double sample(std::mt19937_64& rng) const;
};

// Uniform double in [0, 1) from the top 53 bits (portable across standard libraries).
double unit_uniform(std::mt19937_64& rng);
// Deterministic substream keyed by (seed, tags...).
std::mt19937_64 substream(std::uint64_t seed, std::uint64_t tag1, std::uint64_t tag2 = 0);

struct PoolParams {
  int pool_size = 100000;
  int generations = 200;
  int burn_in = 100;
  std::uint64_t seed = 1;
  // The pool is split into this many independent sub-populations, each resampling
  // only from itself; confidence widths come from the spread between them.
  int replicas = 20;
};

struct ZetaPopulation {
  ConeSystem system;
  PotentialLaw law;
  double epsilon = 0.0;
  Complex gamma;
  std::uint64_t seed = 0;
  int generation = 0;
  int replicas = 1;
  std::vector<std::vector<Complex>> pools;  // one pool per label, equal sizes

  int pool_size() const { return pools.empty() ? 0 : static_cast<int>(pools.front().size()); }
  // Entries [replica_begin(r), replica_begin(r + 1)) form replica r.
  std::size_t replica_begin(int r) const {
    return static_cast<std::size_t>(pool_size()) * static_cast<std::size_t>(r) / static_cast<std::size_t>(replicas);
  }
};

constexpr double kDivergenceBound = 1e6;

// Pools start at the eps = 0 fixed point and are advanced params.generations times with
//   zeta'_j = 1 / (gamma - w_j - eps W - sum_k sum_{M_jk copies} zeta_k[random]).
// params.generations must be at least params.burn_in.
ZetaPopulation zeta_population(const ConeSystem& c, const PotentialLaw& law, double epsilon, Complex gamma,
                               const PoolParams& params);
ZetaPopulation zeta_population(int q, const PotentialLaw& law, double epsilon, Complex gamma, const PoolParams& params);
// One bulk-synchronous generation.
void advance(ZetaPopulation& pop);

struct MomentEstimate {
  double value = 0.0;
  double half_width = 0.0;  // 1.96 bootstrap standard deviations
};

// Pool entries are correlated through shared ancestry, so the bootstrap resamples
// whole replicas (their means) rather than single entries. With one replica it
// falls back to resampling entries, which understates the error.

constexpr int kBootstrapResamples = 200;

// E |Im zeta_label|^{-s}; label < 0 selects the first child label of the first root.
MomentEstimate inverse_moment(const ZetaPopulation& pop, double s, int label = -1,
                              int resamples = kBootstrapResamples);
// E_P sum_{o' ~ o} |Im zeta_o(o')|^{-s}, using the root measure of the cone system.
MomentEstimate inverse_moment_neighbour_sum(const ZetaPopulation& pop, double s, int resamples = kBootstrapResamples);

std::vector<double> im_parts(const ZetaPopulation& pop, int label);

struct SigmaAcRow {
  double lambda = 0.0;
  double eta = 0.0;
  int label = 0;
  double frac_above_delta = 0.0;
  bool marked = false;  // frac > delta
};

struct SigmaAcScan {
  double delta = 0.0;
  std::vector<double> lambda;
  std::vector<bool> marked;  // per lambda: every label and every eta marked
  std::vector<SigmaAcRow> rows;
};

SigmaAcScan sigma_ac_scan(const ConeSystem& c, const PotentialLaw& law, double epsilon, double delta,
                          const std::vector<double>& lambda_grid, const std::vector<double>& eta_grid,
                          const PoolParams& params);
void write_sigma_ac_csv(std::ostream& out, const SigmaAcScan& scan);

// Potential eps * W(x) with W iid of the given law.
Graph finite_anderson_attach(const Graph& g, const PotentialLaw& law, double epsilon, std::uint64_t seed);

// Kolmogorov-Smirnov distances.
double ks_distance(std::vector<double> samples, const PotentialLaw& law);
double ks_two_sample(std::vector<double> a, std::vector<double> b);

}  // namespace qelab
