#include "qelab/anderson.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <ostream>
#include <sstream>

namespace qelab {

namespace {

void require(bool cond, const std::string& msg) {
  if (!cond) throw AndersonError(msg);
}

std::uint64_t draw_index(std::mt19937_64& rng, std::size_t n) { return rng() % n; }

}  // namespace

// ---- Laws -------------------------------------------------------------------------------------------
PotentialLaw PotentialLaw::uniform(double a) {
  require(a > 0.0, "uniform law needs A > 0");
  PotentialLaw l;
  l.kind = Kind::Uniform;
  l.a = a;
  return l;
}

PotentialLaw PotentialLaw::triangular(double a) {
  require(a > 0.0, "triangular law needs A > 0");
  PotentialLaw l;
  l.kind = Kind::Triangular;
  l.a = a;
  return l;
}

PotentialLaw PotentialLaw::bernoulli(double p) {
  require(p >= 0.0 && p <= 1.0, "Bernoulli parameter must lie in [0, 1]");
  PotentialLaw l;
  l.kind = Kind::Bernoulli;
  l.p = p;
  l.a = 1.0;
  return l;
}

PotentialLaw PotentialLaw::point_mass(double c) {
  PotentialLaw l;
  l.kind = Kind::PointMass;
  l.c = c;
  l.a = std::abs(c);
  return l;
}

PotentialLaw PotentialLaw::parse(const std::string& text) {
  const auto colon = text.find(':');
  const std::string kind = text.substr(0, colon);
  double value = 0.0;
  if (colon != std::string::npos) {
    std::istringstream in(text.substr(colon + 1));
    in >> value;
    require(!in.fail(), "potential law: bad parameter in '" + text + "'");
  } else {
    require(kind == "point_mass", "potential law: missing parameter in '" + text + "'");
  }
  if (kind == "uniform") return uniform(value);
  if (kind == "triangular") return triangular(value);
  if (kind == "bernoulli") return bernoulli(value);
  if (kind == "point_mass") return point_mass(value);
  throw AndersonError("unknown potential law '" + kind + "'");
}

std::string PotentialLaw::describe() const {
  char buf[64];
  switch (kind) {
    case Kind::Uniform: std::snprintf(buf, sizeof buf, "uniform:%.17g", a); break;
    case Kind::Triangular: std::snprintf(buf, sizeof buf, "triangular:%.17g", a); break;
    case Kind::Bernoulli: std::snprintf(buf, sizeof buf, "bernoulli:%.17g", p); break;
    case Kind::PointMass: std::snprintf(buf, sizeof buf, "point_mass:%.17g", c); break;
  }
  return buf;
}

double PotentialLaw::support_bound() const { return a; }

bool PotentialLaw::satisfies_pot() const { return kind == Kind::Uniform || kind == Kind::Triangular; }

double PotentialLaw::holder_c() const {
  switch (kind) {
    case Kind::Uniform: return 1.0 / (2.0 * a);  // density bound
    case Kind::Triangular: return 1.0 / a;
    default: return std::numeric_limits<double>::quiet_NaN();
  }
}

double PotentialLaw::holder_b() const { return satisfies_pot() ? 1.0 : std::numeric_limits<double>::quiet_NaN(); }

double PotentialLaw::cdf(double x) const {
  switch (kind) {
    case Kind::Uniform: return std::clamp((x + a) / (2.0 * a), 0.0, 1.0);
    case Kind::Triangular: {
      if (x <= -a) return 0.0;
      if (x >= a) return 1.0;
      const double t = x / a;
      return t <= 0.0 ? 0.5 * (1.0 + t) * (1.0 + t) : 1.0 - 0.5 * (1.0 - t) * (1.0 - t);
    }
    case Kind::Bernoulli: return x < 0.0 ? 0.0 : (x < 1.0 ? 1.0 - p : 1.0);
    case Kind::PointMass: return x < c ? 0.0 : 1.0;
  }
  return 0.0;
}

double PotentialLaw::sample(std::mt19937_64& rng) const {
  switch (kind) {
    case Kind::Uniform: return a * (2.0 * unit_uniform(rng) - 1.0);
    case Kind::Triangular: return a * (unit_uniform(rng) + unit_uniform(rng) - 1.0);
    case Kind::Bernoulli: return unit_uniform(rng) < p ? 1.0 : 0.0;
    case Kind::PointMass: return c;
  }
  return 0.0;
}

double unit_uniform(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

std::mt19937_64 substream(std::uint64_t seed, std::uint64_t tag1, std::uint64_t tag2) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(tag1), static_cast<std::uint32_t>(tag1 >> 32),
                    static_cast<std::uint32_t>(tag2), static_cast<std::uint32_t>(tag2 >> 32)};
  return std::mt19937_64(seq);
}

// ---- Population dynamics -------------------------------------------------------------------------------
void advance(ZetaPopulation& pop) {
  const int m = pop.system.size();
  const std::size_t n = static_cast<std::size_t>(pop.pool_size());
  const int gen = pop.generation + 1;
  std::vector<std::vector<Complex>> next(static_cast<std::size_t>(m), std::vector<Complex>(n));
  const bool disorder = pop.epsilon != 0.0;
  for (int j = 0; j < m; ++j) {
    auto rng = substream(pop.seed, static_cast<std::uint64_t>(gen), static_cast<std::uint64_t>(j));
    const auto& row = pop.system.rows[static_cast<std::size_t>(j)];
    const Complex base = pop.gamma - pop.system.potential[static_cast<std::size_t>(j)];
    auto& out = next[static_cast<std::size_t>(j)];
    for (int rep = 0; rep < pop.replicas; ++rep) {
      const std::size_t lo = pop.replica_begin(rep);
      const std::size_t hi = pop.replica_begin(rep + 1);
      for (std::size_t i = lo; i < hi; ++i) {
        Complex denom = base;
        if (disorder) denom -= pop.epsilon * pop.law.sample(rng);
        for (auto [k, mult] : row) {
          const auto& pool = pop.pools[static_cast<std::size_t>(k)];
          for (int r = 0; r < mult; ++r) denom -= pool[lo + draw_index(rng, hi - lo)];
        }
        const Complex z = 1.0 / denom;
        if (!(std::abs(z) <= kDivergenceBound))
          throw AndersonError("population dynamics diverged (|zeta| > 1e6) at generation " + std::to_string(gen));
        if (!(z.imag() < 0.0))
          throw AndersonError("population dynamics left the Herglotz half-plane at generation " + std::to_string(gen));
        out[i] = z;
      }
    }
  }
  pop.pools = std::move(next);
  pop.generation = gen;
}

ZetaPopulation zeta_population(const ConeSystem& c, const PotentialLaw& law, double epsilon, Complex gamma,
                               const PoolParams& params) {
  require(gamma.imag() > 0.0, "zeta_population needs Im gamma > 0");
  require(params.pool_size >= 1, "pool size must be positive");
  require(params.generations >= params.burn_in && params.burn_in >= 0,
          "generations must be at least the burn-in length");
  c.validate();
  ZetaPopulation pop;
  pop.system = c;
  pop.law = law;
  pop.epsilon = epsilon;
  pop.gamma = gamma;
  pop.seed = params.seed;
  require(params.replicas >= 1, "replica count must be positive");
  pop.replicas = std::min(params.replicas, params.pool_size);
  const GreenState st = solve_green(c, gamma);
  for (int j = 0; j < c.size(); ++j)
    pop.pools.emplace_back(static_cast<std::size_t>(params.pool_size), st.zeta(j));
  for (int g = 0; g < params.generations; ++g) advance(pop);
  return pop;
}

ZetaPopulation zeta_population(int q, const PotentialLaw& law, double epsilon, Complex gamma, const PoolParams& params) {
  return zeta_population(regular_tree_cone(q), law, epsilon, gamma, params);
}

std::vector<double> im_parts(const ZetaPopulation& pop, int label) {
  require(label >= 0 && label < pop.system.size(), "label out of range");
  std::vector<double> out;
  out.reserve(pop.pools[static_cast<std::size_t>(label)].size());
  for (Complex z : pop.pools[static_cast<std::size_t>(label)]) out.push_back(z.imag());
  return out;
}

namespace {

std::vector<double> powered(const ZetaPopulation& pop, int label, double s) {
  std::vector<double> v;
  v.reserve(pop.pools[static_cast<std::size_t>(label)].size());
  for (Complex z : pop.pools[static_cast<std::size_t>(label)]) {
    const double im = std::abs(z.imag());
    if (im == 0.0) throw AndersonError("pool contains Im zeta = 0: lambda outside the usable region");
    v.push_back(std::pow(im, -s));
  }
  return v;
}

double mean(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

// Bootstrap of sum_l weight_l * mean(values_l). With several replicas, resamples
// replicas jointly across labels (entries of one replica are coupled); otherwise
// resamples entries of each label independently.
MomentEstimate bootstrap(const ZetaPopulation& pop, const std::vector<std::pair<double, std::vector<double>>>& terms,
                         int resamples) {
  MomentEstimate est;
  for (const auto& [w, v] : terms) est.value += w * mean(v);
  if (resamples < 2) return est;
  std::vector<double> stats;
  stats.reserve(static_cast<std::size_t>(resamples));
  if (pop.replicas >= 2) {
    const auto reps = static_cast<std::size_t>(pop.replicas);
    // Per replica: its entry count and the weighted sum of its entries.
    std::vector<double> sums(reps, 0.0);
    std::vector<double> counts(reps, 0.0);
    for (std::size_t r = 0; r < reps; ++r) {
      const std::size_t lo = pop.replica_begin(static_cast<int>(r));
      const std::size_t hi = pop.replica_begin(static_cast<int>(r) + 1);
      counts[r] = static_cast<double>(hi - lo);
      for (const auto& [w, v] : terms)
        for (std::size_t i = lo; i < hi; ++i) sums[r] += w * v[i];
    }
    for (int b = 0; b < resamples; ++b) {
      auto rng = substream(pop.seed, 0xB0075742ull + static_cast<std::uint64_t>(b), 0xEE);
      double s = 0.0, c = 0.0;
      for (std::size_t r = 0; r < reps; ++r) {
        const std::size_t pick = draw_index(rng, reps);
        s += sums[pick];
        c += counts[pick];
      }
      stats.push_back(s / c);
    }
  } else {
    for (int b = 0; b < resamples; ++b) {
      double total = 0.0;
      for (std::size_t t = 0; t < terms.size(); ++t) {
        const auto& v = terms[t].second;
        auto rng = substream(pop.seed, 0xB0075742ull + static_cast<std::uint64_t>(b), t);
        double s = 0.0;
        for (std::size_t i = 0; i < v.size(); ++i) s += v[draw_index(rng, v.size())];
        total += terms[t].first * s / static_cast<double>(v.size());
      }
      stats.push_back(total);
    }
  }
  const double mu = mean(stats);
  double var = 0.0;
  for (double x : stats) var += (x - mu) * (x - mu);
  var /= static_cast<double>(stats.size() - 1);
  est.half_width = 1.96 * std::sqrt(var);
  return est;
}

}  // namespace

MomentEstimate inverse_moment(const ZetaPopulation& pop, double s, int label, int resamples) {
  require(s >= 0.0, "moment order must be nonnegative");
  if (label < 0) {
    const auto& row = pop.system.rows[static_cast<std::size_t>(pop.system.root_labels.front())];
    require(!row.empty(), "root label has no children");
    label = row.front().first;
  }
  require(label < pop.system.size(), "label out of range");
  return bootstrap(pop, {{1.0, powered(pop, label, s)}}, resamples);
}

MomentEstimate inverse_moment_neighbour_sum(const ZetaPopulation& pop, double s, int resamples) {
  require(s >= 0.0, "moment order must be nonnegative");
  std::map<int, double> weight;
  const ConeSystem& c = pop.system;
  for (std::size_t r = 0; r < c.root_labels.size(); ++r)
    for (auto [k, m] : c.rows[static_cast<std::size_t>(c.root_labels[r])]) weight[k] += c.root_measure[r] * m;
  std::vector<std::pair<double, std::vector<double>>> terms;
  for (auto [k, w] : weight) terms.emplace_back(w, powered(pop, k, s));
  return bootstrap(pop, terms, resamples);
}

// ---- sigma_ac scans ---------------------------------------------------------------------------------------
SigmaAcScan sigma_ac_scan(const ConeSystem& c, const PotentialLaw& law, double epsilon, double delta,
                          const std::vector<double>& lambda_grid, const std::vector<double>& eta_grid,
                          const PoolParams& params) {
  require(delta > 0.0 && delta < 1.0, "delta must lie in (0, 1)");
  for (double eta : eta_grid) require(eta > 0.0 && eta < 1.0, "eta grid must lie in (0, 1)");
  SigmaAcScan scan;
  scan.delta = delta;
  scan.lambda = lambda_grid;
  for (std::size_t li = 0; li < lambda_grid.size(); ++li) {
    bool all = !eta_grid.empty();
    for (std::size_t ei = 0; ei < eta_grid.size(); ++ei) {
      PoolParams p = params;
      p.seed = params.seed + 0x9E3779B97F4A7C15ull * (li * eta_grid.size() + ei + 1);
      const ZetaPopulation pop = zeta_population(c, law, epsilon, Complex(lambda_grid[li], eta_grid[ei]), p);
      for (int j = 0; j < c.size(); ++j) {
        std::size_t above = 0;
        for (Complex z : pop.pools[static_cast<std::size_t>(j)])
          if (std::abs(z.imag()) > delta) ++above;
        const double frac = static_cast<double>(above) / static_cast<double>(pop.pool_size());
        const bool marked = frac > delta;
        all = all && marked;
        scan.rows.push_back({lambda_grid[li], eta_grid[ei], j, frac, marked});
      }
    }
    scan.marked.push_back(all);
  }
  return scan;
}

void write_sigma_ac_csv(std::ostream& out, const SigmaAcScan& scan) {
  out << "lambda,eta,label,frac_above_delta,marked\n";
  char buf[128];
  for (const auto& r : scan.rows) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g,%d,%.17g,%d\n", r.lambda, r.eta, r.label, r.frac_above_delta,
                  r.marked ? 1 : 0);
    out << buf;
  }
}

// ---- Finite graphs ------------------------------------------------------------------------------------------
Graph finite_anderson_attach(const Graph& g, const PotentialLaw& law, double epsilon, std::uint64_t seed) {
  auto rng = substream(seed, 0xA77AC4ull);
  std::vector<double> w(static_cast<std::size_t>(g.size()));
  for (auto& x : w) x = epsilon == 0.0 ? 0.0 : epsilon * law.sample(rng);
  return g.with_potential(std::move(w));
}

double ks_distance(std::vector<double> samples, const PotentialLaw& law) {
  require(!samples.empty(), "no samples");
  std::sort(samples.begin(), samples.end());
  const double n = static_cast<double>(samples.size());
  double d = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const double x = samples[i];
    // Empirical CDF just below and at x; the law's CDF just below x handles atoms.
    const double below = law.cdf(std::nextafter(x, -std::numeric_limits<double>::infinity()));
    const double at = law.cdf(x);
    std::size_t j = i;
    while (j + 1 < samples.size() && samples[j + 1] == x) ++j;
    d = std::max({d, std::abs(static_cast<double>(i) / n - below), std::abs(static_cast<double>(j + 1) / n - at)});
    i = j;
  }
  return d;
}

double ks_two_sample(std::vector<double> a, std::vector<double> b) {
  require(!a.empty() && !b.empty(), "no samples");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < a.size() && j < b.size()) {
    const double x = std::min(a[i], b[j]);
    while (i < a.size() && a[i] == x) ++i;
    while (j < b.size() && b[j] == x) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / a.size() - static_cast<double>(j) / b.size()));
  }
  return d;
}

}  // namespace qelab
