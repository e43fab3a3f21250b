#include "qelab/generators.hpp"

#include <algorithm>
#include <numeric>
#include <random>
#include <set>

namespace qelab {

namespace {

// One independent generator per (seed, purpose, attempt, item) tuple.
std::mt19937_64 substream(std::uint64_t seed, std::uint32_t purpose, std::uint32_t attempt, std::uint32_t item = 0) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), purpose, attempt, item};
  return std::mt19937_64(seq);
}

bool pairs_are_simple(const std::vector<Edge>& edges) {
  std::vector<std::pair<Vertex, Vertex>> keys;
  keys.reserve(edges.size());
  for (const Edge& e : edges) {
    if (e.u == e.v) return false;
    keys.emplace_back(std::min(e.u, e.v), std::max(e.u, e.v));
  }
  std::sort(keys.begin(), keys.end());
  return std::adjacent_find(keys.begin(), keys.end()) == keys.end();
}

}  // namespace

Graph random_regular(int n, int d, std::uint64_t seed, int budget) {
  if (d < 3) throw GeneratorError("random_regular needs degree d >= 3 (got " + std::to_string(d) + ")");
  if (n <= d) throw GeneratorError("random_regular needs n > d (got n=" + std::to_string(n) + ", d=" + std::to_string(d) + ")");
  if ((static_cast<long long>(n) * d) % 2 != 0) {
    throw GeneratorError("random_regular parity violation: n*d = " + std::to_string(static_cast<long long>(n) * d) + " is odd");
  }
  std::vector<Vertex> stubs(static_cast<std::size_t>(n) * static_cast<std::size_t>(d));
  for (std::size_t i = 0; i < stubs.size(); ++i) stubs[i] = static_cast<Vertex>(i / static_cast<std::size_t>(d));
  std::vector<Edge> edges(stubs.size() / 2);
  for (int attempt = 0; attempt < budget; ++attempt) {
    auto rng = substream(seed, 1, static_cast<std::uint32_t>(attempt));
    std::vector<Vertex> order = stubs;
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t i = 0; i < edges.size(); ++i) edges[i] = {order[2 * i], order[2 * i + 1]};
    if (!pairs_are_simple(edges)) continue;
    Graph g = Graph::from_edges(n, edges);
    if (g.is_connected()) return g;
  }
  throw GeneratorError("random_regular resampling budget of " + std::to_string(budget) + " attempts exhausted");
}

Graph random_lift(const Graph& base, int n, std::uint64_t seed, int budget) {
  if (n < 1) throw GeneratorError("lift order must be >= 1");
  if (base.size() == 0 || !base.is_connected()) throw GeneratorError("random_lift needs a connected base graph");
  const auto base_edges = base.edges();
  const int total = base.size() * n;
  std::vector<int> projection(static_cast<std::size_t>(total));
  for (int v = 0; v < total; ++v) projection[static_cast<std::size_t>(v)] = v / n;
  std::vector<double> lifted_potential;
  if (base.has_potential()) {
    lifted_potential.resize(static_cast<std::size_t>(total));
    for (int v = 0; v < total; ++v) lifted_potential[static_cast<std::size_t>(v)] = base.potential(v / n);
  }
  std::vector<int> perm(static_cast<std::size_t>(n));
  for (int attempt = 0; attempt < budget; ++attempt) {
    std::vector<Edge> edges;
    edges.reserve(base_edges.size() * static_cast<std::size_t>(n));
    for (std::size_t e = 0; e < base_edges.size(); ++e) {
      auto rng = substream(seed, 2, static_cast<std::uint32_t>(attempt), static_cast<std::uint32_t>(e));
      std::iota(perm.begin(), perm.end(), 0);
      std::shuffle(perm.begin(), perm.end(), rng);
      for (int i = 0; i < n; ++i) {
        edges.push_back({base_edges[e].u * n + i, base_edges[e].v * n + perm[static_cast<std::size_t>(i)]});
      }
    }
    Graph g = Graph::from_edges(total, edges);
    if (g.is_connected()) return g.with_colours(projection).with_potential(lifted_potential);
  }
  throw GeneratorError("random_lift resampling budget of " + std::to_string(budget) + " attempts exhausted");
}

Graph biregular(int p1, int q1, int n_black, std::uint64_t seed, int budget) {
  if (p1 < 1 || q1 < 1 || n_black < 1) throw GeneratorError("biregular needs positive degrees and n_black");
  if ((static_cast<long long>(p1) * n_black) % q1 != 0) {
    throw GeneratorError("biregular divisibility violation: p1*n_black = " +
                         std::to_string(static_cast<long long>(p1) * n_black) + " is not divisible by q1 = " +
                         std::to_string(q1));
  }
  const int n_white = static_cast<int>(static_cast<long long>(p1) * n_black / q1);
  if (n_white < p1 || n_black < q1) throw GeneratorError("biregular parts too small for a simple graph");
  const std::size_t m = static_cast<std::size_t>(p1) * static_cast<std::size_t>(n_black);
  std::vector<Vertex> white_stubs(m);
  for (std::size_t i = 0; i < m; ++i) white_stubs[i] = n_black + static_cast<Vertex>(i / static_cast<std::size_t>(q1));
  std::vector<int> colours(static_cast<std::size_t>(n_black + n_white), 1);
  std::fill(colours.begin(), colours.begin() + n_black, 0);
  std::vector<Edge> edges(m);
  for (int attempt = 0; attempt < budget; ++attempt) {
    auto rng = substream(seed, 3, static_cast<std::uint32_t>(attempt));
    std::vector<Vertex> order = white_stubs;
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t i = 0; i < m; ++i) edges[i] = {static_cast<Vertex>(i / static_cast<std::size_t>(p1)), order[i]};
    if (!pairs_are_simple(edges)) continue;
    Graph g = Graph::from_edges(n_black + n_white, edges);
    if (g.is_connected()) return g.with_colours(colours);
  }
  throw GeneratorError("biregular resampling budget of " + std::to_string(budget) + " attempts exhausted");
}

Graph cycle_graph(int n) {
  if (n < 3) throw GeneratorError("cycle needs n >= 3");
  std::vector<Edge> edges;
  for (int i = 0; i < n; ++i) edges.push_back({i, (i + 1) % n});
  return Graph::from_edges(n, edges);
}

Graph path_graph(int n) {
  if (n < 1) throw GeneratorError("path needs n >= 1");
  std::vector<Edge> edges;
  for (int i = 0; i + 1 < n; ++i) edges.push_back({i, i + 1});
  return Graph::from_edges(n, edges);
}

Graph complete_graph(int n) {
  if (n < 2) throw GeneratorError("complete graph needs n >= 2");
  std::vector<Edge> edges;
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) edges.push_back({i, j});
  return Graph::from_edges(n, edges);
}

Graph complete_bipartite_graph(int a, int b) {
  if (a < 1 || b < 1) throw GeneratorError("complete bipartite graph needs positive parts");
  std::vector<Edge> edges;
  for (int i = 0; i < a; ++i)
    for (int j = 0; j < b; ++j) edges.push_back({i, a + j});
  std::vector<int> colours(static_cast<std::size_t>(a + b), 1);
  std::fill(colours.begin(), colours.begin() + a, 0);
  return Graph::from_edges(a + b, edges).with_colours(colours);
}

Graph petersen_graph() {
  std::vector<Edge> edges;
  for (int i = 0; i < 5; ++i) {
    edges.push_back({i, (i + 1) % 5});          // outer pentagon
    edges.push_back({i, i + 5});                // spokes
    edges.push_back({5 + i, 5 + (i + 2) % 5});  // inner pentagram
  }
  return Graph::from_edges(10, edges);
}

namespace {

Graph named_base(const std::string& name) {
  auto colon = name.find(':');
  const std::string family = name.substr(0, colon);
  const int arg = colon == std::string::npos ? 0 : std::stoi(name.substr(colon + 1));
  if (family == "complete") return complete_graph(arg);
  if (family == "cycle") return cycle_graph(arg);
  if (family == "petersen") return petersen_graph();
  if (family == "complete_bipartite") return complete_bipartite_graph(arg, arg);
  throw GeneratorError("unknown base family '" + name + "'");
}

}  // namespace

Graph generate(const GeneratorSpec& spec) {
  const std::string& f = spec.family;
  if (f == "random_regular") return random_regular(spec.n, spec.degree, spec.seed);
  if (f == "random_lift") {
    Graph base;
    if (!spec.base_file.empty()) {
      base = read_edge_list_file(spec.base_file);
    } else if (!spec.base_family.empty()) {
      base = named_base(spec.base_family);
    } else {
      throw GeneratorError("random_lift needs base_file or base_family");
    }
    if (base.min_degree() < 2) throw GeneratorError("random_lift base graph must have minimum degree >= 2");
    return random_lift(base, spec.n, spec.seed);
  }
  if (f == "biregular") return biregular(spec.p1, spec.q1, spec.n_black, spec.seed);
  if (f == "cycle") return cycle_graph(spec.n);
  if (f == "complete") return complete_graph(spec.n);
  if (f == "petersen") return petersen_graph();
  if (f == "from_file") {
    if (spec.base_file.empty()) throw GeneratorError("from_file needs base_file");
    return read_edge_list_file(spec.base_file);
  }
  throw GeneratorError("unknown generator family '" + f + "'");
}

}  // namespace qelab
