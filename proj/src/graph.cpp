#include "qelab/graph.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <istream>
#include <limits>
#include <map>
#include <ostream>
#include <queue>
#include <sstream>

namespace qelab {

Graph Graph::from_edges(int n, std::span<const Edge> edges) {
  if (n < 0) throw GraphError("vertex count must be nonnegative");
  std::vector<std::vector<Vertex>> rows(static_cast<std::size_t>(n));
  for (const Edge& e : edges) {
    if (e.u < 0 || e.v < 0 || e.u >= n || e.v >= n) {
      throw GraphError("edge (" + std::to_string(e.u) + "," + std::to_string(e.v) +
                       ") has an endpoint outside [0," + std::to_string(n) + ")");
    }
    if (e.u == e.v) throw GraphError("self-loop at vertex " + std::to_string(e.u));
    rows[static_cast<std::size_t>(e.u)].push_back(e.v);
    rows[static_cast<std::size_t>(e.v)].push_back(e.u);
  }
  Graph g;
  g.offsets_.assign(static_cast<std::size_t>(n) + 1, 0);
  for (int x = 0; x < n; ++x) {
    auto& row = rows[static_cast<std::size_t>(x)];
    std::sort(row.begin(), row.end());
    if (std::adjacent_find(row.begin(), row.end()) != row.end()) {
      throw GraphError("repeated edge at vertex " + std::to_string(x));
    }
    g.offsets_[static_cast<std::size_t>(x) + 1] = g.offsets_[static_cast<std::size_t>(x)] + row.size();
  }
  g.adjacency_.reserve(g.offsets_.back());
  for (auto& row : rows) g.adjacency_.insert(g.adjacency_.end(), row.begin(), row.end());
  return g;
}

void Graph::check_vertex(Vertex x) const {
  if (x < 0 || x >= size()) {
    throw GraphError("invalid vertex index " + std::to_string(x) + " (graph has " +
                     std::to_string(size()) + " vertices)");
  }
}

std::span<const Vertex> Graph::neighbours(Vertex x) const {
  const auto b = offsets_[static_cast<std::size_t>(x)];
  const auto e = offsets_[static_cast<std::size_t>(x) + 1];
  return {adjacency_.data() + b, e - b};
}

int Graph::degree(Vertex x) const {
  return static_cast<int>(offsets_[static_cast<std::size_t>(x) + 1] - offsets_[static_cast<std::size_t>(x)]);
}

int Graph::min_degree() const {
  int d = std::numeric_limits<int>::max();
  for (int x = 0; x < size(); ++x) d = std::min(d, degree(x));
  return size() == 0 ? 0 : d;
}

int Graph::max_degree() const {
  int d = 0;
  for (int x = 0; x < size(); ++x) d = std::max(d, degree(x));
  return d;
}

bool Graph::has_edge(Vertex x, Vertex y) const {
  if (x < 0 || x >= size()) return false;
  auto row = neighbours(x);
  return std::binary_search(row.begin(), row.end(), y);
}

int Graph::neighbour_rank(Vertex x, Vertex y) const {
  auto row = neighbours(x);
  auto it = std::lower_bound(row.begin(), row.end(), y);
  if (it == row.end() || *it != y) {
    throw GraphError("vertices " + std::to_string(x) + " and " + std::to_string(y) + " are not adjacent");
  }
  return static_cast<int>(it - row.begin());
}

std::vector<Edge> Graph::edges() const {
  std::vector<Edge> out;
  out.reserve(edge_count());
  for (int x = 0; x < size(); ++x) {
    for (Vertex y : neighbours(x)) {
      if (x < y) out.push_back({x, y});
    }
  }
  return out;
}

Graph Graph::with_potential(std::vector<double> values) const {
  if (!values.empty() && values.size() != static_cast<std::size_t>(size())) {
    throw GraphError("potential has " + std::to_string(values.size()) + " entries for " +
                     std::to_string(size()) + " vertices");
  }
  Graph g = *this;
  g.potential_ = std::move(values);
  return g;
}

Graph Graph::with_colours(std::vector<int> values) const {
  if (!values.empty() && values.size() != static_cast<std::size_t>(size())) {
    throw GraphError("colouring has " + std::to_string(values.size()) + " entries for " +
                     std::to_string(size()) + " vertices");
  }
  Graph g = *this;
  g.colour_ = std::move(values);
  return g;
}

bool Graph::is_connected() const {
  if (size() == 0) return true;
  auto dist = bfs_distances(*this, 0);
  return std::none_of(dist.begin(), dist.end(), [](int d) { return d < 0; });
}

bool Graph::is_bipartite() const {
  std::vector<int> side(static_cast<std::size_t>(size()), -1);
  for (int s = 0; s < size(); ++s) {
    if (side[static_cast<std::size_t>(s)] >= 0) continue;
    side[static_cast<std::size_t>(s)] = 0;
    std::queue<Vertex> queue;
    queue.push(s);
    while (!queue.empty()) {
      Vertex x = queue.front();
      queue.pop();
      for (Vertex y : neighbours(x)) {
        auto& sy = side[static_cast<std::size_t>(y)];
        if (sy < 0) {
          sy = 1 - side[static_cast<std::size_t>(x)];
          queue.push(y);
        } else if (sy == side[static_cast<std::size_t>(x)]) {
          return false;
        }
      }
    }
  }
  return true;
}

bool Graph::is_cycle() const {
  return size() >= 3 && min_degree() == 2 && max_degree() == 2 && is_connected();
}

std::vector<int> bfs_distances(const Graph& g, Vertex source, int max_depth) {
  g.check_vertex(source);
  std::vector<int> dist(static_cast<std::size_t>(g.size()), -1);
  std::vector<Vertex> frontier{source};
  dist[static_cast<std::size_t>(source)] = 0;
  int depth = 0;
  while (!frontier.empty() && (max_depth < 0 || depth < max_depth)) {
    std::vector<Vertex> next;
    for (Vertex x : frontier) {
      for (Vertex y : g.neighbours(x)) {
        if (dist[static_cast<std::size_t>(y)] < 0) {
          dist[static_cast<std::size_t>(y)] = depth + 1;
          next.push_back(y);
        }
      }
    }
    frontier = std::move(next);
    ++depth;
  }
  return dist;
}

// The ball B(x, r) consists of the vertices at distance <= r together with
// every edge having an endpoint at distance < r. Expanding layer d, a
// neighbour that is already discovered and is not the BFS parent closes a
// cycle that lies inside B(x, d + 1); the first such layer gives rho = d.
int injectivity_radius(const Graph& g, Vertex x, int cap) {
  g.check_vertex(x);
  if (cap < 0) throw GraphError("injectivity radius cap must be nonnegative");
  const auto n = static_cast<std::size_t>(g.size());
  std::vector<int> dist(n, -1);
  std::vector<Vertex> parent(n, -1);
  std::vector<Vertex> frontier{x};
  dist[static_cast<std::size_t>(x)] = 0;
  for (int d = 0; d < cap; ++d) {
    std::vector<Vertex> next;
    for (Vertex u : frontier) {
      for (Vertex w : g.neighbours(u)) {
        const auto wi = static_cast<std::size_t>(w);
        if (w == parent[static_cast<std::size_t>(u)]) continue;
        if (dist[wi] < 0) {
          dist[wi] = d + 1;
          parent[wi] = u;
          next.push_back(w);
        } else if (dist[wi] >= d) {
          return d;
        }
      }
    }
    if (next.empty()) return cap;
    frontier = std::move(next);
  }
  return cap;
}

BstReport bst_report(const Graph& g, int r) {
  if (r < 0) throw GraphError("BST radius must be nonnegative");
  BstReport report;
  report.radius = r;
  report.per_vertex_rho.resize(static_cast<std::size_t>(g.size()));
  std::size_t bad = 0;
  for (int x = 0; x < g.size(); ++x) {
    const int rho = injectivity_radius(g, x, r);
    report.per_vertex_rho[static_cast<std::size_t>(x)] = rho;
    if (rho < r) ++bad;
  }
  report.bad_fraction = g.size() == 0 ? 0.0 : static_cast<double>(bad) / g.size();
  return report;
}

double bst_statistic(const Graph& g, int r) { return bst_report(g, r).bad_fraction; }

namespace {

bool parse_int(std::string_view token, long long& out) {
  auto res = std::from_chars(token.data(), token.data() + token.size(), out);
  return res.ec == std::errc() && res.ptr == token.data() + token.size();
}

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

Graph read_edge_list(std::istream& in) {
  std::vector<Edge> edges;
  std::map<Vertex, double> potential;
  int with_potential = -1;  // unknown until the first edge line
  long long max_index = -1;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream fields(line);
    std::vector<std::string> tokens;
    for (std::string t; fields >> t;) tokens.push_back(t);
    if (tokens.empty()) continue;
    const std::string where = "edge list line " + std::to_string(line_no);
    if (tokens.size() != 2 && tokens.size() != 3) throw GraphError(where + ": expected 'u v [potential]'");
    long long u = 0, v = 0;
    if (!parse_int(tokens[0], u) || !parse_int(tokens[1], v) || u < 0 || v < 0 ||
        u > std::numeric_limits<Vertex>::max() || v > std::numeric_limits<Vertex>::max()) {
      throw GraphError(where + ": vertex indices must be nonnegative integers");
    }
    const int has_p = tokens.size() == 3 ? 1 : 0;
    if (with_potential < 0) with_potential = has_p;
    if (with_potential != has_p) throw GraphError(where + ": potential column must be present on all lines or none");
    if (has_p) {
      double p = 0;
      try {
        std::size_t used = 0;
        p = std::stod(tokens[2], &used);
        if (used != tokens[2].size()) throw std::invalid_argument("trailing");
      } catch (const std::exception&) {
        throw GraphError(where + ": malformed potential value '" + tokens[2] + "'");
      }
      auto [it, inserted] = potential.emplace(static_cast<Vertex>(u), p);
      if (!inserted && it->second != p) {
        throw GraphError(where + ": conflicting potential for vertex " + std::to_string(u));
      }
    }
    edges.push_back({static_cast<Vertex>(u), static_cast<Vertex>(v)});
    max_index = std::max({max_index, u, v});
  }
  Graph g = Graph::from_edges(static_cast<int>(max_index + 1), edges);
  if (with_potential == 1) {
    std::vector<double> values(static_cast<std::size_t>(g.size()));
    for (int x = 0; x < g.size(); ++x) {
      auto it = potential.find(x);
      if (it == potential.end()) {
        throw GraphError("edge list gives no potential for vertex " + std::to_string(x));
      }
      values[static_cast<std::size_t>(x)] = it->second;
    }
    g = g.with_potential(std::move(values));
  }
  return g;
}

Graph read_edge_list_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw GraphError("cannot open edge list '" + path + "'");
  return read_edge_list(in);
}

// Without a potential, edges are written as "u v" with u < v in lexicographic
// order. With a potential, every vertex must head at least one line; edges are
// oriented so that each vertex carries one: in each component a non-tree edge
// (a, b) is oriented a -> b and every BFS-tree edge from child to parent.
void write_edge_list(std::ostream& out, const Graph& g) {
  for (int x = 0; x < g.size(); ++x) {
    if (g.degree(x) == 0) throw GraphError("edge-list format cannot represent isolated vertex " + std::to_string(x));
  }
  if (!g.has_potential()) {
    for (const Edge& e : g.edges()) out << e.u << ' ' << e.v << '\n';
    return;
  }
  const auto n = static_cast<std::size_t>(g.size());
  std::vector<Edge> oriented;
  oriented.reserve(g.edge_count());
  std::vector<int> comp(n, -1);
  std::vector<Vertex> parent(n, -1);
  for (int s = 0; s < g.size(); ++s) {
    if (comp[static_cast<std::size_t>(s)] >= 0) continue;
    std::vector<Vertex> members{s};
    comp[static_cast<std::size_t>(s)] = s;
    for (std::size_t i = 0; i < members.size(); ++i) {
      for (Vertex y : g.neighbours(members[i])) {
        if (comp[static_cast<std::size_t>(y)] < 0) {
          comp[static_cast<std::size_t>(y)] = s;
          parent[static_cast<std::size_t>(y)] = members[i];
          members.push_back(y);
        }
      }
    }
    Edge extra{-1, -1};
    for (Vertex x : members) {
      for (Vertex y : g.neighbours(x)) {
        if (x < y && parent[static_cast<std::size_t>(y)] != x && parent[static_cast<std::size_t>(x)] != y) {
          extra = {x, y};
          break;
        }
      }
      if (extra.u >= 0) break;
    }
    if (extra.u < 0) {
      throw GraphError("edge-list format cannot carry a potential on the acyclic component of vertex " +
                       std::to_string(s));
    }
    // Re-root the BFS tree at extra.u without using the carrier edge (the rest
    // stays connected), so extra.u is the only vertex without a parent edge and
    // the carrier edge is oriented extra.u -> extra.v.
    std::vector<Vertex> order{extra.u};
    std::vector<char> seen(n, 0);
    seen[static_cast<std::size_t>(extra.u)] = 1;
    parent[static_cast<std::size_t>(extra.u)] = -1;
    for (std::size_t i = 0; i < order.size(); ++i) {
      Vertex x = order[i];
      for (Vertex y : g.neighbours(x)) {
        if (x == extra.u && y == extra.v) continue;
        if (!seen[static_cast<std::size_t>(y)]) {
          seen[static_cast<std::size_t>(y)] = 1;
          parent[static_cast<std::size_t>(y)] = x;
          order.push_back(y);
        }
      }
    }
    for (Vertex x : members) {
      for (Vertex y : g.neighbours(x)) {
        if (x > y) continue;
        if (parent[static_cast<std::size_t>(y)] == x || (y == extra.u && x == extra.v)) {
          oriented.push_back({y, x});
        } else {
          oriented.push_back({x, y});
        }
      }
    }
  }
  std::sort(oriented.begin(), oriented.end(),
            [](const Edge& a, const Edge& b) { return a.u != b.u ? a.u < b.u : a.v < b.v; });
  for (const Edge& e : oriented) out << e.u << ' ' << e.v << ' ' << format_double(g.potential(e.u)) << '\n';
}

void write_edge_list_file(const std::string& path, const Graph& g) {
  std::ofstream out(path);
  if (!out) throw GraphError("cannot write edge list '" + path + "'");
  write_edge_list(out, g);
  if (!out) throw GraphError("failed while writing edge list '" + path + "'");
}

}  // namespace qelab
