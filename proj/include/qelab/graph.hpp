// Finite simple undirected graphs, injectivity radius and local tree-likeness.
#pragma once

#include <cstddef>
#include <iosfwd>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace qelab {

using Vertex = int;

struct Edge {
  Vertex u = 0;
  Vertex v = 0;
  friend bool operator==(const Edge&, const Edge&) = default;
};

class GraphError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Immutable simple graph in compressed sparse row form. Each adjacency row is
// sorted, so a directed edge (x, y) has a canonical slot offset(x) + rank of y.
class Graph {
 public:
  Graph() = default;

  // Builds a graph on n vertices; rejects self-loops, repeated edges and
  // out-of-range endpoints.
  static Graph from_edges(int n, std::span<const Edge> edges);

  int size() const { return static_cast<int>(offsets_.empty() ? 0 : offsets_.size() - 1); }
  std::span<const Vertex> neighbours(Vertex x) const;
  int degree(Vertex x) const;
  std::size_t edge_count() const { return adjacency_.size() / 2; }
  std::size_t slot_begin(Vertex x) const { return offsets_[static_cast<std::size_t>(x)]; }
  int min_degree() const;
  int max_degree() const;
  bool is_regular() const { return size() > 0 && min_degree() == max_degree(); }
  bool has_edge(Vertex x, Vertex y) const;
  // Position of y within the sorted adjacency row of x; throws if not adjacent.
  int neighbour_rank(Vertex x, Vertex y) const;
  // Undirected edges with u < v, in lexicographic order.
  std::vector<Edge> edges() const;

  bool has_potential() const { return !potential_.empty(); }
  double potential(Vertex x) const { return potential_.empty() ? 0.0 : potential_[static_cast<std::size_t>(x)]; }
  std::span<const double> potentials() const { return potential_; }
  Graph with_potential(std::vector<double> values) const;

  bool has_colours() const { return !colour_.empty(); }
  int colour(Vertex x) const { return colour_.empty() ? 0 : colour_[static_cast<std::size_t>(x)]; }
  std::span<const int> colours() const { return colour_; }
  Graph with_colours(std::vector<int> values) const;

  bool is_connected() const;
  bool is_bipartite() const;
  bool is_cycle() const;
  void check_vertex(Vertex x) const;

  friend bool operator==(const Graph&, const Graph&) = default;

 private:
  std::vector<std::size_t> offsets_;
  std::vector<Vertex> adjacency_;
  std::vector<double> potential_;
  std::vector<int> colour_;
};

// Breadth-first distances from `source`; vertices farther than max_depth (or
// unreachable) get -1. A negative max_depth means unbounded.
std::vector<int> bfs_distances(const Graph& g, Vertex source, int max_depth = -1);

// Largest rho <= cap such that the ball of radius rho around x is a tree.
int injectivity_radius(const Graph& g, Vertex x, int cap);

struct BstReport {
  int radius = 0;
  double bad_fraction = 0.0;
  std::vector<int> per_vertex_rho;  // capped at `radius`
};

BstReport bst_report(const Graph& g, int r);
double bst_statistic(const Graph& g, int r);

// Edge-list text format: "u v [potential_of_u]" per line, '#' comments.
Graph read_edge_list(std::istream& in);
Graph read_edge_list_file(const std::string& path);
void write_edge_list(std::ostream& out, const Graph& g);
void write_edge_list_file(const std::string& path, const Graph& g);

}  // namespace qelab
