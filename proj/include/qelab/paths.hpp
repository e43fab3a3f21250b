// Directed edges and non-backtracking path spaces B_k of a finite graph.
#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <mutex>
#include <span>
#include <vector>

#include "qelab/graph.hpp"

namespace qelab {

using PathIndex = std::int64_t;

// Enumeration of B_k. Paths are stored row-major as k+1 vertex indices.
// Ordering: B_0 is the vertex set, B_1 the directed edges in CSR-slot order,
// and B_k lists the non-backtracking extensions of each element of B_{k-1}
// consecutively, in increasing order of the appended vertex.
struct PathSpace {
  int length = 0;
  std::size_t count = 0;
  std::vector<Vertex> vertices;
  // For k >= 1: index in B_{k-1} of (x_0..x_{k-1}) and of (x_1..x_k).
  std::vector<PathIndex> prefix;
  std::vector<PathIndex> suffix;
  // For k >= 1: index in B_1 of (x_0, x_1) and of (x_{k-1}, x_k).
  std::vector<PathIndex> first_edge;
  std::vector<PathIndex> last_edge;
  // Index in B_{k+1} of the first extension of each path (size count + 1).
  std::vector<PathIndex> child_offset;

  std::size_t size() const { return count; }
  std::span<const Vertex> path(std::size_t i) const {
    return {vertices.data() + i * static_cast<std::size_t>(length + 1), static_cast<std::size_t>(length + 1)};
  }
  Vertex origin(std::size_t i) const { return vertices[i * static_cast<std::size_t>(length + 1)]; }
  Vertex terminus(std::size_t i) const {
    return vertices[i * static_cast<std::size_t>(length + 1) + static_cast<std::size_t>(length)];
  }
};

class PathSpaceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DirectedEdgeSpace {
 public:
  static constexpr std::size_t kDefaultPathCap = 40'000'000;

  explicit DirectedEdgeSpace(std::shared_ptr<const Graph> graph, std::size_t path_cap = kDefaultPathCap);
  explicit DirectedEdgeSpace(Graph graph, std::size_t path_cap = kDefaultPathCap);

  const Graph& graph() const { return *graph_; }
  std::shared_ptr<const Graph> graph_ptr() const { return graph_; }
  int vertex_count() const { return graph_->size(); }

  std::size_t edge_count() const { return tail_.size(); }
  Vertex tail(std::size_t e) const { return tail_[e]; }
  Vertex head(std::size_t e) const { return head_[e]; }
  std::size_t reverse(std::size_t e) const { return reverse_[e]; }
  std::size_t edge_index(Vertex u, Vertex v) const;
  // Non-backtracking successors (head(e), w), w != tail(e), in increasing w.
  std::span<const std::size_t> successors(std::size_t e) const {
    return {successors_.data() + succ_offset_[e], succ_offset_[e + 1] - succ_offset_[e]};
  }
  // Predecessors (w, tail(e)) of e, w != head(e).
  std::span<const std::size_t> predecessors(std::size_t e) const {
    return {predecessors_.data() + pred_offset_[e], pred_offset_[e + 1] - pred_offset_[e]};
  }

  // |B_k| computed by counting, without enumerating (saturates at SIZE_MAX).
  std::size_t predicted_size(int k) const;
  std::size_t path_cap() const { return path_cap_; }

  // Lazily builds (and caches) B_k; throws PathSpaceError if |B_k| exceeds
  // the configured cap. Safe to call concurrently.
  const PathSpace& paths(int k) const;

  // Index of a non-backtracking path in its B_k enumeration; throws if the
  // sequence is not a non-backtracking path of the graph.
  PathIndex index_of(std::span<const Vertex> path) const;

 private:
  void build_edges();
  std::unique_ptr<PathSpace> build_grade(int k, const PathSpace& previous, const PathSpace* before_previous) const;

  std::shared_ptr<const Graph> graph_;
  std::size_t path_cap_;
  std::vector<Vertex> tail_;
  std::vector<Vertex> head_;
  std::vector<std::size_t> reverse_;
  std::vector<std::size_t> succ_offset_;
  std::vector<std::size_t> successors_;
  std::vector<std::size_t> pred_offset_;
  std::vector<std::size_t> predecessors_;
  mutable std::mutex mutex_;
  mutable std::vector<std::unique_ptr<PathSpace>> grades_;
};

}  // namespace qelab
