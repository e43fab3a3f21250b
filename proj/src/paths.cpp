#include "qelab/paths.hpp"

#include <algorithm>
#include <limits>
#include <string>

namespace qelab {

DirectedEdgeSpace::DirectedEdgeSpace(std::shared_ptr<const Graph> graph, std::size_t path_cap)
    : graph_(std::move(graph)), path_cap_(path_cap) {
  if (!graph_) throw PathSpaceError("directed edge space needs a graph");
  build_edges();
}

DirectedEdgeSpace::DirectedEdgeSpace(Graph graph, std::size_t path_cap)
    : DirectedEdgeSpace(std::make_shared<const Graph>(std::move(graph)), path_cap) {}

void DirectedEdgeSpace::build_edges() {
  const Graph& g = *graph_;
  const std::size_t m = 2 * g.edge_count();
  tail_.resize(m);
  head_.resize(m);
  reverse_.resize(m);
  for (Vertex x = 0; x < g.size(); ++x) {
    std::size_t slot = g.slot_begin(x);
    for (Vertex y : g.neighbours(x)) {
      tail_[slot] = x;
      head_[slot] = y;
      ++slot;
    }
  }
  for (std::size_t e = 0; e < m; ++e) reverse_[e] = edge_index(head_[e], tail_[e]);

  succ_offset_.assign(m + 1, 0);
  pred_offset_.assign(m + 1, 0);
  for (std::size_t e = 0; e < m; ++e) {
    succ_offset_[e + 1] = succ_offset_[e] + static_cast<std::size_t>(g.degree(head_[e]) - 1);
    pred_offset_[e + 1] = pred_offset_[e] + static_cast<std::size_t>(g.degree(tail_[e]) - 1);
  }
  successors_.reserve(succ_offset_.back());
  predecessors_.reserve(pred_offset_.back());
  for (std::size_t e = 0; e < m; ++e) {
    const Vertex x = head_[e];
    std::size_t slot = g.slot_begin(x);
    for (Vertex w : g.neighbours(x)) {
      if (w != tail_[e]) successors_.push_back(slot);
      ++slot;
    }
    const Vertex t = tail_[e];
    for (Vertex w : g.neighbours(t)) {
      if (w != head_[e]) predecessors_.push_back(edge_index(w, t));
    }
  }

  auto base = std::make_unique<PathSpace>();
  base->length = 0;
  base->count = static_cast<std::size_t>(g.size());
  base->vertices.resize(base->count);
  for (std::size_t x = 0; x < base->count; ++x) base->vertices[x] = static_cast<Vertex>(x);
  base->child_offset.resize(base->count + 1);
  for (Vertex x = 0; x <= g.size(); ++x) {
    base->child_offset[static_cast<std::size_t>(x)] =
        static_cast<PathIndex>(x == g.size() ? m : g.slot_begin(x));
  }
  grades_.push_back(std::move(base));
}

std::size_t DirectedEdgeSpace::edge_index(Vertex u, Vertex v) const {
  graph_->check_vertex(u);
  return graph_->slot_begin(u) + static_cast<std::size_t>(graph_->neighbour_rank(u, v));
}

std::size_t DirectedEdgeSpace::predicted_size(int k) const {
  if (k < 0) throw PathSpaceError("path length must be nonnegative");
  if (k == 0) return static_cast<std::size_t>(graph_->size());
  const std::size_t m = edge_count();
  constexpr double kMax = static_cast<double>(std::numeric_limits<std::size_t>::max() / 2);
  std::vector<double> count(m, 1.0), next(m);
  for (int j = 2; j <= k; ++j) {
    for (std::size_t e = 0; e < m; ++e) {
      double s = 0;
      for (std::size_t f : successors(e)) s += count[f];
      next[e] = std::min(s, kMax);
    }
    count.swap(next);
  }
  double total = 0;
  for (double c : count) total = std::min(total + c, kMax);
  return static_cast<std::size_t>(total);
}

std::unique_ptr<PathSpace> DirectedEdgeSpace::build_grade(int k, const PathSpace& prev,
                                                          const PathSpace* prev2) const {
  auto out = std::make_unique<PathSpace>();
  out->length = k;
  out->count = static_cast<std::size_t>(prev.child_offset.back());
  const std::size_t width = static_cast<std::size_t>(k + 1);
  out->vertices.resize(out->count * width);
  out->prefix.resize(out->count);
  out->suffix.resize(out->count);
  out->first_edge.resize(out->count);
  out->last_edge.resize(out->count);

  if (k == 1) {
    for (std::size_t e = 0; e < out->count; ++e) {
      out->vertices[2 * e] = tail_[e];
      out->vertices[2 * e + 1] = head_[e];
      out->prefix[e] = tail_[e];
      out->suffix[e] = head_[e];
      out->first_edge[e] = static_cast<PathIndex>(e);
      out->last_edge[e] = static_cast<PathIndex>(e);
    }
  } else {
    for (std::size_t p = 0; p < prev.count; ++p) {
      const auto last = static_cast<std::size_t>(prev.last_edge[p]);
      const auto succ = successors(last);
      const auto base = static_cast<std::size_t>(prev.child_offset[p]);
      const auto prev_path = prev.path(p);
      for (std::size_t t = 0; t < succ.size(); ++t) {
        const std::size_t i = base + t;
        std::copy(prev_path.begin(), prev_path.end(), out->vertices.begin() + static_cast<std::ptrdiff_t>(i * width));
        out->vertices[i * width + static_cast<std::size_t>(k)] = head_[succ[t]];
        out->prefix[i] = static_cast<PathIndex>(p);
        out->suffix[i] = k == 2 ? static_cast<PathIndex>(succ[t])
                                : prev2->child_offset[static_cast<std::size_t>(prev.suffix[p])] + static_cast<PathIndex>(t);
        out->first_edge[i] = prev.first_edge[p];
        out->last_edge[i] = static_cast<PathIndex>(succ[t]);
      }
    }
  }
  out->child_offset.resize(out->count + 1);
  out->child_offset[0] = 0;
  for (std::size_t i = 0; i < out->count; ++i) {
    const auto e = static_cast<std::size_t>(out->last_edge[i]);
    out->child_offset[i + 1] = out->child_offset[i] + static_cast<PathIndex>(succ_offset_[e + 1] - succ_offset_[e]);
  }
  return out;
}

const PathSpace& DirectedEdgeSpace::paths(int k) const {
  if (k < 0) throw PathSpaceError("path length must be nonnegative");
  std::lock_guard<std::mutex> lock(mutex_);
  while (static_cast<int>(grades_.size()) <= k) {
    const int j = static_cast<int>(grades_.size());
    const PathSpace& prev = *grades_.back();
    const auto n = static_cast<std::size_t>(prev.child_offset.back());
    if (n > path_cap_) {
      throw PathSpaceError("|B_" + std::to_string(j) + "| = " + std::to_string(n) + " exceeds the path cap " +
                           std::to_string(path_cap_));
    }
    const PathSpace* prev2 = j >= 2 ? grades_[static_cast<std::size_t>(j - 2)].get() : nullptr;
    grades_.push_back(build_grade(j, prev, prev2));
  }
  return *grades_[static_cast<std::size_t>(k)];
}

PathIndex DirectedEdgeSpace::index_of(std::span<const Vertex> path) const {
  if (path.empty()) throw PathSpaceError("empty path");
  const int k = static_cast<int>(path.size()) - 1;
  graph_->check_vertex(path[0]);
  if (k == 0) return path[0];
  auto idx = static_cast<PathIndex>(edge_index(path[0], path[1]));
  for (int j = 2; j <= k; ++j) {
    const Vertex a = path[static_cast<std::size_t>(j - 2)];
    const Vertex b = path[static_cast<std::size_t>(j - 1)];
    const Vertex c = path[static_cast<std::size_t>(j)];
    if (a == c) throw PathSpaceError("path backtracks at position " + std::to_string(j));
    const int rc = graph_->neighbour_rank(b, c);
    const int ra = graph_->neighbour_rank(b, a);
    const int t = rc - (ra < rc ? 1 : 0);
    idx = paths(j - 1).child_offset[static_cast<std::size_t>(idx)] + t;
  }
  return idx;
}

}  // namespace qelab
