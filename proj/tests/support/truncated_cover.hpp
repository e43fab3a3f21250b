// Independent oracle for Green functions on universal covers: builds the ball of
// radius `depth` around a lift of `root` explicitly and solves (H - gamma) u = delta_root
// with a general sparse LU factorization (no use of the tree recursion).
#pragma once

#include <Eigen/SparseCore>
#include <Eigen/SparseLU>
#include <complex>
#include <span>
#include <stdexcept>
#include <vector>

#include "qelab/graph.hpp"

namespace qelab::testing {

struct TruncatedCover {
  std::vector<Vertex> base;    // base vertex of each node
  std::vector<int> parent;     // -1 for the root
  std::vector<std::vector<int>> children;
  Eigen::VectorXcd column;     // G(root, node)

  // Node reached from the root by following the base-vertex sequence path[1..].
  int node(std::span<const Vertex> path) const {
    if (path.empty() || path[0] != base[0]) throw std::invalid_argument("path does not start at the root");
    int cur = 0;
    for (std::size_t i = 1; i < path.size(); ++i) {
      int next = -1;
      for (int c : children[static_cast<std::size_t>(cur)])
        if (base[static_cast<std::size_t>(c)] == path[i]) next = c;
      if (next < 0) throw std::invalid_argument("path leaves the truncated ball or backtracks");
      cur = next;
    }
    return cur;
  }
  std::complex<double> green(std::span<const Vertex> path) const { return column(node(path)); }
};

inline TruncatedCover truncated_cover(const Graph& g, Vertex root, int depth, std::complex<double> gamma) {
  TruncatedCover t;
  std::vector<int> level;
  t.base.push_back(root);
  t.parent.push_back(-1);
  t.children.emplace_back();
  level.push_back(0);
  for (std::size_t i = 0; i < t.base.size(); ++i) {
    if (level[i] == depth) continue;
    const Vertex from = t.parent[i] < 0 ? -1 : t.base[static_cast<std::size_t>(t.parent[i])];
    for (Vertex u : g.neighbours(t.base[i])) {
      if (u == from) continue;
      const int id = static_cast<int>(t.base.size());
      t.base.push_back(u);
      t.parent.push_back(static_cast<int>(i));
      t.children.emplace_back();
      t.children[i].push_back(id);
      level.push_back(level[i] + 1);
    }
  }
  const auto n = static_cast<Eigen::Index>(t.base.size());
  std::vector<Eigen::Triplet<std::complex<double>>> trip;
  trip.reserve(static_cast<std::size_t>(3 * n));
  for (Eigen::Index i = 0; i < n; ++i) {
    trip.emplace_back(i, i, g.potential(t.base[static_cast<std::size_t>(i)]) - gamma);
    const int p = t.parent[static_cast<std::size_t>(i)];
    if (p >= 0) {
      trip.emplace_back(i, p, 1.0);
      trip.emplace_back(p, i, 1.0);
    }
  }
  Eigen::SparseMatrix<std::complex<double>> h(n, n);
  h.setFromTriplets(trip.begin(), trip.end());
  h.makeCompressed();
  Eigen::SparseLU<Eigen::SparseMatrix<std::complex<double>>, Eigen::COLAMDOrdering<int>> lu;
  lu.compute(h);
  if (lu.info() != Eigen::Success) throw std::runtime_error("truncated cover: factorization failed");
  Eigen::VectorXcd rhs = Eigen::VectorXcd::Zero(n);
  rhs(0) = 1.0;
  t.column = lu.solve(rhs);
  return t;
}

}  // namespace qelab::testing
