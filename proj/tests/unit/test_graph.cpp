#include <doctest.h>

#include <cmath>
#include <sstream>

#include "qelab/generators.hpp"
#include "qelab/graph.hpp"
#include "qelab/paths.hpp"

using namespace qelab;

TEST_CASE("graph rejects loops, duplicates and bad endpoints") {
  std::vector<Edge> loop{{0, 0}};
  CHECK_THROWS_AS(Graph::from_edges(2, loop), GraphError);
  std::vector<Edge> dup{{0, 1}, {1, 0}};
  CHECK_THROWS_AS(Graph::from_edges(2, dup), GraphError);
  std::vector<Edge> range{{0, 5}};
  CHECK_THROWS_AS(Graph::from_edges(2, range), GraphError);
}

TEST_CASE("adjacency is symmetric and sorted") {
  const Graph g = petersen_graph();
  for (Vertex x = 0; x < g.size(); ++x) {
    const auto nb = g.neighbours(x);
    CHECK(std::is_sorted(nb.begin(), nb.end()));
    for (Vertex y : nb) CHECK(g.has_edge(y, x));
  }
  CHECK(g.edge_count() == 15);
}

TEST_CASE("injectivity radius golden values") {
  const Graph k4 = complete_graph(4);
  for (Vertex x = 0; x < 4; ++x) CHECK(injectivity_radius(k4, x, 10) == 1);
  const Graph c10 = cycle_graph(10);
  for (Vertex x = 0; x < 10; ++x) CHECK(injectivity_radius(c10, x, 10) == 4);
  const Graph c9 = cycle_graph(9);
  CHECK(injectivity_radius(c9, 0, 10) == 4);  // girth 9: floor((9 - 1) / 2)
  const Graph tree = path_graph(6);
  for (Vertex x = 0; x < 6; ++x) CHECK(injectivity_radius(tree, x, 7) == 7);
  CHECK(injectivity_radius(c10, 0, 2) == 2);
  CHECK_THROWS(injectivity_radius(c10, 12, 3));
}

// The ball B(x, r) holds the vertices at distance <= r and the edges with at
// least one endpoint at distance < r.
TEST_CASE("injectivity radius agrees with the ball edge count characterization") {
  const Graph g = random_regular(60, 3, 7);
  for (Vertex x = 0; x < g.size(); ++x) {
    const int rho = injectivity_radius(g, x, 8);
    for (int r = 0; r <= 8; ++r) {
      const auto dist = bfs_distances(g, x, r);
      std::size_t nv = 0, ne2 = 0;
      for (Vertex y = 0; y < g.size(); ++y) {
        if (dist[static_cast<std::size_t>(y)] < 0) continue;
        ++nv;
        for (Vertex z : g.neighbours(y)) {
          const int dz = dist[static_cast<std::size_t>(z)];
          if (dz >= 0 && std::min(dz, dist[static_cast<std::size_t>(y)]) < r) ++ne2;
        }
      }
      const bool tree = ne2 / 2 == nv - 1;
      CHECK(tree == (rho >= r));
    }
  }
}

TEST_CASE("bst statistic golden values") {
  const Graph c10 = cycle_graph(10);
  CHECK(bst_statistic(c10, 4) == 0.0);
  CHECK(bst_statistic(c10, 5) == 1.0);
  const Graph g = random_regular(1000, 3, 1);
  const double b = bst_statistic(g, 2);
  CHECK(b >= 0.0);
  CHECK(b <= 0.05);
  const auto rep = bst_report(g, 2);
  CHECK(rep.per_vertex_rho.size() == 1000);
  CHECK(rep.bad_fraction == doctest::Approx(b));
}

TEST_CASE("edge list round trip is bit exact") {
  const Graph g = random_regular(40, 3, 3);
  std::ostringstream out;
  write_edge_list(out, g);
  std::istringstream in(out.str());
  const Graph h = read_edge_list(in);
  CHECK(h == g);
  std::ostringstream again;
  write_edge_list(again, h);
  CHECK(again.str() == out.str());
}

TEST_CASE("edge list round trip with potential") {
  std::vector<double> w(40);
  for (int i = 0; i < 40; ++i) w[static_cast<std::size_t>(i)] = 0.1 * i - 1.0 / 3.0;
  const Graph g = random_regular(40, 3, 4).with_potential(w);
  std::ostringstream out;
  write_edge_list(out, g);
  std::istringstream in(out.str());
  const Graph h = read_edge_list(in);
  CHECK(h.has_potential());
  for (Vertex x = 0; x < 40; ++x) CHECK(h.potential(x) == g.potential(x));
  CHECK(h.neighbours(0).size() == 3);
}

TEST_CASE("edge list parser handles comments and rejects garbage") {
  std::istringstream in("# header\n0 1\n\n1 2 # trailing\n2 0\n");
  const Graph g = read_edge_list(in);
  CHECK(g.size() == 3);
  CHECK(g.edge_count() == 3);
  std::istringstream bad("0 x\n");
  CHECK_THROWS(read_edge_list(bad));
}

TEST_CASE("path space counts") {
  const auto k4 = std::make_shared<const Graph>(complete_graph(4));
  DirectedEdgeSpace d(k4);
  CHECK(d.edge_count() == 12);
  CHECK(d.paths(1).size() == 12);
  CHECK(d.paths(2).size() == 24);
  const auto c7 = std::make_shared<const Graph>(cycle_graph(7));
  DirectedEdgeSpace dc(c7);
  for (int k = 1; k <= 6; ++k) CHECK(dc.paths(k).size() == 14);
  const auto g = std::make_shared<const Graph>(random_regular(50, 4, 2));
  DirectedEdgeSpace dg(g);
  for (int k = 1; k <= 4; ++k) {
    CHECK(dg.paths(k).size() == static_cast<std::size_t>(50 * 4 * std::pow(3, k - 1)));
    CHECK(dg.predicted_size(k) == dg.paths(k).size());
  }
}

TEST_CASE("path space structure is consistent") {
  const auto g = std::make_shared<const Graph>(petersen_graph());
  DirectedEdgeSpace d(g);
  for (std::size_t e = 0; e < d.edge_count(); ++e) {
    CHECK(d.reverse(d.reverse(e)) == e);
    CHECK(d.reverse(e) != e);
    for (std::size_t s : d.successors(e)) {
      CHECK(d.tail(s) == d.head(e));
      CHECK(d.head(s) != d.tail(e));
    }
  }
  for (int k = 1; k <= 4; ++k) {
    const PathSpace& b = d.paths(k);
    for (std::size_t i = 0; i < b.size(); ++i) {
      const auto p = b.path(i);
      for (int t = 1; t <= k; ++t) CHECK(g->has_edge(p[static_cast<std::size_t>(t - 1)], p[static_cast<std::size_t>(t)]));
      for (int t = 2; t <= k; ++t) CHECK(p[static_cast<std::size_t>(t - 2)] != p[static_cast<std::size_t>(t)]);
      CHECK(d.index_of(p) == static_cast<PathIndex>(i));
      const auto pre = d.paths(k - 1).path(static_cast<std::size_t>(b.prefix[i]));
      const auto suf = d.paths(k - 1).path(static_cast<std::size_t>(b.suffix[i]));
      CHECK(std::equal(pre.begin(), pre.end(), p.begin()));
      CHECK(std::equal(suf.begin(), suf.end(), p.begin() + 1));
      CHECK(d.tail(static_cast<std::size_t>(b.first_edge[i])) == p[0]);
      CHECK(d.head(static_cast<std::size_t>(b.last_edge[i])) == p[static_cast<std::size_t>(k)]);
    }
  }
}

TEST_CASE("path cap guard") {
  const auto g = std::make_shared<const Graph>(random_regular(50, 4, 2));
  DirectedEdgeSpace d(g, 1000);
  CHECK_NOTHROW(d.paths(2));
  CHECK_THROWS_AS(d.paths(4), PathSpaceError);
}
