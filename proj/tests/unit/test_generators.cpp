#include <doctest.h>

#include <map>

#include "qelab/generators.hpp"

using namespace qelab;

TEST_CASE("random regular basic contract") {
  const Graph g = random_regular(10, 3, 1);
  CHECK(g.size() == 10);
  for (Vertex x = 0; x < 10; ++x) CHECK(g.degree(x) == 3);
  CHECK(g.is_connected());
  CHECK(random_regular(10, 3, 1) == g);
  CHECK_THROWS_AS(random_regular(11, 3, 1), GeneratorError);
  CHECK_THROWS_AS(random_regular(4, 4, 1), GeneratorError);
  CHECK_THROWS_AS(random_regular(10, 2, 1), GeneratorError);
}

TEST_CASE("random lift covering invariants") {
  const Graph k4 = complete_graph(4);
  const Graph trivial = random_lift(k4, 1, 5);
  CHECK(trivial.size() == 4);
  CHECK(trivial.edge_count() == 6);
  const Graph g = random_lift(k4, 50, 3);
  CHECK(g.size() == 200);
  std::map<std::pair<int, int>, int> collapsed;
  for (Vertex x = 0; x < g.size(); ++x) {
    CHECK(g.degree(x) == 3);
    CHECK(g.colour(x) == x / 50);
    for (Vertex y : g.neighbours(x)) {
      CHECK(g.colour(x) != g.colour(y));
      ++collapsed[{g.colour(x), g.colour(y)}];
    }
  }
  for (const auto& [key, count] : collapsed) CHECK(count == 50);
  CHECK(collapsed.size() == 12);
}

TEST_CASE("random lift BST trend over seeds") {
  const Graph k4 = complete_graph(4);
  double small = 0.0, large = 0.0;
  for (std::uint64_t s = 0; s < 10; ++s) {
    small += bst_statistic(random_lift(k4, 20, 100 + s), 3);
    large += bst_statistic(random_lift(k4, 200, 100 + s), 3);
  }
  CHECK(large < small);
}

TEST_CASE("biregular construction") {
  const Graph g = biregular(3, 4, 8, 1);
  CHECK(g.size() == 14);
  int black = 0;
  for (Vertex x = 0; x < g.size(); ++x) {
    if (g.colour(x) == 0) {
      ++black;
      CHECK(g.degree(x) == 3);
    } else {
      CHECK(g.degree(x) == 4);
    }
  }
  CHECK(black == 8);
  CHECK(g.is_bipartite());
  CHECK_THROWS_AS(biregular(3, 4, 7, 1), GeneratorError);
  const Graph r = biregular(3, 3, 10, 2);
  CHECK(r.is_regular());
  CHECK(r.is_bipartite());
}

TEST_CASE("named graphs and generator dispatch") {
  CHECK(petersen_graph().is_regular());
  CHECK(cycle_graph(6).is_cycle());
  GeneratorSpec spec;
  spec.family = "random_lift";
  spec.base_family = "petersen";
  spec.n = 3;
  spec.seed = 9;
  CHECK(generate(spec).size() == 30);
  spec.family = "nonsense";
  CHECK_THROWS_AS(generate(spec), GeneratorError);
}
