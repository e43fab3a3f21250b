// Seeded graph families: random regular graphs, random lifts, biregular
// graphs and small named graphs.
#pragma once

#include <cstdint>
#include <string>

#include "qelab/graph.hpp"

namespace qelab {

class GeneratorError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

constexpr int kDefaultResampleBudget = 10000;

// Uniform simple connected d-regular graph on n vertices (configuration model
// with rejection of loops, repeated edges and disconnected samples).
Graph random_regular(int n, int d, std::uint64_t seed, int budget = kDefaultResampleBudget);

// Random n-lift of a connected base graph: vertex (u, i) has index u * n + i
// and every base edge becomes a uniformly random perfect matching between the
// two fibres. Colours record the base vertex; a base potential is lifted.
Graph random_lift(const Graph& base, int n, std::uint64_t seed, int budget = kDefaultResampleBudget);

// Connected bipartite graph whose n_black black vertices (indices first,
// colour 0) have degree p1 and whose white vertices (colour 1) have degree q1.
Graph biregular(int p1, int q1, int n_black, std::uint64_t seed, int budget = kDefaultResampleBudget);

Graph cycle_graph(int n);
Graph path_graph(int n);
Graph complete_graph(int n);
Graph complete_bipartite_graph(int a, int b);
Graph petersen_graph();

struct GeneratorSpec {
  std::string family = "random_regular";  // random_regular | random_lift | biregular | cycle | complete | petersen | from_file
  int n = 0;                               // size (random_regular, cycle, complete) or lift order (random_lift)
  int degree = 3;
  int p1 = 3;
  int q1 = 4;
  int n_black = 0;
  std::string base_file;                   // random_lift and from_file
  std::string base_family;                 // random_lift alternative to base_file: complete:4 | petersen
  std::uint64_t seed = 0;
};

Graph generate(const GeneratorSpec& spec);

}  // namespace qelab
