// Python bindings for qelab.
#include <pybind11/complex.h>
#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <sstream>

#include "qelab/anderson.hpp"
#include "qelab/cli.hpp"
#include "qelab/cone.hpp"
#include "qelab/generators.hpp"
#include "qelab/graph.hpp"
#include "qelab/kernels.hpp"
#include "qelab/spectral.hpp"
#include "qelab/variance.hpp"

namespace py = pybind11;
using namespace qelab;

namespace {

Graph graph_from_edges(int n, const std::vector<std::pair<int, int>>& edges) {
  std::vector<Edge> e;
  e.reserve(edges.size());
  for (const auto& [u, v] : edges) e.push_back({u, v});
  return Graph::from_edges(n, e);
}

std::vector<std::pair<int, int>> graph_edges(const Graph& g) {
  std::vector<std::pair<int, int>> out;
  for (const auto& e : g.edges()) out.emplace_back(e.u, e.v);
  return out;
}

py::dict spectrum_dict(const SpectrumReport& r) {
  py::dict d;
  d["lambda"] = r.lambda;
  d["min_im_zeta"] = r.min_im_zeta;
  d["in_spectrum"] = std::vector<bool>(r.in_spectrum.begin(), r.in_spectrum.end());
  d["unreliable"] = std::vector<bool>(r.unreliable.begin(), r.unreliable.end());
  std::vector<std::pair<double, double>> iv;
  for (const auto& x : r.intervals) iv.emplace_back(x.lo, x.hi);
  d["intervals"] = iv;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Quantum ergodicity experiments on graphs and trees of finite cone type";

  py::register_exception<GraphError>(m, "GraphError", PyExc_ValueError);
  py::register_exception<GeneratorError>(m, "GeneratorError", PyExc_ValueError);
  py::register_exception<ConeError>(m, "ConeError", PyExc_RuntimeError);
  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<ExperimentError>(m, "ExperimentError", PyExc_RuntimeError);

  // ---- graphs ----
  py::class_<Graph>(m, "Graph")
      .def(py::init(&graph_from_edges), py::arg("n"), py::arg("edges"))
      .def_property_readonly("size", &Graph::size)
      .def("__len__", &Graph::size)
      .def("edges", &graph_edges)
      .def("degree", &Graph::degree)
      .def("neighbours", [](const Graph& g, int x) {
        const auto s = g.neighbours(x);
        return std::vector<int>(s.begin(), s.end());
      })
      .def("is_regular", &Graph::is_regular)
      .def("is_connected", &Graph::is_connected)
      .def("is_bipartite", &Graph::is_bipartite)
      .def("potentials", [](const Graph& g) {
        const auto s = g.potentials();
        return std::vector<double>(s.begin(), s.end());
      })
      .def("with_potential", &Graph::with_potential)
      .def("__repr__", [](const Graph& g) {
        return "<qelab.Graph n=" + std::to_string(g.size()) + " edges=" + std::to_string(g.edge_count()) + ">";
      });

  m.def("random_regular", [](int n, int d, std::uint64_t seed) { return random_regular(n, d, seed); },
        py::arg("n"), py::arg("degree"), py::arg("seed"));
  m.def("random_lift", [](const Graph& base, int n, std::uint64_t seed) { return random_lift(base, n, seed); },
        py::arg("base"), py::arg("n"), py::arg("seed"));
  m.def("biregular", [](int p1, int q1, int n_black, std::uint64_t seed) { return biregular(p1, q1, n_black, seed); },
        py::arg("p1"), py::arg("q1"), py::arg("n_black"), py::arg("seed"));
  m.def("cycle_graph", &cycle_graph);
  m.def("complete_graph", &complete_graph);
  m.def("petersen_graph", &petersen_graph);
  m.def("injectivity_radius", &injectivity_radius, py::arg("graph"), py::arg("x"), py::arg("cap"));
  m.def("bst_statistic", &bst_statistic, py::arg("graph"), py::arg("r"));

  // ---- spectra ----
  m.def("eigensystem", [](const Graph& g) {
    const EigenSystem es = eigensystem(g);
    return py::make_tuple(es.values, es.vectors);
  }, py::arg("graph"), "Ascending eigenvalues and eigenvector columns of A + W.");
  m.def("walk_spectral_gap", [](const Graph& g) { return walk_spectral_gap(g).beta; }, py::arg("graph"));
  m.def("rho_p_bound", &rho_p_bound, py::arg("graph"));
  m.def("spherical_phi", &spherical_phi, py::arg("q"), py::arg("lam"), py::arg("r"));
  m.def("spherical_matrix", &spherical_matrix, py::arg("graph"), py::arg("k"));
  m.def("qe_discrepancy", [](const Graph& g, std::uint64_t kernel_seed) {
    return qe_discrepancy_value(eigensystem(g), g, centered_half_set(g, kernel_seed));
  }, py::arg("graph"), py::arg("kernel_seed"),
        "Discrepancy of the centered half-set indicator on a regular graph.");

  // ---- cone systems ----
  py::class_<ConeSystem>(m, "ConeSystem")
      .def_readonly("labels", &ConeSystem::labels)
      .def_readonly("potential", &ConeSystem::potential)
      .def_readonly("root_labels", &ConeSystem::root_labels)
      .def_readonly("root_measure", &ConeSystem::root_measure)
      .def("dense", &ConeSystem::dense)
      .def("__len__", &ConeSystem::size)
      .def("to_json", [](const ConeSystem& c) {
        std::ostringstream s;
        write_cone_json(s, c);
        return s.str();
      })
      .def_static("from_json", [](const std::string& text) {
        std::istringstream s(text);
        return read_cone_json(s);
      });
  m.def("regular_tree_cone", &regular_tree_cone, py::arg("q"));
  m.def("neighbour_to_cone", &neighbour_to_cone, py::arg("matrix"), py::arg("root_colour") = -1);
  m.def("cover_cone_matrix", &cover_cone_matrix, py::arg("graph"), py::arg("root") = -1);
  m.def("reduce_cone_system", &reduce_cone_system);
  m.def("check_c1", [](const ConeSystem& c) { return check_c1(c).holds; });
  m.def("check_c2", [](const ConeSystem& c) { return check_c2(c).holds; });
  m.def("solve_green", [](const ConeSystem& c, Complex gamma) {
    const GreenState st = solve_green(c, gamma);
    return py::make_tuple(st.zeta, st.residual);
  }, py::arg("cone"), py::arg("gamma"), "zeta per label and the residual of the fixed-point system.");
  m.def("detect_spectrum", [](const ConeSystem& c, const std::vector<double>& grid, double eta, double thr) {
    return spectrum_dict(detect_spectrum(c, grid, eta, thr));
  }, py::arg("cone"), py::arg("grid"), py::arg("eta_final") = kDefaultEtaFinal,
        py::arg("threshold") = kDefaultDetectThreshold);
  m.def("regular_tree_zeta", &regular_tree_zeta, py::arg("q"), py::arg("gamma"));

  // ---- Anderson model ----
  m.def("inverse_moment", [](int q, const std::string& law, double eps, Complex gamma, double s, int pool_size,
                             int generations, std::uint64_t seed) {
    PoolParams p;
    p.pool_size = pool_size;
    p.generations = generations;
    p.burn_in = std::min(generations, p.burn_in);
    p.seed = seed;
    const auto pop = zeta_population(q, PotentialLaw::parse(law), eps, gamma, p);
    const auto est = inverse_moment(pop, s);
    return py::make_tuple(est.value, est.half_width);
  }, py::arg("q"), py::arg("law"), py::arg("epsilon"), py::arg("gamma"), py::arg("s"), py::arg("pool_size") = 10000,
        py::arg("generations") = 200, py::arg("seed") = 1,
        "Population-dynamics estimate of E |Im zeta|^-s on the (q+1)-regular tree and its bootstrap half-width.");

  // ---- experiments ----
  m.def("validate_config", [](const std::string& text, const std::vector<std::string>& overrides) {
    const auto cfg = parse_config(text, "<string>", overrides);
    validate_config(cfg);
    return cfg.hash();
  }, py::arg("text"), py::arg("overrides") = std::vector<std::string>{});
  m.def("run", [](const std::string& text, const std::filesystem::path& output, int threads,
                  const std::vector<std::string>& overrides) {
    RunOptions opts;
    opts.output = output;
    opts.threads = threads;
    const auto r = run_experiment(parse_config(text, "<string>", overrides), opts);
    return py::make_tuple(r.directory, r.files);
  }, py::arg("text"), py::arg("output"), py::arg("threads") = 1,
        py::arg("overrides") = std::vector<std::string>{}, "Runs a config given as text; returns (dir, files).");
  m.def("report", [](const std::filesystem::path& dir) { return report(dir).aggregates; }, py::arg("dir"));
  m.attr("experiment_names") = experiment_names();
}
