#include <cmath>
#include <complex>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "qelab/cli.hpp"
#include "qelab/variance.hpp"

using namespace qelab;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("qelab_cli_test_" + name);
  fs::remove_all(p);
  return p;
}

RunResult run_in(const std::string& text, const fs::path& dir, int threads = 1) {
  RunOptions opts;
  opts.output = dir;
  opts.threads = threads;
  return run_experiment(parse_config(text), opts);
}

const char* kConeSolve = R"(
[experiment]
name = cone-solve
[cone]
kind = regular
q = 2
[sweep]
lambda = -3:3:50
eta = 0.01
)";

const char* kQeRegular = R"(
[experiment]
name = qe-regular
[generator]
family = random_regular
degree = 3
[kernel]
kind = diagonal-indicator
[sweep]
N = 40, 60
seeds = 1, 2, 3
)";

}  // namespace

TEST_CASE("config parsing, lists and hashing") {
  const auto cfg = parse_config(R"(
; leading comment
[experiment]
name = cone-solve   ; trailing comment
[sweep]
lambda = 0:1:5
eta = 0.1, 0.01 # another comment
)");
  CHECK(cfg.experiment() == "cone-solve");
  CHECK(cfg.get_list("sweep.lambda") == std::vector<double>{0.0, 0.25, 0.5, 0.75, 1.0});
  CHECK(cfg.get_list("sweep.eta") == std::vector<double>{0.1, 0.01});
  CHECK(cfg.get_int("missing.key", 7) == 7);
  CHECK_THROWS_AS(cfg.get("missing.key"), ConfigError);

  // Layout and comments do not change the hash; values do.
  const auto same = parse_config("[sweep]\neta=0.1, 0.01\nlambda=0:1:5\n[experiment]\nname=cone-solve\n");
  CHECK(same.hash() == cfg.hash());
  CHECK(same.hash().size() == 64);
  const auto over = parse_config("[sweep]\neta=0.1, 0.01\nlambda=0:1:5\n[experiment]\nname=cone-solve\n", "<string>",
                                 {"sweep.eta=0.5"});
  CHECK(over.get_list("sweep.eta") == std::vector<double>{0.5});
  CHECK(over.hash() != cfg.hash());
  CHECK_THROWS_AS(parse_config("[a]\nb=1\n", "<string>", {"noequals"}), ConfigError);
  CHECK_THROWS_AS(parse_config("[a\nb=1\n"), ConfigError);
}

TEST_CASE("validation rejects bad configs before writing anything") {
  CHECK_THROWS_AS(validate_config(parse_config("[experiment]\nname = nope\n")), ConfigError);
  const std::string empty_sweep =
      "[experiment]\nname = qe-regular\n[generator]\nfamily = random_regular\n[sweep]\nN =\nseeds = 1\n";
  CHECK_THROWS_WITH_AS(validate_config(parse_config(empty_sweep)), doctest::Contains("empty"), ConfigError);
  const fs::path dir = fresh_dir("empty");
  CHECK_THROWS_AS(run_in(empty_sweep, dir), ConfigError);
  CHECK_FALSE(fs::exists(dir));
  CHECK_THROWS_AS(validate_config(parse_config("[experiment]\nname = cone-solve\n[cone]\nkind = regular\n[sweep]\n"
                                               "lambda = 0\neta = 0\n", "<string>", {"cone.q=2"})),
                  ConfigError);
  CHECK_THROWS_AS(validate_config(parse_config(kQeRegular, "<string>", {"generator.family=nope"})), ConfigError);
  CHECK_THROWS_AS(validate_config(parse_config(kQeRegular, "<string>", {"kernel.kind=nope"})), ConfigError);
  for (const auto& name : experiment_names()) CHECK_FALSE(name.empty());
}

TEST_CASE("cone-solve on the 3-regular tree matches the quadratic root") {
  const fs::path dir = fresh_dir("cone_solve");
  const RunResult r = run_in(kConeSolve, dir);
  const auto rows = read_csv(dir / "cone_solve.csv");
  REQUIRE(rows.size() == 1 + 50 * 2);
  CHECK(rows[0][0] == "config_hash");
  const std::string hash = parse_config(kConeSolve).hash();
  int checked = 0;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    CHECK(rows[i][0] == hash);
    if (rows[i][4] != "edge") continue;
    const std::complex<double> gamma(std::stod(rows[i][1]), std::stod(rows[i][2]));
    const std::complex<double> z(std::stod(rows[i][5]), std::stod(rows[i][6]));
    CHECK(std::abs(z - regular_tree_zeta(2, gamma)) < 1e-10);
    CHECK(std::stod(rows[i][7]) < 1e-12);
    ++checked;
  }
  CHECK(checked == 50);
  CHECK(fs::exists(dir / "manifest.json"));
  CHECK(fs::exists(dir / "cone.json"));
}

TEST_CASE("reruns reproduce byte-identical CSV bodies, independent of threads") {
  const fs::path a = fresh_dir("repro_a");
  const fs::path b = fresh_dir("repro_b");
  const RunResult ra = run_in(kQeRegular, a, 1);
  const RunResult rb = run_in(kQeRegular, b, 3);
  REQUIRE(ra.files == rb.files);
  for (const auto& f : ra.files) CHECK(csv_body(a / f) == csv_body(b / f));
}

TEST_CASE("report aggregates runs and rejects bad manifests") {
  const fs::path root = fresh_dir("report");
  run_in(kQeRegular, root / "multi");
  const auto rep = report(root);
  REQUIRE(rep.aggregates.size() == 1);
  const auto rows = read_csv(rep.aggregates.front());
  REQUIRE(rows.size() == 3);  // header + N = 40, 60
  CHECK(rows[0] == std::vector<std::string>{"config_hash", "N", "discrepancy_mean", "discrepancy_sd", "count"});
  // Mean and sample standard deviation of the three seeds.
  const auto raw = read_csv(root / "multi" / "qe_regular.csv");
  std::vector<double> v;
  for (std::size_t i = 1; i <= 3; ++i) v.push_back(std::stod(raw[i][3]));
  const double m = (v[0] + v[1] + v[2]) / 3.0;
  double var = 0.0;
  for (double x : v) var += (x - m) * (x - m);
  CHECK(std::stod(rows[1][2]) == doctest::Approx(m).epsilon(1e-14));
  CHECK(std::stod(rows[1][3]) == doctest::Approx(std::sqrt(var / 2.0)).epsilon(1e-12));
  CHECK(rows[1][4] == "3");
  CHECK(rep.plots.size() == 1);

  // A single-cell run gives one aggregated row.
  const fs::path single = fresh_dir("report_single");
  RunOptions opts;
  opts.output = single / "run";
  run_experiment(parse_config(kQeRegular, "<string>", {"sweep.N=40", "sweep.seeds=5"}), opts);
  CHECK(read_csv(report(single).aggregates.front()).size() == 2);

  const fs::path corrupt = fresh_dir("report_corrupt");
  fs::create_directories(corrupt / "bad");
  std::ofstream(corrupt / "bad" / "manifest.json") << "{\"experiment\": ";
  CHECK_THROWS_WITH_AS(report(corrupt), doctest::Contains("bad/manifest.json"), ExperimentError);

  const fs::path none = fresh_dir("report_none");
  fs::create_directories(none);
  CHECK_THROWS_WITH_AS(report(none), doctest::Contains("missing manifest"), ExperimentError);
}

TEST_CASE("output directory resolution") {
  auto cfg = parse_config(kConeSolve);
  RunOptions opts;
  opts.output = "/tmp/explicit";
  CHECK(resolve_output(cfg, opts) == fs::path("/tmp/explicit"));
  opts.output.clear();
  setenv("QELAB_OUTPUT_ROOT", "/tmp/qelab_root", 1);
  CHECK(resolve_output(cfg, opts) == fs::path("/tmp/qelab_root") / ("cone-solve-" + cfg.hash().substr(0, 8)));
  cfg.values["experiment.output"] = "named";
  CHECK(resolve_output(cfg, opts) == fs::path("/tmp/qelab_root/named"));
  unsetenv("QELAB_OUTPUT_ROOT");
}

TEST_CASE("failures name the stage") {
  const fs::path dir = fresh_dir("stage");
  CHECK_THROWS_WITH_AS(
      run_experiment(parse_config(kQeRegular, "<string>", {"sweep.N=7"}), RunOptions{dir, 1, true}),
      doctest::Contains("stage 'generator'"), ExperimentError);
}
