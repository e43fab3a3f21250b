#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "json.hpp"
#include "qelab/cli.hpp"

namespace qelab {

namespace {

using json = nlohmann::json;

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::vector<std::string> split_row(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  std::stringstream in(line);
  while (std::getline(in, cur, ',')) out.push_back(cur);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

std::string safe_name(std::string s) {
  for (char& c : s)
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '.' || c == '-' || c == '_' || c == '=')) c = '_';
  return s;
}

struct Cell {
  std::vector<std::string> key;                 // config_hash followed by group values
  std::vector<std::vector<double>> samples;     // per value column
};

struct Run {
  std::filesystem::path dir;
  json manifest;
};

std::vector<Run> find_runs(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw ExperimentError("report: " + dir.string() + " is not a directory");
  std::vector<std::filesystem::path> manifests;
  for (const auto& entry : std::filesystem::recursive_directory_iterator(dir))
    if (entry.is_regular_file() && entry.path().filename() == "manifest.json") manifests.push_back(entry.path());
  if (manifests.empty()) throw ExperimentError("report: missing manifest (no manifest.json below " + dir.string() + ")");
  std::sort(manifests.begin(), manifests.end());
  std::vector<Run> runs;
  for (const auto& m : manifests) {
    std::ifstream in(m);
    Run r;
    r.dir = m.parent_path();
    try {
      r.manifest = json::parse(in);
      const auto& agg = r.manifest.at("aggregate");
      (void)r.manifest.at("experiment").get<std::string>();
      (void)r.manifest.at("config_hash").get<std::string>();
      (void)agg.at("table").get<std::string>();
      (void)agg.at("group_by").get<std::vector<std::string>>();
      (void)agg.at("values").get<std::vector<std::string>>();
    } catch (const json::exception& e) {
      throw ExperimentError("report: corrupted manifest " + m.string() + ": " + e.what());
    }
    runs.push_back(std::move(r));
  }
  return runs;
}

}  // namespace

std::vector<std::vector<std::string>> read_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ExperimentError("cannot open " + path.string());
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    rows.push_back(split_row(line));
  }
  return rows;
}

std::string csv_body(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ExperimentError("cannot open " + path.string());
  std::string out;
  std::string line;
  while (std::getline(in, line))
    if (line.empty() || line[0] != '#') out += line + '\n';
  return out;
}

ReportResult report(const std::filesystem::path& dir) {
  const auto runs = find_runs(dir);
  const std::filesystem::path out_dir = dir / "report";
  std::filesystem::create_directories(out_dir / "plots");

  // Per experiment: group columns, value columns and the cells in first-seen order.
  struct Group {
    std::vector<std::string> group_by;
    std::vector<std::string> values;
    std::vector<Cell> cells;
    std::map<std::vector<std::string>, std::size_t> index;
  };
  std::map<std::string, Group> groups;

  for (const auto& run : runs) {
    const std::string experiment = run.manifest["experiment"];
    const auto& agg = run.manifest["aggregate"];
    const std::filesystem::path table = run.dir / agg["table"].get<std::string>();
    Group& g = groups[experiment];
    const auto group_by = agg["group_by"].get<std::vector<std::string>>();
    const auto values = agg["values"].get<std::vector<std::string>>();
    if (g.group_by.empty() && g.values.empty()) {
      g.group_by = group_by;
      g.values = values;
    } else if (g.group_by != group_by || g.values != values) {
      throw ExperimentError("report: " + (run.dir / "manifest.json").string() +
                            " uses a different aggregate layout for experiment " + experiment);
    }
    const auto rows = read_csv(table);
    if (rows.empty()) throw ExperimentError("report: empty table " + table.string());
    const auto& header = rows.front();
    auto column = [&](const std::string& name) {
      const auto it = std::find(header.begin(), header.end(), name);
      if (it == header.end()) throw ExperimentError("report: column '" + name + "' missing in " + table.string());
      return static_cast<std::size_t>(it - header.begin());
    };
    std::vector<std::size_t> gcol;
    for (const auto& c : g.group_by) gcol.push_back(column(c));
    std::vector<std::size_t> vcol;
    for (const auto& c : g.values) vcol.push_back(column(c));
    const std::size_t hcol = column("config_hash");
    for (std::size_t r = 1; r < rows.size(); ++r) {
      const auto& row = rows[r];
      if (row.size() != header.size()) throw ExperimentError("report: malformed row " + std::to_string(r) + " in " + table.string());
      std::vector<std::string> key{row[hcol]};
      for (std::size_t c : gcol) key.push_back(row[c]);
      auto [it, fresh] = g.index.emplace(key, g.cells.size());
      if (fresh) g.cells.push_back({key, std::vector<std::vector<double>>(vcol.size())});
      Cell& cell = g.cells[it->second];
      for (std::size_t v = 0; v < vcol.size(); ++v) cell.samples[v].push_back(std::stod(row[vcol[v]]));
    }
  }

  ReportResult result;
  for (const auto& [experiment, g] : groups) {
    const std::filesystem::path path = out_dir / (experiment + "_aggregate.csv");
    std::ofstream f(path);
    f << "config_hash";
    for (const auto& c : g.group_by) f << ',' << c;
    for (const auto& v : g.values) f << ',' << v << "_mean," << v << "_sd";
    f << ",count\n";
    // Plot series: x = first group column, one series per (hash, other group values, value column).
    std::map<std::string, std::vector<std::pair<std::string, double>>> series;
    std::vector<std::string> series_order;
    for (const auto& cell : g.cells) {
      f << cell.key[0];
      for (std::size_t k = 1; k < cell.key.size(); ++k) f << ',' << cell.key[k];
      for (std::size_t v = 0; v < g.values.size(); ++v) {
        const auto& s = cell.samples[v];
        double m = 0.0;
        for (double x : s) m += x;
        m /= static_cast<double>(s.size());
        double var = 0.0;
        for (double x : s) var += (x - m) * (x - m);
        const double sd = s.size() > 1 ? std::sqrt(var / static_cast<double>(s.size() - 1)) : 0.0;
        f << ',' << fmt(m) << ',' << fmt(sd);
        std::string name = experiment + "_" + cell.key[0].substr(0, 8) + "_" + g.values[v];
        for (std::size_t k = 2; k < cell.key.size(); ++k) name += "_" + g.group_by[k - 1] + "=" + cell.key[k];
        name = safe_name(name);
        if (!series.count(name)) series_order.push_back(name);
        series[name].push_back({cell.key.size() > 1 ? cell.key[1] : "0", m});
      }
      f << ',' << cell.samples.front().size() << '\n';
    }
    result.aggregates.push_back(path);
    for (const auto& name : series_order) {
      const std::filesystem::path p = out_dir / "plots" / (name + ".dat");
      std::ofstream pf(p);
      pf << "# x=" << g.group_by.front() << " y=mean\n";
      for (const auto& [x, y] : series[name]) pf << x << ' ' << fmt(y) << '\n';
      result.plots.push_back(p);
    }
  }
  return result;
}

}  // namespace qelab
