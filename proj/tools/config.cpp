#include <openssl/evp.h>

#include <algorithm>
#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "qelab/cli.hpp"

namespace qelab {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, sep)) out.push_back(trim(cur));
  return out;
}

double to_double(const std::string& key, const std::string& text) {
  try {
    std::size_t used = 0;
    const double v = std::stod(text, &used);
    if (used != text.size()) throw std::invalid_argument("trailing");
    return v;
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "': expected a number, got '" + text + "'");
  }
}

int to_int(const std::string& key, const std::string& text) {
  const double v = to_double(key, text);
  if (v != std::floor(v) || std::abs(v) > 2e9) throw ConfigError("config key '" + key + "': expected an integer, got '" + text + "'");
  return static_cast<int>(v);
}

// Strips inline comments introduced by ';' or '#' preceded by whitespace.
std::string strip_inline_comments(const std::string& text) {
  std::ostringstream out;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    for (std::size_t i = 1; i < line.size(); ++i)
      if ((line[i] == ';' || line[i] == '#') && (line[i - 1] == ' ' || line[i - 1] == '\t')) {
        line = line.substr(0, i);
        break;
      }
    out << line << '\n';
  }
  return out.str();
}

}  // namespace

std::string ExperimentConfig::experiment() const { return get("experiment.name"); }

std::string ExperimentConfig::get(const std::string& key) const {
  const auto it = values.find(key);
  if (it == values.end()) throw ConfigError(source + ": missing required key '" + key + "'");
  return it->second;
}

std::string ExperimentConfig::get(const std::string& key, const std::string& fallback) const {
  const auto it = values.find(key);
  return it == values.end() ? fallback : it->second;
}

int ExperimentConfig::get_int(const std::string& key) const { return to_int(key, get(key)); }
int ExperimentConfig::get_int(const std::string& key, int fallback) const {
  return has(key) ? get_int(key) : fallback;
}
double ExperimentConfig::get_double(const std::string& key) const { return to_double(key, get(key)); }
double ExperimentConfig::get_double(const std::string& key, double fallback) const {
  return has(key) ? get_double(key) : fallback;
}

std::vector<double> ExperimentConfig::get_list(const std::string& key) const {
  const std::string text = get(key);
  std::vector<double> out;
  if (text.find(':') != std::string::npos) {
    const auto parts = split(text, ':');
    if (parts.size() != 3) throw ConfigError("config key '" + key + "': grid must be lo:hi:count");
    const double lo = to_double(key, parts[0]);
    const double hi = to_double(key, parts[1]);
    const int n = to_int(key, parts[2]);
    if (n < 1) throw ConfigError("config key '" + key + "': grid needs count >= 1");
    if (n == 1) return {lo};
    for (int i = 0; i < n; ++i) out.push_back(lo + (hi - lo) * i / (n - 1));
    return out;
  }
  for (const auto& item : split(text, ','))
    if (!item.empty()) out.push_back(to_double(key, item));
  if (out.empty()) throw ConfigError(source + ": sweep list '" + key + "' is empty");
  return out;
}

std::vector<int> ExperimentConfig::get_int_list(const std::string& key) const {
  std::vector<int> out;
  for (double v : get_list(key)) {
    if (v != std::floor(v)) throw ConfigError("config key '" + key + "': expected integers");
    out.push_back(static_cast<int>(v));
  }
  return out;
}

std::string ExperimentConfig::canonical() const {
  std::ostringstream out;
  for (const auto& [k, v] : values) out << k << '=' << v << '\n';
  return out.str();
}

std::string ExperimentConfig::hash() const {
  const std::string text = canonical();
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_Digest(text.data(), text.size(), digest, &len, EVP_sha256(), nullptr);
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(hex[digest[i] >> 4]);
    out.push_back(hex[digest[i] & 15]);
  }
  return out;
}

ExperimentConfig parse_config(const std::string& text, const std::string& source,
                              const std::vector<std::string>& overrides) {
  ExperimentConfig cfg;
  cfg.source = source;
  boost::property_tree::ptree tree;
  std::istringstream in(strip_inline_comments(text));
  try {
    boost::property_tree::ini_parser::read_ini(in, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw ConfigError(source + ": config parse error at line " + std::to_string(e.line()) + ": " + e.message());
  }
  for (const auto& [section, body] : tree) {
    if (body.empty()) throw ConfigError(source + ": key '" + section + "' outside a [section]");
    for (const auto& [key, value] : body) cfg.values[section + "." + key] = trim(value.data());
  }
  for (const auto& o : overrides) {
    const auto eq = o.find('=');
    if (eq == std::string::npos || o.substr(0, eq).find('.') == std::string::npos)
      throw ConfigError("override '" + o + "' must look like section.key=value");
    cfg.values[trim(o.substr(0, eq))] = trim(o.substr(eq + 1));
  }
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path, const std::vector<std::string>& overrides) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str(), path.string(), overrides);
}

namespace {

void require_keys(const ExperimentConfig& cfg, std::initializer_list<const char*> keys) {
  for (const char* k : keys) (void)cfg.get(k);
}

void require_lists(const ExperimentConfig& cfg, std::initializer_list<const char*> keys) {
  for (const char* k : keys) (void)cfg.get_list(k);
}

void check_generator(const ExperimentConfig& cfg) {
  static const std::set<std::string> families{"random_regular", "random_lift", "biregular", "cycle",
                                              "complete",       "petersen",    "from_file"};
  const std::string family = cfg.get("generator.family");
  if (!families.count(family)) throw ConfigError(cfg.source + ": unknown generator.family '" + family + "'");
  if (family == "random_lift" && !cfg.has("generator.base_family") && !cfg.has("generator.base_file"))
    throw ConfigError(cfg.source + ": random_lift needs generator.base_family or generator.base_file");
}

void check_cone(const ExperimentConfig& cfg) {
  const std::string kind = cfg.get("cone.kind");
  if (kind == "regular") {
    if (cfg.get_int("cone.q") < 1) throw ConfigError("cone.q must be >= 1");
  } else if (kind == "neighbour") {
    require_keys(cfg, {"cone.matrix"});
  } else if (kind == "cover") {
    check_generator(cfg);
  } else if (kind == "file") {
    require_keys(cfg, {"cone.file"});
  } else {
    throw ConfigError("cone.kind must be one of regular, neighbour, cover, file");
  }
}

void check_kernel(const ExperimentConfig& cfg) {
  const std::string kind = cfg.get("kernel.kind", "diagonal-indicator");
  static const std::set<std::string> kinds{"diagonal-indicator", "random-bounded", "nearest-neighbour"};
  if (!kinds.count(kind)) throw ConfigError("kernel.kind must be diagonal-indicator, random-bounded or nearest-neighbour");
  if (cfg.get_int("kernel.range", 0) < 0) throw ConfigError("kernel.range must be >= 0");
}

}  // namespace

void validate_config(const ExperimentConfig& cfg) {
  const std::string name = cfg.experiment();
  const auto& names = experiment_names();
  if (std::find(names.begin(), names.end(), name) == names.end())
    throw ConfigError(cfg.source + ": unknown experiment '" + name + "'");
  if (name == "qe-regular") {
    check_generator(cfg);
    require_lists(cfg, {"sweep.N", "sweep.seeds"});
    check_kernel(cfg);
  } else if (name == "qe-anderson") {
    check_generator(cfg);
    require_keys(cfg, {"anderson.law", "anderson.interval"});
    require_lists(cfg, {"sweep.N", "sweep.seeds", "sweep.eta0", "sweep.epsilon"});
    check_kernel(cfg);
    for (double e : cfg.get_list("sweep.eta0"))
      if (e <= 0.0) throw ConfigError("sweep.eta0 values must be positive");
  } else if (name == "cone-solve") {
    check_cone(cfg);
    require_lists(cfg, {"sweep.lambda", "sweep.eta"});
    for (double e : cfg.get_list("sweep.eta"))
      if (e <= 0.0) throw ConfigError("sweep.eta values must be positive");
  } else if (name == "cone-spectrum") {
    check_cone(cfg);
    require_lists(cfg, {"sweep.lambda"});
  } else if (name == "green-moments") {
    check_cone(cfg);
    require_lists(cfg, {"sweep.lambda", "sweep.eta", "sweep.s"});
  } else if (name == "sigma-ac") {
    check_cone(cfg);
    require_keys(cfg, {"anderson.law"});
    require_lists(cfg, {"sweep.lambda", "sweep.eta", "sweep.epsilon", "sweep.delta"});
    for (double dl : cfg.get_list("sweep.delta"))
      if (dl <= 0.0 || dl >= 1.0) throw ConfigError("sweep.delta values must lie in (0, 1)");
  } else if (name == "biregular-weights") {
    require_keys(cfg, {"biregular.p", "biregular.q"});
    require_lists(cfg, {"sweep.N", "sweep.seeds", "sweep.lambda", "sweep.eta"});
  } else if (name == "diagnostics") {
    check_generator(cfg);
    require_lists(cfg, {"sweep.N", "sweep.seeds"});
  }
}

}  // namespace qelab
