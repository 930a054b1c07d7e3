#include "config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace pagkit::cli {
namespace {

using nlohmann::json;

[[noreturn]] void invalid(const std::string& what) {
  throw CliError(kExitModelInvalid, "config: " + what);
}

Matrix read_matrix(const json& node, const std::string& name) {
  if (!node.is_array() || node.empty()) invalid(name + " must be a non-empty array of rows");
  const auto rows = static_cast<Eigen::Index>(node.size());
  const auto cols = static_cast<Eigen::Index>(node[0].is_array() ? node[0].size() : 0);
  if (cols == 0) invalid(name + " rows must be non-empty arrays");
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    const auto& row = node[static_cast<std::size_t>(i)];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols) {
      invalid(name + " rows must all have the same length");
    }
    for (Eigen::Index j = 0; j < cols; ++j) {
      const auto& v = row[static_cast<std::size_t>(j)];
      if (!v.is_number()) invalid(name + " entries must be numbers");
      m(i, j) = v.get<double>();
    }
  }
  return m;
}

double number(const json& node, const std::string& name) {
  if (!node.is_number()) invalid(name + " must be a number");
  return node.get<double>();
}

Structure parse_structure(const std::string& s) {
  if (s == "general") return Structure::kGeneral;
  if (s == "output-lurie") return Structure::kOutputLurie;
  invalid("unknown structure '" + s + "'");
}

std::vector<double> parse_periods(const json& node) {
  std::vector<double> out;
  if (node.is_array()) {
    for (const auto& v : node) out.push_back(number(v, "periods[]"));
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
  } else if (node.is_object()) {
    const double lo = number(node.at("min"), "periods.min");
    const double hi = number(node.at("max"), "periods.max");
    const int count = node.at("count").get<int>();
    if (count < 2) invalid("periods.count must be >= 2");
    if (!(hi > lo)) invalid("periods.max must exceed periods.min");
    if (!(lo > 0.0)) invalid("periods.min must be positive");
    const double step = std::log(hi / lo) / (count - 1);
    for (int i = 0; i < count; ++i) out.push_back(lo * std::exp(step * i));
    out.back() = hi;
  } else {
    invalid("periods must be a list or {min, max, count}");
  }
  if (out.empty()) invalid("periods must not be empty");
  if (!(out.front() > 0.0)) invalid("periods must be positive");
  return out;
}

void parse_system(const json& node, RunConfig& cfg) {
  const double u_max = cfg.raw.contains("u_max") ? number(cfg.raw["u_max"], "u_max")
                                                 : std::numeric_limits<double>::infinity();
  try {
    if (node.contains("builtin")) {
      const auto name = node["builtin"].get<std::string>();
      if (name != "pll") invalid("unknown builtin system '" + name + "'");
      PllParams params;
      if (node.contains("zeta")) params.zeta = number(node["zeta"], "system.zeta");
      if (node.contains("omega_c")) params.omega_c = number(node["omega_c"], "system.omega_c");
      cfg.pll = params;
      cfg.system = pll_system(params, cfg.m_f.value_or(0.0), u_max);
      return;
    }
    const Matrix a = read_matrix(node.at("A"), "A");
    const Matrix b = read_matrix(node.at("B"), "B");
    const Matrix c = read_matrix(node.at("C"), "C");
    const Matrix f = node.contains("F") ? read_matrix(node["F"], "F") : Matrix();
    Nonlinearity nl;
    nl.name = node.value("nonlinearity", std::string("none"));
    if (node.contains("params")) nl.params = node["params"].get<std::vector<double>>();
    const Structure structure = parse_structure(node.value("structure", std::string("general")));
    cfg.system = NonlinearSystem(StateSpace(a, b, c, f), nl, cfg.m_f.value_or(0.0), cfg.m_g,
                                 structure, u_max);
  } catch (const json::exception& e) {
    invalid(std::string("system: ") + e.what());
  } catch (const Error& e) {
    invalid(e.what());
  }
}

void parse_b_table(const json& node, RunConfig& cfg) {
  if (!node.is_object()) invalid("b_table must map level strings to numbers");
  const json& table = node.contains("b") && node["b"].is_object() ? node["b"] : node;
  for (const auto& [key, value] : table.items()) {
    if (key == "heuristic" || key == "_meta") continue;
    double level = 0.0;
    const auto res = std::from_chars(key.data(), key.data() + key.size(), level);
    if (res.ec != std::errc() || res.ptr != key.data() + key.size()) {
      invalid("b_table key '" + key + "' is not a number");
    }
    cfg.b_table[level] = number(value, "b_table[" + key + "]");
  }
  cfg.b_heuristic = cfg.b_heuristic || node.value("heuristic", false);
  double previous = 0.0;
  for (const auto& [level, b] : cfg.b_table) {
    if (!(b >= previous)) invalid("b_table must be non-decreasing in the level");
    previous = b;
  }
}

}  // namespace

std::uint64_t fnv1a64(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string composition_name(Composition c) {
  switch (c) {
    case Composition::kPureAc: return "pure_ac";
    case Composition::kSplit: return "split";
    case Composition::kPureDc: return "pure_dc";
  }
  return "unknown";
}

Composition parse_composition(const std::string& name) {
  if (name == "pure_ac") return Composition::kPureAc;
  if (name == "split") return Composition::kSplit;
  if (name == "pure_dc") return Composition::kPureDc;
  invalid("unknown composition '" + name + "'");
}

std::string level_key(double level) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), level);
  return std::string(buf, res.ptr);
}

double lookup_b(const RunConfig& cfg, double level) {
  for (const auto& [key, b] : cfg.b_table) {
    if (std::abs(key - level) <= 1e-12 * std::max(1.0, std::abs(level))) return b;
  }
  throw CliError(kExitMissingPrerequisite,
                 "b-required (supply table or run estimate-b) for level " + level_key(level));
}

RunConfig parse_config(const json& doc, const Overrides& overrides,
                       const std::filesystem::path& base_dir) {
  if (!doc.is_object()) invalid("top level must be an object");
  RunConfig cfg;
  cfg.raw = doc;
  try {
    if (doc.contains("M_f")) {
      const auto& mf = doc["M_f"];
      if (mf.is_string()) {
        if (mf.get<std::string>() != "estimate") invalid("M_f must be a number or \"estimate\"");
      } else {
        cfg.m_f = number(mf, "M_f");
      }
    } else {
      cfg.m_f = 0.0;
    }
    if (doc.contains("M_g")) cfg.m_g = number(doc["M_g"], "M_g");
    if (!doc.contains("system")) invalid("missing 'system'");
    parse_system(doc["system"], cfg);

    const auto channel = doc.value("channel", std::string("u"));
    if (channel == "u") {
      cfg.channel = InputChannel::kInput;
    } else if (channel == "f") {
      cfg.channel = InputChannel::kNonlinearity;
    } else {
      invalid("channel must be \"u\" or \"f\"");
    }

    if (doc.contains("periods")) cfg.periods = parse_periods(doc["periods"]);
    cfg.grid_n = doc.value("N", static_cast<Eigen::Index>(4096));
    if (doc.contains("levels")) {
      for (const auto& v : doc["levels"]) cfg.levels.push_back(number(v, "levels[]"));
      std::sort(cfg.levels.begin(), cfg.levels.end());
      cfg.levels.erase(std::unique(cfg.levels.begin(), cfg.levels.end()), cfg.levels.end());
    }
    for (const double level : cfg.levels) {
      if (!(level > 0.0)) invalid("levels must be positive");
      if (!(level < cfg.system.u_max)) invalid("levels must stay below u_max");
    }
    if (doc.contains("compositions")) {
      cfg.compositions.clear();
      for (const auto& v : doc["compositions"]) {
        cfg.compositions.push_back(parse_composition(v.get<std::string>()));
      }
    }
    if (doc.contains("b_table")) parse_b_table(doc["b_table"], cfg);
    if (doc.contains("b_table_file")) {
      auto path = std::filesystem::path(doc["b_table_file"].get<std::string>());
      if (path.is_relative()) path = base_dir / path;
      std::ifstream in(path);
      if (!in) {
        throw CliError(kExitMissingPrerequisite, "b-required: cannot read " + path.string());
      }
      parse_b_table(json::parse(in), cfg);
    }
    cfg.seed = doc.value("seed", static_cast<std::uint64_t>(0));
    cfg.trials = doc.value("trials", 200);
    cfg.harmonics = doc.value("harmonics", 5);
    const auto waveforms = doc.value("waveforms", std::string("bangbang"));
    if (waveforms == "none") {
      cfg.waveforms = WaveformMode::kNone;
    } else if (waveforms == "bangbang") {
      cfg.waveforms = WaveformMode::kBangBang;
    } else if (waveforms == "all") {
      cfg.waveforms = WaveformMode::kAll;
    } else {
      invalid("waveforms must be none, bangbang or all");
    }
    cfg.waveform_decimation = doc.value("waveform_decimation", 1);
    cfg.violation_rtol = doc.value("violation_rtol", 0.0);
    if (doc.contains("pss")) {
      cfg.pss.tol = doc["pss"].value("tol", cfg.pss.tol);
      cfg.pss.max_periods = doc["pss"].value("max_periods", cfg.pss.max_periods);
    }
    if (doc.contains("estimate_b")) {
      const auto& eb = doc["estimate_b"];
      cfg.b_trials = eb.value("trials", cfg.b_trials);
      cfg.b_safety = eb.value("safety", cfg.b_safety);
      if (eb.contains("periods")) cfg.b_periods = parse_periods(eb["periods"]);
    }
  } catch (const json::exception& e) {
    invalid(e.what());
  }
  if (overrides.seed) cfg.seed = *overrides.seed;
  if (overrides.grid_n) cfg.grid_n = *overrides.grid_n;
  if (cfg.b_periods.empty()) cfg.b_periods = cfg.periods;

  if (cfg.grid_n < 2) invalid("N must be >= 2");
  if (cfg.trials < 0 || cfg.harmonics < 1 || cfg.waveform_decimation < 1 || cfg.b_trials < 0) {
    invalid("trials, harmonics, waveform_decimation and estimate_b.trials must be sensible");
  }
  if (!(cfg.violation_rtol >= 0.0)) invalid("violation_rtol must be nonnegative");
  if (!(cfg.b_safety >= 1.0)) invalid("estimate_b.safety must be >= 1");

  char hex[17];
  std::snprintf(hex, sizeof(hex), "%016llx",
                static_cast<unsigned long long>(fnv1a64(doc.dump())));
  cfg.config_hash = hex;
  return cfg;
}

RunConfig load_config(const std::filesystem::path& path, const Overrides& overrides) {
  std::ifstream in(path);
  if (!in) throw CliError(kExitModelInvalid, "cannot open config " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    invalid(e.what());
  }
  return parse_config(doc, overrides, path.parent_path());
}

}  // namespace pagkit::cli
