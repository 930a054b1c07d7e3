#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "commands.hpp"
#include "config.hpp"
#include "pagkit/pll.hpp"
#include "pagkit/sim.hpp"

using namespace pagkit;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Csv {
  std::vector<std::string> comments;
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;
  double at(std::size_t row, const std::string& col) const {
    for (std::size_t c = 0; c < columns.size(); ++c) {
      if (columns[c] == col) return std::stod(rows[row][c]);
    }
    FAIL("missing column " << col);
    return 0.0;
  }
  std::string text(std::size_t row, const std::string& col) const {
    for (std::size_t c = 0; c < columns.size(); ++c) {
      if (columns[c] == col) return rows[row][c];
    }
    FAIL("missing column " << col);
    return {};
  }
};

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  return out;
}

Csv read_csv(const fs::path& path) {
  std::ifstream in(path);
  REQUIRE(in.good());
  Csv csv;
  std::string line;
  while (std::getline(in, line)) {
    if (line.rfind("#", 0) == 0) {
      csv.comments.push_back(line);
    } else if (csv.columns.empty()) {
      csv.columns = split(line);
    } else {
      csv.rows.push_back(split(line));
    }
  }
  return csv;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Fresh scratch directory per test case.
fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "pagkit_cli_tests" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

fs::path write_config(const fs::path& dir, const json& doc, const std::string& name = "config.json") {
  const fs::path path = dir / name;
  std::ofstream(path) << doc.dump(2);
  return path;
}

int run(std::vector<std::string> args) {
  args.insert(args.begin(), "pagkit");
  std::vector<char*> argv;
  for (auto& a : args) argv.push_back(a.data());
  return cli::run_cli(static_cast<int>(argv.size()), argv.data());
}

json lag_system() {
  return json{{"A", {{-1.0}}}, {"B", {{1.0}}}, {"C", {{1.0}}}};
}

std::map<std::string, std::string> dir_contents(const fs::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (e.is_regular_file()) out[fs::relative(e.path(), dir).string()] = slurp(e.path());
  }
  return out;
}

}  // namespace

TEST_CASE("linpag on the lag") {
  const auto dir = scratch("linpag_lag");
  const auto cfg = write_config(dir, json{{"system", lag_system()}, {"periods", {2.0}}});
  REQUIRE(run({"--config", cfg.string(), "--out", (dir / "out").string(), "linpag"}) == 0);
  const auto csv = read_csv(dir / "out" / "linpag.csv");
  REQUIRE(csv.comments.size() >= 1);
  CHECK(csv.comments[0].rfind("# pagkit 0.1.0 config_hash=", 0) == 0);
  CHECK(csv.comments[0].find(" seed=0 N=4096") != std::string::npos);
  CHECK(csv.columns == std::vector<std::string>{"T", "omega", "gamma_dc", "gamma_ac_exact",
                                                 "gamma_ac_conservative", "ag_slope",
                                                 "freq_resp_norm"});
  REQUIRE(csv.rows.size() == 1);
  CHECK(std::abs(csv.at(0, "gamma_ac_exact") - 0.46212) < 1e-3);
  CHECK(std::abs(csv.at(0, "ag_slope") - 1.0) < 1e-6);
  CHECK(std::abs(csv.at(0, "gamma_ac_conservative") - 1.0) < 1e-6);
  CHECK(std::abs(csv.at(0, "freq_resp_norm") - 1.0 / std::sqrt(1.0 + std::numbers::pi * std::numbers::pi)) < 1e-12);
}

TEST_CASE("linpag on the PLL grid: omega and the AC gain ordering") {
  const auto dir = scratch("linpag_pll");
  const auto cfg = write_config(
      dir, json{{"system", {{"builtin", "pll"}}},
                {"periods", {{"min", 0.001}, {"max", 0.5}, {"count", 12}}}});
  REQUIRE(run({"--config", cfg.string(), "--out", dir.string(), "--jobs", "3", "linpag"}) == 0);
  const auto csv = read_csv(dir / "linpag.csv");
  REQUIRE(csv.rows.size() == 12);
  for (std::size_t i = 0; i < csv.rows.size(); ++i) {
    const double t = csv.at(i, "T");
    CHECK(csv.at(i, "omega") == doctest::Approx(2.0 * std::numbers::pi / t).epsilon(1e-15));
    // 1e-6 relative: the quadrature accuracy at the default N for T <= 0.5 s.
    CHECK(csv.at(i, "gamma_ac_exact") <= csv.at(i, "ag_slope") * (1.0 + 1e-6));
    CHECK(csv.at(i, "gamma_ac_exact") <= csv.at(i, "gamma_ac_conservative"));
    if (i > 0) CHECK(t > csv.at(i - 1, "T"));
  }
  CHECK(csv.at(0, "T") == doctest::Approx(0.001));
  CHECK(csv.at(11, "T") == 0.5);
}

TEST_CASE("exit codes") {
  const auto dir = scratch("exit_codes");
  const auto unstable = write_config(
      dir, json{{"system", {{"A", {{0.0, 1.0}, {-1.0, 0.0}}}, {"B", {{0.0}, {1.0}}}, {"C", {{1.0, 0.0}}}}},
                {"periods", {1.0}}},
      "unstable.json");
  CHECK(run({"--config", unstable.string(), "--out", dir.string(), "linpag"}) == 2);

  const auto ragged = write_config(
      dir, json{{"system", {{"A", {{-1.0, 0.0}, {1.0}}}, {"B", {{1.0}}}, {"C", {{1.0}}}}}}, "ragged.json");
  CHECK(run({"--config", ragged.string(), "linpag"}) == 2);

  std::ofstream(dir / "broken.json") << "{ not json";
  CHECK(run({"--config", (dir / "broken.json").string(), "linpag"}) == 2);

  const auto no_b = write_config(
      dir, json{{"system", {{"builtin", "pll"}}}, {"periods", {0.02}}, {"levels", {0.02}}, {"M_f", 0.5}},
      "no_b.json");
  CHECK(run({"--config", no_b.string(), "--out", dir.string(), "nlpag"}) == 3);

  const auto missing_file = write_config(
      dir, json{{"system", {{"builtin", "pll"}}}, {"periods", {0.02}}, {"levels", {0.02}},
                {"b_table_file", "nowhere.json"}},
      "missing_file.json");
  CHECK(run({"--config", missing_file.string(), "nlpag"}) == 3);

  const auto decreasing = write_config(
      dir, json{{"system", {{"builtin", "pll"}}}, {"periods", {0.02}}, {"levels", {0.02, 0.06}},
                {"b_table", {{"0.02", 0.1}, {"0.06", 0.05}}}},
      "decreasing.json");
  CHECK(run({"--config", decreasing.string(), "nlpag"}) == 2);

  const auto above_umax = write_config(
      dir, json{{"system", {{"builtin", "pll"}}}, {"u_max", 0.05}, {"periods", {0.02}},
                {"levels", {0.06}}, {"b_table", {{"0.06", 0.1}}}},
      "above_umax.json");
  CHECK(run({"--config", above_umax.string(), "nlpag"}) == 2);

  CHECK(run({"--config", (dir / "does_not_exist.json").string(), "linpag"}) != 0);
  CHECK(run({"--config", unstable.string()}) != 0);
}

TEST_CASE("nlpag on the PLL with a supplied b-table") {
  const auto dir = scratch("nlpag_pll");
  const json table{{"heuristic", true}, {"b", {{"0.02", 0.0260360718226}, {"0.06", 0.0765864856537}, {"0.1", 0.129741667757}}}};
  std::ofstream(dir / "b.json") << table.dump();
  const auto cfg = write_config(
      dir, json{{"system", {{"builtin", "pll"}}}, {"u_max", 0.5}, {"periods", {0.002, 0.02, 0.2}},
                {"levels", {0.1, 0.02, 0.06}}, {"M_f", "estimate"}, {"b_table_file", "b.json"}});
  REQUIRE(run({"--config", cfg.string(), "--out", dir.string(), "nlpag"}) == 0);
  const auto csv = read_csv(dir / "nlpag.csv");
  CHECK(csv.columns == std::vector<std::string>{"T", "level", "composition", "eta_dc", "eta_ac",
                                                 "mu", "branch_dc", "branch_ac", "b", "M_f"});
  CHECK(std::find(csv.comments.begin(), csv.comments.end(), "# b HEURISTIC") != csv.comments.end());
  int mf_lines = 0;
  for (const auto& c : csv.comments) mf_lines += c.rfind("# M_f level=", 0) == 0;
  CHECK(mf_lines == 3);
  REQUIRE(csv.rows.size() == 27);
  for (std::size_t i = 1; i < csv.rows.size(); ++i) CHECK(csv.at(i, "level") >= csv.at(i - 1, "level"));

  bool found = false;
  for (std::size_t i = 0; i < csv.rows.size(); ++i) {
    if (csv.at(i, "T") == 0.02 && csv.at(i, "level") == 0.02 && csv.text(i, "composition") == "pure_ac") {
      found = true;
      CHECK(csv.at(i, "eta_dc") == doctest::Approx(0.000259456287309).epsilon(1e-8));
      CHECK(csv.at(i, "eta_ac") == doctest::Approx(0.00910445929604).epsilon(1e-8));
      CHECK(csv.at(i, "M_f") == doctest::Approx(0.537222740909).epsilon(1e-10));
      CHECK(csv.text(i, "branch_ac") == "root");
    }
  }
  CHECK(found);
}

TEST_CASE("nlpag with M_f = 0 reproduces the linear slope") {
  const auto dir = scratch("nlpag_linear");
  const auto cfg = write_config(
      dir, json{{"system", {{"builtin", "pll"}}}, {"periods", {0.01, 0.05}}, {"levels", {0.05}},
                {"M_f", 0.0}, {"b_table", {{"0.05", 0.2}}}});
  REQUIRE(run({"--config", cfg.string(), "--out", dir.string(), "nlpag"}) == 0);
  const auto csv = read_csv(dir / "nlpag.csv");
  const auto sys = pll_system().linear;
  for (std::size_t i = 0; i < csv.rows.size(); ++i) {
    const auto pag = linear_pag(sys, InputChannel::kInput, csv.at(i, "T"));
    const auto comp = cli::parse_composition(csv.text(i, "composition"));
    CHECK(csv.at(i, "mu") == doctest::Approx(mu_slope(pag, 0.05, comp)).epsilon(1e-12));
  }
}

TEST_CASE("validate on a linear system: bang-bang attains the AC gain") {
  const auto dir = scratch("validate_lag");
  const auto cfg = write_config(
      dir, json{{"system", lag_system()}, {"periods", {2.0}}, {"levels", {0.5}}, {"trials", 4},
                {"N", 2048}, {"seed", 3}});
  REQUIRE(run({"--config", cfg.string(), "--out", dir.string(), "validate"}) == 0);
  const auto summary = json::parse(slurp(dir / "validate_summary.json"));
  CHECK(summary["violations"] == 0);
  CHECK(summary["failed"] == 0);
  CHECK(summary["trials"] == 15);
  CHECK(summary["_meta"]["seed"] == 3);
  for (const auto& g : summary["groups"]) {
    if (g["composition"] == "pure_dc") continue;
    const double ratio = g["bangbang_ratio_ac"].get<double>();
    CHECK(ratio >= 0.99);
    CHECK(ratio <= 1.01);
  }
  const auto trials = read_csv(dir / "validate_trials.csv");
  CHECK(trials.rows.size() == 15);
  CHECK(trials.comments[0].rfind("# pagkit", 0) == 0);
  int waveforms = 0;
  for (const auto& e : fs::directory_iterator(dir / "waveforms")) {
    const auto wf = read_csv(e.path());
    CHECK(wf.comments[0].rfind("# pagkit", 0) == 0);
    CHECK(wf.columns == std::vector<std::string>{"t", "y0"});
    CHECK(wf.rows.size() == 2048);
    ++waveforms;
  }
  CHECK(waveforms == 3);
}

TEST_CASE("a zero input yields a zero waveform and a zero bound") {
  const auto nsys = pll_system(PllParams{}, 0.5);
  const SampledSignal zero(0.02, Matrix::Zero(1024, 2));
  const auto orbit = periodic_steady_state(nsys, zero, Vector::Zero(2));
  CHECK(orbit.outputs.values().isZero(0.0));
  const auto bound = nonlinear_pag_special(nsys, 0.02, 0.1, rho_of(zero));
  CHECK(bound.eta_dc == 0.0);
  CHECK(bound.eta_ac == 0.0);
  CHECK_FALSE(cli::exceeds(rho_of(orbit.outputs), bound, 0.0, 1e-10));
  CHECK(cli::exceeds(RhoVector{0.0, 1e-6}, bound, 0.0, 1e-10));
}

TEST_CASE("estimate-b tables") {
  const auto dir = scratch("estimate_b");
  const auto empty = write_config(dir, json{{"system", lag_system()}, {"periods", {1.0}}}, "empty.json");
  REQUIRE(run({"--config", empty.string(), "--out", (dir / "empty").string(), "estimate-b"}) == 0);
  const auto e = json::parse(slurp(dir / "empty" / "b_table.json"));
  CHECK(e["b"].empty());
  CHECK(e["heuristic"] == true);

  const auto lin = write_config(
      dir, json{{"system", lag_system()}, {"periods", {1.0}}, {"levels", {0.1, 0.2, 0.4}},
                {"N", 1024}, {"estimate_b", {{"trials", 6}}}},
      "linear.json");
  REQUIRE(run({"--config", lin.string(), "--out", (dir / "linear").string(), "estimate-b"}) == 0);
  const auto l = json::parse(slurp(dir / "linear" / "b_table.json"));
  const double b1 = l["b"]["0.1"].get<double>();
  for (const char* key : {"0.2", "0.4"}) {
    const double ratio = l["b"][key].get<double>() / b1;
    CHECK(std::abs(ratio - std::stod(key) / 0.1) < 0.05 * std::stod(key) / 0.1);
  }

  const auto pll = write_config(
      dir, json{{"system", {{"builtin", "pll"}}}, {"u_max", 0.5}, {"periods", {0.02}},
                {"levels", {0.1}}, {"seed", 7}, {"estimate_b", {{"trials", 6}}}},
      "pll.json");
  REQUIRE(run({"--config", pll.string(), "--out", (dir / "pll").string(), "estimate-b"}) == 0);
  const double b = json::parse(slurp(dir / "pll" / "b_table.json"))["b"]["0.1"].get<double>();
  CHECK(b > 0.14 / 1.5);
  CHECK(b < 0.14 * 1.5);
}

TEST_CASE("outputs are byte-identical across runs and worker counts") {
  const auto dir = scratch("determinism");
  const auto cfg = write_config(
      dir, json{{"system", {{"builtin", "pll"}}}, {"u_max", 0.5}, {"periods", {0.02}},
                {"levels", {0.02, 0.1}}, {"trials", 3}, {"N", 1024}, {"seed", 11},
                {"M_f", "estimate"}, {"waveforms", "all"}, {"waveform_decimation", 8},
                {"b_table", {{"heuristic", true}, {"b", {{"0.02", 0.03}, {"0.1", 0.13}}}}}});
  std::vector<std::map<std::string, std::string>> runs;
  for (const char* jobs : {"1", "1", "4", "4"}) {
    const auto out = dir / ("run" + std::to_string(runs.size()));
    REQUIRE(run({"--config", cfg.string(), "--out", out.string(), "--jobs", jobs, "validate"}) == 0);
    REQUIRE(run({"--config", cfg.string(), "--out", out.string(), "--jobs", jobs, "nlpag"}) == 0);
    runs.push_back(dir_contents(out));
  }
  CHECK(runs[0].size() > 3);
  for (std::size_t i = 1; i < runs.size(); ++i) CHECK(runs[i] == runs[0]);

  // The seed override lands in every header and changes the trials.
  const auto other = dir / "seed12";
  REQUIRE(run({"--config", cfg.string(), "--out", other.string(), "--seed", "12", "validate"}) == 0);
  const auto trials = read_csv(other / "validate_trials.csv");
  CHECK(trials.comments[0].find(" seed=12 ") != std::string::npos);
  CHECK(slurp(other / "validate_trials.csv") != runs[0].at("validate_trials.csv"));
}

TEST_CASE("config parsing details") {
  json doc{{"system", {{"builtin", "pll"}, {"zeta", 0.5}}}, {"periods", {0.3, 0.1, 0.1}},
           {"levels", {0.06, 0.02, 0.06}}, {"b_table", {{"0.02", 0.01}, {"0.06", 0.02}}}};
  const auto cfg = cli::parse_config(doc, cli::Overrides{std::uint64_t{5}, Eigen::Index{512}}, ".");
  CHECK(cfg.periods == std::vector<double>{0.1, 0.3});
  CHECK(cfg.levels == std::vector<double>{0.02, 0.06});
  CHECK(cfg.seed == 5);
  CHECK(cfg.grid_n == 512);
  CHECK(cfg.pll->zeta == 0.5);
  CHECK(cli::lookup_b(cfg, 0.06) == 0.02);
  CHECK(cli::level_key(0.1) == "0.1");
  CHECK(cfg.config_hash.size() == 16);
  const auto again = cli::parse_config(doc, {}, ".");
  CHECK(again.config_hash == cfg.config_hash);
  doc["seed"] = 9;
  CHECK(cli::parse_config(doc, {}, ".").config_hash != cfg.config_hash);
}
