#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "pagkit/gains.hpp"
#include "pagkit/model.hpp"
#include "pagkit/pll.hpp"
#include "pagkit/sim.hpp"

namespace pagkit::cli {

enum ExitCode : int {
  kExitOk = 0,
  kExitModelInvalid = 2,
  kExitMissingPrerequisite = 3,
  kExitBoundViolation = 4,
  kExitNumericalFailure = 5,
};

// Raised for configuration problems; carries the process exit code.
class CliError : public std::runtime_error {
 public:
  CliError(int exit_code, const std::string& what)
      : std::runtime_error(what), exit_code_(exit_code) {}
  int exit_code() const { return exit_code_; }

 private:
  int exit_code_;
};

enum class WaveformMode { kNone, kBangBang, kAll };

struct RunConfig {
  nlohmann::json raw;
  std::string config_hash;  // FNV-1a 64 of the compact JSON dump, hex

  NonlinearSystem system;
  std::optional<PllParams> pll;  // set for the builtin PLL
  InputChannel channel = InputChannel::kInput;

  std::vector<double> periods;
  Eigen::Index grid_n = 4096;
  std::vector<double> levels;  // ascending
  std::vector<Composition> compositions = {Composition::kPureAc, Composition::kSplit,
                                           Composition::kPureDc};
  std::map<double, double> b_table;
  bool b_heuristic = false;
  std::optional<double> m_f;  // empty: estimate per level
  double m_g = 0.0;

  std::uint64_t seed = 0;
  int trials = 200;
  int harmonics = 5;
  WaveformMode waveforms = WaveformMode::kBangBang;
  int waveform_decimation = 1;
  double violation_rtol = 0.0;
  PssOptions pss;

  int b_trials = 30;
  std::vector<double> b_periods;  // defaults to `periods`
  double b_safety = 1.5;
};

struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<Eigen::Index> grid_n;
};

std::uint64_t fnv1a64(const std::string& bytes);

RunConfig parse_config(const nlohmann::json& doc, const Overrides& overrides = {},
                       const std::filesystem::path& base_dir = {});
RunConfig load_config(const std::filesystem::path& path, const Overrides& overrides = {});

std::string composition_name(Composition c);
Composition parse_composition(const std::string& name);

// Shortest round-trip text for a level, used as JSON keys.
std::string level_key(double level);

// Throws CliError(kExitMissingPrerequisite) when the table has no entry.
double lookup_b(const RunConfig& cfg, double level);

}  // namespace pagkit::cli
