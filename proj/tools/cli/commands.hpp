#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "config.hpp"

namespace pagkit::cli {

inline constexpr const char* kVersion = "0.1.0";

struct RunContext {
  RunConfig config;
  std::filesystem::path out_dir = ".";
  int jobs = 1;
};

struct MfEntry {
  double level = 0.0;
  double y_max = 0.0;
  double m_f = 0.0;
};

struct NlpagRow {
  double period = 0.0;
  double level = 0.0;
  Composition composition = Composition::kPureAc;
  NonlinearPagResult result;
  double mu = 0.0;
  double m_f = 0.0;
};

struct TrialRecord {
  std::size_t group = 0;
  int trial = 0;
  bool bangbang = false;
  bool failed = false;
  std::string failure;
  int periods_used = 0;
  RhoVector rho_u;
  RhoVector rho_y;
  bool violation = false;
  Matrix waveform;  // outputs over the final period, kept only when written
};

struct GroupSummary {
  double period = 0.0;
  double level = 0.0;
  Composition composition = Composition::kPureAc;
  NonlinearPagResult bound;
  double ag_bound = 0.0;
  SharpnessReport sharpness;
  int trials = 0;
  int failed = 0;
  int violations = 0;
  RhoVector max_rho_y;
  double bangbang_ratio_ac = 0.0;  // measured / predicted AC output, bang-bang trial
};

struct ValidationReport {
  std::vector<GroupSummary> groups;
  std::vector<TrialRecord> trials;
  std::vector<MfEntry> mf_table;
  int total_trials = 0;
  int failed = 0;
  int violations = 0;
};

// Componentwise bound check with a measurement floor of 10 tol_ps (1 + |rho|_1).
bool exceeds(const RhoVector& measured, const NonlinearPagResult& bound, double rtol,
             double pss_tol);

std::vector<GainCurveRow> compute_linpag(const RunContext& ctx);
std::vector<MfEntry> resolve_mf(const RunConfig& cfg);
std::vector<NlpagRow> compute_nlpag(const RunContext& ctx, std::vector<MfEntry>* mf_table = nullptr);
ValidationReport compute_validation(const RunContext& ctx);
std::vector<std::pair<double, BEstimate>> compute_b_table(const RunContext& ctx);

// Each command writes its files below ctx.out_dir and returns an exit code.
int cmd_linpag(const RunContext& ctx);
int cmd_nlpag(const RunContext& ctx);
int cmd_validate(const RunContext& ctx);
int cmd_estimate_b(const RunContext& ctx);

// Full command-line entry point.
int run_cli(int argc, char** argv);

}  // namespace pagkit::cli
