#include "commands.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <numbers>
#include <sstream>

#include <CLI11.hpp>

#include "pagkit/linops.hpp"
#include "pagkit/parallel.hpp"
#include "pagkit/random.hpp"

namespace pagkit::cli {
namespace {

using nlohmann::json;

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string header_line(const RunContext& ctx) {
  std::ostringstream s;
  s << "# pagkit " << kVersion << " config_hash=" << ctx.config.config_hash
    << " seed=" << ctx.config.seed << " N=" << ctx.config.grid_n;
  return s.str();
}

json meta(const RunContext& ctx) {
  return json{{"version", kVersion},
              {"config_hash", ctx.config.config_hash},
              {"seed", ctx.config.seed},
              {"N", ctx.config.grid_n}};
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw CliError(kExitNumericalFailure, "cannot write " + path.string());
  return out;
}

void write_json(const std::filesystem::path& path, const json& doc) {
  auto out = open_out(path);
  out << doc.dump(2) << "\n";
}

const char* branch_name(Branch b) { return b == Branch::kRoot ? "root" : "saturated"; }

const char* verdict_name(Verdict v) {
  switch (v) {
    case Verdict::kPagSharper: return "pag_sharper";
    case Verdict::kAgSharper: return "ag_sharper";
    case Verdict::kTie: return "tie";
  }
  return "unknown";
}

void require_periods(const RunConfig& cfg) {
  if (cfg.periods.empty()) throw CliError(kExitModelInvalid, "config: 'periods' is required");
}

GainOptions gain_options(const RunConfig& cfg) {
  GainOptions options;
  options.grid_n = cfg.grid_n;
  options.seed = cfg.seed;
  return options;
}

bool is_linear(const NonlinearSystem& nsys) { return nsys.nonlinearity.name == "none"; }

// b for a level: the table entry, or for linear systems the classical AG of
// the bounded quantity (y for output-Lurie, x otherwise).
double resolve_b(const RunConfig& cfg, double level) {
  const auto& nsys = cfg.system;
  if (!is_linear(nsys)) return lookup_b(cfg, level);
  try {
    return lookup_b(cfg, level);
  } catch (const CliError&) {
    const StateSpace bounded = nsys.structure == Structure::kOutputLurie
                                   ? nsys.linear
                                   : nsys.linear.with_state_output();
    return classical_ag_slope(bounded, InputChannel::kInput) * level;
  }
}

NonlinearSystem with_mf(const NonlinearSystem& base, double m_f) {
  return NonlinearSystem(base.linear, base.nonlinearity, m_f, base.m_g, base.structure,
                         base.u_max);
}

SubsystemPags pags_for(const NonlinearSystem& nsys, double period, const GainOptions& options) {
  return nsys.structure == Structure::kOutputLurie ? output_pags(nsys.linear, period, options)
                                                   : subsystem_pags(nsys.linear, period, options);
}

NonlinearPagResult pag_bound(const NonlinearSystem& nsys, const SubsystemPags& pags, double b,
                             const RhoVector& rho) {
  return nsys.structure == Structure::kOutputLurie ? nonlinear_pag_special(nsys, pags, b, rho)
                                                   : nonlinear_pag_general(nsys, pags, b, rho);
}

std::vector<SubsystemPags> pags_per_period(const RunContext& ctx) {
  const auto& cfg = ctx.config;
  const GainOptions options = gain_options(cfg);
  return parallel_map<SubsystemPags>(cfg.periods.size(), ctx.jobs, [&](std::size_t i) {
    return pags_for(cfg.system, cfg.periods[i], options);
  });
}

double mf_for(const std::vector<MfEntry>& table, double level) {
  for (const auto& e : table) {
    if (e.level == level) return e.m_f;
  }
  throw CliError(kExitMissingPrerequisite, "no M_f for level " + level_key(level));
}

std::vector<std::string> mf_comment_lines(const std::vector<MfEntry>& table) {
  std::vector<std::string> lines;
  for (const auto& e : table) {
    lines.push_back("# M_f level=" + num(e.level) + " y_max=" + num(e.y_max) +
                    " M_f=" + num(e.m_f));
  }
  return lines;
}

json mf_json(const std::vector<MfEntry>& table) {
  json out = json::array();
  for (const auto& e : table) {
    out.push_back(json{{"level", e.level}, {"y_max", e.y_max}, {"M_f", e.m_f}});
  }
  return out;
}

SampledSignal make_trial_input(const RunConfig& cfg, double period, double level,
                               Composition composition, bool bangbang, std::uint64_t seed) {
  const auto& sys = cfg.system.linear;
  if (!bangbang) {
    return random_harmonic_input(period, cfg.grid_n, sys.m(), cfg.harmonics, composition, level,
                                 seed);
  }
  const RhoVector caps = composition_rho(composition, level);
  Vector v = Vector::Zero(sys.p());
  v(0) = 1.0;
  const SampledSignal ac =
      bangbang_worst_input(sys, InputChannel::kInput, period, cfg.grid_n, v, caps.ac);
  Matrix values = ac.values();
  values.col(0).array() += caps.dc;
  return SampledSignal(period, std::move(values));
}

}  // namespace

bool exceeds(const RhoVector& measured, const NonlinearPagResult& bound, double rtol,
             double pss_tol) {
  // The last period still carries a transient of the size of the
  // stroboscopic residual; a pure-DC bound of exactly 0 needs this floor.
  const double floor = 10.0 * pss_tol * (1.0 + measured.one_norm());
  return measured.dc > bound.eta_dc * (1.0 + rtol) + floor ||
         measured.ac > bound.eta_ac * (1.0 + rtol) + floor;
}

std::vector<GainCurveRow> compute_linpag(const RunContext& ctx) {
  const auto& cfg = ctx.config;
  require_periods(cfg);
  const auto& sys = cfg.system.linear;
  const double ag = classical_ag_slope(sys, cfg.channel);
  const GainOptions options = gain_options(cfg);
  return parallel_map<GainCurveRow>(cfg.periods.size(), ctx.jobs, [&](std::size_t i) {
    const double period = cfg.periods[i];
    const LinearPag pag = linear_pag(sys, cfg.channel, period, options);
    GainCurveRow row;
    row.period = period;
    row.gamma_dc = pag.gamma_dc;
    row.gamma_ac_exact = pag.gamma_ac;
    row.gamma_ac_conservative = linear_pag_conservative(sys, cfg.channel, period, cfg.grid_n);
    row.ag_slope = ag;
    row.freq_resp_norm = frequency_response(sys, cfg.channel, 2.0 * std::numbers::pi / period).norm;
    return row;
  });
}

std::vector<MfEntry> resolve_mf(const RunConfig& cfg) {
  std::vector<MfEntry> table;
  for (const double level : cfg.levels) {
    MfEntry e;
    e.level = level;
    if (cfg.m_f) {
      e.m_f = *cfg.m_f;
      e.y_max = std::numeric_limits<double>::quiet_NaN();
      try {
        e.y_max = resolve_b(cfg, level);
      } catch (const CliError&) {
      }
    } else {
      if (!cfg.pll) {
        throw CliError(kExitMissingPrerequisite,
                       "M_f \"estimate\" is only available for the builtin pll system");
      }
      e.y_max = lookup_b(cfg, level);
      e.m_f = estimate_Mf(*cfg.pll, e.y_max, level);
    }
    table.push_back(e);
  }
  return table;
}

std::vector<NlpagRow> compute_nlpag(const RunContext& ctx, std::vector<MfEntry>* mf_table) {
  const auto& cfg = ctx.config;
  require_periods(cfg);
  const auto table = resolve_mf(cfg);
  std::vector<double> bs;
  for (const double level : cfg.levels) bs.push_back(resolve_b(cfg, level));
  const auto pags = pags_per_period(ctx);
  std::vector<NlpagRow> rows;
  for (std::size_t li = 0; li < cfg.levels.size(); ++li) {
    const double level = cfg.levels[li];
    const double m_f = mf_for(table, level);
    const NonlinearSystem nsys = with_mf(cfg.system, m_f);
    for (const Composition comp : cfg.compositions) {
      for (std::size_t ti = 0; ti < cfg.periods.size(); ++ti) {
        NlpagRow row;
        row.period = cfg.periods[ti];
        row.level = level;
        row.composition = comp;
        row.m_f = m_f;
        row.result = pag_bound(nsys, pags[ti], bs[li], composition_rho(comp, level));
        row.mu = (std::abs(row.result.eta_dc) + std::abs(row.result.eta_ac)) / level;
        rows.push_back(row);
      }
    }
  }
  if (mf_table) *mf_table = table;
  return rows;
}

ValidationReport compute_validation(const RunContext& ctx) {
  const auto& cfg = ctx.config;
  require_periods(cfg);
  ValidationReport report;
  report.mf_table = resolve_mf(cfg);
  const auto pags = pags_per_period(ctx);

  struct Task {
    std::size_t group;
    std::size_t ti, li, ci;
    int trial;
    bool bangbang;
  };
  std::vector<Task> tasks;
  std::vector<NonlinearSystem> systems;
  for (std::size_t li = 0; li < cfg.levels.size(); ++li) {
    systems.push_back(with_mf(cfg.system, mf_for(report.mf_table, cfg.levels[li])));
  }
  for (std::size_t ti = 0; ti < cfg.periods.size(); ++ti) {
    for (std::size_t li = 0; li < cfg.levels.size(); ++li) {
      const double level = cfg.levels[li];
      const double b = resolve_b(cfg, level);
      for (std::size_t ci = 0; ci < cfg.compositions.size(); ++ci) {
        GroupSummary g;
        g.period = cfg.periods[ti];
        g.level = level;
        g.composition = cfg.compositions[ci];
        g.bound = pag_bound(systems[li], pags[ti], b, composition_rho(g.composition, level));
        g.ag_bound = b;
        g.sharpness = sharpness_compare(g.bound.value(), g.ag_bound);
        const std::size_t group = report.groups.size();
        report.groups.push_back(g);
        for (int t = 0; t <= cfg.trials; ++t) {
          tasks.push_back(Task{group, ti, li, ci, t, t == cfg.trials});
        }
      }
    }
  }

  const bool keep_all = cfg.waveforms == WaveformMode::kAll;
  const bool keep_bb = cfg.waveforms != WaveformMode::kNone;
  report.trials = parallel_map<TrialRecord>(tasks.size(), ctx.jobs, [&](std::size_t i) {
    const Task& task = tasks[i];
    const GroupSummary& g = report.groups[task.group];
    TrialRecord rec;
    rec.group = task.group;
    rec.trial = task.trial;
    rec.bangbang = task.bangbang;
    const std::uint64_t seed =
        derive_seed(cfg.seed, {task.ti, task.li, task.ci, static_cast<std::uint64_t>(task.trial)});
    const SampledSignal input =
        make_trial_input(cfg, g.period, g.level, g.composition, task.bangbang, seed);
    rec.rho_u = rho_of(input);
    try {
      const NonlinearSystem& nsys = systems[task.li];
      const PeriodicOrbit orbit =
          periodic_steady_state(nsys, input, Vector::Zero(nsys.linear.n()), cfg.pss);
      rec.periods_used = orbit.periods_used;
      rec.rho_y = rho_of(orbit.outputs);
      rec.violation = exceeds(rec.rho_y, g.bound, cfg.violation_rtol, cfg.pss.tol);
      if (keep_all || (keep_bb && task.bangbang)) rec.waveform = orbit.outputs.values();
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kNoPss && e.code() != ErrorCode::kDiverged) throw;
      rec.failed = true;
      rec.failure = std::string(to_string(e.code()));
    }
    return rec;
  });

  for (const auto& rec : report.trials) {
    auto& g = report.groups[rec.group];
    ++g.trials;
    ++report.total_trials;
    if (rec.failed) {
      ++g.failed;
      ++report.failed;
      continue;
    }
    if (rec.violation) {
      ++g.violations;
      ++report.violations;
    }
    g.max_rho_y.dc = std::max(g.max_rho_y.dc, rec.rho_y.dc);
    g.max_rho_y.ac = std::max(g.max_rho_y.ac, rec.rho_y.ac);
    if (rec.bangbang && g.bound.eta_ac > 0.0) g.bangbang_ratio_ac = rec.rho_y.ac / g.bound.eta_ac;
  }
  return report;
}

std::vector<std::pair<double, BEstimate>> compute_b_table(const RunContext& ctx) {
  const auto& cfg = ctx.config;
  std::vector<std::pair<double, BEstimate>> out;
  if (cfg.levels.empty()) return out;
  if (cfg.b_periods.empty()) {
    throw CliError(kExitModelInvalid, "config: 'periods' or 'estimate_b.periods' is required");
  }
  BEstimateOptions options;
  options.periods = cfg.b_periods;
  options.n_trials = cfg.b_trials;
  options.n_harmonics = cfg.harmonics;
  options.grid_n = cfg.grid_n;
  options.safety = cfg.b_safety;
  options.pss = cfg.pss;
  options.jobs = ctx.jobs;
  for (const double level : cfg.levels) {
    // The seed does not depend on the level, so linear systems give b
    // proportional to the level.
    out.emplace_back(level, estimate_b(cfg.system, level, cfg.seed, options));
  }
  return out;
}

int cmd_linpag(const RunContext& ctx) {
  const auto rows = compute_linpag(ctx);
  auto out = open_out(ctx.out_dir / "linpag.csv");
  out << header_line(ctx) << "\n";
  out << "T,omega,gamma_dc,gamma_ac_exact,gamma_ac_conservative,ag_slope,freq_resp_norm\n";
  for (const auto& r : rows) {
    out << num(r.period) << ',' << num(2.0 * std::numbers::pi / r.period) << ','
        << num(r.gamma_dc) << ',' << num(r.gamma_ac_exact) << ',' << num(r.gamma_ac_conservative)
        << ',' << num(r.ag_slope) << ',' << num(r.freq_resp_norm) << "\n";
  }
  return kExitOk;
}

int cmd_nlpag(const RunContext& ctx) {
  std::vector<MfEntry> table;
  const auto rows = compute_nlpag(ctx, &table);
  auto out = open_out(ctx.out_dir / "nlpag.csv");
  out << header_line(ctx) << "\n";
  if (ctx.config.b_heuristic) out << "# b HEURISTIC\n";
  for (const auto& line : mf_comment_lines(table)) out << line << "\n";
  out << "T,level,composition,eta_dc,eta_ac,mu,branch_dc,branch_ac,b,M_f\n";
  for (const auto& r : rows) {
    out << num(r.period) << ',' << num(r.level) << ',' << composition_name(r.composition) << ','
        << num(r.result.eta_dc) << ',' << num(r.result.eta_ac) << ',' << num(r.mu) << ','
        << branch_name(r.result.branch_dc) << ',' << branch_name(r.result.branch_ac) << ','
        << num(r.result.b) << ',' << num(r.m_f) << "\n";
  }
  return kExitOk;
}

int cmd_validate(const RunContext& ctx) {
  const auto& cfg = ctx.config;
  const ValidationReport report = compute_validation(ctx);

  auto out = open_out(ctx.out_dir / "validate_trials.csv");
  out << header_line(ctx) << "\n";
  if (cfg.b_heuristic) out << "# b HEURISTIC\n";
  for (const auto& line : mf_comment_lines(report.mf_table)) out << line << "\n";
  out << "T,level,composition,trial,kind,status,periods_used,rho_u_dc,rho_u_ac,rho_y_dc,"
         "rho_y_ac,eta_dc,eta_ac,ag_bound,violation,verdict\n";
  for (const auto& rec : report.trials) {
    const auto& g = report.groups[rec.group];
    out << num(g.period) << ',' << num(g.level) << ',' << composition_name(g.composition) << ','
        << rec.trial << ',' << (rec.bangbang ? "bangbang" : "random") << ','
        << (rec.failed ? rec.failure : "ok") << ',' << rec.periods_used << ','
        << num(rec.rho_u.dc) << ',' << num(rec.rho_u.ac) << ',' << num(rec.rho_y.dc) << ','
        << num(rec.rho_y.ac) << ',' << num(g.bound.eta_dc) << ',' << num(g.bound.eta_ac) << ','
        << num(g.ag_bound) << ',' << (rec.violation ? 1 : 0) << ','
        << verdict_name(g.sharpness.verdict) << "\n";
  }

  for (const auto& rec : report.trials) {
    if (rec.waveform.size() == 0) continue;
    const auto& g = report.groups[rec.group];
    char name[128];
    std::snprintf(name, sizeof(name), "g%03zu_%s_%04d.csv", rec.group,
                  rec.bangbang ? "bangbang" : "random", rec.trial);
    auto wf = open_out(ctx.out_dir / "waveforms" / name);
    wf << header_line(ctx) << "\n";
    wf << "# T=" << num(g.period) << " level=" << num(g.level)
       << " composition=" << composition_name(g.composition) << "\n";
    wf << "t";
    for (Eigen::Index c = 0; c < rec.waveform.cols(); ++c) wf << ",y" << c;
    wf << "\n";
    const double h = g.period / static_cast<double>(rec.waveform.rows());
    for (Eigen::Index j = 0; j < rec.waveform.rows(); j += cfg.waveform_decimation) {
      wf << num(h * static_cast<double>(j));
      for (Eigen::Index c = 0; c < rec.waveform.cols(); ++c) wf << ',' << num(rec.waveform(j, c));
      wf << "\n";
    }
  }

  json summary;
  summary["_meta"] = meta(ctx);
  summary["b_heuristic"] = cfg.b_heuristic;
  summary["trials"] = report.total_trials;
  summary["failed"] = report.failed;
  summary["violations"] = report.violations;
  json verdicts = {{"pag_sharper", 0}, {"ag_sharper", 0}, {"tie", 0}};
  json groups = json::array();
  for (std::size_t i = 0; i < report.groups.size(); ++i) {
    const auto& g = report.groups[i];
    auto& count = verdicts[verdict_name(g.sharpness.verdict)];
    count = count.get<int>() + 1;
    groups.push_back(json{{"group", i},
                          {"T", g.period},
                          {"level", g.level},
                          {"composition", composition_name(g.composition)},
                          {"eta_dc", g.bound.eta_dc},
                          {"eta_ac", g.bound.eta_ac},
                          {"branch_dc", branch_name(g.bound.branch_dc)},
                          {"branch_ac", branch_name(g.bound.branch_ac)},
                          {"pag_bound", g.sharpness.pag_bound},
                          {"ag_bound", g.ag_bound},
                          {"verdict", verdict_name(g.sharpness.verdict)},
                          {"trials", g.trials},
                          {"failed", g.failed},
                          {"violations", g.violations},
                          {"max_rho_y_dc", g.max_rho_y.dc},
                          {"max_rho_y_ac", g.max_rho_y.ac},
                          {"bangbang_ratio_ac", g.bangbang_ratio_ac}});
  }
  summary["verdicts"] = verdicts;
  summary["groups"] = groups;
  summary["mf_table"] = mf_json(report.mf_table);
  write_json(ctx.out_dir / "validate_summary.json", summary);

  if (report.violations > 0) return kExitBoundViolation;
  if (report.failed > 0) return kExitNumericalFailure;
  return kExitOk;
}

int cmd_estimate_b(const RunContext& ctx) {
  const auto table = compute_b_table(ctx);
  json doc;
  doc["_meta"] = meta(ctx);
  doc["heuristic"] = true;
  doc["b"] = json::object();
  doc["max_observed"] = json::object();
  for (const auto& [level, est] : table) {
    doc["b"][level_key(level)] = est.b;
    doc["max_observed"][level_key(level)] = est.max_observed;
  }
  write_json(ctx.out_dir / "b_table.json", doc);
  return kExitOk;
}

namespace {

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument:
    case ErrorCode::kDimensionMismatch:
    case ErrorCode::kNotHurwitz:
    case ErrorCode::kStructureMismatch:
    case ErrorCode::kUnknownNonlinearity:
      return kExitModelInvalid;
    case ErrorCode::kInvalidBound:
      return kExitMissingPrerequisite;
    default:
      return kExitNumericalFailure;
  }
}

int default_jobs() {
  if (const char* env = std::getenv("PAGKIT_JOBS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v > 0) return static_cast<int>(v);
  }
  return 1;
}

}  // namespace

int run_cli(int argc, char** argv) {
  CLI::App app{"Period-aware asymptotic gains for linear and Lurie-type systems"};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_version_flag("--version", kVersion);

  std::string config_path;
  std::string out_dir = ".";
  std::optional<std::uint64_t> seed;
  std::optional<int> jobs;
  std::optional<Eigen::Index> grid_n;
  app.add_option("--config", config_path, "JSON run configuration")->required()->check(CLI::ExistingFile);
  app.add_option("--out", out_dir, "Output directory");
  app.add_option("--seed", seed, "Override the configured seed");
  app.add_option("--jobs", jobs, "Worker threads (default: PAGKIT_JOBS or 1)")->check(CLI::PositiveNumber);
  app.add_option("--grid-n", grid_n, "Samples per period")->check(CLI::Range(2, 1 << 24));

  auto* linpag = app.add_subcommand("linpag", "Linear gain curves over the period grid");
  auto* nlpag = app.add_subcommand("nlpag", "Nonlinear PAG bounds per level and composition");
  auto* validate = app.add_subcommand("validate", "Time-domain validation campaign");
  auto* estimate_b = app.add_subcommand("estimate-b", "Heuristic invariant-set bound table");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    RunContext ctx;
    ctx.config = load_config(config_path, Overrides{seed, grid_n});
    ctx.out_dir = out_dir;
    ctx.jobs = jobs ? *jobs : default_jobs();
    if (linpag->parsed()) return cmd_linpag(ctx);
    if (nlpag->parsed()) return cmd_nlpag(ctx);
    if (validate->parsed()) {
      const int code = cmd_validate(ctx);
      if (code == kExitBoundViolation) std::cerr << "pagkit: bound violations detected\n";
      if (code == kExitNumericalFailure) std::cerr << "pagkit: some trials failed\n";
      return code;
    }
    if (estimate_b->parsed()) return cmd_estimate_b(ctx);
  } catch (const CliError& e) {
    std::cerr << "pagkit: " << e.what() << "\n";
    return e.exit_code();
  } catch (const Error& e) {
    std::cerr << "pagkit: " << e.what() << "\n";
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    std::cerr << "pagkit: " << e.what() << "\n";
    return kExitNumericalFailure;
  }
  return kExitOk;
}

}  // namespace pagkit::cli
