#include "commands.hpp"

#include <filesystem>
#include <fstream>

#include <fmt/core.h>
#include <spdlog/spdlog.h>

#include "bundle.hpp"
#include "config_file.hpp"
#include "figures.hpp"
#include "funnel/linalg.hpp"

namespace funnel::tools {

namespace fs = std::filesystem;

namespace {

std::string in(const std::string& dir, const char* name) { return (fs::path(dir) / name).string(); }

void report_error(const std::string& message) { fmt::print(stderr, "error: {}\n", message); }

void apply_overrides(ConfigFile& cfg, std::optional<int> samples, std::optional<std::uint64_t> seed) {
  if (samples) {
    if (*samples < 1) throw ConfigError("--samples: must be at least 1");
    cfg.verify.samples = *samples;
  }
  if (seed) cfg.verify.seed = *seed;
}

VerificationReport run_verification(const ConfigFile& cfg, const SystemModel& model,
                                    const Trajectory& nominal, const Funnel& funnel) {
  VerifyOptions o;
  o.samples = cfg.verify.samples;
  o.seed = cfg.verify.seed;
  o.disturbance = cfg.verify.disturbance;
  o.integration = cfg.run.discretization;
  return verify_funnel(model, nominal, funnel, make_constraints(cfg.run, model.state_dim()), o);
}

void write_verification(const std::string& dir, const VerificationReport* report,
                        const ConstraintSet& constraints) {
  const VerificationReport empty;
  const VerificationReport& r = report ? *report : empty;
  write_table(in(dir, files::kVerification), verification_table(r, constraints));
  write_table(in(dir, files::kPaths), paths_table(r));
}

void log_report(const VerificationReport& r) {
  if (r.passed) {
    fmt::print("verification passed: {}/{} samples contained and feasible, worst containment {}\n",
               r.contained_count, r.samples, format_double(r.worst_containment));
  } else {
    fmt::print(
        "verification FAILED: contained {}/{}, feasible {}/{}, worst containment {} at sample {} "
        "node {}, min margin {}\n",
        r.contained_count, r.samples, r.feasible_count, r.samples,
        format_double(r.worst_containment), r.worst_sample, r.worst_node,
        format_double(r.min_margin));
  }
}

nlohmann::json boundary_summary(const RunConfig& c, const Funnel& f) {
  const int N = f.intervals();
  return {{"initial_min_eigenvalue", min_eigenvalue(f.certified_shape(0) - c.Q_initial)},
          {"final_min_eigenvalue", min_eigenvalue(c.Q_final - f.certified_shape(N))}};
}

int solve_impl(const SolveOptions& options) {
  const std::string text = read_text_file(options.config_path);
  ConfigFile cfg = parse_config(text, options.config_path);
  if (options.mode) {
    try {
      cfg.run.mode = parse_run_mode(*options.mode);
    } catch (const Error& e) {
      throw ConfigError(std::string("--mode: ") + e.what());
    }
  }
  if (options.seed) cfg.run.lipschitz.seed = *options.seed;
  apply_overrides(cfg, options.samples, options.seed);

  const std::string& dir = options.out_dir;
  fs::create_directories(dir);
  {
    std::ofstream copy(in(dir, files::kConfig), std::ios::binary | std::ios::trunc);
    copy << text;
    if (!copy) throw Error(in(dir, files::kConfig) + ": cannot write");
  }

  const ModelPtr model = make_model(cfg.run.model);
  const int nx = model->state_dim(), nu = model->input_dim();
  const ConstraintSet constraints = make_constraints(cfg.run, nx);
  const bool joint = cfg.run.mode == RunMode::kJoint;
  spdlog::info("solving {} ({} mode, N = {})", cfg.run.model, to_string(cfg.run.mode),
               cfg.run.intervals);

  nlohmann::json summary = {{"model", cfg.run.model},
                            {"mode", to_string(cfg.run.mode)},
                            {"intervals", cfg.run.intervals},
                            {"final_time", cfg.run.final_time},
                            {"lipschitz_seed", cfg.run.lipschitz.seed}};
  RunResult result;
  try {
    result = run(cfg.run, *model, [](const IterationRecord& r) {
      spdlog::info("iteration {}: delta_T {:.3e} delta_F {:.3e} cost {:.6f} lambda_w {:.3f}",
                   r.iteration, r.delta_T, r.delta_F, r.trajectory_cost, r.lambda_w);
      for (const auto& w : r.warnings) spdlog::warn("iteration {}: {}", r.iteration, w);
    });
  } catch (const PipelineError& e) {
    write_table(in(dir, files::kIterations), iterations_table(e.history()));
    summary["status"] = "error";
    summary["error"] = e.what();
    summary["iterations"] = e.history().size();
    write_json(in(dir, files::kSummary), summary);
    throw;
  }

  write_table(in(dir, files::kTrajectory), trajectory_table(result.trajectory));
  write_table(in(dir, files::kIterations), iterations_table(result.history));
  const IterationRecord& last = result.history.back();
  summary["status"] = result.converged ? "converged" : "max_iterations";
  summary["converged"] = result.converged;
  summary["iterations"] = result.history.size();
  summary["delta_T"] = last.delta_T;
  summary["delta_F"] = last.delta_F;
  summary["trajectory_cost"] = last.trajectory_cost;
  summary["virtual_control_norm"] = last.virtual_control_norm;

  if (joint) {
    write_table(in(dir, files::kFunnel), funnel_table(result.funnel, nx, nu));
    const VerificationReport report = run_verification(cfg, *model, result.trajectory, result.funnel);
    write_verification(dir, &report, constraints);
    log_report(report);
    double beta_max = 0.0, gamma_max = 0.0;
    for (double b : result.betas.beta) beta_max = std::max(beta_max, b);
    for (double g : result.gamma) gamma_max = std::max(gamma_max, g);
    summary["funnel_objective"] = last.funnel_objective;
    summary["lambda_w"] = result.lambda_w;
    summary["beta_max"] = beta_max;
    summary["beta_final"] = result.betas.beta.back();
    summary["gamma_max"] = gamma_max;
    summary["boundary"] = boundary_summary(cfg.run, result.funnel);
    summary["verification"] = verification_summary(report, cfg.verify);
  } else {
    write_table(in(dir, files::kFunnel), funnel_table(Funnel{}, nx, nu));
    write_verification(dir, nullptr, constraints);
    summary["verification"] = nullptr;
  }
  write_json(in(dir, files::kSummary), summary);

  if (result.converged) {
    fmt::print("converged in {} iterations (delta_T {}, delta_F {})\n", result.history.size(),
               format_double(last.delta_T), format_double(last.delta_F));
    return kExitOk;
  }
  fmt::print("stopped after {} iterations without meeting the tolerances\n", result.history.size());
  return kExitMaxIterations;
}

int verify_impl(const VerifyCommandOptions& options) {
  const std::string& dir = options.dir;
  ConfigFile cfg = load_config(in(dir, files::kConfig));
  apply_overrides(cfg, options.samples, options.seed);
  if (options.disturbance) {
    if (*options.disturbance == "random") {
      cfg.verify.disturbance = DisturbanceMode::kRandomSphere;
    } else if (*options.disturbance == "worst-case") {
      cfg.verify.disturbance = DisturbanceMode::kWorstCase;
    } else {
      throw ConfigError("--disturbance: expected random or worst-case, got '" +
                        *options.disturbance + "'");
    }
  }
  const ModelPtr model = make_model(cfg.run.model);
  const int nx = model->state_dim(), nu = model->input_dim();
  const Trajectory nominal = trajectory_from(read_table(in(dir, files::kTrajectory)), nx, nu);
  const Table funnel_rows = read_table(in(dir, files::kFunnel));
  if (funnel_rows.rows.empty()) throw Error("solution has no funnel (scp-only run)");
  const Funnel funnel = funnel_from(funnel_rows, nx, nu);
  const VerificationReport report = run_verification(cfg, *model, nominal, funnel);
  write_verification(dir, &report, make_constraints(cfg.run, nx));
  if (fs::exists(in(dir, files::kSummary))) {
    nlohmann::json summary = read_json(in(dir, files::kSummary));
    summary["verification"] = verification_summary(report, cfg.verify);
    write_json(in(dir, files::kSummary), summary);
  }
  log_report(report);
  return report.passed ? kExitOk : kExitVerifyFailed;
}

template <typename F>
int guarded(F&& body) {
  try {
    return body();
  } catch (const std::exception& e) {
    report_error(e.what());
    return kExitError;
  }
}

}  // namespace

int cmd_solve(const SolveOptions& options) { return guarded([&] { return solve_impl(options); }); }

int cmd_verify(const VerifyCommandOptions& options) {
  return guarded([&] { return verify_impl(options); });
}

int cmd_export_figures(const std::string& dir) {
  return guarded([&] {
    const FigureCounts c = export_figure_data(dir);
    fmt::print("wrote figure data: {} ellipses, {} obstacles, {} iterations, {} samples\n",
               c.ellipses, c.obstacles, c.iterations, c.samples);
    return static_cast<int>(kExitOk);
  });
}

}  // namespace funnel::tools
