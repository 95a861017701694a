#include <cstdlib>
#include <string>

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "commands.hpp"

namespace {

void setup_logging() {
  auto logger = spdlog::stderr_color_mt("funnel");
  logger->set_pattern("[%l] %v");
  spdlog::set_default_logger(logger);
  const char* level = std::getenv("FUNNEL_LOG");
  spdlog::set_level(level ? spdlog::level::from_str(level) : spdlog::level::warn);
}

}  // namespace

int main(int argc, char** argv) {
  setup_logging();
  using namespace funnel::tools;

  CLI::App app{"Joint trajectory and invariant funnel synthesis"};
  app.require_subcommand(1);

  SolveOptions solve;
  int solve_samples = 0;
  std::uint64_t solve_seed = 0;
  auto* s = app.add_subcommand("solve", "run the synthesis and write a solution directory");
  s->add_option("--config", solve.config_path, "configuration file")->required();
  s->add_option("--out", solve.out_dir, "output directory")->required();
  auto* s_samples = s->add_option("--samples", solve_samples, "verification samples");
  auto* s_seed = s->add_option("--seed", solve_seed, "Lipschitz and verification seed");
  s->add_option("--mode", solve.mode, "joint or scp-only");

  VerifyCommandOptions verify;
  int verify_samples = 0;
  std::uint64_t verify_seed = 0;
  auto* v = app.add_subcommand("verify", "Monte Carlo check of a solution directory");
  v->add_option("--out", verify.dir, "solution directory")->required();
  auto* v_samples = v->add_option("--samples", verify_samples, "rollouts from the initial set");
  auto* v_seed = v->add_option("--seed", verify_seed, "sampling seed");
  v->add_option("--disturbance", verify.disturbance, "random or worst-case");

  std::string figures_dir;
  auto* f = app.add_subcommand("export-figures", "write plot data for a solution directory");
  f->add_option("--out", figures_dir, "solution directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitError;
  }

  if (s->parsed()) {
    if (*s_samples) solve.samples = solve_samples;
    if (*s_seed) solve.seed = solve_seed;
    return cmd_solve(solve);
  }
  if (v->parsed()) {
    if (*v_samples) verify.samples = verify_samples;
    if (*v_seed) verify.seed = verify_seed;
    return cmd_verify(verify);
  }
  return cmd_export_figures(figures_dir);
}
