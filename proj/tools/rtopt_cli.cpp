// Copyright 2026 The rtopt Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Command-line front end. Talks to the library only through the C interface.
#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <map>
#include <string>

#include "rtopt/rtopt.h"

namespace {

enum class Level { Error = 0, Warn = 1, Info = 2, Debug = 3 };
Level g_level = Level::Info;

template <class... A>
void log(Level lv, const char* fmt, A... args) {
  if (lv > g_level) return;
  static const char* tags[] = {"error", "warn", "info", "debug"};
  std::fprintf(stderr, "[%s] ", tags[static_cast<int>(lv)]);
  if constexpr (sizeof...(A) == 0) std::fputs(fmt, stderr);
  else std::fprintf(stderr, fmt, args...);
  std::fputc('\n', stderr);
}

// Exit codes: 0 success, 1 runtime failure, 2 invalid input, 3 provenance mismatch,
// 4 optimizer stopped without converging (the bundle is still written, flagged).
int exit_code(rtopt_status s) {
  switch (s) {
    case RTOPT_OK: return 0;
    case RTOPT_ERR_CONFIG:
    case RTOPT_ERR_INVALID_ARGUMENT: return 2;
    case RTOPT_ERR_HASH_MISMATCH: return 3;
    case RTOPT_ERR_NOT_CONVERGED: return 4;
    default: return 1;
  }
}

int report_failure(rtopt_status s, const char* what) {
  log(Level::Error, "%s failed (%s): %s", what, rtopt_status_name(s), rtopt_last_error());
  return exit_code(s);
}

void on_iteration(const rtopt_iteration* it, void*) {
  log(Level::Debug, "%s it %3d  rho % .3e  dJ % .3e  tr %.2e  w %.1e  viol %.2e  J %.6g  %s  [%s]",
      it->phase == 0 ? "seed" : "main", it->iteration, it->rho, it->d_actual, it->trust_radius,
      it->weight, it->violation, it->cost_bound, it->accepted ? "acc" : "rej", it->solver_status);
}

struct Scenario {
  rtopt_scenario* h = nullptr;
  ~Scenario() { rtopt_scenario_free(h); }
};
struct Solution {
  rtopt_solution* h = nullptr;
  ~Solution() { rtopt_solution_free(h); }
};
struct McReport {
  rtopt_mc_report* h = nullptr;
  ~McReport() { rtopt_mc_free(h); }
};

int cmd_validate(const std::string& path) {
  char* diag = nullptr;
  int errors = 0, warnings = 0;
  const rtopt_status s = rtopt_scenario_validate(path.c_str(), &diag, &errors, &warnings);
  if (diag) {
    std::fputs(diag, stdout);
    rtopt_string_free(diag);
  }
  if (s != RTOPT_OK && errors == 0) return report_failure(s, "validate");
  std::printf("%s: %d error(s), %d warning(s)\n", path.c_str(), errors, warnings);
  return errors ? 2 : 0;
}

int cmd_optimize(const std::string& path, const std::string& out, bool deterministic,
                 const std::string& seed_dir, int max_iterations, bool allow_infeasible) {
  Scenario sc;
  rtopt_status s = rtopt_scenario_load(path.c_str(), &sc.h);
  if (s != RTOPT_OK) return report_failure(s, "loading scenario");
  rtopt_scenario_info info;
  rtopt_scenario_get_info(sc.h, &info);
  const bool stochastic = !deterministic && info.stochastic;
  if (!deterministic && !info.stochastic)
    log(Level::Info, "scenario has no uncertainty model; solving deterministically");
  Solution seed;
  if (!seed_dir.empty()) {
    s = rtopt_solution_read(seed_dir.c_str(), &seed.h);
    if (s != RTOPT_OK) return report_failure(s, "reading seed bundle");
  }
  rtopt_optimize_options opts;
  rtopt_optimize_options_init(&opts);
  opts.stochastic = stochastic;
  opts.seed = seed.h;
  opts.max_iterations = max_iterations;
  opts.allow_infeasible_seed = allow_infeasible;
  opts.progress = on_iteration;
  log(Level::Info, "optimizing %s (%s)", path.c_str(), stochastic ? "stochastic" : "deterministic");
  Solution sol;
  s = rtopt_optimize(sc.h, &opts, &sol.h);
  if (s != RTOPT_OK) return report_failure(s, "optimize");
  s = rtopt_solution_write(sol.h, out.c_str());
  if (s != RTOPT_OK) return report_failure(s, "writing bundle");
  rtopt_solution_summary sum;
  rtopt_solution_get_summary(sol.h, &sum);
  std::printf("status %s, %d iterations, dv nominal %.6g, dv bound %.6g, violation %.3g -> %s\n",
              sum.status, sum.iterations, sum.dv_nominal, sum.dv_bound, sum.violation,
              out.c_str());
  if (!sum.converged) {
    log(Level::Error, "optimizer stopped with status %s after %d iterations", sum.status,
        sum.iterations);
    return 4;
  }
  return 0;
}

int cmd_montecarlo(const std::string& path, const std::string& bundle, const std::string& out,
                   int samples, const std::string& seed, const std::string& mode, bool force,
                   bool per_sample, int threads) {
  Scenario sc;
  rtopt_status s = rtopt_scenario_load(path.c_str(), &sc.h);
  if (s != RTOPT_OK) return report_failure(s, "loading scenario");
  Solution sol;
  s = rtopt_solution_read(bundle.c_str(), &sol.h);
  if (s != RTOPT_OK) return report_failure(s, "reading bundle");
  rtopt_mc_options opts;
  rtopt_mc_options_init(&opts);
  opts.samples = samples;
  if (!seed.empty()) {
    opts.use_seed = 1;
    opts.seed = std::stoull(seed);
  }
  if (mode == "linear") opts.mode = 1;
  if (mode == "ekf") opts.mode = 0;
  opts.threads = threads;
  opts.force = force;
  opts.keep_samples = per_sample;
  if (force) log(Level::Warn, "--force: skipping the scenario hash check");
  McReport rep;
  s = rtopt_montecarlo(sc.h, sol.h, &opts, &rep.h);
  if (s != RTOPT_OK) return report_failure(s, "monte carlo");
  s = rtopt_mc_write(rep.h, out.c_str());
  if (s != RTOPT_OK) return report_failure(s, "writing report");
  rtopt_mc_summary m;
  rtopt_mc_get_summary(rep.h, &m);
  std::printf("%d samples (%d failed), dv99 %.6g +- %.2g vs bound %.6g (%s), thrust violations "
              "%d, terminal ratio %.4g -> %s\n",
              m.samples, m.failed, m.dv_quantile, m.dv_quantile_halfwidth, m.dv_bound,
              m.dv_bound_holds ? "holds" : "exceeded", m.thrust_violations,
              m.terminal_bound_ratio, out.c_str());
  if (m.campaign_failed) {
    log(Level::Error, "more than 1%% of samples failed");
    return 1;
  }
  return 0;
}

int cmd_report(const std::string& bundle, const std::string& mc, const std::string& out) {
  char* text = nullptr;
  const rtopt_status s =
      rtopt_report(bundle.c_str(), mc.empty() ? nullptr : mc.c_str(), out.c_str(), &text);
  if (s != RTOPT_OK) return report_failure(s, "report");
  std::fputs(text, stdout);
  rtopt_string_free(text);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Robust low-thrust trajectory optimizer"};
  app.set_version_flag("--version", rtopt_version());
  app.require_subcommand(1);
  app.fallthrough();

  int threads = 1;
  if (const char* env = std::getenv("RTOPT_THREADS")) threads = std::max(1, std::atoi(env));
  std::string level = "info";
  app.add_option("--threads", threads, "Worker threads for Monte Carlo")
      ->check(CLI::Range(1, 256));
  const std::map<std::string, Level> levels{
      {"error", Level::Error}, {"warn", Level::Warn}, {"info", Level::Info}, {"debug", Level::Debug}};
  app.add_option("--log-level", level, "error, warn, info or debug")
      ->check(CLI::IsMember({"error", "warn", "info", "debug"}));

  std::string scenario, out, bundle, seed_from, mc_dir, seed, mode;
  int max_iterations = 0, samples = 0;
  bool deterministic = false, allow_infeasible = false, force = false, linear_mode = false, per_sample = false;

  auto* validate = app.add_subcommand("validate", "Check a scenario file");
  validate->add_option("scenario", scenario)->required()->check(CLI::ExistingFile);

  auto* optimize = app.add_subcommand("optimize", "Solve and write a solution bundle");
  optimize->add_option("scenario", scenario)->required()->check(CLI::ExistingFile);
  optimize->add_option("-o,--out", out, "Bundle directory")->required();
  optimize->add_flag("--deterministic", deterministic,
                     "Solve without uncertainty (the stochastic run is the default)");
  optimize->add_flag("--stochastic", "Default; kept for explicit scripts");
  optimize->add_option("--seed-from", seed_from, "Deterministic bundle to start from")
      ->check(CLI::ExistingDirectory);
  optimize->add_option("--max-iterations", max_iterations)->check(CLI::PositiveNumber);
  optimize->add_flag("--allow-infeasible-seed", allow_infeasible,
                     "Start the stochastic run even if the deterministic seed is infeasible");

  auto* mc = app.add_subcommand("montecarlo", "Play a solution against sampled uncertainty");
  mc->add_option("scenario", scenario)->required()->check(CLI::ExistingFile);
  mc->add_option("bundle", bundle)->required()->check(CLI::ExistingDirectory);
  mc->add_option("-o,--out", out, "Report directory")->required();
  mc->add_option("--samples", samples)->check(CLI::PositiveNumber);
  mc->add_option("--seed", seed)->check(CLI::NonNegativeNumber);
  mc->add_option("--mode", mode, "ekf or linear; default from the scenario")
      ->check(CLI::IsMember({"ekf", "linear"}));
  mc->add_flag("--linear-mode", linear_mode, "Same as --mode linear");
  mc->add_flag("--per-sample", per_sample, "Also write samples.csv");
  mc->add_flag("--force", force, "Accept a bundle produced from a different scenario file");

  auto* report = app.add_subcommand("report", "Export plot data and a summary");
  report->add_option("bundle", bundle)->required()->check(CLI::ExistingDirectory);
  report->add_option("--mc", mc_dir, "Monte Carlo report directory")
      ->check(CLI::ExistingDirectory);
  report->add_option("-o,--out", out, "Output directory")->required();

  CLI11_PARSE(app, argc, argv);
  g_level = levels.at(level);

  if (*validate) return cmd_validate(scenario);
  if (*optimize) return cmd_optimize(scenario, out, deterministic, seed_from, max_iterations,
                                     allow_infeasible);
  if (*mc) {
    if (linear_mode) mode = "linear";
    return cmd_montecarlo(scenario, bundle, out, samples, seed, mode, force, per_sample, threads);
  }
  return cmd_report(bundle, mc_dir, out);
}
