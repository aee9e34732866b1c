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

#include "rtopt/rtopt.h"

#include <cstdlib>
#include <cstring>
#include <exception>
#include <fstream>
#include <memory>
#include <new>
#include <sstream>
#include <string>

#include "rtopt/bundle.hpp"
#include "rtopt/errors.hpp"
#include "rtopt/montecarlo.hpp"
#include "rtopt/scenario.hpp"
#include "rtopt/scp.hpp"

struct rtopt_scenario {
  rtopt::Scenario sc;
};

struct rtopt_solution {
  rtopt::SolutionBundle bundle;
};

struct rtopt_mc_report {
  rtopt::McReport report;
  std::vector<rtopt::McSample> samples;
  bool keep_samples = false;
  std::shared_ptr<const rtopt::Scenario> sc;
  rtopt::SolutionBundle bundle;
};

namespace {

thread_local std::string g_last_error;

rtopt_status code_for(rtopt::ErrorKind k) {
  using rtopt::ErrorKind;
  switch (k) {
    case ErrorKind::Config: return RTOPT_ERR_CONFIG;
    case ErrorKind::Io: return RTOPT_ERR_IO;
    case ErrorKind::HashMismatch: return RTOPT_ERR_HASH_MISMATCH;
    case ErrorKind::NotConverged: return RTOPT_ERR_NOT_CONVERGED;
    case ErrorKind::InvalidArgument: return RTOPT_ERR_INVALID_ARGUMENT;
    case ErrorKind::Domain: return RTOPT_ERR_DOMAIN;
    case ErrorKind::Singularity:
    case ErrorKind::Integration:
    case ErrorKind::Numerical:
    case ErrorKind::Assembly: return RTOPT_ERR_NUMERICAL;
  }
  return RTOPT_ERR_INTERNAL;
}

rtopt_status set_error(rtopt_status s, const std::string& msg) {
  g_last_error = msg;
  return s;
}

// Runs f, translating every exception into a status; nothing escapes the C boundary.
template <class F>
rtopt_status guarded(F&& f) {
  g_last_error.clear();
  try {
    return f();
  } catch (const rtopt::Error& e) {
    return set_error(code_for(e.kind()), e.what());
  } catch (const std::bad_alloc&) {
    return set_error(RTOPT_ERR_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return set_error(RTOPT_ERR_INTERNAL, e.what());
  } catch (...) {
    return set_error(RTOPT_ERR_INTERNAL, "unknown exception");
  }
}

#define RTOPT_REQUIRE(cond, what) \
  if (!(cond)) return set_error(RTOPT_ERR_INVALID_ARGUMENT, what)

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

template <std::size_t N>
void copy_text(char (&dst)[N], const std::string& src) {
  const std::size_t n = std::min(N - 1, src.size());
  std::memcpy(dst, src.data(), n);
  dst[n] = '\0';
}

double velocity_unit(const rtopt::SolutionBundle& b) {
  return b.physical ? b.scale.velocity_kms() : 1.0;
}

}  // namespace

extern "C" {

const char* rtopt_version(void) { return rtopt::kToolVersion; }

const char* rtopt_status_name(rtopt_status s) {
  switch (s) {
    case RTOPT_OK: return "ok";
    case RTOPT_ERR_INVALID_ARGUMENT: return "invalid_argument";
    case RTOPT_ERR_CONFIG: return "config";
    case RTOPT_ERR_IO: return "io";
    case RTOPT_ERR_HASH_MISMATCH: return "hash_mismatch";
    case RTOPT_ERR_NOT_CONVERGED: return "not_converged";
    case RTOPT_ERR_NUMERICAL: return "numerical";
    case RTOPT_ERR_DOMAIN: return "domain";
    case RTOPT_ERR_INTERNAL: return "internal";
  }
  return "unknown";
}

const char* rtopt_last_error(void) { return g_last_error.c_str(); }

void rtopt_string_free(char* s) { std::free(s); }

rtopt_status rtopt_scenario_validate(const char* path, char** diagnostics, int* errors,
                                     int* warnings) {
  return guarded([&]() -> rtopt_status {
    RTOPT_REQUIRE(path, "path is null");
    rtopt::ScenarioLoad load = rtopt::read_scenario(path);
    if (!load.has_errors() && load.scenario) {
      for (auto& d : rtopt::physics_checks(*load.scenario)) load.diagnostics.push_back(d);
    }
    int ne = 0, nw = 0;
    std::string text;
    for (const auto& d : load.diagnostics) {
      (d.level == rtopt::Diagnostic::Level::Error ? ne : nw) += 1;
      text += d.str(path) + "\n";
    }
    if (errors) *errors = ne;
    if (warnings) *warnings = nw;
    if (diagnostics) *diagnostics = dup_string(text);
    if (ne > 0) return set_error(RTOPT_ERR_CONFIG, "scenario has " + std::to_string(ne) + " error(s)");
    return RTOPT_OK;
  });
}

rtopt_status rtopt_scenario_load(const char* path, rtopt_scenario** out) {
  return guarded([&]() -> rtopt_status {
    RTOPT_REQUIRE(path && out, "null argument");
    *out = nullptr;
    auto h = std::make_unique<rtopt_scenario>();
    h->sc = rtopt::load_scenario(path);
    *out = h.release();
    return RTOPT_OK;
  });
}

void rtopt_scenario_free(rtopt_scenario* sc) { delete sc; }

rtopt_status rtopt_scenario_get_info(const rtopt_scenario* h, rtopt_scenario_info* out) {
  return guarded([&]() -> rtopt_status {
    RTOPT_REQUIRE(h && out, "null argument");
    const rtopt::Scenario& sc = h->sc;
    *out = rtopt_scenario_info{};
    copy_text(out->name, sc.name);
    copy_text(out->hash, sc.source_hash);
    out->physical = sc.physical;
    out->segments = sc.problem.segments();
    out->flybys = static_cast<int>(sc.problem.flybys.size());
    out->stochastic = sc.problem.stochastic;
    out->mc_samples = sc.montecarlo.samples;
    out->mc_seed = sc.montecarlo.seed;
    out->mc_linear = sc.montecarlo.linear;
    out->velocity_unit_kms = sc.physical ? sc.scale.velocity_kms() : 1.0;
    return RTOPT_OK;
  });
}

void rtopt_optimize_options_init(rtopt_optimize_options* opts) {
  if (opts) *opts = rtopt_optimize_options{};
}

rtopt_status rtopt_optimize(const rtopt_scenario* h, const rtopt_optimize_options* opts,
                            rtopt_solution** out) {
  return guarded([&]() -> rtopt_status {
    RTOPT_REQUIRE(h && out, "null argument");
    *out = nullptr;
    rtopt_optimize_options o{};
    if (opts) o = *opts;
    const rtopt::Scenario& sc = h->sc;
    rtopt::ScpParams params = sc.scp;
    if (o.max_iterations > 0) params.max_iterations = o.max_iterations;

    auto observer_for = [&](int phase) -> rtopt::IterationObserver {
      if (!o.progress) return {};
      return [&o, phase](const rtopt::IterationRecord& r) {
        rtopt_iteration it{phase,      r.iteration, r.rho,      r.dJ,
                           r.dL,       r.accepted,  r.tr_radius, r.weight,
                           r.violation, r.cost_bound, r.solver_status.c_str()};
        o.progress(&it, o.user);
      };
    };

    auto result = std::make_unique<rtopt_solution>();
    if (!o.stochastic) {
      const rtopt::ScpResult r = rtopt::deterministic_initial_guess(sc.problem, params, observer_for(1));
      result->bundle = rtopt::make_bundle(sc, r, false);
      *out = result.release();
      return RTOPT_OK;
    }
    RTOPT_REQUIRE(sc.problem.stochastic, "scenario has no uncertainty model; run deterministic");

    rtopt::Iterate seed;
    double seed_violation = 0.0;
    std::vector<rtopt::IterationRecord> seed_log;
    if (o.seed) {
      const rtopt::SolutionBundle& sb = o.seed->bundle;
      if (sb.scenario_hash != sc.source_hash)
        return set_error(RTOPT_ERR_HASH_MISMATCH, "seed solution was produced from scenario " +
                                                      sb.scenario_hash + ", not " + sc.source_hash);
      if (sb.kinds != sc.problem.grid.kinds)
        return set_error(RTOPT_ERR_INVALID_ARGUMENT, "seed solution has a different grid");
      seed = sb.iterate;
      seed_violation = sb.violation;
      seed_log = sb.log;
    } else {
      const rtopt::ScpResult r = rtopt::deterministic_initial_guess(sc.problem, params, observer_for(0));
      seed = r.iterate;
      seed_violation = rtopt::violation(r.evaluation);
      seed_log = r.log;
    }
    if (sc.require_feasible_seed && !o.allow_infeasible_seed && !(seed_violation <= params.eps_feas)) {
      std::ostringstream msg;
      msg << "deterministic seed is not feasible (violation " << seed_violation << " > "
          << params.eps_feas << ")";
      return set_error(RTOPT_ERR_NOT_CONVERGED, msg.str());
    }
    const rtopt::ScpResult r =
        rtopt::run_scp(sc.problem, rtopt::with_zero_gains(sc.problem, seed), params, observer_for(1));
    result->bundle = rtopt::make_bundle(sc, r, true, seed_log);
    *out = result.release();
    return RTOPT_OK;
  });
}

rtopt_status rtopt_solution_get_summary(const rtopt_solution* s, rtopt_solution_summary* out) {
  return guarded([&]() -> rtopt_status {
    RTOPT_REQUIRE(s && out, "null argument");
    const rtopt::SolutionBundle& b = s->bundle;
    *out = rtopt_solution_summary{};
    copy_text(out->status, b.status);
    copy_text(out->scenario_hash, b.scenario_hash);
    out->stochastic = b.stochastic;
    out->converged = b.converged;
    out->iterations = b.iterations;
    out->segments = static_cast<int>(b.kinds.size());
    out->flybys = static_cast<int>(b.periapsis.size());
    out->dv_nominal = b.cost_nominal * velocity_unit(b);
    out->dv_bound = b.cost_bound * velocity_unit(b);
    out->violation = b.violation;
    return RTOPT_OK;
  });
}

rtopt_status rtopt_solution_control(const rtopt_solution* s, int k, double u[3], double* sigma) {
  return guarded([&]() -> rtopt_status {
    RTOPT_REQUIRE(s && u, "null argument");
    const auto& b = s->bundle;
    RTOPT_REQUIRE(k >= 0 && k < static_cast<int>(b.kinds.size()), "segment out of range");
    for (int i = 0; i < 3; ++i) u[i] = b.iterate.controls[k](i);
    if (sigma) *sigma = b.control_sigma[k];
    return RTOPT_OK;
  });
}

rtopt_status rtopt_solution_state(const rtopt_solution* s, int node, double x[6], double cov[36]) {
  return guarded([&]() -> rtopt_status {
    RTOPT_REQUIRE(s && x, "null argument");
    const auto& b = s->bundle;
    RTOPT_REQUIRE(node >= 0 && node < static_cast<int>(b.states.size()), "node out of range");
    for (int i = 0; i < 6; ++i) x[i] = b.states[node](i);
    if (cov)
      for (int r = 0; r < 6; ++r)
        for (int c = 0; c < 6; ++c) cov[6 * r + c] = b.state_cov[node](r, c);
    return RTOPT_OK;
  });
}

rtopt_status rtopt_solution_flyby(const rtopt_solution* s, int f, double* periapsis, double* rp_min,
                                  double* turn_angle) {
  return guarded([&]() -> rtopt_status {
    RTOPT_REQUIRE(s, "null argument");
    const auto& b = s->bundle;
    RTOPT_REQUIRE(f >= 0 && f < static_cast<int>(b.periapsis.size()), "flyby out of range");
    const double lu = b.physical ? b.scale.length_km : 1.0;
    if (periapsis) *periapsis = b.periapsis[f] * lu;
    if (rp_min) *rp_min = b.flyby_floor[f] * lu;
    if (turn_angle) *turn_angle = b.turn_angles[f];
    return RTOPT_OK;
  });
}

rtopt_status rtopt_solution_write(const rtopt_solution* s, const char* dir) {
  return guarded([&]() -> rtopt_status {
    RTOPT_REQUIRE(s && dir, "null argument");
    rtopt::write_bundle(s->bundle, dir);
    return RTOPT_OK;
  });
}

rtopt_status rtopt_solution_read(const char* dir, rtopt_solution** out) {
  return guarded([&]() -> rtopt_status {
    RTOPT_REQUIRE(dir && out, "null argument");
    *out = nullptr;
    auto h = std::make_unique<rtopt_solution>();
    h->bundle = rtopt::read_bundle(dir);
    *out = h.release();
    return RTOPT_OK;
  });
}

void rtopt_solution_free(rtopt_solution* s) { delete s; }

void rtopt_mc_options_init(rtopt_mc_options* opts) {
  if (!opts) return;
  *opts = rtopt_mc_options{};
  opts->mode = -1;
  opts->threads = 1;
}

rtopt_status rtopt_montecarlo(const rtopt_scenario* h, const rtopt_solution* s,
                              const rtopt_mc_options* opts, rtopt_mc_report** out) {
  return guarded([&]() -> rtopt_status {
    RTOPT_REQUIRE(h && s && out, "null argument");
    *out = nullptr;
    rtopt_mc_options o;
    rtopt_mc_options_init(&o);
    if (opts) o = *opts;
    const rtopt::Scenario& sc = h->sc;
    const rtopt::SolutionBundle& b = s->bundle;
    if (b.scenario_hash != sc.source_hash && !o.force)
      return set_error(RTOPT_ERR_HASH_MISMATCH,
                       "solution was produced from scenario " + b.scenario_hash +
                           " but the given scenario hashes to " + sc.source_hash);
    if (b.kinds != sc.problem.grid.kinds)
      return set_error(RTOPT_ERR_INVALID_ARGUMENT, "solution grid does not match the scenario");
    RTOPT_REQUIRE(o.samples >= 0, "samples must be non-negative");

    rtopt::McOptions mo;
    mo.samples = o.samples > 0 ? o.samples : sc.montecarlo.samples;
    mo.seed = o.use_seed ? o.seed : sc.montecarlo.seed;
    mo.linear = o.mode < 0 ? sc.montecarlo.linear : o.mode == 1;
    mo.threads = std::max(1, o.threads);

    // A deterministic solution is played back open loop against the scenario's noise.
    rtopt::Iterate policy = b.iterate;
    if (!b.stochastic) policy.gains = rtopt::GainMatrix::zero(sc.problem.segments());

    auto r = std::make_unique<rtopt_mc_report>();
    r->keep_samples = o.keep_samples != 0;
    r->report = rtopt::run_campaign(sc.problem, policy, mo, r->keep_samples ? &r->samples : nullptr);
    r->sc = std::make_shared<rtopt::Scenario>(sc);
    r->bundle = b;
    *out = r.release();
    return RTOPT_OK;
  });
}

rtopt_status rtopt_mc_get_summary(const rtopt_mc_report* h, rtopt_mc_summary* out) {
  return guarded([&]() -> rtopt_status {
    RTOPT_REQUIRE(h && out, "null argument");
    const rtopt::McReport& r = h->report;
    const double vu = velocity_unit(h->bundle);
    const rtopt::BoundCheck bc = rtopt::compare_bound(r, r.j_ub);
    *out = rtopt_mc_summary{};
    out->samples = r.samples;
    out->failed = r.failed;
    out->campaign_failed = r.campaign_failed();
    out->linear = r.linear;
    out->dv_probability = r.dv_probability;
    out->dv_nominal = r.dv_nominal * vu;
    out->dv_quantile = r.dv_quantile * vu;
    out->dv_quantile_executed = r.dv_quantile_executed * vu;
    out->dv_quantile_halfwidth = r.dv_quantile_halfwidth * vu;
    out->dv_bound = r.j_ub * vu;
    out->dv_bound_holds = bc.holds;
    out->thrust_violations = r.thrust_violations;
    const int ok = r.samples - r.failed;
    double worst = 0.0;
    for (double v : r.thrust_violation_rate) worst = std::max(worst, v);
    out->thrust_worst_count = static_cast<int>(std::lround(worst * ok));
    out->thrust_allowed_count =
        ok > 0 ? rtopt::binomial_upper_count(ok, h->sc->problem.eps_thrust, 0.99) : 0;
    double margin = 0.0;
    for (std::size_t f = 0; f < r.flybys.size(); ++f) {
      out->flyby_below_floor += r.flybys[f].below_floor;
      const double m = r.flybys[f].min / r.flybys[f].floor;
      margin = f == 0 ? m : std::min(margin, m);
    }
    out->flyby_min_margin = margin;
    out->terminal_bound_ratio = r.terminal_bound_ratio;
    const double pn = r.terminal_cov_predicted.norm();
    out->terminal_cov_rel_error =
        pn > 0.0 ? (r.terminal_cov_sample - r.terminal_cov_predicted).norm() / pn : 0.0;
    out->od_containment = r.od_containment;
    return RTOPT_OK;
  });
}

rtopt_status rtopt_mc_write(const rtopt_mc_report* h, const char* dir) {
  return guarded([&]() -> rtopt_status {
    RTOPT_REQUIRE(h && dir, "null argument");
    rtopt::write_mc_report(h->report, *h->sc, h->bundle, dir,
                           h->keep_samples ? &h->samples : nullptr);
    return RTOPT_OK;
  });
}

void rtopt_mc_free(rtopt_mc_report* r) { delete r; }

rtopt_status rtopt_report(const char* bundle_dir, const char* mc_dir, const char* out_dir,
                          char** summary) {
  return guarded([&]() -> rtopt_status {
    RTOPT_REQUIRE(bundle_dir && out_dir, "null argument");
    const rtopt::SolutionBundle b = rtopt::read_bundle(bundle_dir);
    std::string mc_json;
    if (mc_dir) {
      const std::string path = std::string(mc_dir) + "/report.json";
      std::ifstream f(path, std::ios::binary);
      if (!f) return set_error(RTOPT_ERR_IO, "cannot read " + path);
      std::ostringstream ss;
      ss << f.rdbuf();
      mc_json = ss.str();
    }
    const std::string text = rtopt::write_report(b, mc_json, out_dir);
    if (summary) *summary = dup_string(text);
    return RTOPT_OK;
  });
}

}  // extern "C"
