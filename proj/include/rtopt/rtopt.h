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

/* C interface to the robust trajectory optimizer. All handles are opaque;
 * every call that can fail returns an rtopt_status and leaves a message for
 * rtopt_last_error() on the calling thread. */
#ifndef RTOPT_RTOPT_H
#define RTOPT_RTOPT_H

#include <stddef.h>
#include <stdint.h>

#if defined(RTOPT_BUILDING_LIBRARY)
#define RTOPT_API __attribute__((visibility("default")))
#else
#define RTOPT_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum rtopt_status {
  RTOPT_OK = 0,
  RTOPT_ERR_INVALID_ARGUMENT = 1,
  RTOPT_ERR_CONFIG = 2,
  RTOPT_ERR_IO = 3,
  RTOPT_ERR_HASH_MISMATCH = 4,
  RTOPT_ERR_NOT_CONVERGED = 5,
  RTOPT_ERR_NUMERICAL = 6,
  RTOPT_ERR_DOMAIN = 7,
  RTOPT_ERR_INTERNAL = 8
} rtopt_status;

typedef struct rtopt_scenario rtopt_scenario;
typedef struct rtopt_solution rtopt_solution;
typedef struct rtopt_mc_report rtopt_mc_report;

RTOPT_API const char* rtopt_version(void);
RTOPT_API const char* rtopt_status_name(rtopt_status s);
/* Message of the last failed call on this thread; empty after success. */
RTOPT_API const char* rtopt_last_error(void);
/* Frees strings returned through char** out-parameters. */
RTOPT_API void rtopt_string_free(char* s);

/* ---- scenarios ---- */

/* Parses and checks a scenario file. Diagnostics (one per line, with file and
 * line) are returned even when errors are found; RTOPT_OK means none were. */
RTOPT_API rtopt_status rtopt_scenario_validate(const char* path, char** diagnostics,
                                               int* errors, int* warnings);
RTOPT_API rtopt_status rtopt_scenario_load(const char* path, rtopt_scenario** out);
RTOPT_API void rtopt_scenario_free(rtopt_scenario* sc);

typedef struct rtopt_scenario_info {
  char name[128];
  char hash[65];
  int physical;
  int segments;
  int flybys;
  int stochastic;
  int mc_samples;
  uint64_t mc_seed;
  int mc_linear;
  double velocity_unit_kms; /* 1 for normalized scenarios */
} rtopt_scenario_info;

RTOPT_API rtopt_status rtopt_scenario_get_info(const rtopt_scenario* sc, rtopt_scenario_info* out);

/* ---- optimization ---- */

typedef struct rtopt_iteration {
  int phase; /* 0: deterministic seeding run, 1: requested run */
  int iteration;
  double rho;
  double d_actual;
  double d_predicted;
  int accepted;
  double trust_radius;
  double weight;
  double violation;
  double cost_bound;
  const char* solver_status;
} rtopt_iteration;

typedef void (*rtopt_progress_fn)(const rtopt_iteration* it, void* user);

typedef struct rtopt_optimize_options {
  int stochastic;
  /* Deterministic solution to start the stochastic run from; NULL solves one first. */
  const rtopt_solution* seed;
  int max_iterations; /* 0: scenario value */
  int allow_infeasible_seed; /* start the stochastic run from an infeasible deterministic seed */
  rtopt_progress_fn progress;
  void* user;
} rtopt_optimize_options;

RTOPT_API void rtopt_optimize_options_init(rtopt_optimize_options* opts);

/* Succeeds whenever a solution was produced, converged or not; check the summary. */
RTOPT_API rtopt_status rtopt_optimize(const rtopt_scenario* sc, const rtopt_optimize_options* opts,
                                      rtopt_solution** out);

typedef struct rtopt_solution_summary {
  char status[32];
  char scenario_hash[65];
  int stochastic;
  int converged;
  int iterations;
  int segments;
  int flybys;
  double dv_nominal; /* velocity units of the scenario */
  double dv_bound;
  double violation;
} rtopt_solution_summary;

RTOPT_API rtopt_status rtopt_solution_get_summary(const rtopt_solution* s,
                                                  rtopt_solution_summary* out);
/* Normalized control (or flyby parameters) of segment k and its dispersion norm. */
RTOPT_API rtopt_status rtopt_solution_control(const rtopt_solution* s, int k, double u[3],
                                              double* sigma);
/* Normalized mean state and total covariance (row-major 6x6, may be NULL) at a node. */
RTOPT_API rtopt_status rtopt_solution_state(const rtopt_solution* s, int node, double x[6],
                                            double cov[36]);
/* Periapsis radius and its floor, in km for physical scenarios. */
RTOPT_API rtopt_status rtopt_solution_flyby(const rtopt_solution* s, int f, double* periapsis,
                                            double* rp_min, double* turn_angle);
RTOPT_API rtopt_status rtopt_solution_write(const rtopt_solution* s, const char* dir);
RTOPT_API rtopt_status rtopt_solution_read(const char* dir, rtopt_solution** out);
RTOPT_API void rtopt_solution_free(rtopt_solution* s);

/* ---- Monte Carlo ---- */

typedef struct rtopt_mc_options {
  int samples;     /* 0: scenario value */
  int use_seed;    /* nonzero: override the scenario seed */
  uint64_t seed;
  int mode;        /* -1: scenario value, 0: nonlinear truth, 1: linearized truth */
  int threads;     /* 0 or 1: serial */
  int force;       /* run even if the solution came from a different scenario file */
  int keep_samples; /* also write per-sample rows (samples.csv) */
} rtopt_mc_options;

RTOPT_API void rtopt_mc_options_init(rtopt_mc_options* opts);
RTOPT_API rtopt_status rtopt_montecarlo(const rtopt_scenario* sc, const rtopt_solution* s,
                                        const rtopt_mc_options* opts, rtopt_mc_report** out);

typedef struct rtopt_mc_summary {
  int samples;
  int failed;
  int campaign_failed;
  int linear;
  double dv_probability;
  double dv_nominal; /* velocity units of the scenario */
  double dv_quantile;
  double dv_quantile_executed;
  double dv_quantile_halfwidth;
  double dv_bound;
  int dv_bound_holds;
  int thrust_violations;
  int thrust_worst_count;    /* largest per-segment violation count */
  int thrust_allowed_count;  /* one-sided 99% binomial quantile at the thrust risk */
  int flyby_below_floor;
  double flyby_min_margin;   /* min over flybys of periapsis_min / rp_min; 0 without flybys */
  double terminal_bound_ratio;
  double terminal_cov_rel_error; /* |S - P|_F / |P|_F, sample vs predicted */
  double od_containment;
} rtopt_mc_summary;

RTOPT_API rtopt_status rtopt_mc_get_summary(const rtopt_mc_report* r, rtopt_mc_summary* out);
RTOPT_API rtopt_status rtopt_mc_write(const rtopt_mc_report* r, const char* dir);
RTOPT_API void rtopt_mc_free(rtopt_mc_report* r);

/* ---- reporting ---- */

/* Plot data and summary.txt in out_dir from a bundle and an optional Monte
 * Carlo directory (NULL to skip). The summary text is returned in *summary. */
RTOPT_API rtopt_status rtopt_report(const char* bundle_dir, const char* mc_dir,
                                    const char* out_dir, char** summary);

#ifdef __cplusplus
}
#endif

#endif /* RTOPT_RTOPT_H */
