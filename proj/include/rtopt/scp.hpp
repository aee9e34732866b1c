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

#pragma once

#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "rtopt/subproblem.hpp"

namespace rtopt {

struct ScpParams {
  double eps_opt = 1e-6;
  double eps_feas = 1e-6;
  double eta0 = 1.0;
  double eta1 = 0.5;
  double eta2 = 0.1;
  double alpha1 = 2.0;
  double alpha2 = 3.0;
  double beta = 2.0;
  double gamma = 0.95;
  double weight_init = 1e2;
  double weight_max = 1e10;
  double tr_init = 0.1;
  double tr_min = 1e-8;
  double tr_max = 1.0;
  double tau = 1.1;
  int max_iterations = 200;
  /// Consecutive numerical solver failures tolerated before giving up.
  int max_solver_retries = 6;
  SolverSettings solver;

  void check() const;
};

struct IterationRecord {
  int iteration = 0;
  double rho = 0.0;
  double dJ = 0.0;
  double dL = 0.0;
  bool accepted = false;
  double tr_radius = 0.0;
  double weight = 0.0;
  double violation = 0.0;
  double cost_bound = 0.0;
  std::string solver_status;
};

enum class ScpStatus { Converged, IterationLimit, Infeasible, NumericalFailure, Stalled };
const char* to_string(ScpStatus s);

struct ScpResult {
  ScpStatus status = ScpStatus::IterationLimit;
  Iterate iterate;
  Evaluation evaluation;
  PenaltyState penalty;
  double tr_radius = 0.0;
  std::vector<IterationRecord> log;
};

/// rho = dJ / dL; dL <= 1e-12 counts as a degenerate (stalled) step with rho = 1.
double step_ratio(double dJ, double dL, bool* degenerate = nullptr);

struct StepDecision {
  bool accepted = false;
  double radius = 0.0;
};

/// Acceptance band and trust-region update.
StepDecision accept_and_update(double rho, double radius, const ScpParams& p);

/// lambda += phi'(w g_eq), mu = [mu + phi'(w g_ineq)]+.
void update_multipliers(PenaltyState& ps, const VecX& eq, const VecX& ineq);

using IterationObserver = std::function<void(const IterationRecord&)>;

/// Trust-region augmented-Lagrangian SCP from the given reference.
ScpResult run_scp(const MissionProblem& prob, const Iterate& initial, const ScpParams& params,
                  const IterationObserver& observer = {});

/// Crude reference: coast from the launch state, zero gains and flyby parameters.
Iterate heuristic_guess(const MissionProblem& prob);

/// Deterministic solve (noise removed, gains pinned to zero) from the heuristic guess.
ScpResult deterministic_initial_guess(const MissionProblem& prob, const ScpParams& params,
                                      const IterationObserver& observer = {});

/// Lifts a deterministic iterate to the stochastic problem with zero gains.
Iterate with_zero_gains(const MissionProblem& prob, const Iterate& it);

}  // namespace rtopt
