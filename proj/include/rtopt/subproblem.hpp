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

#include <string>
#include <vector>

#include "rtopt/conic.hpp"
#include "rtopt/mission.hpp"

namespace rtopt {

/// Augmented-Lagrangian state of the relaxed constraints.
struct PenaltyState {
  VecX lambda;  // relaxed equalities
  VecX mu;      // relaxed inequalities, entrywise >= 0
  double weight = 1e2;
  double tau = 1.1;

  static PenaltyState initial(int n_eq, int n_ineq, double weight, double tau);
};

/// phi(z) = |z|^tau / tau + z^2 / 2, smooth away from 0 and l1-like near it.
double penalty_phi(double z, double tau);
double penalty_phi_grad(double z, double tau);

/// sum lambda g + phi(w g) / w over equalities plus the same with mu and
/// [h]+ over inequalities.
double penalty_value(const VecX& eq, const VecX& ineq, const PenaltyState& ps);

/// Infinity-norm step bound on states, controls and turn angles:
/// scale * |step| <= radius per entry.
struct TrustRegion {
  double radius = 0.1;
  double min_radius = 1e-8;
  double max_radius = 1.0;
  double scale_state = 1.0;
  double scale_control = 1.0;
  double scale_angle = 1.0;
};

/// Assembled convex subproblem with the bookkeeping needed to read back an
/// iterate. Gains enter through the control factors W_k = P_u_k^1/2, which are
/// affine in K and confined to the row space of the stacked dispersion rows.
struct Subproblem {
  ConicProgram program;
  int x_offset = 0;
  int u_offset = 0;
  int theta_offset = 0;
  int eq_buffer_offset = 0;
  int ineq_buffer_offset = 0;
  std::vector<int> factor_offset;  // per segment, -1 without a gain
  std::vector<int> factor_cols;
  std::vector<MatX> factor_pinv;   // maps W_k back to the gain blocks
};

/// Linearized convex subproblem about the evaluated reference.
Subproblem assemble(const MissionProblem& prob, const Iterate& ref, const Evaluation& ev,
                    const PenaltyState& ps, const TrustRegion& tr);

struct Candidate {
  Iterate iterate;
  std::vector<double> turn_angles;
  VecX eq_buffer;
  VecX ineq_buffer;
  std::vector<MatX> control_factors;
  double cost_bound = 0.0;
  /// Linearized augmented cost at the candidate.
  double predicted = 0.0;
};

Candidate extract(const MissionProblem& prob, const Subproblem& sp, const VecX& x,
                  const PenaltyState& ps);

/// Nonlinear augmented cost J_ub + P at an evaluated iterate.
double augmented_cost(const Evaluation& ev, const PenaltyState& ps);

/// Largest relaxed-constraint violation.
double violation(const Evaluation& ev);

/// One line per variable slice and cone kind, for inspection.
std::vector<std::string> layout_audit(const ConicProgram& prog);

}  // namespace rtopt
