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

#include <memory>
#include <vector>

#include "rtopt/covsteer.hpp"
#include "rtopt/dynamics.hpp"
#include "rtopt/uncertainty.hpp"

namespace rtopt {

/// Surrogate used for matrix 2-norms in the chance constraints and cost.
/// Frobenius upper-bounds the spectral norm, so it is conservative.
enum class MatrixNorm { Frobenius, SpectralPsd };

/// Initial mean state: either fixed, or launched from a body with a bounded
/// excess speed.
struct LaunchSpec {
  bool from_body = false;
  int body = -1;
  double vinf_max = 0.0;
  Vec6 state = Vec6::Zero();
};

/// Powered-free flyby occupying the zero-duration segment `segment`.
struct FlybySpec {
  int segment = 0;
  int body = 0;
  double mu = 0.0;
  double rp_min = 0.0;
  double theta_min = 0.0;
  double theta_max = 0.0;
};

/// Final mean target (fixed, or rendezvous with a body) and the bound on the
/// total final covariance.
struct TerminalSpec {
  bool to_body = false;
  int body = -1;
  Vec6 state = Vec6::Zero();
  Mat6 cov = Mat6::Zero();
};

struct UncertaintyModel {
  Mat6 estimate_cov0 = Mat6::Zero();  // dispersion of the prior estimate
  Mat6 error_cov0 = Mat6::Zero();     // prior estimation error
  GatesParams gates;
  ProcessNoiseSpec process;
  ObservationModel obs;
};

/// Everything the optimizer needs, in normalized units.
struct MissionProblem {
  DynamicsModel model;
  PropagationOptions prop;
  TimeGrid grid;
  std::vector<BodyEphemeris> bodies;
  LaunchSpec launch;
  std::vector<FlybySpec> flybys;
  TerminalSpec terminal;
  double u_max = 0.0;
  double eps_thrust = 1e-3;
  double eps_flyby = 1e-3;
  double dv_probability = 0.99;
  bool stochastic = true;
  UncertaintyModel uncertainty;
  MatrixNorm matrix_norm = MatrixNorm::Frobenius;
  /// Gains feed back the last `gain_memory` innovations; 0 keeps the full history.
  int gain_memory = 0;

  int segments() const { return grid.segments(); }
  Vec6 body_state(int body, double t) const;
  Vec6 terminal_target() const;
  /// Index into flybys of the flyby on segment k, or -1.
  int flyby_at(int k) const;
  /// First node whose innovation node k may feed back.
  int gain_first(int k) const;
  /// Copy with all noise removed and gains disabled.
  MissionProblem deterministic() const;
  void check() const;
};

/// Mean trajectory parameters: initial mean, controls (Cayley parameters on
/// flyby segments) and causal gains on the z-feedback form.
struct Iterate {
  Vec6 x0 = Vec6::Zero();
  std::vector<Vec3> controls;
  GainMatrix gains;
};

/// Nonlinear evaluation of an iterate together with the linearization the
/// next subproblem is built on.
struct Evaluation {
  std::vector<Vec6> states;
  std::vector<LinearSegment> segments;
  std::vector<Vec3> planet_velocity;   // per flyby
  std::vector<double> turn_angles;     // per flyby, achieved
  KalmanSchedule kf;
  std::shared_ptr<const BlockSystem> blocks;
  ClosedLoopFactors factors;
  std::vector<double> control_sigma;   // matrix norm of P_u^1/2 per segment
  std::vector<double> flyby_sigma;     // matrix norm of the excess-velocity factor
  std::vector<double> periapsis;       // per flyby
  double cost_nominal = 0.0;
  double cost_bound = 0.0;
  VecX eq_residual;    // final mean defect, then flyby position defects
  VecX ineq_residual;  // flyby periapsis constraints
};

Evaluation evaluate(const MissionProblem& prob, const Iterate& it);

/// Matrix norm under the configured surrogate.
double matrix_norm(const MatX& m, MatrixNorm kind);

/// Sampling margins for the thrust, flyby and cost quantiles.
double thrust_margin(const MissionProblem& prob);
double flyby_margin(const MissionProblem& prob);
double cost_margin(const MissionProblem& prob);

/// Excess-velocity rows of the total covariance factor at node k:
/// [E_v P_hat^1/2, E_v P_tilde^1/2].
MatX flyby_velocity_factor(const Evaluation& ev, int k);

}  // namespace rtopt
