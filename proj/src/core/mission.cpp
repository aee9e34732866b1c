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

#include "rtopt/mission.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "rtopt/errors.hpp"
#include "rtopt/gravity_assist.hpp"
#include "rtopt/risk.hpp"

namespace rtopt {

Vec6 MissionProblem::body_state(int body, double t) const {
  if (body < 0 || body >= static_cast<int>(bodies.size()))
    fail(ErrorKind::InvalidArgument, "body index out of range");
  return planet_state(bodies[body], model.mu, t);
}

Vec6 MissionProblem::terminal_target() const {
  return terminal.to_body ? body_state(terminal.body, grid.epochs.back()) : terminal.state;
}

int MissionProblem::flyby_at(int k) const {
  for (int f = 0; f < static_cast<int>(flybys.size()); ++f)
    if (flybys[f].segment == k) return f;
  return -1;
}

int MissionProblem::gain_first(int k) const {
  return gain_memory <= 0 ? 0 : std::max(0, k - gain_memory + 1);
}

MissionProblem MissionProblem::deterministic() const {
  MissionProblem out = *this;
  out.stochastic = false;
  out.uncertainty = UncertaintyModel{};
  out.uncertainty.obs.nodes.assign(grid.nodes(), ObservationNode{});
  return out;
}

void MissionProblem::check() const {
  grid.check();
  const int n = segments();
  if (n < 1) fail(ErrorKind::Config, "grid needs at least one segment");
  if (!(u_max > 0.0)) fail(ErrorKind::Config, "u_max must be positive");
  for (double eps : {eps_thrust, eps_flyby})
    if (!(eps > 0.0 && eps < 0.5)) fail(ErrorKind::Config, "risk levels must lie in (0, 0.5)");
  if (!(dv_probability > 0.0 && dv_probability < 1.0))
    fail(ErrorKind::Config, "cost quantile must lie in (0, 1)");
  const int nb = static_cast<int>(bodies.size());
  if (launch.from_body && (launch.body < 0 || launch.body >= nb))
    fail(ErrorKind::Config, "launch body index out of range");
  if (launch.from_body && !(launch.vinf_max >= 0.0))
    fail(ErrorKind::Config, "launch excess speed bound must be nonnegative");
  if (terminal.to_body && (terminal.body < 0 || terminal.body >= nb))
    fail(ErrorKind::Config, "terminal body index out of range");
  int ga_count = 0;
  for (int k = 0; k < n; ++k)
    if (grid.kinds[k] == SegmentKind::GravityAssist) {
      ++ga_count;
      if (flyby_at(k) < 0)
        fail(ErrorKind::Config, "flyby segment " + std::to_string(k) + " has no flyby data");
    }
  if (ga_count != static_cast<int>(flybys.size()))
    fail(ErrorKind::Config, "flyby count does not match the grid");
  for (const auto& f : flybys) {
    if (f.segment < 0 || f.segment >= n || grid.kinds[f.segment] != SegmentKind::GravityAssist)
      fail(ErrorKind::Config, "flyby segment index is not a flyby segment of the grid");
    if (f.body < 0 || f.body >= nb) fail(ErrorKind::Config, "flyby body index out of range");
    if (!(f.mu > 0.0 && f.rp_min > 0.0))
      fail(ErrorKind::Config, "flyby needs positive mu and rp_min");
    if (!(0.0 < f.theta_min && f.theta_min < f.theta_max && f.theta_max < M_PI))
      fail(ErrorKind::Config, "flyby turn-angle bounds must satisfy 0 < min < max < pi");
  }
  if (stochastic) {
    if (static_cast<int>(uncertainty.obs.nodes.size()) != grid.nodes())
      fail(ErrorKind::Config, "observation schedule does not match the grid");
    Eigen::LLT<Mat6> llt(terminal.cov);
    if (llt.info() != Eigen::Success)
      fail(ErrorKind::Config, "final covariance bound must be positive definite");
  }
}

double matrix_norm(const MatX& m, MatrixNorm kind) {
  if (m.size() == 0) return 0.0;
  if (kind == MatrixNorm::Frobenius) return m.norm();
  Eigen::JacobiSVD<MatX> svd(m);
  return svd.singularValues()(0);
}

double thrust_margin(const MissionProblem& p) { return chi2_margin(p.eps_thrust, kControlDim); }
double flyby_margin(const MissionProblem& p) { return chi2_margin(p.eps_flyby, 3); }
double cost_margin(const MissionProblem& p) {
  return chi2_margin(1.0 - p.dv_probability, kControlDim);
}

MatX flyby_velocity_factor(const Evaluation& ev, int k) {
  const MatX& ph = ev.factors.dispersion[k];
  const MatX pt = psd_factor(ev.kf.nodes[k].post_cov);
  MatX out(3, ph.cols() + 6);
  out << ph.bottomRows(3), pt.bottomRows(3);
  return out;
}

Evaluation evaluate(const MissionProblem& prob, const Iterate& it) {
  const int n = prob.segments();
  if (static_cast<int>(it.controls.size()) != n)
    fail(ErrorKind::InvalidArgument, "iterate control count does not match the grid");
  if (prob.stochastic && it.gains.segments() != n)
    fail(ErrorKind::InvalidArgument, "iterate gains do not match the grid");
  Evaluation ev;
  ev.states.resize(n + 1);
  ev.segments.resize(n);
  ev.planet_velocity.assign(prob.flybys.size(), Vec3::Zero());
  const Mat63 proc =
      prob.stochastic ? process_noise_sqrt(prob.uncertainty.process) : Mat63::Zero();
  Vec6 x = it.x0;
  ev.states[0] = x;
  for (int k = 0; k < n; ++k) {
    const double t0 = prob.grid.epochs[k], t1 = prob.grid.epochs[k + 1];
    const Vec3& u = it.controls[k];
    switch (prob.grid.kinds[k]) {
      case SegmentKind::GravityAssist: {
        const int f = prob.flyby_at(k);
        const Vec3 vp = prob.body_state(prob.flybys[f].body, t0).tail<3>();
        ev.planet_velocity[f] = vp;
        ev.segments[k] = ga_linearize(x, u, vp);
        break;
      }
      case SegmentKind::Thrust: {
        const Mat3 exec =
            prob.stochastic ? gates_matrix(u, prob.uncertainty.gates) : Mat3::Zero();
        ev.segments[k] = linearize_segment(prob.model, x, u, t0, t1, exec, proc, prob.prop);
        break;
      }
      case SegmentKind::Coast:
        ev.segments[k] = linearize_segment(prob.model, x, Vec3::Zero(), t0, t1, Mat3::Zero(),
                                           proc, prob.prop);
        break;
    }
    x = ev.segments[k].x_end;
    ev.states[k + 1] = x;
  }

  ev.control_sigma.assign(n, 0.0);
  if (prob.stochastic) {
    ev.kf = kalman_schedule(ev.segments, prob.uncertainty.obs, prob.uncertainty.error_cov0);
    ev.blocks = std::make_shared<BlockSystem>(ev.segments, ev.kf,
                                              prob.uncertainty.estimate_cov0);
    ev.factors = closed_loop_factors(*ev.blocks, it.gains);
    for (int k = 0; k < n; ++k)
      if (prob.grid.kinds[k] == SegmentKind::Thrust)
        ev.control_sigma[k] = matrix_norm(ev.factors.control[k], prob.matrix_norm);
  }

  const double mp = cost_margin(prob);
  for (int k = 0; k < n; ++k) {
    if (prob.grid.kinds[k] != SegmentKind::Thrust) continue;
    const double dt = prob.grid.duration(k);
    ev.cost_nominal += it.controls[k].norm() * dt;
    ev.cost_bound += (it.controls[k].norm() + mp * ev.control_sigma[k]) * dt;
  }

  const int nf = static_cast<int>(prob.flybys.size());
  ev.eq_residual.resize(6 + 3 * nf);
  ev.eq_residual.head<6>() = ev.states[n] - prob.terminal_target();
  ev.ineq_residual.resize(nf);
  ev.turn_angles.resize(nf);
  ev.flyby_sigma.assign(nf, 0.0);
  ev.periapsis.resize(nf);
  const double mg = flyby_margin(prob);
  for (int f = 0; f < nf; ++f) {
    const auto& fb = prob.flybys[f];
    const int k = fb.segment;
    const Vec6 body = prob.body_state(fb.body, prob.grid.epochs[k]);
    ev.eq_residual.segment<3>(6 + 3 * f) = ev.states[k].head<3>() - body.head<3>();
    const Vec3 vp = ev.planet_velocity[f];
    const Vec3 vin = ev.states[k].tail<3>() - vp;
    const Vec3 vout = ev.states[k + 1].tail<3>() - vp;
    const double theta = turn_angle(vin, vout);
    ev.turn_angles[f] = theta;
    if (prob.stochastic)
      ev.flyby_sigma[f] = matrix_norm(flyby_velocity_factor(ev, k), prob.matrix_norm);
    const double th = std::max(theta, 1e-9);
    ev.ineq_residual(f) =
        impact_residual(ev.states[k].tail<3>(), vp, ev.flyby_sigma[f], th, fb.mu, fb.rp_min, mg);
    ev.periapsis[f] = vin.squaredNorm() > 0.0 ? periapsis_radius(vin, th, fb.mu)
                                              : std::numeric_limits<double>::infinity();
  }
  return ev;
}

}  // namespace rtopt
