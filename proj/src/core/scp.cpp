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

#include "rtopt/scp.hpp"

#include <cmath>

#include "rtopt/errors.hpp"
#include "rtopt/gravity_assist.hpp"

namespace rtopt {

void ScpParams::check() const {
  if (!(1.0 >= eta0 && eta0 > eta1 && eta1 > eta2 && eta2 > 0.0))
    fail(ErrorKind::Config, "acceptance thresholds must satisfy 1 >= eta0 > eta1 > eta2 > 0");
  if (!(alpha1 > 1.0 && alpha2 > 1.0 && beta > 1.0))
    fail(ErrorKind::Config, "trust-region and weight factors must exceed 1");
  if (!(gamma > 0.0 && gamma < 1.0)) fail(ErrorKind::Config, "gamma must lie in (0, 1)");
  if (!(tau > 1.0 && tau < 2.0)) fail(ErrorKind::Config, "tau must lie in (1, 2)");
  if (!(weight_init > 0.0 && weight_init <= weight_max))
    fail(ErrorKind::Config, "penalty weights must satisfy 0 < w_init <= w_max");
  if (!(tr_min > 0.0 && tr_min <= tr_init && tr_init <= tr_max))
    fail(ErrorKind::Config, "trust region must satisfy 0 < min <= initial <= max");
  if (!(eps_opt > 0.0 && eps_feas > 0.0)) fail(ErrorKind::Config, "tolerances must be positive");
  if (max_iterations < 1) fail(ErrorKind::Config, "iteration cap must be positive");
}

const char* to_string(ScpStatus s) {
  switch (s) {
    case ScpStatus::Converged: return "converged";
    case ScpStatus::IterationLimit: return "iteration_limit";
    case ScpStatus::Infeasible: return "infeasible";
    case ScpStatus::NumericalFailure: return "numerical_failure";
    case ScpStatus::Stalled: return "stalled";
  }
  return "unknown";
}

double step_ratio(double dJ, double dL, bool* degenerate) {
  const bool deg = dL <= 1e-12;
  if (degenerate) *degenerate = deg;
  return deg ? 1.0 : dJ / dL;
}

StepDecision accept_and_update(double rho, double radius, const ScpParams& p) {
  StepDecision d;
  const double dev = std::abs(1.0 - rho);
  d.accepted = dev <= p.eta0;
  if (dev <= p.eta2)
    d.radius = std::min(p.alpha2 * radius, p.tr_max);
  else if (dev <= p.eta1)
    d.radius = radius;
  else
    d.radius = std::max(radius / p.alpha1, p.tr_min);
  return d;
}

void update_multipliers(PenaltyState& ps, const VecX& eq, const VecX& ineq) {
  const double w = ps.weight;
  for (int i = 0; i < eq.size(); ++i) ps.lambda(i) += penalty_phi_grad(w * eq(i), ps.tau);
  for (int i = 0; i < ineq.size(); ++i)
    ps.mu(i) = std::max(0.0, ps.mu(i) + penalty_phi_grad(w * ineq(i), ps.tau));
}

namespace {

// Minimum-norm thrust on the thrust segments of [first, last) steering the
// leading `rows` entries of node `last` onto the target (Gauss-Newton).
Vec6 shoot_leg(const MissionProblem& prob, Iterate& it, const Vec6& x_start, int first, int last,
               const Vec6& target, int rows) {
  std::vector<int> thrust;
  for (int k = first; k < last; ++k)
    if (prob.grid.kinds[k] == SegmentKind::Thrust) thrust.push_back(k);
  const int m = static_cast<int>(thrust.size());
  std::vector<LinearSegment> seg(last - first);
  Vec6 x_end = x_start;
  for (int iter = 0; iter <= 40; ++iter) {
    Vec6 x = x_start;
    for (int k = first; k < last; ++k) {
      const Vec3 u = prob.grid.kinds[k] == SegmentKind::Thrust ? it.controls[k] : Vec3::Zero();
      seg[k - first] = linearize_segment(prob.model, x, u, prob.grid.epochs[k],
                                         prob.grid.epochs[k + 1], Mat3::Zero(), Mat63::Zero(),
                                         prob.prop);
      x = seg[k - first].x_end;
    }
    x_end = x;
    const VecX defect = (target - x).head(rows);
    if (m == 0 || iter == 40 || defect.norm() < 1e-12) break;
    MatX J(rows, 3 * m);
    VecX u(3 * m);
    Mat6 phi = Mat6::Identity();
    for (int k = last - 1, j = m - 1; k >= first; --k) {
      if (j >= 0 && thrust[j] == k) {
        J.middleCols<3>(3 * j) = (phi * seg[k - first].B).topRows(rows);
        u.segment<3>(3 * j) = it.controls[k];
        --j;
      }
      phi = phi * seg[k - first].A;
    }
    VecX step = J.completeOrthogonalDecomposition().solve(defect + J * u) - u;
    // Damp large steps; the linearization is only local.
    const double cap = 5.0 * prob.u_max;
    const double big = step.cwiseAbs().maxCoeff();
    if (big > cap) step *= cap / big;
    // Projected step: each control stays within the thrust bound.
    for (int j = 0; j < m; ++j) {
      Vec3& uk = it.controls[thrust[j]];
      uk += step.segment<3>(3 * j);
      if (uk.norm() > prob.u_max) uk *= prob.u_max / uk.norm();
    }
  }
  return x_end;
}

Vec3 lambert_departure(const MissionProblem& prob, const Vec3& r1, double t1, const Vec3& r2,
                       double t2, const Vec3& fallback) {
  try {
    return lambert(r1, r2, t2 - t1, prob.model.mu).first;
  } catch (const Error&) {
    return fallback;
  }
}

// Cayley parameter turning `vin` toward `want` by an angle clamped to the
// flyby bounds.
Vec3 flyby_turn(const FlybySpec& fb, const Vec3& vin, const Vec3& want, const Vec6& x) {
  Vec3 axis = vin.cross(want);
  if (axis.norm() < 1e-12 * std::max(1e-300, vin.norm() * want.norm()))
    axis = x.head<3>().cross(x.tail<3>());
  if (axis.norm() == 0.0) axis = Vec3::UnitZ().cross(vin);
  if (axis.norm() == 0.0) axis = Vec3::UnitX();
  const double theta = std::clamp(turn_angle(vin, want), fb.theta_min, fb.theta_max);
  return cayley_align(vin, Eigen::AngleAxisd(theta, axis.normalized()) * vin);
}

}  // namespace

Iterate heuristic_guess(const MissionProblem& prob) {
  const int n = prob.segments();
  Iterate it;
  it.controls.assign(n, Vec3::Zero());
  if (prob.stochastic) it.gains = GainMatrix::zero(n);
  const auto& ep = prob.grid.epochs;

  // Legs end at each flyby's incoming node and at the final node.
  std::vector<int> ends;
  for (int k = 0; k < n; ++k)
    if (prob.grid.kinds[k] == SegmentKind::GravityAssist) ends.push_back(k);
  ends.push_back(n);
  auto leg_target = [&](std::size_t leg) -> std::pair<Vec6, int> {
    if (leg + 1 == ends.size()) return {prob.terminal_target(), 6};
    const FlybySpec& fb = prob.flybys[prob.flyby_at(ends[leg])];
    return {prob.body_state(fb.body, ep[ends[leg]]), 3};
  };

  if (prob.launch.from_body) {
    const Vec6 body = prob.body_state(prob.launch.body, ep.front());
    const Vec3 vb = body.tail<3>();
    const Vec6 tgt = leg_target(0).first;
    const Vec3 vdep = lambert_departure(prob, body.head<3>(), ep.front(), tgt.head<3>(),
                                        ep[ends[0]], vb + vb.normalized() * prob.launch.vinf_max);
    Vec3 vinf = vdep - vb;
    if (vinf.norm() > prob.launch.vinf_max) vinf *= prob.launch.vinf_max / vinf.norm();
    it.x0 << body.head<3>(), vb + vinf;
  } else {
    it.x0 = prob.launch.state;
  }

  Vec6 x = it.x0;
  int start = 0;
  for (std::size_t leg = 0; leg < ends.size(); ++leg) {
    const auto [target, rows] = leg_target(leg);
    x = shoot_leg(prob, it, x, start, ends[leg], target, rows);
    if (leg + 1 == ends.size()) break;
    const int k = ends[leg];
    const FlybySpec& fb = prob.flybys[prob.flyby_at(k)];
    const Vec6 body = prob.body_state(fb.body, ep[k]);
    const Vec3 vp = body.tail<3>();
    const Vec6 next = leg_target(leg + 1).first;
    // A zero turn angle is a singular point of the turn-angle row, so the
    // fallback direction is the body's velocity rather than vin itself.
    const Vec3 vdep =
        lambert_departure(prob, body.head<3>(), ep[k + 1], next.head<3>(), ep[ends[leg + 1]], 2.0 * vp);
    const Vec3 vin = x.tail<3>() - vp;
    it.controls[k] = flyby_turn(fb, vin, vdep - vp, x);
    x = ga_map(x, it.controls[k], vp);
    start = k + 1;
  }
  return it;
}

Iterate with_zero_gains(const MissionProblem& prob, const Iterate& it) {
  Iterate out = it;
  out.gains = prob.stochastic ? GainMatrix::zero(prob.segments()) : GainMatrix{};
  return out;
}

ScpResult deterministic_initial_guess(const MissionProblem& prob, const ScpParams& params,
                                      const IterationObserver& observer) {
  const MissionProblem det = prob.deterministic();
  return run_scp(det, heuristic_guess(det), params, observer);
}

namespace {

bool recoverable(const Error& e) {
  return e.kind() == ErrorKind::Integration || e.kind() == ErrorKind::Singularity ||
         e.kind() == ErrorKind::Numerical || e.kind() == ErrorKind::Domain;
}

}  // namespace

ScpResult run_scp(const MissionProblem& prob, const Iterate& initial, const ScpParams& params,
                  const IterationObserver& observer) {
  params.check();
  prob.check();
  const int nf = static_cast<int>(prob.flybys.size());
  ScpResult out;
  out.iterate = initial;
  if (prob.stochastic && out.iterate.gains.segments() != prob.segments())
    out.iterate.gains = GainMatrix::zero(prob.segments());
  out.evaluation = evaluate(prob, out.iterate);
  out.penalty = PenaltyState::initial(6 + 3 * nf, nf, params.weight_init, params.tau);
  double radius = params.tr_init;
  double chi_last = std::numeric_limits<double>::infinity();
  int retries = 0;
  TrustRegion tr;
  tr.min_radius = params.tr_min;
  tr.max_radius = params.tr_max;

  for (int iter = 1; iter <= params.max_iterations; ++iter) {
    IterationRecord rec;
    rec.iteration = iter;
    tr.radius = radius;
    const Subproblem sp = assemble(prob, out.iterate, out.evaluation, out.penalty, tr);
    const SolveResult res = solve_conic(sp.program, params.solver);
    rec.solver_status = to_string(res.status);
    auto finish = [&](IterationRecord& r) {
      r.tr_radius = radius;
      r.weight = out.penalty.weight;
      r.violation = violation(out.evaluation);
      r.cost_bound = out.evaluation.cost_bound;
      out.log.push_back(r);
      if (observer) observer(r);
    };

    if (res.status == SolveStatus::UnsupportedCone)
      fail(ErrorKind::Config, "embedded solver cannot handle the configured matrix norm");
    if (res.status == SolveStatus::PrimalInfeasible || res.status == SolveStatus::DualInfeasible) {
      finish(rec);
      out.status = ScpStatus::Infeasible;
      break;
    }
    if (res.status == SolveStatus::NumericalFailure || res.status == SolveStatus::IterationLimit) {
      // Safeguard: soften the penalty and retry about the same reference.
      out.penalty.weight = std::max(out.penalty.weight / params.beta, 1e-12);
      finish(rec);
      if (++retries > params.max_solver_retries) {
        out.status = ScpStatus::NumericalFailure;
        break;
      }
      continue;
    }
    retries = 0;

    const Candidate cand = extract(prob, sp, res.x, out.penalty);
    Evaluation ev_c;
    bool propagated = true;
    try {
      ev_c = evaluate(prob, cand.iterate);
    } catch (const Error& e) {
      if (!recoverable(e)) throw;
      propagated = false;
    }
    const double j_ref = augmented_cost(out.evaluation, out.penalty);
    if (!propagated) {
      rec.rho = -std::numeric_limits<double>::infinity();
      radius = std::max(radius / params.alpha1, params.tr_min);
      finish(rec);
      continue;
    }
    const double j_c = augmented_cost(ev_c, out.penalty);
    rec.dJ = j_ref - j_c;
    rec.dL = j_ref - cand.predicted;
    bool degenerate = false;
    rec.rho = step_ratio(rec.dJ, rec.dL, &degenerate);
    const StepDecision dec = accept_and_update(rec.rho, radius, params);
    const double chi_c = violation(ev_c);
    const double scale = std::max(1.0, std::abs(j_c));
    // A candidate that changes neither the true nor the model cost is stationary;
    // its ratio is pure round-off and must not block convergence.
    const bool stationary = std::abs(rec.dJ) <= params.eps_opt * scale &&
                            std::abs(rec.dL) <= params.eps_opt * scale;
    rec.accepted = dec.accepted || stationary;
    const double old_radius = radius;
    radius = dec.radius;
    if (rec.accepted) {
      out.iterate = cand.iterate;
      out.evaluation = std::move(ev_c);
    }
    finish(rec);

    if (rec.accepted) {
      if (std::abs(rec.dJ) <= params.eps_opt * scale && chi_c <= params.eps_feas) {
        out.status = ScpStatus::Converged;
        break;
      }
      update_multipliers(out.penalty, out.evaluation.eq_residual,
                         out.evaluation.ineq_residual);
      // Once feasible to tolerance a stiffer penalty only hurts conditioning.
      if (chi_c > params.eps_feas && chi_c > params.gamma * chi_last)
        out.penalty.weight = std::min(params.beta * out.penalty.weight, params.weight_max);
      chi_last = chi_c;
    } else if (old_radius <= params.tr_min) {
      out.status = ScpStatus::Stalled;
      break;
    }
  }
  out.tr_radius = radius;
  return out;
}

}  // namespace rtopt
