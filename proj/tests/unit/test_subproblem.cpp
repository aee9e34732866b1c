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

#include <random>

#include "doctest.h"
#include "fixtures.hpp"
#include "rtopt/errors.hpp"
#include "rtopt/risk.hpp"
#include "rtopt/scp.hpp"
#include "rtopt/subproblem.hpp"

using namespace rtopt;
using namespace rtopt::testing;

namespace {

double objective(const ConicProgram& p, const VecX& x) { return p.q.dot(x) + p.objective_offset; }

}  // namespace

TEST_CASE("penalty function at hand-computed points") {
  CHECK(penalty_phi(0.0, 1.1) == 0.0);
  CHECK(penalty_phi(1.0, 1.1) == doctest::Approx(1.0 / 1.1 + 0.5).epsilon(1e-15));
  CHECK(penalty_phi(1.0, 1.1) == doctest::Approx(1.40909).epsilon(1e-5));
  CHECK(penalty_phi_grad(-1.0, 1.1) == doctest::Approx(-2.0).epsilon(1e-15));
  CHECK(penalty_phi_grad(0.0, 1.1) == 0.0);
  // Even function, odd gradient.
  CHECK(penalty_phi(-0.37, 1.3) == penalty_phi(0.37, 1.3));
  CHECK(penalty_phi_grad(-0.37, 1.3) == -penalty_phi_grad(0.37, 1.3));
}

TEST_CASE("penalty gradient matches central differences") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> zd(-20.0, 20.0), td(1.05, 1.95);
  for (int i = 0; i < 200; ++i) {
    const double z = zd(rng), tau = td(rng);
    if (std::abs(z) < 1e-2) continue;
    const double h = 1e-6 * std::max(1.0, std::abs(z));
    const double fd = (penalty_phi(z + h, tau) - penalty_phi(z - h, tau)) / (2.0 * h);
    CHECK(penalty_phi_grad(z, tau) == doctest::Approx(fd).epsilon(1e-7));
  }
}

TEST_CASE("penalty value by direct substitution") {
  PenaltyState ps = PenaltyState::initial(2, 2, 10.0, 1.1);
  CHECK(penalty_value(VecX::Zero(2), VecX::Zero(2), ps) == 0.0);
  ps.lambda << 1.0, 2.0;
  ps.mu << 0.5, 0.7;
  VecX eq(2), ineq(2);
  eq << 0.5, -0.2;
  ineq << -0.3, 0.1;
  auto phi = [](double z) { return std::pow(std::abs(z), 1.1) / 1.1 + 0.5 * z * z; };
  // Satisfied inequalities contribute nothing.
  const double hand = 1.0 * 0.5 + phi(5.0) / 10 + 2.0 * -0.2 + phi(-2.0) / 10 + 0.7 * 0.1 +
                      phi(1.0) / 10;
  CHECK(penalty_value(eq, ineq, ps) == doctest::Approx(hand).epsilon(1e-14));
  CHECK_THROWS_AS(penalty_value(VecX::Zero(3), ineq, ps), Error);
}

TEST_CASE("risk coefficients of the cost and thrust terms") {
  Scenario sc = shipped("double_integrator.yaml");
  CHECK(cost_margin(sc.problem) == doctest::Approx(3.3682).epsilon(5e-4 / 3.3682));
  CHECK(thrust_margin(sc.problem) == doctest::Approx(4.0331).epsilon(5e-4 / 4.0331));
}

TEST_CASE("zero gains reduce the cost bound to the nominal dv") {
  const Scenario sc = shipped("double_integrator.yaml");
  const MissionProblem& p = sc.problem;
  Iterate it = with_zero_gains(p, heuristic_guess(p.deterministic()));
  for (int k = 0; k < p.segments(); ++k) it.controls[k] = Vec3(0.3 * k, -0.1, 0.2);
  const Evaluation ev = evaluate(p, it);
  CHECK(ev.cost_bound == doctest::Approx(ev.cost_nominal).epsilon(1e-15));
  for (double s : ev.control_sigma) CHECK(s == 0.0);
}

TEST_CASE("single thrust segment cost bound by substitution") {
  Scenario sc = shipped("double_integrator.yaml");
  sc.problem.grid.epochs = {0.0, 0.5};
  sc.problem.grid.kinds = {SegmentKind::Thrust};
  sc.problem.uncertainty.obs.nodes.resize(2);
  Iterate it;
  it.controls = {Vec3(0.8, 0.0, 0.0)};
  it.gains = GainMatrix::zero(1);
  it.gains.blocks[0][0] << 0.5, 0.0, 0.0, 0.1, 0.0, 0.0,  //
      0.0, -0.3, 0.0, 0.0, 0.2, 0.0,                      //
      0.0, 0.0, 0.4, 0.0, 0.0, -0.1;
  const Evaluation ev = evaluate(sc.problem, it);
  // The factor of the control dispersion is K_00 times block row 0 of S^1/2.
  const MatX factor = it.gains.blocks[0][0] * ev.blocks->dispersion_row(0).leftCols(ev.blocks->cols(0));
  const double sigma = std::sqrt(factor.array().square().sum());
  CHECK(sigma > 0.0);
  CHECK(ev.control_sigma[0] == doctest::Approx(sigma).epsilon(1e-12));
  CHECK(ev.cost_bound ==
        doctest::Approx((0.8 + chi2_margin(0.01, 3) * sigma) * 0.5).epsilon(1e-12));
}

TEST_CASE("Frobenius surrogate bounds the spectral norm") {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> nd;
  for (int t = 0; t < 100; ++t) {
    MatX m(3, 1 + t % 9);
    for (Eigen::Index i = 0; i < m.size(); ++i) m(i) = nd(rng);
    CHECK(matrix_norm(m, MatrixNorm::Frobenius) >=
          matrix_norm(m, MatrixNorm::SpectralPsd) * (1.0 - 1e-14));
  }
}

TEST_CASE("layout audit counts the variable slices") {
  for (const char* file : {"double_integrator.yaml", "ceres_reduced.yaml"}) {
    const Scenario sc = shipped(file);
    const MissionProblem& p = sc.problem;
    const int n = p.segments();
    const int nf = static_cast<int>(p.flybys.size());
    const Iterate it = with_zero_gains(p, heuristic_guess(p.deterministic()));
    const Evaluation ev = evaluate(p, it);
    const PenaltyState ps = PenaltyState::initial(6 + 3 * nf, nf, 100.0, 1.1);
    const Subproblem sp = assemble(p, it, ev, ps, TrustRegion{});
    const ConicProgram& prog = sp.program;
    prog.check();
    CHECK(prog.slice("state")->length == 6 * (n + 1));
    CHECK(prog.slice("control")->length == 3 * n);
    CHECK(prog.slice("turn_angle")->length == nf);
    CHECK(prog.slice("eq_buffer")->length == 6 + 3 * nf);
    CHECK(prog.slice("ineq_buffer")->length == nf);
    int factor_len = 0;
    for (int k = 0; k < n; ++k)
      if (sp.factor_offset[k] >= 0) factor_len += 3 * sp.factor_cols[k];
    CHECK(prog.slice("control_factor")->length == factor_len);
    CHECK(factor_len > 0);
    // Slices tile the variable vector in order.
    int next = 0;
    for (const auto& s : prog.slices) {
      CHECK(s.offset == next);
      next += s.length;
    }
    CHECK(next == prog.num_vars);
    int rows = 0;
    for (const auto& c : prog.cones) rows += c.dim;
    CHECK(rows == prog.rows());
    CHECK(layout_audit(prog).front() == "variables " + std::to_string(prog.num_vars));
  }
}

TEST_CASE("inconsistent reference is an assembly error") {
  const Scenario sc = shipped("double_integrator.yaml");
  const MissionProblem& p = sc.problem;
  Iterate it = with_zero_gains(p, heuristic_guess(p.deterministic()));
  const Evaluation ev = evaluate(p, it);
  it.controls.pop_back();
  const PenaltyState ps = PenaltyState::initial(6, 0, 100.0, 1.1);
  CHECK_THROWS_AS(assemble(p, it, ev, ps, TrustRegion{}), Error);
}

// Two-node deterministic toy against an independent formulation: the
// subproblem minimizes |u| dt + sum phi(w xi) / w with xi the terminal defect
// of the exact discrete double integrator; solve that 3-variable convex
// problem directly by damped Newton.
TEST_CASE("deterministic two-node step matches an independent formulation") {
  const Scenario sc = scenario_from(integrator_yaml(2, "[0.5, 1.0, -0.5, 1.0, 2.0, -1.0]"));
  const MissionProblem& p = sc.problem;
  REQUIRE_FALSE(p.stochastic);
  const Iterate ref = heuristic_guess(p);
  const Evaluation ev = evaluate(p, ref);
  const PenaltyState ps = PenaltyState::initial(6, 0, 100.0, 1.1);
  TrustRegion tr;
  tr.radius = 10.0;
  const Subproblem sp = assemble(p, ref, ev, ps, tr);
  const SolveResult res = solve_conic(sp.program);
  REQUIRE(res.status == SolveStatus::Optimal);
  const Candidate cand = extract(p, sp, res.x, ps);

  Eigen::Matrix<double, 6, 3> J;
  J << 0.5 * Mat3::Identity(), Mat3::Identity();
  Vec6 target;
  target << 0.5, 1.0, -0.5, 1.0, 2.0, -1.0;
  const double w = 100.0, tau = 1.1;
  auto grad_hess = [&](const Vec3& u, Vec3& g, Mat3& H) {
    const double nu = u.norm();
    const Vec6 xi = J * u - target;
    Vec6 d1, d2;
    for (int i = 0; i < 6; ++i) {
      const double z = w * xi(i);
      d1(i) = std::copysign(std::pow(std::abs(z), tau - 1.0), z) + z;
      d2(i) = w * ((tau - 1.0) * std::pow(std::abs(z), tau - 2.0) + 1.0);
    }
    g = u / nu + J.transpose() * d1;
    H = (Mat3::Identity() - u * u.transpose() / (nu * nu)) / nu +
        J.transpose() * d2.asDiagonal() * J;
  };
  auto f = [&](const Vec3& u) {
    const Vec6 xi = J * u - target;
    double v = u.norm();
    for (int i = 0; i < 6; ++i) v += penalty_phi(w * xi(i), tau) / w;
    return v;
  };
  Vec3 u(0.9, 1.9, -0.9);
  for (int it = 0; it < 100; ++it) {
    Vec3 g;
    Mat3 H;
    grad_hess(u, g, H);
    const Vec3 step = -H.ldlt().solve(g);
    double t = 1.0;
    while (f(u + t * step) > f(u) + 1e-4 * t * g.dot(step) && t > 1e-12) t *= 0.5;
    u += t * step;
    if (step.norm() * t < 1e-14) break;
  }
  CHECK((cand.iterate.controls[0] - u).norm() < 1e-6);
  CHECK(objective(sp.program, res.x) == doctest::Approx(f(u)).epsilon(1e-7));
}

TEST_CASE("penalty epigraphs reproduce the penalty at the solution") {
  // A tight trust region keeps the terminal defect open, so buffers are active.
  const Scenario sc = scenario_from(integrator_yaml(6, "[1.0, 0.5, 0.0, 0.0, 0.0, 0.0]"));
  const MissionProblem& p = sc.problem;
  const Iterate ref = heuristic_guess(p);
  const Evaluation ev = evaluate(p, ref);
  PenaltyState ps = PenaltyState::initial(6, 0, 30.0, 1.1);
  ps.lambda << 0.3, -0.2, 0.1, 0.0, 0.5, -0.4;
  TrustRegion tr;
  tr.radius = 0.05;
  const Subproblem sp = assemble(p, ref, ev, ps, tr);
  const SolveResult res = solve_conic(sp.program);
  REQUIRE(res.status == SolveStatus::Optimal);
  const Candidate cand = extract(p, sp, res.x, ps);
  CHECK(cand.eq_buffer.cwiseAbs().maxCoeff() > 1e-3);
  CHECK(objective(sp.program, res.x) == doctest::Approx(cand.predicted).epsilon(1e-7));
}

TEST_CASE("trust region bounds states and controls but not gains") {
  const Scenario sc = shipped("double_integrator.yaml");
  const MissionProblem& p = sc.problem;
  const Iterate ref = with_zero_gains(p, heuristic_guess(p.deterministic()));
  const Evaluation ev = evaluate(p, ref);
  const PenaltyState ps = PenaltyState::initial(6, 0, 100.0, 1.1);
  TrustRegion tr;
  tr.radius = 1e-3;
  const Subproblem sp = assemble(p, ref, ev, ps, tr);
  const SolveResult res = solve_conic(sp.program);
  REQUIRE((res.status == SolveStatus::Optimal || res.status == SolveStatus::AlmostOptimal));
  const Candidate cand = extract(p, sp, res.x, ps);
  const int n = p.segments();
  for (int k = 0; k <= n; ++k)
    for (int i = 0; i < 6; ++i)
      CHECK(std::abs(res.x(sp.x_offset + 6 * k + i) - ev.states[k](i)) <= tr.radius + 1e-7);
  for (int k = 0; k < n; ++k)
    CHECK((cand.iterate.controls[k] - ref.controls[k]).lpNorm<Eigen::Infinity>() <=
          tr.radius + 1e-7);
  double gain_norm = 0.0;
  for (int k = 0; k < n; ++k)
    for (const auto& blk : cand.iterate.gains.blocks[k]) gain_norm = std::max(gain_norm, blk.norm());
  CHECK(gain_norm > 100.0 * tr.radius);
}
