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

#include "doctest.h"
#include "fixtures.hpp"
#include "rtopt/errors.hpp"
#include "rtopt/scp.hpp"

using namespace rtopt;
using namespace rtopt::testing;

TEST_CASE("parameter table defaults pass validation") {
  ScpParams p;
  CHECK_NOTHROW(p.check());
  CHECK(p.eps_opt == 1e-6);
  CHECK(p.weight_init == 1e2);
  CHECK(p.weight_max == 1e10);
  CHECK(p.tr_init == 0.1);
  CHECK(p.tau == 1.1);
  ScpParams bad = p;
  bad.eta1 = 1.5;  // must sit between eta2 and eta0
  CHECK_THROWS_AS(bad.check(), Error);
  bad = p;
  bad.gamma = 1.0;
  CHECK_THROWS_AS(bad.check(), Error);
}

TEST_CASE("acceptance band and trust-region update") {
  const ScpParams p;
  StepDecision d = accept_and_update(1.0, 0.1, p);
  CHECK(d.accepted);
  CHECK(d.radius == doctest::Approx(0.3));
  d = accept_and_update(1.0, 0.5, p);
  CHECK(d.radius == 1.0);  // capped
  d = accept_and_update(2.5, 0.1, p);
  CHECK_FALSE(d.accepted);
  CHECK(d.radius == doctest::Approx(0.05));
  d = accept_and_update(2.5, 1e-8, p);
  CHECK(d.radius == 1e-8);  // floored
  d = accept_and_update(0.7, 0.2, p);  // inside the hold band
  CHECK(d.accepted);
  CHECK(d.radius == 0.2);
  d = accept_and_update(0.3, 0.2, p);  // accepted but outside the hold band
  CHECK(d.accepted);
  CHECK(d.radius == doctest::Approx(0.1));
  d = accept_and_update(-0.01, 0.2, p);
  CHECK_FALSE(d.accepted);
}

TEST_CASE("step ratio and the degenerate denominator") {
  bool deg = true;
  CHECK(step_ratio(0.5, 1.0, &deg) == 0.5);
  CHECK_FALSE(deg);
  CHECK(step_ratio(0.0, 0.0, &deg) == 1.0);
  CHECK(deg);
  CHECK(step_ratio(3.0, 1e-13, &deg) == 1.0);
  CHECK(deg);
}

TEST_CASE("one step on min x^4 from x = 1") {
  // Linear model 1 + 4 (x - 1) inside |x - 1| <= 0.1 steps to 0.9.
  const double j_ref = 1.0, j_c = std::pow(0.9, 4), l_c = 1.0 + 4.0 * (0.9 - 1.0);
  const double rho = step_ratio(j_ref - j_c, j_ref - l_c);
  CHECK(rho == doctest::Approx(0.3439 / 0.4).epsilon(1e-14));
  const StepDecision d = accept_and_update(rho, 0.1, ScpParams{});
  CHECK(d.accepted);
  CHECK(d.radius == 0.1);
}

TEST_CASE("multiplier update keeps inequality multipliers nonnegative") {
  PenaltyState ps = PenaltyState::initial(2, 2, 10.0, 1.1);
  ps.lambda << 0.5, -0.5;
  ps.mu << 0.2, 0.0;
  VecX eq(2), ineq(2);
  eq << 0.1, -0.3;
  ineq << -0.5, 0.05;
  update_multipliers(ps, eq, ineq);
  CHECK(ps.lambda(0) == doctest::Approx(0.5 + penalty_phi_grad(1.0, 1.1)));
  CHECK(ps.lambda(1) == doctest::Approx(-0.5 + penalty_phi_grad(-3.0, 1.1)));
  CHECK(ps.mu(0) == 0.0);  // 0.2 + phi'(-5) < 0 clips to zero
  CHECK(ps.mu(1) == doctest::Approx(penalty_phi_grad(0.5, 1.1)));
}

TEST_CASE("exact linearization: unit ratio and convergence right after the multiplier pass") {
  const Scenario sc = scenario_from(integrator_yaml(6, "[0.1, 0.05, 0.0, 0.0, 0.0, 0.0]") +
                                    "scp:\n  tr_init: 1.0\n");
  const ScpResult r = deterministic_initial_guess(sc.problem, sc.scp);
  REQUIRE(r.status == ScpStatus::Converged);
  for (const auto& rec : r.log) {
    CHECK(rec.accepted);
    CHECK(rec.rho == doctest::Approx(1.0).epsilon(1e-6));
  }
  // Step 1 lands on the optimum of the penalized model; after one multiplier
  // pass step 2 closes the residual, and step 3 confirms with zero change.
  int first_feasible = 0;
  for (const auto& rec : r.log)
    if (!first_feasible && rec.violation <= sc.scp.eps_feas) first_feasible = rec.iteration;
  CHECK(first_feasible == 2);
  CHECK(static_cast<int>(r.log.size()) == first_feasible + 1);
  CHECK(violation(r.evaluation) <= sc.scp.eps_feas);
}

TEST_CASE("circle-to-circle rendezvous converges") {
  const Scenario sc = shipped("circle.yaml");
  REQUIRE(sc.problem.segments() == 20);
  const ScpResult r = deterministic_initial_guess(sc.problem, sc.scp);
  CHECK(r.status == ScpStatus::Converged);
  CHECK(r.log.size() <= 100);
  CHECK(violation(r.evaluation) <= 1e-6);
  for (const auto& rec : r.log) {
    CHECK(rec.tr_radius >= sc.scp.tr_min);
    CHECK(rec.tr_radius <= sc.scp.tr_max);
    if (rec.accepted && rec.solver_status == "optimal" && rec.dL > 1e-12) CHECK(rec.dJ >= -1e-9);
  }
  CHECK((r.penalty.mu.array() >= 0.0).all());
  for (int k = 0; k < sc.problem.segments(); ++k)
    CHECK(r.iterate.controls[k].norm() <= sc.problem.u_max * (1.0 + 1e-6));
}

TEST_CASE("stochastic double integrator: bound ordering and terminal covariance") {
  const Scenario sc = shipped("double_integrator.yaml");
  const ScpResult det = deterministic_initial_guess(sc.problem, sc.scp);
  REQUIRE(det.status == ScpStatus::Converged);
  const ScpResult r = run_scp(sc.problem, with_zero_gains(sc.problem, det.iterate), sc.scp);
  REQUIRE(r.status == ScpStatus::Converged);
  const Evaluation& ev = r.evaluation;
  CHECK(ev.cost_bound >= ev.cost_nominal);
  CHECK(ev.cost_bound > det.evaluation.cost_bound);
  // Total terminal covariance stays below the bound.
  const int n = sc.problem.segments();
  const Mat6 total = ev.factors.dispersion[n] * ev.factors.dispersion[n].transpose() +
                     ev.kf.nodes[n].post_cov;
  Eigen::SelfAdjointEigenSolver<Mat6> es(sc.problem.terminal.cov - total);
  CHECK(es.eigenvalues().minCoeff() >= -1e-9);
  for (int k = 0; k < n; ++k)
    CHECK(r.iterate.controls[k].norm() + thrust_margin(sc.problem) * ev.control_sigma[k] <=
          sc.problem.u_max * (1.0 + 1e-6));
}

TEST_CASE("heuristic guess has grid-consistent dimensions") {
  const Scenario sc = shipped("ceres_reduced.yaml");
  const Iterate g = heuristic_guess(sc.problem.deterministic());
  CHECK(static_cast<int>(g.controls.size()) == sc.problem.segments());
  const Iterate z = with_zero_gains(sc.problem, g);
  CHECK(z.gains.segments() == sc.problem.segments());
}
