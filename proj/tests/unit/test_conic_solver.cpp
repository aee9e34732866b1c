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

#include <sstream>

#include "doctest.h"
#include "rtopt/conic.hpp"

using namespace rtopt;

TEST_CASE("linear program with known optimum") {
  // min -x - y  s.t. x + 2y <= 4, 3x + y <= 6, x, y >= 0  -> (1.6, 1.2), obj -2.8
  ProgramBuilder pb;
  const int x = pb.add_variables("x", 2);
  pb.add_cost(x, -1.0);
  pb.add_cost(x + 1, -1.0);
  LinExpr c1(4.0), c2(6.0);
  c1.add(x, -1.0).add(x + 1, -2.0);
  c2.add(x, -3.0).add(x + 1, -1.0);
  pb.add_nonneg({c1, c2, LinExpr::var(x), LinExpr::var(x + 1)});
  const auto r = solve_conic(pb.build());
  REQUIRE(r.status == SolveStatus::Optimal);
  CHECK(r.primal_objective == doctest::Approx(-2.8).epsilon(1e-7));
  CHECK(r.x(0) == doctest::Approx(1.6).epsilon(1e-6));
}

TEST_CASE("second-order cone projection") {
  // min t s.t. |x - p| <= t with x on the plane x0 + x1 + x2 = 1, p = (1, 2, 3).
  ProgramBuilder pb;
  const int x = pb.add_variables("x", 3);
  const int t = pb.add_variables("t", 1);
  pb.add_cost(t, 1.0);
  LinExpr plane(-1.0);
  plane.add(x, 1.0).add(x + 1, 1.0).add(x + 2, 1.0);
  pb.add_zero({plane});
  std::vector<LinExpr> soc{LinExpr::var(t)};
  const double p[3] = {1, 2, 3};
  for (int i = 0; i < 3; ++i) {
    LinExpr e(-p[i]);
    e.add(x + i, 1.0);
    soc.push_back(e);
  }
  pb.add_soc(soc);
  const auto r = solve_conic(pb.build());
  REQUIRE(r.status == SolveStatus::Optimal);
  CHECK(r.primal_objective == doctest::Approx(5.0 / std::sqrt(3.0)).epsilon(1e-7));
}

TEST_CASE("large second-order cone uses the sparse expansion") {
  // min t s.t. |x - p| <= t, sum x = 0 in 20 dimensions.
  const int n = 20;
  ProgramBuilder pb;
  const int x = pb.add_variables("x", n);
  const int t = pb.add_variables("t", 1);
  pb.add_cost(t, 1.0);
  LinExpr sum;
  std::vector<LinExpr> soc{LinExpr::var(t)};
  double mean = 0.0;
  for (int i = 0; i < n; ++i) {
    sum.add(x + i, 1.0);
    const double pi = 0.3 * i - 1.0;
    mean += pi / n;
    LinExpr e(-pi);
    e.add(x + i, 1.0);
    soc.push_back(e);
  }
  pb.add_zero({sum});
  pb.add_soc(soc);
  const auto r = solve_conic(pb.build());
  REQUIRE(r.status == SolveStatus::Optimal);
  // Distance from p to the hyperplane sum(x) = 0.
  CHECK(r.primal_objective == doctest::Approx(std::sqrt(n) * std::abs(mean)).epsilon(1e-7));
}

TEST_CASE("power cone epigraph of |z|^1.5") {
  // min p - z  with p >= |z|^1.5: optimum at z = (2/3)^2, p = z^1.5.
  ProgramBuilder pb;
  const int p = pb.add_variables("p", 1);
  const int z = pb.add_variables("z", 1);
  pb.add_cost(p, 1.0);
  pb.add_cost(z, -1.0);
  pb.add_power(LinExpr::var(p), LinExpr(1.0), LinExpr::var(z), 1.0 / 1.5);
  const auto r = solve_conic(pb.build());
  REQUIRE((r.status == SolveStatus::Optimal || r.status == SolveStatus::AlmostOptimal));
  const double zs = 4.0 / 9.0;
  CHECK(r.primal_objective == doctest::Approx(std::pow(zs, 1.5) - zs).epsilon(1e-6));
}

TEST_CASE("primal infeasibility is certified") {
  ProgramBuilder pb;
  const int x = pb.add_variables("x", 1);
  pb.add_cost(x, 1.0);
  LinExpr a(-1.0), c(-1.0);
  a.add(x, 1.0);    // x >= 1
  c.add(x, -1.0);   // -x - 1 >= 0 -> x <= -1
  pb.add_nonneg({a, c});
  const auto r = solve_conic(pb.build());
  CHECK(r.status == SolveStatus::PrimalInfeasible);
}

TEST_CASE("dual infeasibility is certified") {
  ProgramBuilder pb;
  const int x = pb.add_variables("x", 1);
  pb.add_cost(x, -1.0);
  pb.add_nonneg({LinExpr::var(x)});
  const auto r = solve_conic(pb.build());
  CHECK(r.status == SolveStatus::DualInfeasible);
}

TEST_CASE("PSD cones are reported unsupported") {
  ProgramBuilder pb;
  const int x = pb.add_variables("x", 3);
  pb.add_psd({LinExpr::var(x), LinExpr::var(x + 1), LinExpr::var(x + 2)}, 2);
  CHECK(solve_conic(pb.build()).status == SolveStatus::UnsupportedCone);
}

TEST_CASE("dump round trip is exact") {
  ProgramBuilder pb;
  const int x = pb.add_variables("x", 2);
  pb.add_cost(x, 0.1);
  LinExpr e(1.0 / 3.0);
  e.add(x, std::sqrt(2.0)).add(x + 1, -1e-300);
  pb.add_soc({LinExpr(2.0), e, LinExpr::var(x + 1, M_PI)});
  pb.add_power(LinExpr::var(x), LinExpr(1.0), LinExpr::var(x + 1), 1.0 / 1.1);
  const ConicProgram a = pb.build();
  std::stringstream ss;
  write_program(a, ss);
  const ConicProgram b = read_program(ss);
  CHECK(b.num_vars == a.num_vars);
  CHECK((b.q - a.q).norm() == 0.0);
  CHECK((b.b - a.b).norm() == 0.0);
  CHECK((Eigen::MatrixXd(b.A) - Eigen::MatrixXd(a.A)).norm() == 0.0);
  CHECK(b.cones.size() == a.cones.size());
  CHECK(b.cones[1].alpha == a.cones[1].alpha);
}

TEST_CASE("malformed dump is rejected") {
  std::stringstream ss("rtopt-conic 1\nvars 2\nslices 0\nrows 1\ncones 1\nsoc 1\noffset 0\nq 0\nb 0\nA 1\n0 5 1.0\nend\n");
  CHECK_THROWS(read_program(ss));
}
