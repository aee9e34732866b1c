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
#include "rtopt/errors.hpp"
#include "rtopt/gravity_assist.hpp"

using namespace rtopt;

namespace {

Vec3 randn3(std::mt19937_64& rng, double s = 1.0) {
  std::normal_distribution<double> nd(0.0, s);
  return Vec3(nd(rng), nd(rng), nd(rng));
}

}  // namespace

TEST_CASE("Cayley rotation is orthogonal with unit determinant") {
  std::mt19937_64 rng(11);
  for (int i = 0; i < 200; ++i) {
    const Mat3 R = cayley_rotation(randn3(rng, 2.0));
    CHECK((R.transpose() * R - Mat3::Identity()).norm() < 1e-12);
    CHECK(std::abs(R.determinant() - 1.0) < 1e-12);
  }
}

TEST_CASE("Cayley rotation about z by a quarter turn") {
  const Mat3 R = cayley_rotation(Vec3(0, 0, 1));
  // Direct evaluation of (I + U)^-1 (I - U) for U = [z]x.
  Mat3 expected;
  expected << 0, 1, 0,
              -1, 0, 0,
              0, 0, 1;
  CHECK((R - expected).norm() < 1e-15);
  const Vec3 v(1, 0, 0);
  CHECK(std::acos(v.dot(R * v)) == doctest::Approx(M_PI / 2).epsilon(1e-14));
}

TEST_CASE("Cayley parameter inverts the map and aligns directions") {
  std::mt19937_64 rng(5);
  for (int i = 0; i < 50; ++i) {
    const Vec3 u = randn3(rng);
    CHECK((cayley_parameter(cayley_rotation(u)) - u).norm() < 1e-10);
    const Vec3 a = randn3(rng), b = randn3(rng);
    const Vec3 w = cayley_align(a, b);
    CHECK((cayley_rotation(w) * a.normalized() - b.normalized()).norm() < 1e-12);
  }
}

TEST_CASE("flyby map keeps position and excess speed") {
  std::mt19937_64 rng(3);
  for (int i = 0; i < 100; ++i) {
    Vec6 x;
    x << randn3(rng), randn3(rng);
    const Vec3 vp = randn3(rng), u = randn3(rng);
    const Vec6 y = ga_map(x, u, vp);
    CHECK((y.head<3>() - x.head<3>()).norm() == 0.0);
    CHECK(std::abs((y.tail<3>() - vp).norm() - (x.tail<3>() - vp).norm()) < 1e-12);
  }
}

TEST_CASE("flyby linearization matches finite differences") {
  std::mt19937_64 rng(21);
  const double h = 1e-6;
  for (int trial = 0; trial < 100; ++trial) {
    Vec6 x;
    x << randn3(rng), randn3(rng);
    const Vec3 vp = randn3(rng), u = randn3(rng, 0.7);
    const LinearSegment seg = ga_linearize(x, u, vp);
    for (int j = 0; j < 6; ++j) {
      Vec6 xp = x, xm = x;
      xp(j) += h;
      xm(j) -= h;
      const Vec6 fd = (ga_map(xp, u, vp) - ga_map(xm, u, vp)) / (2 * h);
      CHECK((fd - seg.A.col(j)).norm() < 1e-7 * std::max(1.0, fd.norm()));
    }
    for (int j = 0; j < 3; ++j) {
      Vec3 up = u, um = u;
      up(j) += h;
      um(j) -= h;
      const Vec6 fd = (ga_map(x, up, vp) - ga_map(x, um, vp)) / (2 * h);
      CHECK((fd - seg.B.col(j)).norm() < 1e-7 * std::max(1.0, fd.norm()));
    }
    CHECK((seg.A * x + seg.B * u + seg.c - ga_map(x, u, vp)).norm() < 1e-12);
  }
}

TEST_CASE("periapsis radius") {
  CHECK(periapsis_radius(Vec3(3, 0, 0), M_PI, 42828.0) == 0.0);
  CHECK_THROWS_AS(periapsis_radius(Vec3(3, 0, 0), 0.0, 42828.0), Error);
  CHECK_THROWS_AS(periapsis_radius(Vec3(3, 0, 0), -0.1, 42828.0), Error);
  // Turn angle reached at a 3689.5 km periapsis for |v_inf| = 5 km/s.
  const double mu = 42828.0, rp = 3689.5, v = 5.0;
  const double theta = 2.0 * std::asin(1.0 / (1.0 + rp * v * v / mu));
  CHECK(periapsis_radius(Vec3(0, v, 0), theta, mu) == doctest::Approx(rp).epsilon(1e-12));
  CHECK(impact_speed_limit(theta, mu, rp) == doctest::Approx(v).epsilon(1e-12));
}

TEST_CASE("turn-angle constraint linearization") {
  std::mt19937_64 rng(8);
  const double h = 1e-6;
  for (int trial = 0; trial < 50; ++trial) {
    Vec6 pre, post;
    pre << randn3(rng), randn3(rng);
    post << pre.head<3>(), randn3(rng);
    const Vec3 vp = randn3(rng);
    const double th = 0.2 + 2.5 * std::uniform_real_distribution<double>()(rng);
    auto g = [&](const Vec6& a, const Vec6& b, double t) {
      const Vec3 vi = a.tail<3>() - vp, vo = b.tail<3>() - vp;
      return vi.squaredNorm() * std::cos(t) - vo.dot(vi);
    };
    const TurnAngleRow row = turn_angle_constraint_lin(pre, post, th, vp);
    CHECK(row.value == doctest::Approx(g(pre, post, th)).epsilon(1e-14));
    CHECK(row.evaluate(pre, post, th) == doctest::Approx(row.value).epsilon(1e-14));
    for (int j = 0; j < 6; ++j) {
      Vec6 p1 = pre, p2 = pre;
      p1(j) += h;
      p2(j) -= h;
      CHECK(row.d_pre(j) ==
            doctest::Approx((g(p1, post, th) - g(p2, post, th)) / (2 * h)).epsilon(1e-7));
      Vec6 q1 = post, q2 = post;
      q1(j) += h;
      q2(j) -= h;
      CHECK(row.d_post(j) ==
            doctest::Approx((g(pre, q1, th) - g(pre, q2, th)) / (2 * h)).epsilon(1e-7));
    }
    CHECK(row.d_theta ==
          doctest::Approx((g(pre, post, th + h) - g(pre, post, th - h)) / (2 * h)).epsilon(1e-7));
  }
}

TEST_CASE("impact constraint slope and residual") {
  const double mu = 0.5, rp = 0.01, h = 1e-6;
  for (double th : {0.2, 0.8, 1.5, 2.4, 3.0}) {
    const double fd = (impact_speed_limit(th + h, mu, rp) - impact_speed_limit(th - h, mu, rp)) /
                      (2 * h);
    CHECK(impact_speed_limit_slope(th, mu, rp) == doctest::Approx(fd).epsilon(1e-7));
  }
  const ImpactConstraint c = impact_cc_lin(1.0, Vec3(1, 0, 0), mu, rp, 2.0);
  const Vec3 v(1.5, 0.3, 0);
  CHECK(c.residual(v, 0.1, 1.0) ==
        doctest::Approx(impact_residual(v, Vec3(1, 0, 0), 0.1, 1.0, mu, rp, 2.0)).epsilon(1e-14));
  CHECK_THROWS_AS(impact_speed_limit_slope(M_PI, mu, rp), Error);
}
