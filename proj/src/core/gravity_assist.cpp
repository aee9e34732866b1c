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

#include "rtopt/gravity_assist.hpp"

#include <cmath>

#include "rtopt/errors.hpp"

namespace rtopt {

Mat3 cayley_rotation(const Vec3& u) {
  const Mat3 U = skew(u);
  const Mat3 I = Mat3::Identity();
  return (I + U).partialPivLu().solve(I - U);
}

Vec3 cayley_parameter(const Mat3& R) {
  // [u]x = (I + R)^-1 (I - R).
  const Mat3 I = Mat3::Identity();
  const Mat3 U = (I + R).partialPivLu().solve(I - R);
  return Vec3(U(2, 1) - U(1, 2), U(0, 2) - U(2, 0), U(1, 0) - U(0, 1)) * 0.5;
}

Vec3 cayley_align(const Vec3& a, const Vec3& b) {
  const Vec3 an = a.normalized(), bn = b.normalized();
  const Vec3 axis = an.cross(bn);
  const double s = axis.norm();
  if (s < 1e-14) {
    if (an.dot(bn) > 0.0) return Vec3::Zero();
    fail(ErrorKind::Domain, "half-turn has no finite Cayley parameter");
  }
  const double angle = std::atan2(s, an.dot(bn));
  // R(u) rotates by -2 atan|u| about u/|u|.
  return -std::tan(0.5 * angle) * axis / s;
}

Vec6 ga_map(const Vec6& x, const Vec3& u, const Vec3& v_planet) {
  Vec6 out;
  out << x.head<3>(), v_planet + cayley_rotation(u) * (x.tail<3>() - v_planet);
  return out;
}

LinearSegment ga_linearize(const Vec6& x_ref, const Vec3& u_ref, const Vec3& v_planet) {
  LinearSegment seg;
  const Mat3 R = cayley_rotation(u_ref);
  seg.x_end = ga_map(x_ref, u_ref, v_planet);
  seg.A.setIdentity();
  seg.A.block<3, 3>(3, 3) = R;
  const Vec3 v = x_ref.tail<3>();
  const Vec3 v_next = seg.x_end.tail<3>();
  const Mat3 rhs = skew(v_next) + skew(v) - 2.0 * skew(v_planet);
  seg.B.bottomRows<3>() = (Mat3::Identity() + skew(u_ref)).partialPivLu().solve(rhs);
  seg.c = seg.x_end - seg.A * x_ref - seg.B * u_ref;
  return seg;
}

double periapsis_radius(const Vec3& v_inf, double theta, double mu_body) {
  if (!(theta > 0.0 && theta <= M_PI))
    fail(ErrorKind::Domain, "turn angle must lie in (0, pi]");
  const double v2 = v_inf.squaredNorm();
  if (!(v2 > 0.0)) fail(ErrorKind::Domain, "zero excess speed");
  return mu_body / v2 * (1.0 / std::sin(0.5 * theta) - 1.0);
}

double turn_angle(const Vec3& a, const Vec3& b) {
  return std::atan2(a.cross(b).norm(), a.dot(b));
}

double TurnAngleRow::evaluate(const Vec6& pre, const Vec6& post, double theta) const {
  return value + d_pre.dot(pre - pre_ref) + d_post.dot(post - post_ref) +
         d_theta * (theta - theta_ref);
}

TurnAngleRow turn_angle_constraint_lin(const Vec6& pre_ref, const Vec6& post_ref,
                                       double theta_ref, const Vec3& v_planet) {
  TurnAngleRow row;
  const Vec3 vi = pre_ref.tail<3>() - v_planet;
  const Vec3 vo = post_ref.tail<3>() - v_planet;
  const double c = std::cos(theta_ref);
  row.value = vi.squaredNorm() * c - vo.dot(vi);
  row.d_pre.tail<3>() = 2.0 * c * vi - vo;
  row.d_post.tail<3>() = -vi;
  row.d_theta = -vi.squaredNorm() * std::sin(theta_ref);
  row.pre_ref = pre_ref;
  row.post_ref = post_ref;
  row.theta_ref = theta_ref;
  return row;
}

double impact_speed_limit(double theta, double mu_body, double rp_min) {
  if (!(theta > 0.0 && theta <= M_PI) || !(rp_min > 0.0))
    fail(ErrorKind::Domain, "impact limit needs theta in (0, pi] and rp_min > 0");
  return std::sqrt(mu_body / rp_min) *
         std::sqrt(std::max(0.0, 1.0 / std::sin(0.5 * theta) - 1.0));
}

double impact_speed_limit_slope(double theta, double mu_body, double rp_min) {
  if (!(theta > 0.0 && theta < M_PI) || !(rp_min > 0.0))
    fail(ErrorKind::Domain, "impact slope needs theta in (0, pi) and rp_min > 0");
  const double s = std::sin(0.5 * theta);
  const double g = 1.0 / s - 1.0;
  return std::sqrt(mu_body / rp_min) * (-0.5 * std::cos(0.5 * theta) / (s * s)) /
         (2.0 * std::sqrt(g));
}

double ImpactConstraint::residual(const Vec3& v_pre, double sigma_norm, double theta) const {
  return (v_pre - v_planet).norm() + margin * sigma_norm -
         (h_ref + slope * (theta - theta_ref));
}

ImpactConstraint impact_cc_lin(double theta_ref, const Vec3& v_planet, double mu_body,
                               double rp_min, double margin) {
  ImpactConstraint c;
  c.v_planet = v_planet;
  c.margin = margin;
  c.theta_ref = theta_ref;
  c.h_ref = impact_speed_limit(theta_ref, mu_body, rp_min);
  c.slope = impact_speed_limit_slope(theta_ref, mu_body, rp_min);
  return c;
}

double impact_residual(const Vec3& v_pre, const Vec3& v_planet, double sigma_norm,
                       double theta, double mu_body, double rp_min, double margin) {
  return (v_pre - v_planet).norm() + margin * sigma_norm -
         impact_speed_limit(theta, mu_body, rp_min);
}

}  // namespace rtopt
