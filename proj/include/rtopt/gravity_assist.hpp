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

#include "rtopt/dynamics.hpp"

namespace rtopt {

/// Cayley map R = (I + [u]x)^-1 (I - [u]x); orthogonal with det 1,
/// rotation angle 2 atan|u|.
Mat3 cayley_rotation(const Vec3& u);

/// Inverse of the Cayley map for a proper rotation without a half turn.
Vec3 cayley_parameter(const Mat3& rotation);

/// Smallest Cayley parameter rotating direction a onto direction b.
Vec3 cayley_align(const Vec3& a, const Vec3& b);

/// Instantaneous flyby: position kept, v' = v_p + R(u) (v - v_p).
Vec6 ga_map(const Vec6& x, const Vec3& u, const Vec3& v_planet);

/// Exact affine model of the flyby map about (x_ref, u_ref).
LinearSegment ga_linearize(const Vec6& x_ref, const Vec3& u_ref, const Vec3& v_planet);

/// Periapsis radius giving turn angle theta at hyperbolic excess speed |v_inf|.
double periapsis_radius(const Vec3& v_inf, double turn_angle, double mu_body);

/// Turn angle between two excess velocities, in [0, pi].
double turn_angle(const Vec3& v_inf_in, const Vec3& v_inf_out);

/// Linearization of g = |vi_k|^2 cos(theta) - vi_{k+1} . vi_k about a reference.
struct TurnAngleRow {
  double value = 0.0;
  Vec6 d_pre = Vec6::Zero();
  Vec6 d_post = Vec6::Zero();
  double d_theta = 0.0;
  Vec6 pre_ref = Vec6::Zero();
  Vec6 post_ref = Vec6::Zero();
  double theta_ref = 0.0;

  double evaluate(const Vec6& pre, const Vec6& post, double theta) const;
};

TurnAngleRow turn_angle_constraint_lin(const Vec6& pre_ref, const Vec6& post_ref,
                                       double theta_ref, const Vec3& v_planet);

/// Minimum excess speed allowed by the periapsis floor at turn angle theta:
/// h(theta) = sqrt(mu / rp_min) * sqrt(1 / sin(theta / 2) - 1).
double impact_speed_limit(double theta, double mu_body, double rp_min);
double impact_speed_limit_slope(double theta, double mu_body, double rp_min);

/// Data of the convexified periapsis chance constraint
///   |v_k - v_p| + margin |E_v P_k^1/2| - (h_ref + slope (theta - theta_ref)) <= 0.
struct ImpactConstraint {
  Vec3 v_planet = Vec3::Zero();
  double margin = 0.0;
  double h_ref = 0.0;
  double slope = 0.0;
  double theta_ref = 0.0;

  double residual(const Vec3& v_pre, double velocity_sigma_norm, double theta) const;
};

ImpactConstraint impact_cc_lin(double theta_ref, const Vec3& v_planet, double mu_body,
                               double rp_min, double margin);

/// Nonlinear counterpart (h evaluated exactly at theta).
double impact_residual(const Vec3& v_pre, const Vec3& v_planet, double velocity_sigma_norm,
                       double theta, double mu_body, double rp_min, double margin);

}  // namespace rtopt
