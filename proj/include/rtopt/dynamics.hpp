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

#include <functional>
#include <string>
#include <utility>

#include "rtopt/types.hpp"

namespace rtopt {

/// Characteristic length and time used to normalize every quantity.
/// Normalized gravitational parameter of the primary is mu * t^2 / l^3.
struct ScaleSet {
  double length_km = 1.0;
  double time_s = 1.0;

  double velocity_kms() const { return length_km / time_s; }
  double accel_kms2() const { return length_km / (time_s * time_s); }
  double normalize_mu(double mu_km3s2) const {
    return mu_km3s2 * time_s * time_s / (length_km * length_km * length_km);
  }
  Vec6 normalize_state(const Vec6& x_km) const;
  Vec6 dimensional_state(const Vec6& x) const;

  /// l = length_km, t chosen so the primary's normalized mu is exactly 1.
  static ScaleSet for_primary(double mu_km3s2, double length_km);
};

struct OrbitalState {
  Vec3 r = Vec3::Zero();
  Vec3 v = Vec3::Zero();

  Vec6 stacked() const;
  static OrbitalState from(const Vec6& x);
};

/// Optional perturbing acceleration a(t, x). Empty means none.
using Perturbation = std::function<Vec3(double, const Vec6&)>;

/// Controlled two-body dynamics x' = [v; -mu r/|r|^3 + a_pert + u].
/// mu == 0 gives the free double integrator.
struct DynamicsModel {
  double mu = 1.0;
  double singularity_radius = 1e-6;
  Perturbation perturbation;

  Vec6 rhs(double t, const Vec6& x, const Vec3& u) const;
  /// d rhs / d x.
  Mat6 jacobian(double t, const Vec6& x) const;
};

struct PropagationOptions {
  double rel_tol = 1e-12;
  double abs_tol = 1e-12;
  double initial_step = 1e-3;
};

/// Integrates the dynamics with u held constant from t0 to t1 (either direction).
Vec6 propagate(const DynamicsModel& model, const Vec6& x0, const Vec3& u,
               double t0, double t1, const PropagationOptions& opts = {});

/// Discrete affine model of one segment about a reference:
///   x_{k+1} = A x_k + B u_k + c + exec_noise w_exe + process_noise w.
struct LinearSegment {
  Mat6 A = Mat6::Identity();
  Mat63 B = Mat63::Zero();
  Vec6 c = Vec6::Zero();
  Mat63 exec_noise = Mat63::Zero();
  Mat6 process_noise = Mat6::Zero();
  Vec6 x_end = Vec6::Zero();
};

/// Zero-order-hold linearization about (x_ref, u_ref) on [t0, t1].
/// exec_sqrt is the execution-error factor at u_ref (held over the segment);
/// process_sqrt is the continuous white-noise input map.
LinearSegment linearize_segment(const DynamicsModel& model, const Vec6& x_ref,
                                const Vec3& u_ref, double t0, double t1,
                                const Mat3& exec_sqrt, const Mat63& process_sqrt,
                                const PropagationOptions& opts = {});

/// Keplerian elements of a body orbiting the primary (normalized units, radians).
struct BodyEphemeris {
  std::string name;
  double mu = 0.0;
  double semi_major_axis = 1.0;
  double eccentricity = 0.0;
  double inclination = 0.0;
  double raan = 0.0;
  double arg_periapsis = 0.0;
  double mean_anomaly = 0.0;
  double epoch = 0.0;
};

/// Two-body state of the body at time t.
Vec6 planet_state(const BodyEphemeris& body, double mu_primary, double t);

/// Zero-revolution Lambert arc from r1 to r2 in time tof, prograde about +z.
/// Returns the departure and arrival velocities.
std::pair<Vec3, Vec3> lambert(const Vec3& r1, const Vec3& r2, double tof, double mu);

/// Solves Kepler's equation M = E - e sin E for elliptic orbits.
double solve_kepler(double mean_anomaly, double eccentricity);

}  // namespace rtopt
