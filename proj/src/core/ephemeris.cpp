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

#include <cmath>

#include "rtopt/dynamics.hpp"
#include "rtopt/errors.hpp"

namespace rtopt {

double solve_kepler(double mean_anomaly, double eccentricity) {
  if (!(eccentricity >= 0.0 && eccentricity < 1.0))
    fail(ErrorKind::Domain, "Kepler solver supports elliptic orbits only");
  const double M = std::remainder(mean_anomaly, 2.0 * M_PI);
  double E = eccentricity < 0.8 ? M : (M >= 0.0 ? M_PI : -M_PI);
  for (int it = 0; it < 60; ++it) {
    const double f = E - eccentricity * std::sin(E) - M;
    const double dE = f / (1.0 - eccentricity * std::cos(E));
    E -= dE;
    if (std::abs(dE) < 1e-15) return E + (mean_anomaly - M);
  }
  fail(ErrorKind::Numerical, "Kepler iteration did not converge");
}

Vec6 planet_state(const BodyEphemeris& body, double mu_primary, double t) {
  const double a = body.semi_major_axis;
  const double e = body.eccentricity;
  if (!(a > 0.0) || !(mu_primary > 0.0))
    fail(ErrorKind::Domain, "ephemeris of " + body.name + " is not an ellipse");
  const double n = std::sqrt(mu_primary / (a * a * a));
  const double E = solve_kepler(body.mean_anomaly + n * (t - body.epoch), e);
  const double cE = std::cos(E), sE = std::sin(E);
  const double fac = std::sqrt(1.0 - e * e);
  const double r = a * (1.0 - e * cE);

  // Perifocal frame.
  const Vec3 pos(a * (cE - e), a * fac * sE, 0.0);
  const Vec3 vel = std::sqrt(mu_primary * a) / r * Vec3(-sE, fac * cE, 0.0);

  const Mat3 rot = (Eigen::AngleAxisd(body.raan, Vec3::UnitZ()) *
                    Eigen::AngleAxisd(body.inclination, Vec3::UnitX()) *
                    Eigen::AngleAxisd(body.arg_periapsis, Vec3::UnitZ()))
                       .toRotationMatrix();
  Vec6 x;
  x << rot * pos, rot * vel;
  return x;
}

}  // namespace rtopt
