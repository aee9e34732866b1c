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

namespace {

// Stumpff functions C(z), S(z).
void stumpff(double z, double& c2, double& c3) {
  if (z > 1e-6) {
    const double s = std::sqrt(z);
    c2 = (1.0 - std::cos(s)) / z;
    c3 = (s - std::sin(s)) / (s * z);
  } else if (z < -1e-6) {
    const double s = std::sqrt(-z);
    c2 = (1.0 - std::cosh(s)) / z;
    c3 = (std::sinh(s) - s) / (s * -z);
  } else {
    c2 = 0.5 - z / 24.0 + z * z / 720.0;
    c3 = 1.0 / 6.0 - z / 120.0 + z * z / 5040.0;
  }
}

}  // namespace

std::pair<Vec3, Vec3> lambert(const Vec3& r1, const Vec3& r2, double tof, double mu) {
  const double n1 = r1.norm(), n2 = r2.norm();
  if (!(tof > 0.0) || !(mu > 0.0) || n1 == 0.0 || n2 == 0.0)
    fail(ErrorKind::Domain, "Lambert problem needs positive time, mu and radii");
  const double cosnu = std::clamp(r1.dot(r2) / (n1 * n2), -1.0, 1.0);
  const double dir = r1.cross(r2).z() >= 0.0 ? 1.0 : -1.0;
  const double A = dir * std::sqrt(n1 * n2 * (1.0 + cosnu));
  if (std::abs(A) < 1e-14 * (n1 + n2))
    fail(ErrorKind::Singularity, "Lambert transfer angle is degenerate");

  // Bisection on the universal variable z; time of flight grows with z.
  double lo = -4.0 * M_PI, hi = 4.0 * M_PI * M_PI, z = 0.0, y = 0.0, c2 = 0.5, c3 = 1.0 / 6.0;
  auto radius_term = [&](double zz) {
    stumpff(zz, c2, c3);
    return n1 + n2 + A * (zz * c3 - 1.0) / std::sqrt(c2);
  };
  // Move the lower bound until y > 0.
  while (radius_term(lo) < 0.0 && lo < hi) lo += 0.1;
  for (int it = 0; it < 200; ++it) {
    z = 0.5 * (lo + hi);
    y = radius_term(z);
    if (y < 0.0) {
      lo = z;
      continue;
    }
    const double chi = std::sqrt(y / c2);
    const double t = (chi * chi * chi * c3 + A * std::sqrt(y)) / std::sqrt(mu);
    if (t <= tof) lo = z; else hi = z;
    if (hi - lo < 1e-14 * std::max(1.0, std::abs(z))) break;
  }
  y = radius_term(z);
  const double f = 1.0 - y / n1;
  const double g = A * std::sqrt(y / mu);
  const double gdot = 1.0 - y / n2;
  return {(r2 - f * r1) / g, (gdot * r2 - r1) / g};
}

}  // namespace rtopt
