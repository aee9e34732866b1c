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

#include "rtopt/risk.hpp"

#include <cmath>
#include <boost/math/special_functions/gamma.hpp>

#include "rtopt/errors.hpp"

namespace rtopt {

double chi2_margin(double eps, int dof) {
  if (!(eps > 0.0 && eps < 1.0) || dof < 1)
    fail(ErrorKind::Domain, "risk margin needs eps in (0, 1) and dof >= 1");
  const double a = 0.5 * dof;
  const double target = 1.0 - eps;
  // Bracket the quantile in q = chi-square value.
  double lo = 0.0, hi = std::max(1.0, 2.0 * dof);
  while (boost::math::gamma_p(a, 0.5 * hi) < target) hi *= 2.0;
  double q = 0.5 * (lo + hi);
  for (int it = 0; it < 200; ++it) {
    const double F = boost::math::gamma_p(a, 0.5 * q) - target;
    if (F > 0.0) hi = q; else lo = q;
    const double dF = 0.5 * boost::math::gamma_p_derivative(a, 0.5 * q);
    double next = dF > 0.0 ? q - F / dF : 0.5 * (lo + hi);
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if (std::abs(next - q) <= 1e-14 * q) { q = next; break; }
    q = next;
  }
  return std::sqrt(q);
}

double legacy_margin(double eps, int dof) {
  if (!(eps > 0.0 && eps < 1.0) || dof < 1)
    fail(ErrorKind::Domain, "risk margin needs eps in (0, 1) and dof >= 1");
  return std::sqrt(2.0 * std::log(1.0 / eps)) + std::sqrt(static_cast<double>(dof));
}

}  // namespace rtopt
