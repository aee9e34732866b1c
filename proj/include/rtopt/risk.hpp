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

namespace rtopt {

/// Margin m with P(|N(0, I_n)| <= m) = 1 - eps, i.e. the square root of the
/// chi-square quantile of order 1 - eps with n degrees of freedom.
double chi2_margin(double eps, int dof);

/// Older conservative margin sqrt(2 ln(1/eps)) + sqrt(n), kept for comparison.
double legacy_margin(double eps, int dof);

}  // namespace rtopt
