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

#include <string>
#include <vector>

#include "rtopt/types.hpp"

namespace rtopt {

/// Execution-error magnitudes: fixed and proportional parts for the
/// thrust magnitude and for the pointing direction (pointing in radians).
struct GatesParams {
  double magnitude_fixed = 0.0;
  double magnitude_prop = 0.0;
  double pointing_fixed = 0.0;
  double pointing_prop = 0.0;
};

/// Right-handed frame [S E Z] with Z along u. Identity when u is tiny or
/// nearly parallel to the inertial z axis.
Mat3 thrust_frame(const Vec3& u);

/// G_exe(u) = T(u) diag(sp, sp, sm), so u_executed = u + G_exe(u) w.
Mat3 gates_matrix(const Vec3& u, const GatesParams& params);

struct ProcessNoiseSpec {
  double sigma_acc = 0.0;
  double white_noise_dt = 0.0;
};

/// Continuous white-noise input map F * sigma_acc * sqrt(dt_wn).
Mat63 process_noise_sqrt(const ProcessNoiseSpec& spec);

enum class SegmentKind { Thrust, Coast, GravityAssist };

/// Node epochs t_0..t_N and the kind of each segment k in [0, N).
/// A gravity-assist segment has zero duration.
struct TimeGrid {
  std::vector<double> epochs;
  std::vector<SegmentKind> kinds;

  int segments() const { return static_cast<int>(kinds.size()); }
  int nodes() const { return static_cast<int>(epochs.size()); }
  double duration(int k) const { return epochs[k + 1] - epochs[k]; }
  void check() const;
};

/// Navigation quality phase over nodes [first, last].
struct OdPhase {
  std::string label;
  int first = 0;
  int last = 0;
  double multiplier = 1.0;
};

/// Full-state measurement y = x + D v at nodes flagged as measured.
struct ObservationNode {
  bool measured = false;
  Mat6 noise_sqrt = Mat6::Zero();
};

struct ObservationModel {
  std::vector<ObservationNode> nodes;
  int measurement_dim(int k) const { return nodes[k].measured ? kStateDim : 0; }
};

/// Assigns measurement noise per node from the base sigmas and phase
/// multipliers. The node right after a gravity-assist segment is unmeasured.
ObservationModel observation_schedule(const TimeGrid& grid, double sigma_pos,
                                      double sigma_vel,
                                      const std::vector<OdPhase>& phases);

}  // namespace rtopt
