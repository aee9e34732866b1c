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

#include "rtopt/uncertainty.hpp"

#include <cmath>

#include "rtopt/errors.hpp"

namespace rtopt {

Mat3 thrust_frame(const Vec3& u) {
  const double un = u.norm();
  if (un < 1e-12) return Mat3::Identity();
  const Vec3 z = u / un;
  const Vec3 e_raw = Vec3::UnitZ().cross(z);
  const double en = e_raw.norm();
  if (en < 1e-9) return Mat3::Identity();
  const Vec3 e = e_raw / en;
  Mat3 T;
  T << e.cross(z), e, z;
  return T;
}

Mat3 gates_matrix(const Vec3& u, const GatesParams& p) {
  const double un2 = u.squaredNorm();
  const double sp = std::sqrt(p.pointing_fixed * p.pointing_fixed +
                              p.pointing_prop * p.pointing_prop * un2);
  const double sm = std::sqrt(p.magnitude_fixed * p.magnitude_fixed +
                              p.magnitude_prop * p.magnitude_prop * un2);
  return thrust_frame(u) * Vec3(sp, sp, sm).asDiagonal();
}

Mat63 process_noise_sqrt(const ProcessNoiseSpec& spec) {
  if (spec.sigma_acc < 0.0 || spec.white_noise_dt < 0.0)
    fail(ErrorKind::Domain, "process noise parameters must be non-negative");
  Mat63 G = Mat63::Zero();
  G.bottomRows<3>().diagonal().setConstant(spec.sigma_acc *
                                           std::sqrt(spec.white_noise_dt));
  return G;
}

void TimeGrid::check() const {
  if (epochs.size() != kinds.size() + 1 || kinds.empty())
    fail(ErrorKind::Config, "time grid needs N segments and N+1 epochs");
  for (int k = 0; k < segments(); ++k) {
    const double dt = duration(k);
    if (kinds[k] == SegmentKind::GravityAssist) {
      if (dt != 0.0)
        fail(ErrorKind::Config, "gravity-assist segment " + std::to_string(k) +
                                    " must have zero duration");
    } else if (!(dt > 0.0)) {
      fail(ErrorKind::Config, "segment " + std::to_string(k) +
                                  " must have positive duration");
    }
  }
}

ObservationModel observation_schedule(const TimeGrid& grid, double sigma_pos,
                                      double sigma_vel,
                                      const std::vector<OdPhase>& phases) {
  const int n = grid.nodes();
  if (sigma_pos < 0.0 || sigma_vel < 0.0)
    fail(ErrorKind::Domain, "measurement sigmas must be non-negative");
  std::vector<int> owner(n, -1);
  for (std::size_t p = 0; p < phases.size(); ++p) {
    const auto& ph = phases[p];
    if (ph.first < 0 || ph.last >= n || ph.first > ph.last)
      fail(ErrorKind::Config, "phase '" + ph.label + "' has an invalid node range");
    if (!(ph.multiplier > 0.0))
      fail(ErrorKind::Config, "phase '" + ph.label + "' needs a positive multiplier");
    for (int k = ph.first; k <= ph.last; ++k) {
      if (owner[k] >= 0)
        fail(ErrorKind::Config, "phases '" + phases[owner[k]].label + "' and '" +
                                    ph.label + "' overlap at node " +
                                    std::to_string(k));
      owner[k] = static_cast<int>(p);
    }
  }
  for (int k = 0; k < n; ++k)
    if (owner[k] < 0)
      fail(ErrorKind::Config, "node " + std::to_string(k) + " is not covered by any phase");

  ObservationModel model;
  model.nodes.resize(n);
  for (int k = 0; k < n; ++k) {
    const double m = phases[owner[k]].multiplier;
    auto& node = model.nodes[k];
    const bool after_flyby =
        k > 0 && grid.kinds[k - 1] == SegmentKind::GravityAssist;
    node.measured = !after_flyby;
    if (node.measured)
      node.noise_sqrt.diagonal() << Vec3::Constant(m * sigma_pos),
          Vec3::Constant(m * sigma_vel);
  }
  return model;
}

}  // namespace rtopt
