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

#include <vector>

#include "rtopt/dynamics.hpp"
#include "rtopt/uncertainty.hpp"

namespace rtopt {

/// Lower Cholesky factor of a symmetric PSD matrix. Retries with a
/// 1e-14 * trace diagonal shift; the zero matrix maps to zero.
MatX psd_factor(const MatX& P);

struct KalmanNode {
  bool measured = false;
  Mat6 prior_cov = Mat6::Zero();
  Mat6 post_cov = Mat6::Zero();
  MatX gain;             // 6 x ny
  MatX innovation_cov;   // ny x ny
  MatX innovation_sqrt;  // ny x ny, lower
};

/// Error-covariance recursion of the linear Kalman filter along the grid.
/// Independent of the control policy, so it is computed once per reference.
struct KalmanSchedule {
  std::vector<KalmanNode> nodes;
};

KalmanSchedule kalman_schedule(const std::vector<LinearSegment>& segments,
                               const ObservationModel& obs, const Mat6& prior_cov0);

/// Causal feedback gains K_{k,i}, i <= k, mapping z_i to u_k.
struct GainMatrix {
  std::vector<std::vector<Mat36>> blocks;

  static GainMatrix zero(int segments);
  int segments() const { return static_cast<int>(blocks.size()); }
  MatX dense() const;
  static GainMatrix from_dense(const MatX& dense, int segments);
};

/// Stacked affine model of the filtered state over all nodes:
///   X = A x0 + B U + C + L Y,  S^1/2 = [A P0^1/2, L P_Y^1/2].
/// Only lower block triangles are stored.
class BlockSystem {
 public:
  BlockSystem(const std::vector<LinearSegment>& segments, const KalmanSchedule& kf,
              const Mat6& estimate_cov0);

  int segments() const { return n_; }
  /// A_{k-1} ... A_j, identity when j == k.
  const Mat6& transition(int k, int j) const { return trans_[k][j]; }
  /// Influence of u_j on node k (zero unless j < k).
  Mat63 control_block(int k, int j) const;
  const Vec6& drift(int k) const { return drift_[k]; }
  /// Block row k of S^1/2; columns past cols(k) are zero.
  const MatX& dispersion_row(int k) const { return rows_[k]; }
  int cols(int k) const { return static_cast<int>(rows_[k].cols()); }
  int total_cols() const { return cols(n_); }
  /// Columns [0, col_begin(i)) of S^1/2 are touched by nodes before i's innovation.
  int innovation_begin(int i) const { return ycol_[i]; }

  MatX dense_A() const;
  MatX dense_B() const;
  MatX dense_C() const;
  MatX dense_L() const;
  MatX dense_S() const;

 private:
  int n_;
  std::vector<std::vector<Mat6>> trans_;
  std::vector<Mat63> b_;
  std::vector<Vec6> drift_;
  std::vector<MatX> kgain_;
  std::vector<MatX> gains_;
  std::vector<MatX> rows_;
  std::vector<int> ycol_;
};

/// Mean filtered states x_bar_k.
std::vector<Vec6> state_means(const BlockSystem& bs, const Vec6& x0,
                              const std::vector<Vec3>& controls);

/// Square-root factors of the closed-loop statistics for gains K.
struct ClosedLoopFactors {
  std::vector<MatX> control;     // P_u_k^1/2 = sum_i K_{k,i} S_i, 3 x cols(k)
  std::vector<MatX> dispersion;  // P_hat_k^1/2, 6 x cols(k)
};

ClosedLoopFactors closed_loop_factors(const BlockSystem& bs, const GainMatrix& K);

/// K_hat = K (I + B K)^-1, the gain on filtered-state deviations.
GainMatrix convert_gain(const BlockSystem& bs, const GainMatrix& K);
/// Inverse of convert_gain: K = K_hat (I - B K_hat)^-1.
GainMatrix recover_gain(const BlockSystem& bs, const GainMatrix& K_hat);

/// Stacked rows S_i, i in [first, k], whose span bounds the reachable P_u_k^1/2.
MatX gain_row_space(const BlockSystem& bs, int k, int first);

}  // namespace rtopt
