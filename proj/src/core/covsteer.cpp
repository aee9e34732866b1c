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

#include "rtopt/covsteer.hpp"

#include <string>

#include "rtopt/errors.hpp"

namespace rtopt {

MatX psd_factor(const MatX& P) {
  const MatX sym = 0.5 * (P + P.transpose());
  if (sym.cwiseAbs().maxCoeff() == 0.0) return MatX::Zero(P.rows(), P.cols());
  Eigen::LLT<MatX> llt(sym);
  if (llt.info() == Eigen::Success) return llt.matrixL();
  const double shift = 1e-14 * std::max(sym.trace(), 1e-300);
  llt.compute(sym + shift * MatX::Identity(P.rows(), P.cols()));
  if (llt.info() != Eigen::Success)
    fail(ErrorKind::Numerical, "covariance is not positive semidefinite");
  return llt.matrixL();
}

KalmanSchedule kalman_schedule(const std::vector<LinearSegment>& segments,
                               const ObservationModel& obs, const Mat6& prior_cov0) {
  const int n = static_cast<int>(segments.size());
  if (static_cast<int>(obs.nodes.size()) != n + 1)
    fail(ErrorKind::InvalidArgument, "observation model does not match the grid");
  KalmanSchedule kf;
  kf.nodes.resize(n + 1);
  Mat6 prior = prior_cov0;
  for (int k = 0; k <= n; ++k) {
    auto& node = kf.nodes[k];
    node.prior_cov = prior;
    node.measured = obs.nodes[k].measured;
    if (node.measured) {
      const Mat6& D = obs.nodes[k].noise_sqrt;
      const Mat6 R = D * D.transpose();
      const Mat6 Py = prior + R;
      Eigen::LLT<Mat6> llt(Py);
      if (llt.info() != Eigen::Success)
        fail(ErrorKind::Numerical,
             "innovation covariance is not positive definite at node " + std::to_string(k));
      node.innovation_cov = Py;
      node.innovation_sqrt = MatX(llt.matrixL());
      const Mat6 L = llt.solve(prior).transpose();  // prior symmetric
      node.gain = L;
      const Mat6 IL = Mat6::Identity() - L;
      node.post_cov = IL * prior * IL.transpose() + L * R * L.transpose();
    } else {
      node.gain = MatX::Zero(6, 0);
      node.innovation_cov = MatX::Zero(0, 0);
      node.innovation_sqrt = MatX::Zero(0, 0);
      node.post_cov = prior;
    }
    node.post_cov = 0.5 * (node.post_cov + node.post_cov.transpose());
    if (k < n) {
      const auto& s = segments[k];
      prior = s.A * node.post_cov * s.A.transpose() +
              s.exec_noise * s.exec_noise.transpose() +
              s.process_noise * s.process_noise.transpose();
      prior = 0.5 * (prior + prior.transpose());
    }
  }
  return kf;
}

GainMatrix GainMatrix::zero(int segments) {
  GainMatrix K;
  K.blocks.resize(segments);
  for (int k = 0; k < segments; ++k) K.blocks[k].assign(k + 1, Mat36::Zero());
  return K;
}

MatX GainMatrix::dense() const {
  const int n = segments();
  MatX out = MatX::Zero(3 * n, 6 * (n + 1));
  for (int k = 0; k < n; ++k)
    for (int i = 0; i <= k; ++i) out.block<3, 6>(3 * k, 6 * i) = blocks[k][i];
  return out;
}

GainMatrix GainMatrix::from_dense(const MatX& d, int segments) {
  GainMatrix K = zero(segments);
  for (int k = 0; k < segments; ++k)
    for (int i = 0; i <= k; ++i) K.blocks[k][i] = d.block<3, 6>(3 * k, 6 * i);
  return K;
}

BlockSystem::BlockSystem(const std::vector<LinearSegment>& segments,
                         const KalmanSchedule& kf, const Mat6& estimate_cov0)
    : n_(static_cast<int>(segments.size())) {
  if (static_cast<int>(kf.nodes.size()) != n_ + 1)
    fail(ErrorKind::InvalidArgument, "Kalman schedule does not match the segments");
  trans_.resize(n_ + 1);
  for (int k = 0; k <= n_; ++k) {
    trans_[k].resize(k + 1);
    trans_[k][k].setIdentity();
    for (int j = 0; j < k; ++j) trans_[k][j] = segments[k - 1].A * trans_[k - 1][j];
  }
  b_.resize(n_);
  for (int j = 0; j < n_; ++j) b_[j] = segments[j].B;
  drift_.assign(n_ + 1, Vec6::Zero());
  for (int k = 0; k < n_; ++k) drift_[k + 1] = segments[k].A * drift_[k] + segments[k].c;

  gains_.resize(n_ + 1);
  kgain_.resize(n_ + 1);
  ycol_.resize(n_ + 2);
  ycol_[0] = 6;
  for (int i = 0; i <= n_; ++i) {
    const auto& node = kf.nodes[i];
    kgain_[i] = node.gain;
    gains_[i] = node.gain * node.innovation_sqrt;  // L_i P_y^1/2
    ycol_[i + 1] = ycol_[i] + static_cast<int>(gains_[i].cols());
  }
  const MatX p0 = psd_factor(estimate_cov0);
  rows_.resize(n_ + 1);
  for (int k = 0; k <= n_; ++k) {
    MatX row = MatX::Zero(6, ycol_[k + 1]);
    row.leftCols(6) = trans_[k][0] * p0;
    for (int i = 0; i <= k; ++i)
      if (gains_[i].cols() > 0)
        row.middleCols(ycol_[i], gains_[i].cols()) = trans_[k][i] * gains_[i];
    rows_[k] = std::move(row);
  }
}

Mat63 BlockSystem::control_block(int k, int j) const {
  if (j >= k) return Mat63::Zero();
  return trans_[k][j + 1] * b_[j];
}

MatX BlockSystem::dense_A() const {
  MatX out(6 * (n_ + 1), 6);
  for (int k = 0; k <= n_; ++k) out.middleRows<6>(6 * k) = trans_[k][0];
  return out;
}

MatX BlockSystem::dense_B() const {
  MatX out = MatX::Zero(6 * (n_ + 1), 3 * n_);
  for (int k = 0; k <= n_; ++k)
    for (int j = 0; j < k; ++j) out.block<6, 3>(6 * k, 3 * j) = control_block(k, j);
  return out;
}

MatX BlockSystem::dense_C() const {
  MatX out(6 * (n_ + 1), 1);
  for (int k = 0; k <= n_; ++k) out.middleRows<6>(6 * k) = drift_[k];
  return out;
}

MatX BlockSystem::dense_L() const {
  const int ny = ycol_[n_ + 1] - 6;
  MatX out = MatX::Zero(6 * (n_ + 1), ny);
  for (int k = 0; k <= n_; ++k)
    for (int i = 0; i <= k; ++i) {
      if (kgain_[i].cols() == 0) continue;
      out.block(6 * k, ycol_[i] - 6, 6, kgain_[i].cols()) = trans_[k][i] * kgain_[i];
    }
  return out;
}

MatX BlockSystem::dense_S() const {
  MatX out = MatX::Zero(6 * (n_ + 1), total_cols());
  for (int k = 0; k <= n_; ++k) out.block(6 * k, 0, 6, cols(k)) = rows_[k];
  return out;
}

std::vector<Vec6> state_means(const BlockSystem& bs, const Vec6& x0,
                              const std::vector<Vec3>& controls) {
  const int n = bs.segments();
  if (static_cast<int>(controls.size()) != n)
    fail(ErrorKind::InvalidArgument, "control count does not match the segments");
  std::vector<Vec6> out(n + 1);
  for (int k = 0; k <= n; ++k) {
    Vec6 x = bs.transition(k, 0) * x0 + bs.drift(k);
    for (int j = 0; j < k; ++j) x += bs.control_block(k, j) * controls[j];
    out[k] = x;
  }
  return out;
}

ClosedLoopFactors closed_loop_factors(const BlockSystem& bs, const GainMatrix& K) {
  const int n = bs.segments();
  if (K.segments() != n)
    fail(ErrorKind::InvalidArgument, "gain matrix does not match the segments");
  ClosedLoopFactors f;
  f.control.resize(n);
  for (int k = 0; k < n; ++k) {
    MatX pu = MatX::Zero(3, bs.cols(k));
    for (int i = 0; i <= k; ++i)
      if (!K.blocks[k][i].isZero(0.0))
        pu.leftCols(bs.cols(i)) += K.blocks[k][i] * bs.dispersion_row(i);
    f.control[k] = std::move(pu);
  }
  f.dispersion.resize(n + 1);
  for (int k = 0; k <= n; ++k) {
    MatX ph = bs.dispersion_row(k);
    for (int j = 0; j < k; ++j)
      ph.leftCols(bs.cols(j)) += bs.control_block(k, j) * f.control[j];
    f.dispersion[k] = std::move(ph);
  }
  return f;
}

GainMatrix convert_gain(const BlockSystem& bs, const GainMatrix& K) {
  const int n = bs.segments();
  const MatX Kd = K.dense();
  const MatX M = MatX::Identity(6 * (n + 1), 6 * (n + 1)) + bs.dense_B() * Kd;
  // M is unit lower triangular; solve K_hat M = K.
  const MatX Kt = M.transpose().triangularView<Eigen::UnitUpper>().solve(Kd.transpose());
  return GainMatrix::from_dense(Kt.transpose(), n);
}

GainMatrix recover_gain(const BlockSystem& bs, const GainMatrix& K_hat) {
  const int n = bs.segments();
  const MatX Kd = K_hat.dense();
  const MatX M = MatX::Identity(6 * (n + 1), 6 * (n + 1)) - bs.dense_B() * Kd;
  const MatX Kt = M.transpose().triangularView<Eigen::UnitUpper>().solve(Kd.transpose());
  return GainMatrix::from_dense(Kt.transpose(), n);
}

MatX gain_row_space(const BlockSystem& bs, int k, int first) {
  first = std::max(first, 0);
  MatX out = MatX::Zero(6 * (k - first + 1), bs.cols(k));
  for (int i = first; i <= k; ++i)
    out.block(6 * (i - first), 0, 6, bs.cols(i)) = bs.dispersion_row(i);
  return out;
}

}  // namespace rtopt
