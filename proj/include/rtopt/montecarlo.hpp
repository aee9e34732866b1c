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

#include <cstdint>
#include <string>
#include <vector>

#include "rtopt/mission.hpp"

namespace rtopt {

struct McOptions {
  int samples = 100;
  std::uint64_t seed = 1;
  /// Linearized truth and the policy's own Kalman filter instead of
  /// nonlinear truth with an extended filter.
  bool linear = false;
  int threads = 1;
  /// Keep per-node trajectories in the samples (large).
  bool keep_trajectories = false;
};

struct McSample {
  std::uint64_t index = 0;
  bool ok = true;
  std::string failure;
  std::vector<Vec6> truth;     // per node, when kept
  std::vector<Vec6> estimate;  // per node, when kept
  std::vector<Vec3> commanded;
  std::vector<Vec3> executed;
  double dv_commanded = 0.0;
  double dv_executed = 0.0;
  std::vector<double> periapsis;  // per flyby
  Vec6 terminal_defect = Vec6::Zero();
  int od_inside = 0;
  int od_total = 0;
};

struct Histogram {
  std::vector<double> edges;  // bins + 1
  std::vector<int> counts;
};

Histogram make_histogram(const std::vector<double>& values, int bins);

struct FlybyStats {
  double nominal = 0.0;
  double min = 0.0;
  double mean = 0.0;
  double floor = 0.0;
  int below_floor = 0;
  Histogram histogram;
};

struct McReport {
  int samples = 0;
  int failed = 0;
  bool linear = false;
  std::uint64_t seed = 0;
  double dv_probability = 0.99;
  double dv_nominal = 0.0;
  double dv_quantile = 0.0;           // empirical, commanded controls
  double dv_quantile_executed = 0.0;  // empirical, executed controls
  double dv_quantile_halfwidth = 0.0;  // 99% bootstrap half-width
  double j_ub = 0.0;
  std::vector<double> thrust_violation_rate;  // per segment
  int thrust_violations = 0;
  std::vector<FlybyStats> flybys;
  Vec6 terminal_mean_defect = Vec6::Zero();
  Mat6 terminal_cov_sample = Mat6::Zero();
  Mat6 terminal_cov_predicted = Mat6::Zero();  // P_hat_N + P_tilde_N
  Mat6 terminal_cov_bound = Mat6::Zero();
  /// Largest eigenvalue of P_f^-1/2 S P_f^-1/2; at most 1 when the bound holds.
  double terminal_bound_ratio = 0.0;
  double od_containment = 0.0;
  Histogram dv_histogram;
  std::vector<double> dv_samples;  // in sample order, failed samples omitted

  bool campaign_failed() const { return failed * 100 > samples; }
};

/// Smallest sample x with empirical P(X <= x) >= p: the ceil(p n)-th order statistic.
double estimate_quantile(std::vector<double> samples, double p);

/// Half-width of the central `confidence` bootstrap interval of the p-quantile.
double bootstrap_halfwidth(const std::vector<double>& samples, double p, int resamples,
                           std::uint64_t seed, double confidence = 0.99);

struct BoundCheck {
  double quantile = 0.0;
  double j_ub = 0.0;
  double halfwidth = 0.0;
  bool holds = false;
};

/// Empirical quantile against the analytic bound, allowing the bootstrap half-width.
BoundCheck compare_bound(const McReport& report, double j_ub);

/// One-sided upper quantile of the binomial count: the smallest c with
/// P(Bin(n, p) <= c) >= confidence.
int binomial_upper_count(int n, double p, double confidence);

/// Plays the converted feedback policy of `solution` against sampled
/// dispersion, execution error, process noise and measurement noise.
McReport run_campaign(const MissionProblem& prob, const Iterate& solution, const McOptions& opts,
                      std::vector<McSample>* samples_out = nullptr);

}  // namespace rtopt
