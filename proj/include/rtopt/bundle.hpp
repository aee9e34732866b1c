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

#include "rtopt/montecarlo.hpp"
#include "rtopt/scenario.hpp"

namespace rtopt {

inline constexpr const char* kToolVersion = "0.1.0";
inline constexpr const char* kBundleFormat = "rtopt-bundle/1";

/// Optimizer output on disk: a JSON index plus CSV tables. Tables carry
/// normalized values at full round-trip precision; the index and the
/// trajectory table add physical units for readers.
struct SolutionBundle {
  std::string scenario_name;
  std::string scenario_hash;
  std::string tool_version = kToolVersion;
  bool physical = true;
  ScaleSet scale;
  bool stochastic = false;
  std::string status;
  bool converged = false;
  int iterations = 0;
  double cost_nominal = 0.0;
  double cost_bound = 0.0;
  double violation = 0.0;
  double dv_probability = 0.99;
  double thrust_margin = 0.0;  // risk margin multiplying control_sigma in the bound trace
  double u_max = 0.0;

  std::vector<double> epochs;
  std::vector<SegmentKind> kinds;
  Iterate iterate;
  GainMatrix gains_hat;
  std::vector<Vec6> states;
  std::vector<Mat6> state_cov;  // filtered-state dispersion plus estimation error, per node
  std::vector<double> control_sigma;
  std::vector<double> turn_angles;
  std::vector<double> periapsis;
  std::vector<std::string> flyby_bodies;
  std::vector<double> flyby_floor;  // rp_min
  std::vector<int> flyby_segments;
  std::vector<IterationRecord> seed_log;  // deterministic seeding run, if any
  std::vector<IterationRecord> log;
};

SolutionBundle make_bundle(const Scenario& sc, const ScpResult& res, bool stochastic,
                           const std::vector<IterationRecord>& seed_log = {});

void write_bundle(const SolutionBundle& b, const std::string& dir);
SolutionBundle read_bundle(const std::string& dir);

/// report.json plus histogram tables; samples.csv too when samples are given.
void write_mc_report(const McReport& r, const Scenario& sc, const SolutionBundle& b,
                     const std::string& dir, const std::vector<McSample>* samples = nullptr);

/// Plot-data exports and a plain-text summary; returns the summary text.
std::string write_report(const SolutionBundle& b, const std::string& mc_report_json,
                         const std::string& dir);

const char* to_string(SegmentKind k);

/// SHA-256 of the serialized bundle index; ties a Monte Carlo report to its input.
std::string bundle_digest(const SolutionBundle& b);

}  // namespace rtopt
