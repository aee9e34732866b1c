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

#include "doctest.h"
#include "rtopt/scenario.hpp"

namespace rtopt::testing {

inline Scenario scenario_from(const std::string& yaml) {
  ScenarioLoad load = parse_scenario(yaml);
  for (const auto& d : load.diagnostics) INFO(d.str("inline"));
  REQUIRE_FALSE(load.has_errors());
  REQUIRE(load.scenario.has_value());
  return *load.scenario;
}

inline std::string scenario_path(const std::string& file) {
  return std::string(RTOPT_SCENARIO_DIR) + "/" + file;
}

inline Scenario shipped(const std::string& file) { return load_scenario(scenario_path(file)); }

/// Free double integrator over one unit of time, `nodes` nodes, from rest at
/// the origin to `target`, without uncertainty.
inline std::string integrator_yaml(int nodes, const std::string& target) {
  return "name: toy\nunits: {system: normalized}\nprimary_mu: 0.0\n"
         "grid:\n  legs:\n    - {duration: 1.0, nodes: " +
         std::to_string(nodes) +
         "}\n"
         "launch:\n  state: [0, 0, 0, 0, 0, 0]\n"
         "terminal:\n  state: " +
         target + "\nthrust:\n  u_max: 8.0\n";
}

}  // namespace rtopt::testing
