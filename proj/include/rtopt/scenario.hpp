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
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "rtopt/mission.hpp"
#include "rtopt/scp.hpp"

namespace rtopt {

struct McSettings {
  int samples = 100;
  std::uint64_t seed = 1;
  bool linear = false;
};

/// A parsed scenario file: the normalized problem plus everything needed to
/// convert results back to physical units.
struct Scenario {
  std::string name;
  std::string source_hash;  // SHA-256 of the file bytes
  bool physical = true;     // false: values are already normalized
  ScaleSet scale;
  MissionProblem problem;
  ScpParams scp;
  McSettings montecarlo;
  /// Stochastic runs refuse a deterministic seed that is not feasible to eps_feas.
  bool require_feasible_seed = true;

  double days() const;  // one day in normalized time
  int body_index(const std::string& name) const;
};

struct Diagnostic {
  enum class Level { Error, Warning };
  Level level = Level::Error;
  std::string path;  // dotted key path, e.g. grid.legs[1].rp_min
  int line = 0;      // 1-based, 0 when unknown
  std::string message;

  std::string str(const std::string& origin) const;
};

struct ScenarioLoad {
  std::optional<Scenario> scenario;
  std::vector<Diagnostic> diagnostics;

  bool has_errors() const;
};

ScenarioLoad parse_scenario(std::string_view text);
ScenarioLoad read_scenario(const std::string& path);

/// Sanity checks that need propagation: the filter floor at the final node
/// along the heuristic reference must sit below the terminal bound.
std::vector<Diagnostic> physics_checks(const Scenario& sc);

/// read_scenario that throws a Config error listing every diagnostic.
Scenario load_scenario(const std::string& path);

}  // namespace rtopt
