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

#include <cmath>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "fixtures.hpp"
#include "rtopt/errors.hpp"

using namespace rtopt;
using namespace rtopt::testing;

namespace {

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

const Diagnostic* find_error(const ScenarioLoad& load, const std::string& path) {
  for (const auto& d : load.diagnostics)
    if (d.level == Diagnostic::Level::Error && d.path == path) return &d;
  return nullptr;
}

std::string replace(std::string text, const std::string& from, const std::string& to) {
  const auto pos = text.find(from);
  REQUIRE(pos != std::string::npos);
  return text.replace(pos, from.size(), to);
}

}  // namespace

TEST_CASE("shipped scenarios load cleanly") {
  for (const char* file :
       {"double_integrator.yaml", "circle.yaml", "ceres_reduced.yaml", "ceres_full.yaml"}) {
    CAPTURE(file);
    const ScenarioLoad load = read_scenario(scenario_path(file));
    for (const auto& d : load.diagnostics) INFO(d.str(file));
    CHECK(load.diagnostics.empty());
    REQUIRE(load.scenario.has_value());
    CHECK(load.scenario->source_hash.size() == 64);
    CHECK_NOTHROW(load.scenario->problem.check());
    CHECK(physics_checks(*load.scenario).empty());
  }
}

TEST_CASE("reduced and full interplanetary grids") {
  const Scenario r = shipped("ceres_reduced.yaml");
  CHECK(r.problem.segments() == 19);
  REQUIRE(r.problem.flybys.size() == 1);
  const int ga = r.problem.flybys[0].segment;
  CHECK(r.problem.grid.kinds[ga] == SegmentKind::GravityAssist);
  CHECK(r.problem.grid.duration(ga) == 0.0);
  CHECK(r.problem.grid.epochs.back() * r.scale.time_s / 86400.0 ==
        doctest::Approx(1700.0).epsilon(1e-12));
  const Scenario f = shipped("ceres_full.yaml");
  CHECK(f.problem.segments() == 40);
  CHECK(f.problem.flybys.size() == 1);
}

TEST_CASE("physical scale factors") {
  const Scenario sc = shipped("ceres_reduced.yaml");
  const double l = 1.495978707e8, mu = 1.32712440018e11;
  CHECK(sc.scale.length_km == l);
  CHECK(sc.scale.time_s == doctest::Approx(std::sqrt(l * l * l / mu)).epsilon(1e-14));
  CHECK(sc.problem.model.mu == doctest::Approx(1.0).epsilon(1e-14));
  // 0.35 N on 3000 kg, in km/s^2, over the acceleration unit.
  const double accel_unit = l / (sc.scale.time_s * sc.scale.time_s);
  CHECK(sc.problem.u_max == doctest::Approx(0.35 / 3000.0 / 1000.0 / accel_unit).epsilon(1e-12));
  CHECK(sc.problem.u_max == doctest::Approx(0.0196737).epsilon(1e-5));
  CHECK(sc.days() == doctest::Approx(86400.0 / sc.scale.time_s).epsilon(1e-14));
}

TEST_CASE("normalized scenarios keep values as written") {
  const Scenario sc = shipped("double_integrator.yaml");
  CHECK_FALSE(sc.physical);
  CHECK(sc.problem.u_max == 8.0);
  CHECK(sc.problem.segments() == 10);
  CHECK(sc.montecarlo.samples == 10000);
  CHECK(sc.montecarlo.seed == 11);
  CHECK(sc.montecarlo.linear);
}

TEST_CASE("negative process noise is reported with its location") {
  const std::string text = slurp(scenario_path("double_integrator.yaml"));
  const ScenarioLoad load = parse_scenario(replace(text, "sigma_acc: 0.05", "sigma_acc: -0.05"));
  CHECK(load.has_errors());
  const Diagnostic* d = find_error(load, "uncertainty.process.sigma_acc");
  REQUIRE(d != nullptr);
  CHECK(d->line > 0);
  const std::string s = d->str("di.yaml");
  CHECK(s.find("di.yaml:" + std::to_string(d->line) + ": error: uncertainty.process.sigma_acc: ") ==
        0);
}

TEST_CASE("a flyby cannot close the grid") {
  const std::string text = slurp(scenario_path("ceres_reduced.yaml"));
  const std::string moved =
      replace(text, "    - {duration: 1460.0, nodes: 16}\n", "");
  const ScenarioLoad load = parse_scenario(moved);
  CHECK(load.has_errors());
}

TEST_CASE("unknown keys and out-of-range probabilities are errors") {
  const std::string base = slurp(scenario_path("double_integrator.yaml"));
  {
    const ScenarioLoad load = parse_scenario(replace(base, "primary_mu: 0.0", "primary_mu: 0.0\nprimray: 1"));
    CHECK(load.has_errors());
    CHECK(find_error(load, "primray") != nullptr);
  }
  for (const char* bad : {"0.0", "0.5", "-1e-3", "0.7"}) {
    CAPTURE(bad);
    const ScenarioLoad load =
        parse_scenario(replace(base, "eps_thrust: 1.0e-3", std::string("eps_thrust: ") + bad));
    CHECK(find_error(load, "risk.eps_thrust") != nullptr);
  }
  {
    const ScenarioLoad load =
        parse_scenario(replace(base, "dv_probability: 0.99", "dv_probability: 1.0"));
    CHECK(find_error(load, "risk.dv_probability") != nullptr);
  }
}

TEST_CASE("malformed yaml and missing files") {
  CHECK(parse_scenario("name: [unclosed").has_errors());
  CHECK(read_scenario(scenario_path("does_not_exist.yaml")).has_errors());
  CHECK_THROWS_AS(load_scenario(scenario_path("does_not_exist.yaml")), Error);
}

TEST_CASE("diagnostic formatting") {
  Diagnostic d;
  d.path = "grid.legs[1].rp_min";
  d.line = 12;
  d.message = "must be positive";
  CHECK(d.str("f.yaml") == "f.yaml:12: error: grid.legs[1].rp_min: must be positive");
  d.level = Diagnostic::Level::Warning;
  d.line = 0;
  d.path.clear();
  CHECK(d.str("f.yaml") == "f.yaml: warning: must be positive");
}

TEST_CASE("content hash tracks file bytes") {
  const std::string text = slurp(scenario_path("double_integrator.yaml"));
  const Scenario a = scenario_from(text);
  const Scenario b = scenario_from(text + "\n# trailing comment\n");
  CHECK(a.source_hash != b.source_hash);
  CHECK(a.source_hash == scenario_from(text).source_hash);
  CHECK(a.source_hash == shipped("double_integrator.yaml").source_hash);
}
