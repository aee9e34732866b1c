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

#include "rtopt/scenario.hpp"

#include <yaml-cpp/yaml.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <type_traits>

#include "rtopt/digest.hpp"
#include "rtopt/errors.hpp"

namespace rtopt {

namespace {

constexpr double kDeg = M_PI / 180.0;
constexpr double kDaySeconds = 86400.0;

struct Fail {};  // unwinds a section after its diagnostic is recorded

class Reader {
 public:
  std::vector<Diagnostic> diags;

  void error(const YAML::Node& n, const std::string& path, const std::string& msg) {
    diags.push_back({Diagnostic::Level::Error, path, line_of(n), msg});
  }

  static int line_of(const YAML::Node& n) {
    if (!n.IsDefined() || n.Mark().is_null()) return 0;
    return n.Mark().line + 1;
  }

  // Flags keys outside `allowed`.
  void keys(const YAML::Node& map, const std::string& path,
            const std::set<std::string>& allowed) {
    if (!map.IsMap()) {
      error(map, path, "expected a mapping");
      throw Fail{};
    }
    for (const auto& kv : map) {
      const std::string k = kv.first.as<std::string>();
      if (!allowed.count(k)) error(kv.first, join(path, k), "unknown key '" + k + "'");
    }
  }

  static std::string join(const std::string& path, const std::string& key) {
    return path.empty() ? key : path + "." + key;
  }

  std::optional<double> opt_num(const YAML::Node& map, const std::string& path,
                                const std::string& key) {
    const YAML::Node n = map[key];
    if (!n.IsDefined() || n.IsNull()) return std::nullopt;
    try {
      if (!n.IsScalar()) throw YAML::Exception(n.Mark(), "not a scalar");
      const double v = n.as<double>();
      if (!std::isfinite(v)) throw YAML::Exception(n.Mark(), "not finite");
      return v;
    } catch (const YAML::Exception&) {
      error(n, join(path, key), "expected a finite number");
      return std::nullopt;
    }
  }

  double num(const YAML::Node& map, const std::string& path, const std::string& key,
             std::optional<double> fallback = std::nullopt) {
    if (auto v = opt_num(map, path, key)) return *v;
    if (fallback) {
      if (map[key].IsDefined() && !map[key].IsNull()) throw Fail{};
      return *fallback;
    }
    if (!map[key].IsDefined()) error(map, join(path, key), "missing required key");
    throw Fail{};
  }

  double nonneg(const YAML::Node& map, const std::string& path, const std::string& key,
                std::optional<double> fallback = std::nullopt) {
    const double v = num(map, path, key, fallback);
    if (v < 0.0) {
      error(map[key], join(path, key), "must be non-negative");
      throw Fail{};
    }
    return v;
  }

  double positive(const YAML::Node& map, const std::string& path, const std::string& key,
                  std::optional<double> fallback = std::nullopt) {
    const double v = num(map, path, key, fallback);
    if (!(v > 0.0)) {
      error(map[key], join(path, key), "must be positive");
      throw Fail{};
    }
    return v;
  }

  int integer(const YAML::Node& map, const std::string& path, const std::string& key,
              std::optional<int> fallback = std::nullopt) {
    const YAML::Node n = map[key];
    if (!n.IsDefined() || n.IsNull()) {
      if (fallback) return *fallback;
      error(map, join(path, key), "missing required key");
      throw Fail{};
    }
    try {
      return n.as<int>();
    } catch (const YAML::Exception&) {
      error(n, join(path, key), "expected an integer");
      throw Fail{};
    }
  }

  std::string text(const YAML::Node& map, const std::string& path, const std::string& key,
                   std::optional<std::string> fallback = std::nullopt) {
    const YAML::Node n = map[key];
    if (!n.IsDefined() || n.IsNull()) {
      if (fallback) return *fallback;
      error(map, join(path, key), "missing required key");
      throw Fail{};
    }
    if (!n.IsScalar()) {
      error(n, join(path, key), "expected a string");
      throw Fail{};
    }
    return n.as<std::string>();
  }

  bool flag(const YAML::Node& map, const std::string& path, const std::string& key,
            bool fallback) {
    const YAML::Node n = map[key];
    if (!n.IsDefined() || n.IsNull()) return fallback;
    try {
      return n.as<bool>();
    } catch (const YAML::Exception&) {
      error(n, join(path, key), "expected true or false");
      throw Fail{};
    }
  }

  Vec6 vec6(const YAML::Node& map, const std::string& path, const std::string& key) {
    const YAML::Node n = map[key];
    if (!n.IsSequence() || n.size() != 6) {
      error(n.IsDefined() ? n : map, join(path, key), "expected a list of 6 numbers");
      throw Fail{};
    }
    Vec6 v;
    for (int i = 0; i < 6; ++i) {
      try {
        v(i) = n[i].as<double>();
      } catch (const YAML::Exception&) {
        error(n[i], join(path, key) + "[" + std::to_string(i) + "]", "expected a number");
        throw Fail{};
      }
    }
    return v;
  }

  // Runs one section; a Fail only abandons that section.
  template <class F>
  void section(F&& f) {
    try {
      f();
    } catch (const Fail&) {
    }
  }
};

// Physical-to-normalized conversion. In normalized mode every factor is 1.
struct Units {
  bool physical = true;
  ScaleSet scale;

  double length(double km) const { return physical ? km / scale.length_km : km; }
  double speed(double kms) const { return physical ? kms / scale.velocity_kms() : kms; }
  double accel(double kms2) const { return physical ? kms2 / scale.accel_kms2() : kms2; }
  double time(double days) const { return physical ? days * kDaySeconds / scale.time_s : days; }
  double mu(double km3s2) const { return physical ? scale.normalize_mu(km3s2) : km3s2; }
  Vec6 state(const Vec6& x) const {
    Vec6 out;
    out << x.head<3>().unaryExpr([&](double v) { return length(v); }),
        x.tail<3>().unaryExpr([&](double v) { return speed(v); });
    return out;
  }
  Mat6 cov(double sigma_r_km, double sigma_v_kms) const {
    Mat6 P = Mat6::Zero();
    const double r = length(sigma_r_km), v = speed(sigma_v_kms);
    P.diagonal() << Vec3::Constant(r * r), Vec3::Constant(v * v);
    return P;
  }
};

class Builder {
 public:
  explicit Builder(Reader& r) : r_(r) {}

  void run(const YAML::Node& root, Scenario& sc) {
    r_.section([&] {
      r_.keys(root, "", {"name", "units", "primary_mu", "bodies", "grid", "launch",
                         "terminal", "thrust", "risk", "uncertainty", "scp", "solver",
                         "montecarlo", "require_feasible_seed", "propagation"});
    });
    r_.section([&] { sc.name = r_.text(root, "", "name"); });
    r_.section([&] { sc.require_feasible_seed = r_.flag(root, "", "require_feasible_seed", true); });
    units(root, sc);
    bodies(root, sc);
    grid(root, sc);
    launch(root, sc);
    terminal(root, sc);
    thrust(root, sc);
    risk(root, sc);
    uncertainty(root, sc);
    scp(root, sc);
    solver(root, sc);
    montecarlo(root, sc);
    propagation(root, sc);
  }

 private:
  Reader& r_;
  Units u_;
  std::vector<std::string> names_;

  int body_ref(const YAML::Node& map, const std::string& path, const std::string& key) {
    const std::string name = r_.text(map, path, key);
    for (std::size_t i = 0; i < names_.size(); ++i)
      if (names_[i] == name) return static_cast<int>(i);
    r_.error(map[key], Reader::join(path, key), "unknown body '" + name + "'");
    throw Fail{};
  }

  void units(const YAML::Node& root, Scenario& sc) {
    double mu_primary = 0.0;
    bool ok = true;
    r_.section([&] {
      mu_primary = r_.nonneg(root, "", "primary_mu");
    });
    const YAML::Node un = root["units"];
    try {
      if (!un.IsDefined()) {
        r_.error(root, "units", "missing required key");
        throw Fail{};
      }
      r_.keys(un, "units", {"system", "length_km", "time_s"});
      const std::string sys = r_.text(un, "units", "system");
      if (sys == "physical") {
        u_.physical = true;
        const double l = r_.positive(un, "units", "length_km", 1.495978707e8);
        if (un["time_s"].IsDefined()) {
          u_.scale.length_km = l;
          u_.scale.time_s = r_.positive(un, "units", "time_s");
        } else if (mu_primary > 0.0) {
          u_.scale = ScaleSet::for_primary(mu_primary, l);
        } else {
          r_.error(un, "units.time_s", "needed when primary_mu is zero");
          throw Fail{};
        }
      } else if (sys == "normalized") {
        u_.physical = false;
        u_.scale = ScaleSet{};
        if (un["length_km"].IsDefined() || un["time_s"].IsDefined())
          r_.error(un, "units", "normalized scenarios take no scale factors");
      } else {
        r_.error(un["system"], "units.system", "expected 'physical' or 'normalized'");
        throw Fail{};
      }
    } catch (const Fail&) {
      ok = false;
    }
    sc.physical = u_.physical;
    sc.scale = u_.scale;
    if (ok) sc.problem.model.mu = u_.mu(mu_primary);
  }

  void bodies(const YAML::Node& root, Scenario& sc) {
    const YAML::Node list = root["bodies"];
    if (!list.IsDefined() || list.IsNull()) return;
    if (!list.IsSequence()) {
      r_.error(list, "bodies", "expected a list");
      return;
    }
    for (std::size_t i = 0; i < list.size(); ++i) {
      const YAML::Node b = list[i];
      const std::string path = "bodies[" + std::to_string(i) + "]";
      std::string name = "body" + std::to_string(i);
      BodyEphemeris e;
      r_.section([&] {
        r_.keys(b, path, {"name", "mu", "a", "e", "i", "raan", "argp", "mean_anomaly", "epoch"});
        name = r_.text(b, path, "name");
        if (std::find(names_.begin(), names_.end(), name) != names_.end())
          r_.error(b["name"], path + ".name", "duplicate body name '" + name + "'");
        e.name = name;
        e.mu = u_.mu(r_.nonneg(b, path, "mu", 0.0));
        // Semi-major axis in AU for physical scenarios.
        const double a = r_.positive(b, path, "a");
        e.semi_major_axis = u_.physical ? u_.length(a * 1.495978707e8) : a;
        const double ecc = r_.nonneg(b, path, "e");
        if (ecc >= 1.0) {
          r_.error(b["e"], path + ".e", "only elliptic orbits are supported");
          throw Fail{};
        }
        e.eccentricity = ecc;
        e.inclination = r_.num(b, path, "i", 0.0) * kDeg;
        e.raan = r_.num(b, path, "raan", 0.0) * kDeg;
        e.arg_periapsis = r_.num(b, path, "argp", 0.0) * kDeg;
        e.mean_anomaly = r_.num(b, path, "mean_anomaly", 0.0) * kDeg;
        e.epoch = u_.time(r_.num(b, path, "epoch", 0.0));
      });
      names_.push_back(name);
      sc.problem.bodies.push_back(e);
    }
  }

  void grid(const YAML::Node& root, Scenario& sc) {
    const YAML::Node g = root["grid"];
    auto& grid = sc.problem.grid;
    try {
      if (!g.IsDefined()) {
        r_.error(root, "grid", "missing required key");
        throw Fail{};
      }
      r_.keys(g, "grid", {"start", "legs"});
      double t = u_.time(r_.num(g, "grid", "start", 0.0));
      grid.epochs = {t};
      const YAML::Node legs = g["legs"];
      if (!legs.IsSequence() || legs.size() == 0) {
        r_.error(legs.IsDefined() ? legs : g, "grid.legs", "expected a non-empty list");
        throw Fail{};
      }
      for (std::size_t i = 0; i < legs.size(); ++i) {
        const YAML::Node leg = legs[i];
        const std::string path = "grid.legs[" + std::to_string(i) + "]";
        if (leg["flyby"].IsDefined()) {
          r_.keys(leg, path, {"flyby", "rp_min", "theta_min", "theta_max"});
          FlybySpec f;
          f.segment = grid.segments();
          f.body = body_ref(leg, path, "flyby");
          f.mu = sc.problem.bodies[f.body].mu;
          if (!(f.mu > 0.0))
            r_.error(leg["flyby"], path + ".flyby", "flyby body needs a positive mu");
          f.rp_min = u_.length(r_.positive(leg, path, "rp_min"));
          f.theta_min = r_.num(leg, path, "theta_min", 1.0) * kDeg;
          f.theta_max = r_.num(leg, path, "theta_max", 179.0) * kDeg;
          if (!(0.0 < f.theta_min && f.theta_min < f.theta_max && f.theta_max < M_PI))
            r_.error(leg, path, "turn-angle bounds must satisfy 0 < theta_min < theta_max < 180");
          if (i == 0 || i + 1 == legs.size())
            r_.error(leg, path, "a flyby cannot be the first or the final segment");
          grid.kinds.push_back(SegmentKind::GravityAssist);
          grid.epochs.push_back(t);
          sc.problem.flybys.push_back(f);
          continue;
        }
        r_.keys(leg, path, {"duration", "nodes", "kind"});
        const double dur = u_.time(r_.positive(leg, path, "duration"));
        const int nodes = r_.integer(leg, path, "nodes");
        if (nodes < 2) {
          r_.error(leg["nodes"], path + ".nodes", "a leg needs at least 2 nodes");
          throw Fail{};
        }
        const std::string kind = r_.text(leg, path, "kind", "thrust");
        SegmentKind sk = SegmentKind::Thrust;
        if (kind == "coast") {
          sk = SegmentKind::Coast;
        } else if (kind != "thrust") {
          r_.error(leg["kind"], path + ".kind", "expected 'thrust' or 'coast'");
          throw Fail{};
        }
        const double t0 = t;
        for (int k = 1; k < nodes; ++k) {
          // Epochs are spaced from the leg start to avoid drift.
          const double tk = k + 1 == nodes ? t0 + dur : t0 + dur * k / (nodes - 1);
          grid.kinds.push_back(sk);
          grid.epochs.push_back(tk);
        }
        t = t0 + dur;
      }
    } catch (const Fail&) {
      grid = TimeGrid{};
    }
  }

  void launch(const YAML::Node& root, Scenario& sc) {
    const YAML::Node l = root["launch"];
    auto& ls = sc.problem.launch;
    r_.section([&] {
      if (!l.IsDefined()) {
        r_.error(root, "launch", "missing required key");
        throw Fail{};
      }
      r_.keys(l, "launch", {"body", "vinf_max", "state"});
      if (l["body"].IsDefined()) {
        if (l["state"].IsDefined()) r_.error(l, "launch", "give either body or state, not both");
        ls.from_body = true;
        ls.body = body_ref(l, "launch", "body");
        ls.vinf_max = u_.speed(r_.nonneg(l, "launch", "vinf_max"));
      } else {
        ls.from_body = false;
        ls.state = u_.state(r_.vec6(l, "launch", "state"));
      }
    });
  }

  void terminal(const YAML::Node& root, Scenario& sc) {
    const YAML::Node t = root["terminal"];
    auto& ts = sc.problem.terminal;
    r_.section([&] {
      if (!t.IsDefined()) {
        r_.error(root, "terminal", "missing required key");
        throw Fail{};
      }
      r_.keys(t, "terminal", {"body", "state", "sigma_r", "sigma_v"});
      if (t["body"].IsDefined()) {
        if (t["state"].IsDefined())
          r_.error(t, "terminal", "give either body or state, not both");
        ts.to_body = true;
        ts.body = body_ref(t, "terminal", "body");
      } else {
        ts.to_body = false;
        ts.state = u_.state(r_.vec6(t, "terminal", "state"));
      }
      const bool has_r = t["sigma_r"].IsDefined(), has_v = t["sigma_v"].IsDefined();
      if (has_r != has_v) {
        r_.error(t, "terminal", "sigma_r and sigma_v must be given together");
      } else if (has_r) {
        ts.cov = u_.cov(r_.positive(t, "terminal", "sigma_r"),
                        r_.positive(t, "terminal", "sigma_v"));
      }
    });
  }

  void thrust(const YAML::Node& root, Scenario& sc) {
    const YAML::Node t = root["thrust"];
    r_.section([&] {
      if (!t.IsDefined()) {
        r_.error(root, "thrust", "missing required key");
        throw Fail{};
      }
      r_.keys(t, "thrust", {"u_max", "max_thrust_n", "mass_kg"});
      if (t["u_max"].IsDefined()) {
        if (t["max_thrust_n"].IsDefined() || t["mass_kg"].IsDefined())
          r_.error(t, "thrust", "give either u_max or max_thrust_n with mass_kg");
        sc.problem.u_max = u_.accel(r_.positive(t, "thrust", "u_max"));
      } else {
        if (!u_.physical) {
          r_.error(t, "thrust", "normalized scenarios give u_max directly");
          throw Fail{};
        }
        const double f = r_.positive(t, "thrust", "max_thrust_n");
        const double m = r_.positive(t, "thrust", "mass_kg");
        sc.problem.u_max = u_.accel(f / m / 1000.0);
      }
    });
  }

  void risk(const YAML::Node& root, Scenario& sc) {
    const YAML::Node k = root["risk"];
    if (!k.IsDefined()) return;
    auto& p = sc.problem;
    r_.section([&] {
      r_.keys(k, "risk", {"eps_thrust", "eps_flyby", "dv_probability", "matrix_norm"});
      for (auto [key, dst] : {std::pair{"eps_thrust", &p.eps_thrust},
                              std::pair{"eps_flyby", &p.eps_flyby}}) {
        r_.section([&] {
          const double v = r_.num(k, "risk", key, *dst);
          if (!(v > 0.0 && v < 0.5)) {
            r_.error(k[key], std::string("risk.") + key, "probability must lie in (0, 0.5)");
            throw Fail{};
          }
          *dst = v;
        });
      }
      r_.section([&] {
        const double v = r_.num(k, "risk", "dv_probability", p.dv_probability);
        if (!(v > 0.5 && v < 1.0)) {
          r_.error(k["dv_probability"], "risk.dv_probability", "must lie in (0.5, 1)");
          throw Fail{};
        }
        p.dv_probability = v;
      });
      const std::string norm = r_.text(k, "risk", "matrix_norm", "frobenius");
      if (norm == "frobenius") p.matrix_norm = MatrixNorm::Frobenius;
      else if (norm == "spectral_psd") p.matrix_norm = MatrixNorm::SpectralPsd;
      else r_.error(k["matrix_norm"], "risk.matrix_norm", "expected 'frobenius' or 'spectral_psd'");
    });
  }

  Mat6 sigma_pair(const YAML::Node& map, const std::string& path) {
    r_.keys(map, path, {"sigma_r", "sigma_v"});
    return u_.cov(r_.nonneg(map, path, "sigma_r"), r_.nonneg(map, path, "sigma_v"));
  }

  void uncertainty(const YAML::Node& root, Scenario& sc) {
    auto& p = sc.problem;
    const YAML::Node un = root["uncertainty"];
    const int nodes = p.grid.nodes();
    p.stochastic = false;
    p.uncertainty.obs.nodes.assign(std::max(nodes, 0), ObservationNode{});
    if (!un.IsDefined() || un.IsNull()) return;
    r_.section([&] {
      r_.keys(un, "uncertainty", {"enabled", "initial_error", "initial_estimate", "gates",
                                  "process", "od", "gain_memory"});
      p.stochastic = r_.flag(un, "uncertainty", "enabled", true);
      r_.section([&] {
        const int m = r_.integer(un, "uncertainty", "gain_memory", 0);
        if (m < 0) r_.error(un["gain_memory"], "uncertainty.gain_memory", "must be non-negative");
        p.gain_memory = std::max(m, 0);
      });
      if (un["initial_error"].IsDefined())
        r_.section([&] {
          p.uncertainty.error_cov0 = sigma_pair(un["initial_error"], "uncertainty.initial_error");
        });
      if (un["initial_estimate"].IsDefined())
        r_.section([&] {
          p.uncertainty.estimate_cov0 =
              sigma_pair(un["initial_estimate"], "uncertainty.initial_estimate");
        });
      if (const YAML::Node g = un["gates"]; g.IsDefined())
        r_.section([&] {
          const std::string path = "uncertainty.gates";
          r_.keys(g, path, {"magnitude_fixed", "magnitude_prop", "pointing_fixed",
                            "pointing_prop"});
          auto& gp = p.uncertainty.gates;
          // Fixed parts are accelerations; proportional parts are a ratio and an angle.
          gp.magnitude_fixed = u_.accel(r_.nonneg(g, path, "magnitude_fixed", 0.0));
          gp.magnitude_prop = r_.nonneg(g, path, "magnitude_prop", 0.0);
          gp.pointing_fixed = u_.accel(r_.nonneg(g, path, "pointing_fixed", 0.0));
          gp.pointing_prop = r_.nonneg(g, path, "pointing_prop", 0.0) * kDeg;
        });
      if (const YAML::Node pr = un["process"]; pr.IsDefined())
        r_.section([&] {
          const std::string path = "uncertainty.process";
          r_.keys(pr, path, {"sigma_acc", "white_noise_dt"});
          p.uncertainty.process.sigma_acc = u_.accel(r_.nonneg(pr, path, "sigma_acc"));
          p.uncertainty.process.white_noise_dt = u_.time(r_.nonneg(pr, path, "white_noise_dt"));
        });
      if (const YAML::Node od = un["od"]; od.IsDefined()) r_.section([&] { observations(od, sc); });
    });
  }

  void observations(const YAML::Node& od, Scenario& sc) {
    auto& p = sc.problem;
    const std::string path = "uncertainty.od";
    r_.keys(od, path, {"sigma_r", "sigma_v", "phases"});
    const double sr = u_.length(r_.nonneg(od, path, "sigma_r"));
    const double sv = u_.speed(r_.nonneg(od, path, "sigma_v"));
    const int n = p.grid.nodes();
    if (n < 2) throw Fail{};
    std::vector<OdPhase> phases;
    const YAML::Node list = od["phases"];
    if (!list.IsDefined()) {
      phases.push_back({"cruise", 0, n - 1, 1.0});
    } else {
      if (!list.IsSequence()) {
        r_.error(list, path + ".phases", "expected a list");
        throw Fail{};
      }
      // Negative node indices count from the final node.
      auto resolve = [n](int k) { return k < 0 ? n + k : k; };
      std::vector<int> owner(n, -1);
      bool ok = true;
      for (std::size_t i = 0; i < list.size(); ++i) {
        const YAML::Node ph = list[i];
        const std::string pp = path + ".phases[" + std::to_string(i) + "]";
        r_.keys(ph, pp, {"label", "first", "last", "multiplier"});
        OdPhase o;
        o.label = r_.text(ph, pp, "label");
        o.first = resolve(r_.integer(ph, pp, "first"));
        o.last = resolve(r_.integer(ph, pp, "last"));
        o.multiplier = r_.positive(ph, pp, "multiplier", 1.0);
        if (o.first < 0 || o.last >= n || o.first > o.last) {
          r_.error(ph, pp, "node range [" + std::to_string(o.first) + ", " +
                               std::to_string(o.last) + "] lies outside the grid of " +
                               std::to_string(n) + " nodes");
          ok = false;
          continue;
        }
        for (int k = o.first; k <= o.last; ++k) {
          if (owner[k] >= 0) {
            r_.error(ph, pp, "overlaps phase '" + phases[owner[k]].label + "' at node " +
                                 std::to_string(k));
            ok = false;
            break;
          }
          owner[k] = static_cast<int>(phases.size());
        }
        phases.push_back(o);
      }
      for (int k = 0; k < n && ok; ++k)
        if (owner[k] < 0) {
          r_.error(list, path + ".phases", "node " + std::to_string(k) + " is not covered");
          ok = false;
        }
      if (!ok) throw Fail{};
    }
    p.uncertainty.obs = observation_schedule(p.grid, sr, sv, phases);
  }

  template <class T>
  void maybe(const YAML::Node& m, const std::string& path, const char* key, T& dst) {
    if (!m[key].IsDefined()) return;
    r_.section([&] {
      if constexpr (std::is_same_v<T, int>) dst = r_.integer(m, path, key);
      else if constexpr (std::is_same_v<T, bool>) dst = r_.flag(m, path, key, dst);
      else dst = r_.num(m, path, key);
    });
  }

  void scp(const YAML::Node& root, Scenario& sc) {
    const YAML::Node s = root["scp"];
    if (!s.IsDefined()) return;
    auto& q = sc.scp;
    r_.section([&] {
      r_.keys(s, "scp", {"eps_opt", "eps_feas", "eta0", "eta1", "eta2", "alpha1", "alpha2",
                         "beta", "gamma", "weight_init", "weight_max", "tr_init", "tr_min",
                         "tr_max", "tau", "max_iterations", "max_solver_retries"});
      maybe(s, "scp", "eps_opt", q.eps_opt);
      maybe(s, "scp", "eps_feas", q.eps_feas);
      maybe(s, "scp", "eta0", q.eta0);
      maybe(s, "scp", "eta1", q.eta1);
      maybe(s, "scp", "eta2", q.eta2);
      maybe(s, "scp", "alpha1", q.alpha1);
      maybe(s, "scp", "alpha2", q.alpha2);
      maybe(s, "scp", "beta", q.beta);
      maybe(s, "scp", "gamma", q.gamma);
      maybe(s, "scp", "weight_init", q.weight_init);
      maybe(s, "scp", "weight_max", q.weight_max);
      maybe(s, "scp", "tr_init", q.tr_init);
      maybe(s, "scp", "tr_min", q.tr_min);
      maybe(s, "scp", "tr_max", q.tr_max);
      maybe(s, "scp", "tau", q.tau);
      maybe(s, "scp", "max_iterations", q.max_iterations);
      maybe(s, "scp", "max_solver_retries", q.max_solver_retries);
    });
  }

  void solver(const YAML::Node& root, Scenario& sc) {
    const YAML::Node s = root["solver"];
    if (!s.IsDefined()) return;
    auto& q = sc.scp.solver;
    r_.section([&] {
      r_.keys(s, "solver", {"max_iter", "tol_feas", "tol_gap_abs", "tol_gap_rel",
                            "tol_infeas", "tol_reduced", "static_reg", "refine_iters",
                            "ruiz_iters", "max_step"});
      maybe(s, "solver", "max_iter", q.max_iter);
      maybe(s, "solver", "tol_feas", q.tol_feas);
      maybe(s, "solver", "tol_gap_abs", q.tol_gap_abs);
      maybe(s, "solver", "tol_gap_rel", q.tol_gap_rel);
      maybe(s, "solver", "tol_infeas", q.tol_infeas);
      maybe(s, "solver", "tol_reduced", q.tol_reduced);
      maybe(s, "solver", "static_reg", q.static_reg);
      maybe(s, "solver", "refine_iters", q.refine_iters);
      maybe(s, "solver", "ruiz_iters", q.ruiz_iters);
      maybe(s, "solver", "max_step", q.max_step);
    });
  }

  void montecarlo(const YAML::Node& root, Scenario& sc) {
    const YAML::Node m = root["montecarlo"];
    if (!m.IsDefined()) return;
    r_.section([&] {
      r_.keys(m, "montecarlo", {"samples", "seed", "mode"});
      const int n = r_.integer(m, "montecarlo", "samples", sc.montecarlo.samples);
      if (n < 1) r_.error(m["samples"], "montecarlo.samples", "must be positive");
      sc.montecarlo.samples = std::max(n, 1);
      r_.section([&] {
        if (m["seed"].IsDefined()) {
          try {
            sc.montecarlo.seed = m["seed"].as<std::uint64_t>();
          } catch (const YAML::Exception&) {
            r_.error(m["seed"], "montecarlo.seed", "expected a non-negative integer");
          }
        }
      });
      const std::string mode = r_.text(m, "montecarlo", "mode", "ekf");
      if (mode == "linear") sc.montecarlo.linear = true;
      else if (mode != "ekf") r_.error(m["mode"], "montecarlo.mode", "expected 'ekf' or 'linear'");
    });
  }

  void propagation(const YAML::Node& root, Scenario& sc) {
    const YAML::Node m = root["propagation"];
    if (!m.IsDefined()) return;
    r_.section([&] {
      r_.keys(m, "propagation", {"rel_tol", "abs_tol"});
      sc.problem.prop.rel_tol = r_.positive(m, "propagation", "rel_tol", sc.problem.prop.rel_tol);
      sc.problem.prop.abs_tol = r_.positive(m, "propagation", "abs_tol", sc.problem.prop.abs_tol);
    });
  }
};

}  // namespace

double Scenario::days() const {
  return physical ? kDaySeconds / scale.time_s : 1.0;
}

int Scenario::body_index(const std::string& name) const {
  for (std::size_t i = 0; i < problem.bodies.size(); ++i)
    if (problem.bodies[i].name == name) return static_cast<int>(i);
  return -1;
}

std::string Diagnostic::str(const std::string& origin) const {
  std::ostringstream os;
  os << origin;
  if (line > 0) os << ":" << line;
  os << ": " << (level == Level::Error ? "error" : "warning") << ": ";
  if (!path.empty()) os << path << ": ";
  os << message;
  return os.str();
}

bool ScenarioLoad::has_errors() const {
  for (const auto& d : diagnostics)
    if (d.level == Diagnostic::Level::Error) return true;
  return false;
}

ScenarioLoad parse_scenario(std::string_view text) {
  ScenarioLoad out;
  YAML::Node root;
  try {
    root = YAML::Load(std::string(text));
  } catch (const YAML::ParserException& e) {
    out.diagnostics.push_back({Diagnostic::Level::Error, "", e.mark.line + 1, e.msg});
    return out;
  }
  if (!root.IsMap()) {
    out.diagnostics.push_back({Diagnostic::Level::Error, "", 1, "expected a mapping at top level"});
    return out;
  }
  Scenario sc;
  sc.source_hash = sha256_hex(text);
  Reader r;
  Builder(r).run(root, sc);
  out.diagnostics = std::move(r.diags);
  if (out.has_errors()) return out;
  // Cross-field checks shared with the optimizer.
  for (auto check : {+[](const Scenario& s) { s.problem.check(); },
                     +[](const Scenario& s) { s.scp.check(); }}) {
    try {
      check(sc);
    } catch (const Error& e) {
      out.diagnostics.push_back({Diagnostic::Level::Error, "", 0, e.what()});
    }
  }
  if (!out.has_errors()) out.scenario = std::move(sc);
  return out;
}

ScenarioLoad read_scenario(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    ScenarioLoad out;
    out.diagnostics.push_back({Diagnostic::Level::Error, "", 0, "cannot open file"});
    return out;
  }
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_scenario(ss.str());
}

std::vector<Diagnostic> physics_checks(const Scenario& sc) {
  std::vector<Diagnostic> out;
  const MissionProblem& p = sc.problem;
  if (!p.stochastic) return out;
  try {
    MissionProblem q = p;
    q.stochastic = true;
    Iterate guess = with_zero_gains(q, heuristic_guess(q.deterministic()));
    const Evaluation ev = evaluate(q, guess);
    const Mat6 margin = p.terminal.cov - ev.kf.nodes.back().post_cov;
    Eigen::SelfAdjointEigenSolver<Mat6> es(margin);
    if (es.eigenvalues().minCoeff() <= 0.0)
      out.push_back({Diagnostic::Level::Warning, "terminal", 0,
                     "filter error covariance at the final node already exceeds the "
                     "terminal bound along the initial reference"});
  } catch (const Error& e) {
    out.push_back({Diagnostic::Level::Warning, "", 0,
                   std::string("initial reference could not be evaluated: ") + e.what()});
  }
  return out;
}

Scenario load_scenario(const std::string& path) {
  ScenarioLoad res = read_scenario(path);
  if (!res.has_errors() && res.scenario) return std::move(*res.scenario);
  std::string msg = "invalid scenario";
  for (const auto& d : res.diagnostics) msg += "\n  " + d.str(path);
  fail(ErrorKind::Config, msg);
}

}  // namespace rtopt
