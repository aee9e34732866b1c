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

#include "rtopt/bundle.hpp"

#include <json.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "rtopt/digest.hpp"
#include "rtopt/errors.hpp"
#include "rtopt/numfmt.hpp"
#include "rtopt/risk.hpp"

namespace rtopt {

namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;

namespace {

constexpr double kDaySeconds = 86400.0;
constexpr double kEllipseEps = 1e-3;
constexpr int kEllipsePoints = 48;

// Rows of text cells; numbers go through format_double so files are byte-stable.
class Table {
 public:
  explicit Table(std::initializer_list<const char*> header) {
    for (const char* h : header) cells_.emplace_back(h);
    flush();
  }
  Table& operator<<(double v) { cells_.push_back(format_double(v)); return *this; }
  Table& operator<<(int v) { cells_.push_back(std::to_string(v)); return *this; }
  Table& operator<<(const std::string& s) { cells_.push_back(s); return *this; }
  Table& operator<<(const char* s) { cells_.emplace_back(s); return *this; }
  void end_row() { flush(); }
  const std::string& text() const { return out_; }

 private:
  void flush() {
    for (std::size_t i = 0; i < cells_.size(); ++i) {
      if (i) out_ += ',';
      out_ += cells_[i];
    }
    out_ += '\n';
    cells_.clear();
  }
  std::vector<std::string> cells_;
  std::string out_;
};

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) fail(ErrorKind::Io, "cannot write " + path.string());
  f << text;
  if (!f) fail(ErrorKind::Io, "write failed: " + path.string());
}

std::string read_file(const fs::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) fail(ErrorKind::Io, "cannot read " + path.string());
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) fail(ErrorKind::Io, "cannot create directory " + dir + ": " + ec.message());
}

// Header-checked CSV rows; the first row must match `header` exactly.
std::vector<std::vector<std::string>> read_csv(const fs::path& path, const std::string& header) {
  std::istringstream in(read_file(path));
  std::string line;
  if (!std::getline(in, line) || line != header)
    fail(ErrorKind::Io, path.string() + ": unexpected header");
  std::vector<std::vector<std::string>> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::size_t start = 0;
    for (;;) {
      const std::size_t comma = line.find(',', start);
      cells.push_back(line.substr(start, comma - start));
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
    rows.push_back(std::move(cells));
  }
  return rows;
}

int parse_int(const std::string& s) {
  const double v = parse_double(s);
  if (v != std::floor(v)) fail(ErrorKind::Io, "expected an integer, got '" + s + "'");
  return static_cast<int>(v);
}

SegmentKind parse_kind(const std::string& s) {
  if (s == "thrust") return SegmentKind::Thrust;
  if (s == "coast") return SegmentKind::Coast;
  if (s == "flyby") return SegmentKind::GravityAssist;
  fail(ErrorKind::Io, "unknown segment kind '" + s + "'");
}

Json vec_json(const VecX& v) {
  Json a = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

Json mat_json(const Mat6& m) {
  Json a = Json::array();
  for (int r = 0; r < 6; ++r) a.push_back(vec_json(m.row(r).transpose()));
  return a;
}

double velocity_unit(const SolutionBundle& b) { return b.physical ? b.scale.velocity_kms() : 1.0; }
double length_unit(const SolutionBundle& b) { return b.physical ? b.scale.length_km : 1.0; }
double accel_unit(const SolutionBundle& b) { return b.physical ? b.scale.accel_kms2() : 1.0; }
double time_unit(const SolutionBundle& b) {
  return b.physical ? b.scale.time_s / kDaySeconds : 1.0;
}

Json units_json(const SolutionBundle& b) {
  Json u;
  u["system"] = b.physical ? "physical" : "normalized";
  u["length_km"] = b.scale.length_km;
  u["time_s"] = b.scale.time_s;
  return u;
}

Json bundle_index(const SolutionBundle& b) {
  Json j;
  j["format"] = kBundleFormat;
  j["tool_version"] = b.tool_version;
  j["scenario"] = {{"name", b.scenario_name}, {"hash", b.scenario_hash}};
  j["units"] = units_json(b);
  j["mode"] = b.stochastic ? "stochastic" : "deterministic";
  j["status"] = b.status;
  j["converged"] = b.converged;
  j["iterations"] = b.iterations;
  j["seed_iterations"] = static_cast<int>(b.seed_log.size());
  j["segments"] = static_cast<int>(b.kinds.size());
  j["cost_nominal"] = b.cost_nominal;
  j["cost_bound"] = b.cost_bound;
  j["violation"] = b.violation;
  j["dv_probability"] = b.dv_probability;
  j["thrust_margin"] = b.thrust_margin;
  j["u_max"] = b.u_max;
  j["x0"] = vec_json(b.iterate.x0);
  const double vu = velocity_unit(b);
  j["summary"] = {{"dv_nominal", b.cost_nominal * vu},
                  {"dv_bound", b.cost_bound * vu},
                  {"velocity_unit", b.physical ? "km/s" : "normalized"}};
  Json fl = Json::array();
  for (std::size_t f = 0; f < b.periapsis.size(); ++f) {
    fl.push_back({{"segment", b.flyby_segments[f]},
                  {"body", b.flyby_bodies[f]},
                  {"turn_angle", b.turn_angles[f]},
                  {"periapsis", b.periapsis[f]},
                  {"rp_min", b.flyby_floor[f]},
                  {"periapsis_km", b.periapsis[f] * length_unit(b)}});
  }
  j["flybys"] = fl;
  j["tables"] = {"controls.csv", "states.csv", "trajectory.csv", "gains.csv", "covariance.csv",
                 "log.csv"};
  return j;
}

std::string log_table(const SolutionBundle& b) {
  Table t{"phase", "iteration", "rho", "dJ", "dL", "accepted", "tr_radius", "weight",
          "violation", "cost_bound", "solver_status"};
  auto rows = [&](const char* phase, const std::vector<IterationRecord>& log) {
    for (const auto& r : log) {
      t << phase << r.iteration << r.rho << r.dJ << r.dL << (r.accepted ? 1 : 0) << r.tr_radius
        << r.weight << r.violation << r.cost_bound << r.solver_status;
      t.end_row();
    }
  };
  rows("seed", b.seed_log);
  rows("main", b.log);
  return t.text();
}

}  // namespace

const char* to_string(SegmentKind k) {
  switch (k) {
    case SegmentKind::Thrust: return "thrust";
    case SegmentKind::Coast: return "coast";
    case SegmentKind::GravityAssist: return "flyby";
  }
  return "?";
}

std::string bundle_digest(const SolutionBundle& b) { return sha256_hex(bundle_index(b).dump(2)); }

SolutionBundle make_bundle(const Scenario& sc, const ScpResult& res, bool stochastic,
                           const std::vector<IterationRecord>& seed_log) {
  const MissionProblem& prob = sc.problem;
  const Evaluation& ev = res.evaluation;
  SolutionBundle b;
  b.scenario_name = sc.name;
  b.scenario_hash = sc.source_hash;
  b.physical = sc.physical;
  b.scale = sc.scale;
  b.stochastic = stochastic;
  b.status = to_string(res.status);
  b.converged = res.status == ScpStatus::Converged;
  b.iterations = static_cast<int>(res.log.size());
  b.cost_nominal = ev.cost_nominal;
  b.cost_bound = ev.cost_bound;
  b.violation = violation(ev);
  b.dv_probability = prob.dv_probability;
  b.thrust_margin = stochastic ? thrust_margin(prob) : 0.0;
  b.u_max = prob.u_max;
  b.epochs = prob.grid.epochs;
  b.kinds = prob.grid.kinds;
  b.iterate = res.iterate;
  b.states = ev.states;
  const int n = prob.segments();
  b.state_cov.assign(n + 1, Mat6::Zero());
  if (stochastic && ev.blocks) {
    b.gains_hat = convert_gain(*ev.blocks, res.iterate.gains);
    for (int k = 0; k <= n; ++k) {
      const MatX& d = ev.factors.dispersion[k];
      b.state_cov[k] = d * d.transpose() + ev.kf.nodes[k].post_cov;
    }
  } else {
    b.gains_hat = GainMatrix::zero(n);
  }
  if (b.iterate.gains.segments() != n) b.iterate.gains = GainMatrix::zero(n);
  b.control_sigma = ev.control_sigma;
  b.turn_angles = ev.turn_angles;
  b.periapsis = ev.periapsis;
  for (const auto& f : prob.flybys) {
    b.flyby_segments.push_back(f.segment);
    b.flyby_bodies.push_back(prob.bodies[f.body].name);
    b.flyby_floor.push_back(f.rp_min);
  }
  b.seed_log = seed_log;
  b.log = res.log;
  return b;
}

void write_bundle(const SolutionBundle& b, const std::string& dir) {
  ensure_dir(dir);
  const fs::path d(dir);
  const int n = static_cast<int>(b.kinds.size());
  write_file(d / "bundle.json", bundle_index(b).dump(2) + "\n");

  Table controls{"segment", "kind", "t_start", "t_end", "u_x", "u_y", "u_z", "sigma"};
  for (int k = 0; k < n; ++k) {
    const Vec3& u = b.iterate.controls[k];
    controls << k << to_string(b.kinds[k]) << b.epochs[k] << b.epochs[k + 1] << u.x() << u.y()
             << u.z() << b.control_sigma[k];
    controls.end_row();
  }
  write_file(d / "controls.csv", controls.text());

  Table states{"node", "epoch", "x", "y", "z", "vx", "vy", "vz"};
  Table traj{"node", "epoch", "x", "y", "z", "vx", "vy", "vz"};
  for (int k = 0; k <= n; ++k) {
    const Vec6& x = b.states[k];
    states << k << b.epochs[k];
    for (int i = 0; i < 6; ++i) states << x(i);
    states.end_row();
    const Vec6 xp = b.physical ? b.scale.dimensional_state(x) : x;
    traj << k << b.epochs[k] * time_unit(b);
    for (int i = 0; i < 6; ++i) traj << xp(i);
    traj.end_row();
  }
  write_file(d / "states.csv", states.text());
  write_file(d / "trajectory.csv", traj.text());

  // Sparse: only entries where either gain is nonzero.
  Table gains{"k", "i", "row", "col", "gain", "gain_hat"};
  for (int k = 0; k < n; ++k)
    for (int i = 0; i <= k; ++i)
      for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 6; ++c) {
          const double g = b.iterate.gains.blocks[k][i](r, c);
          const double gh = b.gains_hat.blocks[k][i](r, c);
          if (g == 0.0 && gh == 0.0) continue;
          gains << k << i << r << c << g << gh;
          gains.end_row();
        }
  write_file(d / "gains.csv", gains.text());

  Table cov{"node", "row", "c0", "c1", "c2", "c3", "c4", "c5"};
  for (int k = 0; k <= n; ++k)
    for (int r = 0; r < 6; ++r) {
      cov << k << r;
      for (int c = 0; c < 6; ++c) cov << b.state_cov[k](r, c);
      cov.end_row();
    }
  write_file(d / "covariance.csv", cov.text());
  write_file(d / "log.csv", log_table(b));
}

SolutionBundle read_bundle(const std::string& dir) {
  const fs::path d(dir);
  Json j;
  try {
    j = Json::parse(read_file(d / "bundle.json"));
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::Io, (d / "bundle.json").string() + ": " + e.what());
  }
  SolutionBundle b;
  try {
    if (j.at("format").get<std::string>() != kBundleFormat)
      fail(ErrorKind::Io, "unsupported bundle format " + j.at("format").dump());
    b.tool_version = j.at("tool_version").get<std::string>();
    b.scenario_name = j.at("scenario").at("name").get<std::string>();
    b.scenario_hash = j.at("scenario").at("hash").get<std::string>();
    b.physical = j.at("units").at("system").get<std::string>() == "physical";
    b.scale.length_km = j.at("units").at("length_km").get<double>();
    b.scale.time_s = j.at("units").at("time_s").get<double>();
    b.stochastic = j.at("mode").get<std::string>() == "stochastic";
    b.status = j.at("status").get<std::string>();
    b.converged = j.at("converged").get<bool>();
    b.iterations = j.at("iterations").get<int>();
    b.cost_nominal = j.at("cost_nominal").get<double>();
    b.cost_bound = j.at("cost_bound").get<double>();
    b.violation = j.at("violation").get<double>();
    b.dv_probability = j.at("dv_probability").get<double>();
    b.thrust_margin = j.at("thrust_margin").get<double>();
    b.u_max = j.at("u_max").get<double>();
    const auto x0 = j.at("x0").get<std::vector<double>>();
    if (x0.size() != 6) fail(ErrorKind::Io, "bundle x0 must have 6 entries");
    for (int i = 0; i < 6; ++i) b.iterate.x0(i) = x0[i];
    for (const auto& f : j.at("flybys")) {
      b.flyby_segments.push_back(f.at("segment").get<int>());
      b.flyby_bodies.push_back(f.at("body").get<std::string>());
      b.turn_angles.push_back(f.at("turn_angle").get<double>());
      b.periapsis.push_back(f.at("periapsis").get<double>());
      b.flyby_floor.push_back(f.at("rp_min").get<double>());
    }
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::Io, (d / "bundle.json").string() + ": " + e.what());
  }

  const auto controls =
      read_csv(d / "controls.csv", "segment,kind,t_start,t_end,u_x,u_y,u_z,sigma");
  const int n = static_cast<int>(controls.size());
  for (int k = 0; k < n; ++k) {
    const auto& r = controls[k];
    if (r.size() != 8 || parse_int(r[0]) != k) fail(ErrorKind::Io, "controls.csv: bad row");
    b.kinds.push_back(parse_kind(r[1]));
    if (k == 0) b.epochs.push_back(parse_double(r[2]));
    b.epochs.push_back(parse_double(r[3]));
    b.iterate.controls.emplace_back(parse_double(r[4]), parse_double(r[5]), parse_double(r[6]));
    b.control_sigma.push_back(parse_double(r[7]));
  }

  const auto states = read_csv(d / "states.csv", "node,epoch,x,y,z,vx,vy,vz");
  if (static_cast<int>(states.size()) != n + 1) fail(ErrorKind::Io, "states.csv: row count");
  for (const auto& r : states) {
    if (r.size() != 8) fail(ErrorKind::Io, "states.csv: bad row");
    Vec6 x;
    for (int i = 0; i < 6; ++i) x(i) = parse_double(r[2 + i]);
    b.states.push_back(x);
  }

  b.iterate.gains = GainMatrix::zero(n);
  b.gains_hat = GainMatrix::zero(n);
  for (const auto& r : read_csv(d / "gains.csv", "k,i,row,col,gain,gain_hat")) {
    if (r.size() != 6) fail(ErrorKind::Io, "gains.csv: bad row");
    const int k = parse_int(r[0]), i = parse_int(r[1]), row = parse_int(r[2]),
              col = parse_int(r[3]);
    if (k < 0 || k >= n || i < 0 || i > k || row < 0 || row >= 3 || col < 0 || col >= 6)
      fail(ErrorKind::Io, "gains.csv: index out of range");
    b.iterate.gains.blocks[k][i](row, col) = parse_double(r[4]);
    b.gains_hat.blocks[k][i](row, col) = parse_double(r[5]);
  }

  b.state_cov.assign(n + 1, Mat6::Zero());
  for (const auto& r : read_csv(d / "covariance.csv", "node,row,c0,c1,c2,c3,c4,c5")) {
    if (r.size() != 8) fail(ErrorKind::Io, "covariance.csv: bad row");
    const int k = parse_int(r[0]), row = parse_int(r[1]);
    if (k < 0 || k > n || row < 0 || row >= 6) fail(ErrorKind::Io, "covariance.csv: index");
    for (int c = 0; c < 6; ++c) b.state_cov[k](row, c) = parse_double(r[2 + c]);
  }

  for (const auto& r : read_csv(d / "log.csv",
                                "phase,iteration,rho,dJ,dL,accepted,tr_radius,weight,violation,"
                                "cost_bound,solver_status")) {
    if (r.size() != 11) fail(ErrorKind::Io, "log.csv: bad row");
    IterationRecord rec;
    rec.iteration = parse_int(r[1]);
    rec.rho = parse_double(r[2]);
    rec.dJ = parse_double(r[3]);
    rec.dL = parse_double(r[4]);
    rec.accepted = r[5] == "1";
    rec.tr_radius = parse_double(r[6]);
    rec.weight = parse_double(r[7]);
    rec.violation = parse_double(r[8]);
    rec.cost_bound = parse_double(r[9]);
    rec.solver_status = r[10];
    (r[0] == "seed" ? b.seed_log : b.log).push_back(rec);
  }
  return b;
}

void write_mc_report(const McReport& r, const Scenario& sc, const SolutionBundle& b,
                     const std::string& dir, const std::vector<McSample>* samples) {
  ensure_dir(dir);
  const fs::path d(dir);
  const double vu = velocity_unit(b);
  const double lu = length_unit(b);
  const BoundCheck bc = compare_bound(r, r.j_ub);

  Json j;
  j["format"] = "rtopt-mc/1";
  j["tool_version"] = kToolVersion;
  j["scenario"] = {{"name", sc.name}, {"hash", sc.source_hash}};
  j["bundle"] = {{"digest", bundle_digest(b)}, {"scenario_hash", b.scenario_hash}};
  j["units"] = units_json(b);
  j["mode"] = r.linear ? "linear" : "nonlinear";
  j["seed"] = r.seed;
  j["samples"] = r.samples;
  j["failed"] = r.failed;
  j["campaign_failed"] = r.campaign_failed();

  Json dv;
  dv["probability"] = r.dv_probability;
  dv["nominal"] = r.dv_nominal * vu;
  dv["quantile"] = r.dv_quantile * vu;
  dv["quantile_executed"] = r.dv_quantile_executed * vu;
  dv["quantile_halfwidth"] = r.dv_quantile_halfwidth * vu;
  dv["bound"] = r.j_ub * vu;
  dv["bound_holds"] = bc.holds;
  j["dv"] = dv;

  const int ok = r.samples - r.failed;
  double max_rate = 0.0;
  for (double v : r.thrust_violation_rate) max_rate = std::max(max_rate, v);
  j["thrust"] = {{"u_max", b.u_max * accel_unit(b)},
                 {"violations", r.thrust_violations},
                 {"max_rate", max_rate},
                 {"allowed_count_per_segment",
                  ok > 0 ? binomial_upper_count(ok, sc.problem.eps_thrust, 0.99) : 0},
                 {"rate_per_segment", r.thrust_violation_rate}};

  Json fl = Json::array();
  for (std::size_t f = 0; f < r.flybys.size(); ++f) {
    const FlybyStats& s = r.flybys[f];
    fl.push_back({{"body", f < b.flyby_bodies.size() ? b.flyby_bodies[f] : ""},
                  {"periapsis_nominal", s.nominal * lu},
                  {"periapsis_min", s.min * lu},
                  {"periapsis_mean", s.mean * lu},
                  {"rp_min", s.floor * lu},
                  {"below_floor", s.below_floor}});
  }
  j["flybys"] = fl;
  j["terminal"] = {{"bound_ratio", r.terminal_bound_ratio},
                   {"mean_defect", vec_json(r.terminal_mean_defect)},
                   {"cov_sample", mat_json(r.terminal_cov_sample)},
                   {"cov_predicted", mat_json(r.terminal_cov_predicted)},
                   {"cov_bound", mat_json(r.terminal_cov_bound)}};
  j["od_containment"] = r.od_containment;
  write_file(d / "report.json", j.dump(2) + "\n");

  auto hist = [&](const Histogram& h, double unit) {
    Table t{"lower", "upper", "count"};
    for (std::size_t i = 0; i < h.counts.size(); ++i) {
      t << h.edges[i] * unit << h.edges[i + 1] * unit << h.counts[i];
      t.end_row();
    }
    return t.text();
  };
  write_file(d / "dv_histogram.csv", hist(r.dv_histogram, vu));
  for (std::size_t f = 0; f < r.flybys.size(); ++f)
    write_file(d / ("periapsis_histogram_" + std::to_string(f) + ".csv"),
               hist(r.flybys[f].histogram, lu));
  Table s{"sample", "dv"};
  for (std::size_t i = 0; i < r.dv_samples.size(); ++i) {
    s << static_cast<int>(i) << r.dv_samples[i] * vu;
    s.end_row();
  }
  write_file(d / "dv_samples.csv", s.text());
  if (!samples) return;

  Table ps{"sample", "ok", "failure", "dv_commanded", "dv_executed", "periapsis_min",
           "defect_x", "defect_y", "defect_z", "defect_vx", "defect_vy", "defect_vz"};
  for (const McSample& m : *samples) {
    double rp = 0.0;
    for (std::size_t f = 0; f < m.periapsis.size(); ++f)
      rp = f == 0 ? m.periapsis[f] : std::min(rp, m.periapsis[f]);
    ps << static_cast<int>(m.index) << (m.ok ? 1 : 0) << (m.failure.empty() ? "-" : m.failure)
       << m.dv_commanded * vu << m.dv_executed * vu << rp * lu;
    for (int i = 0; i < 6; ++i) ps << m.terminal_defect(i);
    ps.end_row();
  }
  write_file(d / "samples.csv", ps.text());
}

std::string write_report(const SolutionBundle& b, const std::string& mc_report_json,
                         const std::string& dir) {
  ensure_dir(dir);
  const fs::path d(dir);
  const int n = static_cast<int>(b.kinds.size());
  const double lu = length_unit(b);
  const double au = accel_unit(b);

  Table xy{"node", "epoch", "x", "y"};
  for (int k = 0; k <= n; ++k) {
    xy << k << b.epochs[k] * time_unit(b) << b.states[k](0) * lu << b.states[k](1) * lu;
    xy.end_row();
  }
  write_file(d / "trajectory_xy.csv", xy.text());

  // Upper trace of the thrust chance constraint: |u| + margin * sigma.
  Table ctl{"segment", "t_start", "t_end", "u_nominal", "u_bound", "u_max"};
  for (int k = 0; k < n; ++k) {
    if (b.kinds[k] == SegmentKind::GravityAssist) continue;
    const double un = b.iterate.controls[k].norm();
    ctl << k << b.epochs[k] * time_unit(b) << b.epochs[k + 1] * time_unit(b) << un * au
        << (un + b.thrust_margin * b.control_sigma[k]) * au << b.u_max * au;
    ctl.end_row();
  }
  write_file(d / "control_history.csv", ctl.text());

  // In-plane position ellipses holding 1 - kEllipseEps of the probability.
  const double m = chi2_margin(kEllipseEps, 2);
  Table ell{"node", "point", "x", "y"};
  for (int k = 0; k <= n; ++k) {
    const Eigen::Matrix2d p = b.state_cov[k].topLeftCorner<2, 2>();
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(p);
    const Eigen::Vector2d sd = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    const Eigen::Matrix2d root = es.eigenvectors() * sd.asDiagonal();
    for (int i = 0; i <= kEllipsePoints; ++i) {
      const double a = 2.0 * M_PI * i / kEllipsePoints;
      const Eigen::Vector2d pt =
          b.states[k].head<2>() + m * root * Eigen::Vector2d(std::cos(a), std::sin(a));
      ell << k << i << pt(0) * lu << pt(1) * lu;
      ell.end_row();
    }
  }
  write_file(d / "covariance_ellipses.csv", ell.text());

  const double vu = velocity_unit(b);
  const char* unit = b.physical ? " km/s" : "";
  std::ostringstream sum;
  sum << "scenario " << b.scenario_name << " (" << b.scenario_hash.substr(0, 12) << ")\n";
  sum << "solution " << (b.stochastic ? "stochastic" : "deterministic") << ", " << b.status
      << " after " << b.iterations << " iterations, max violation "
      << format_double(b.violation) << "\n";
  for (std::size_t f = 0; f < b.periapsis.size(); ++f)
    sum << "flyby " << b.flyby_bodies[f] << ": periapsis " << format_double(b.periapsis[f] * lu)
        << (b.physical ? " km" : "") << " (floor " << format_double(b.flyby_floor[f] * lu)
        << ")\n";
  std::string empirical = "n/a";
  if (!mc_report_json.empty()) {
    try {
      const Json mc = Json::parse(mc_report_json);
      if (mc.at("bundle").at("digest").get<std::string>() != bundle_digest(b))
        fail(ErrorKind::HashMismatch, "monte carlo report was produced from a different bundle");
      empirical = format_double(mc.at("dv").at("quantile").get<double>()) + unit + " (" +
                  std::to_string(mc.at("samples").get<int>()) + " samples)";
      sum << "monte carlo: " << mc.at("failed").get<int>() << " failed, "
          << mc.at("thrust").at("violations").get<int>() << " thrust violations, terminal ratio "
          << format_double(mc.at("terminal").at("bound_ratio").get<double>()) << "\n";
    } catch (const nlohmann::json::exception& e) {
      fail(ErrorKind::Io, std::string("monte carlo report: ") + e.what());
    }
  }
  sum << "dv: nominal " << format_double(b.cost_nominal * vu) << unit << " / bound "
      << format_double(b.cost_bound * vu) << unit << " / empirical " << empirical << "\n";
  write_file(d / "summary.txt", sum.str());
  return sum.str();
}

}  // namespace rtopt
