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

#include "rtopt/montecarlo.hpp"

#include <boost/math/distributions/binomial.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <thread>

#include "rtopt/errors.hpp"
#include "rtopt/gravity_assist.hpp"

namespace rtopt {

namespace {

// Independent stream per (seed, stream); identical on every run and thread count.
std::mt19937_64 stream_rng(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream),
                    static_cast<std::uint32_t>(stream >> 32)};
  return std::mt19937_64(seq);
}

template <int N>
Eigen::Matrix<double, N, 1> gaussian(std::mt19937_64& rng) {
  std::normal_distribution<double> nd(0.0, 1.0);
  Eigen::Matrix<double, N, 1> v;
  for (int i = 0; i < N; ++i) v(i) = nd(rng);
  return v;
}

bool recoverable(const Error& e) {
  return e.kind() == ErrorKind::Integration || e.kind() == ErrorKind::Singularity ||
         e.kind() == ErrorKind::Numerical || e.kind() == ErrorKind::Domain;
}

// Everything the samples share: the evaluated reference and the converted gains.
struct Playback {
  const MissionProblem& prob;
  const Iterate& sol;
  Evaluation ev;
  GainMatrix k_hat;
  Mat6 p_hat0_sqrt;
  Mat6 p_err0_sqrt;
  Mat63 proc_sqrt;
};

void count_od(const Vec6& err, const Mat6& P, McSample& s) {
  for (int j = 0; j < 6; ++j) {
    s.od_total += 1;
    if (std::abs(err(j)) <= 3.0 * std::sqrt(std::max(P(j, j), 0.0))) s.od_inside += 1;
  }
}

Vec3 feedback(const Playback& pb, int k, const std::vector<Vec6>& est_dev) {
  Vec3 du = Vec3::Zero();
  for (int i = 0; i <= k; ++i) du += pb.k_hat.blocks[k][i] * est_dev[i];
  return du;
}

void record_flyby(const Playback& pb, int k, const Vec6& pre, const Vec6& post,
                  McSample& s) {
  const int f = pb.prob.flyby_at(k);
  const Vec3 vp = pb.ev.planet_velocity[f];
  const Vec3 vin = pre.tail<3>() - vp;
  const double th = turn_angle(vin, post.tail<3>() - vp);
  s.periapsis[f] = th > 0.0 ? periapsis_radius(vin, th, pb.prob.flybys[f].mu)
                            : std::numeric_limits<double>::infinity();
}

// Linearized truth with the policy's own Kalman filter.
void run_linear(const Playback& pb, std::mt19937_64& rng, McSample& s) {
  const auto& prob = pb.prob;
  const auto& ev = pb.ev;
  const int n = prob.segments();
  std::vector<Vec6> est_dev(n + 1, Vec6::Zero());
  Vec6 e_prior = pb.p_hat0_sqrt * gaussian<6>(rng);
  Vec6 x_dev = e_prior + pb.p_err0_sqrt * gaussian<6>(rng);
  for (int k = 0; k <= n; ++k) {
    const auto& node = ev.kf.nodes[k];
    Vec6 e = e_prior;
    if (node.measured) {
      const Vec6 y = x_dev + prob.uncertainty.obs.nodes[k].noise_sqrt * gaussian<6>(rng);
      e = e_prior + node.gain * (y - e_prior);
    }
    est_dev[k] = e;
    count_od(e - x_dev, node.post_cov, s);
    if (!s.truth.empty()) {
      s.truth[k] = ev.states[k] + x_dev;
      s.estimate[k] = ev.states[k] + e;
    }
    if (k == n) break;
    const auto& seg = ev.segments[k];
    const SegmentKind kind = prob.grid.kinds[k];
    Vec3 du = Vec3::Zero();
    if (kind == SegmentKind::Thrust) du = feedback(pb, k, est_dev);
    const Vec3 u = pb.sol.controls[k] + du;
    s.commanded[k] = u;
    Vec6 next = seg.A * x_dev + seg.B * du;
    if (kind == SegmentKind::Thrust) {
      const Vec3 w = gaussian<3>(rng);
      next += seg.exec_noise * w;
      // Same draw expressed in control space with the factor held at the reference.
      s.executed[k] = u + gates_matrix(pb.sol.controls[k], prob.uncertainty.gates) * w;
    } else {
      s.executed[k] = u;
    }
    if (kind != SegmentKind::GravityAssist) next += seg.process_noise * gaussian<6>(rng);
    if (kind == SegmentKind::GravityAssist)
      record_flyby(pb, k, ev.states[k] + x_dev, ev.states[k + 1] + next, s);
    x_dev = next;
    e_prior = seg.A * e + seg.B * du;
  }
  s.terminal_defect = ev.states[n] + x_dev - prob.terminal_target();
}

// Nonlinear truth with Euler-Maruyama process noise; extended filter relinearized per node.
void run_nonlinear(const Playback& pb, std::mt19937_64& rng, McSample& s) {
  const auto& prob = pb.prob;
  const auto& ev = pb.ev;
  const auto& unc = prob.uncertainty;
  const int n = prob.segments();
  std::vector<Vec6> est_dev(n + 1, Vec6::Zero());
  Vec6 est = ev.states[0] + pb.p_hat0_sqrt * gaussian<6>(rng);
  Vec6 truth = est + pb.p_err0_sqrt * gaussian<6>(rng);
  Mat6 P = unc.error_cov0;
  const double wn_dt = unc.process.white_noise_dt;
  const double wn_gain = unc.process.sigma_acc * std::sqrt(wn_dt);
  for (int k = 0; k <= n; ++k) {
    if (unc.obs.nodes[k].measured) {
      const Mat6& D = unc.obs.nodes[k].noise_sqrt;
      const Mat6 R = D * D.transpose();
      const Vec6 y = truth + D * gaussian<6>(rng);
      Eigen::LLT<Mat6> llt(P + R);
      if (llt.info() != Eigen::Success)
        fail(ErrorKind::Numerical, "innovation covariance lost definiteness");
      const Mat6 L = llt.solve(P).transpose();
      est += L * (y - est);
      const Mat6 IL = Mat6::Identity() - L;
      P = IL * P * IL.transpose() + L * R * L.transpose();
      P = 0.5 * (P + P.transpose());
    }
    est_dev[k] = est - ev.states[k];
    count_od(est - truth, P, s);
    if (!s.truth.empty()) {
      s.truth[k] = truth;
      s.estimate[k] = est;
    }
    if (k == n) break;
    const double t0 = prob.grid.epochs[k], t1 = prob.grid.epochs[k + 1];
    const SegmentKind kind = prob.grid.kinds[k];
    if (kind == SegmentKind::GravityAssist) {
      const Vec3 u = pb.sol.controls[k];
      const Vec3 vp = ev.planet_velocity[prob.flyby_at(k)];
      s.commanded[k] = s.executed[k] = u;
      const Vec6 post = ga_map(truth, u, vp);
      record_flyby(pb, k, truth, post, s);
      truth = post;
      const LinearSegment seg = ga_linearize(est, u, vp);
      est = seg.x_end;
      P = seg.A * P * seg.A.transpose();
      continue;
    }
    Vec3 u = Vec3::Zero();
    if (kind == SegmentKind::Thrust) u = pb.sol.controls[k] + feedback(pb, k, est_dev);
    s.commanded[k] = u;
    const Mat3 g_exe = kind == SegmentKind::Thrust ? gates_matrix(u, unc.gates) : Mat3::Zero();
    const Vec3 u_exec = u + g_exe * gaussian<3>(rng);
    s.executed[k] = u_exec;

    // Truth: thrust held over the segment, white-noise kicks every wn_dt.
    if (wn_gain > 0.0 && wn_dt > 0.0) {
      double t = t0;
      while (t < t1) {
        const double h = std::min(wn_dt, t1 - t);
        truth = propagate(prob.model, truth, u_exec, t, t + h, prob.prop);
        truth.tail<3>() += wn_gain * std::sqrt(h) * gaussian<3>(rng);
        t += h;
        if (t1 - t < 1e-12 * std::max(1.0, std::abs(t1))) break;
      }
    } else {
      truth = propagate(prob.model, truth, u_exec, t0, t1, prob.prop);
    }

    const LinearSegment seg =
        linearize_segment(prob.model, est, u, t0, t1, g_exe, pb.proc_sqrt, prob.prop);
    est = seg.x_end;
    P = seg.A * P * seg.A.transpose() + seg.exec_noise * seg.exec_noise.transpose() +
        seg.process_noise * seg.process_noise.transpose();
    P = 0.5 * (P + P.transpose());
  }
  s.terminal_defect = truth - prob.terminal_target();
}

}  // namespace

Histogram make_histogram(const std::vector<double>& values, int bins) {
  Histogram h;
  std::vector<double> finite;
  for (double v : values)
    if (std::isfinite(v)) finite.push_back(v);
  if (finite.empty() || bins < 1) return h;
  const auto [lo_it, hi_it] = std::minmax_element(finite.begin(), finite.end());
  double lo = *lo_it, hi = *hi_it;
  if (hi <= lo) {
    const double pad = std::max(std::abs(lo) * 1e-9, 1e-12);
    lo -= pad;
    hi += pad;
  }
  h.edges.resize(bins + 1);
  for (int b = 0; b <= bins; ++b) h.edges[b] = lo + (hi - lo) * b / bins;
  h.counts.assign(bins, 0);
  for (double v : finite) {
    int b = static_cast<int>((v - lo) / (hi - lo) * bins);
    h.counts[std::clamp(b, 0, bins - 1)] += 1;
  }
  return h;
}

double estimate_quantile(std::vector<double> samples, double p) {
  if (samples.empty()) fail(ErrorKind::Domain, "quantile of an empty sample");
  if (!(p > 0.0 && p < 1.0)) fail(ErrorKind::Domain, "quantile level must lie in (0, 1)");
  const std::size_t n = samples.size();
  std::size_t rank = static_cast<std::size_t>(std::ceil(p * static_cast<double>(n)));
  rank = std::clamp<std::size_t>(rank, 1, n);
  std::nth_element(samples.begin(), samples.begin() + (rank - 1), samples.end());
  return samples[rank - 1];
}

double bootstrap_halfwidth(const std::vector<double>& samples, double p, int resamples,
                           std::uint64_t seed, double confidence) {
  if (samples.empty() || resamples < 2) return 0.0;
  auto rng = stream_rng(seed, 0xb0075ull);
  std::uniform_int_distribution<std::size_t> pick(0, samples.size() - 1);
  std::vector<double> q(resamples), draw(samples.size());
  for (int b = 0; b < resamples; ++b) {
    for (auto& d : draw) d = samples[pick(rng)];
    q[b] = estimate_quantile(draw, p);
  }
  const double tail = 0.5 * (1.0 - confidence);
  return 0.5 * (estimate_quantile(q, 1.0 - tail) - estimate_quantile(q, tail));
}

BoundCheck compare_bound(const McReport& report, double j_ub) {
  BoundCheck c;
  c.quantile = report.dv_quantile;
  c.j_ub = j_ub;
  c.halfwidth = report.dv_quantile_halfwidth;
  c.holds = c.quantile <= j_ub + c.halfwidth;
  return c;
}

int binomial_upper_count(int n, double p, double confidence) {
  if (n <= 0) return 0;
  const boost::math::binomial_distribution<double> dist(n, p);
  int c = static_cast<int>(std::ceil(boost::math::quantile(dist, confidence)));
  return std::clamp(c, 0, n);
}

McReport run_campaign(const MissionProblem& prob, const Iterate& solution, const McOptions& opts,
                      std::vector<McSample>* samples_out) {
  if (opts.samples < 1) fail(ErrorKind::InvalidArgument, "campaign needs at least one sample");
  MissionProblem stoch = prob;
  stoch.stochastic = true;
  Iterate sol = solution;
  if (sol.gains.segments() != prob.segments()) sol.gains = GainMatrix::zero(prob.segments());

  Playback pb{stoch, sol, evaluate(stoch, sol), {}, {}, {}, {}};
  pb.k_hat = convert_gain(*pb.ev.blocks, sol.gains);
  pb.p_hat0_sqrt = psd_factor(prob.uncertainty.estimate_cov0);
  pb.p_err0_sqrt = psd_factor(prob.uncertainty.error_cov0);
  pb.proc_sqrt = process_noise_sqrt(prob.uncertainty.process);

  const int n = prob.segments();
  const int nf = static_cast<int>(prob.flybys.size());
  std::vector<McSample> samples(opts.samples);
  auto work = [&](int begin, int end) {
    for (int i = begin; i < end; ++i) {
      McSample& s = samples[i];
      s.index = static_cast<std::uint64_t>(i);
      s.commanded.assign(n, Vec3::Zero());
      s.executed.assign(n, Vec3::Zero());
      s.periapsis.assign(nf, std::numeric_limits<double>::quiet_NaN());
      if (opts.keep_trajectories) {
        s.truth.assign(n + 1, Vec6::Zero());
        s.estimate.assign(n + 1, Vec6::Zero());
      }
      auto rng = stream_rng(opts.seed, s.index);
      try {
        if (opts.linear) run_linear(pb, rng, s);
        else run_nonlinear(pb, rng, s);
      } catch (const Error& e) {
        if (!recoverable(e)) throw;
        s.ok = false;
        s.failure = e.what();
      }
      for (int k = 0; k < n; ++k) {
        if (prob.grid.kinds[k] != SegmentKind::Thrust) continue;
        s.dv_commanded += s.commanded[k].norm() * prob.grid.duration(k);
        s.dv_executed += s.executed[k].norm() * prob.grid.duration(k);
      }
    }
  };
  const int threads = std::clamp(opts.threads, 1, opts.samples);
  if (threads == 1) {
    work(0, opts.samples);
  } else {
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(threads);
    for (int t = 0; t < threads; ++t) {
      const int b = static_cast<int>(static_cast<long>(opts.samples) * t / threads);
      const int e = static_cast<int>(static_cast<long>(opts.samples) * (t + 1) / threads);
      pool.emplace_back([&, b, e, t] {
        try {
          work(b, e);
        } catch (...) {
          errors[t] = std::current_exception();
        }
      });
    }
    for (auto& th : pool) th.join();
    for (auto& err : errors)
      if (err) std::rethrow_exception(err);
  }

  // Reductions in sample order so results do not depend on the thread count.
  McReport r;
  r.samples = opts.samples;
  r.linear = opts.linear;
  r.seed = opts.seed;
  r.dv_probability = prob.dv_probability;
  r.dv_nominal = pb.ev.cost_nominal;
  r.j_ub = pb.ev.cost_bound;
  r.thrust_violation_rate.assign(n, 0.0);
  std::vector<double> dv_exec;
  std::vector<std::vector<double>> peri(nf);
  std::vector<Vec6> finals;
  long od_in = 0, od_all = 0;
  for (const auto& s : samples) {
    if (!s.ok) {
      r.failed += 1;
      continue;
    }
    r.dv_samples.push_back(s.dv_commanded);
    dv_exec.push_back(s.dv_executed);
    for (int k = 0; k < n; ++k)
      if (prob.grid.kinds[k] == SegmentKind::Thrust && s.commanded[k].norm() > prob.u_max) {
        r.thrust_violation_rate[k] += 1.0;
        r.thrust_violations += 1;
      }
    for (int f = 0; f < nf; ++f) peri[f].push_back(s.periapsis[f]);
    finals.push_back(s.terminal_defect);
    od_in += s.od_inside;
    od_all += s.od_total;
  }
  const int ok = opts.samples - r.failed;
  if (ok == 0) {
    if (samples_out) *samples_out = std::move(samples);
    return r;
  }
  for (double& v : r.thrust_violation_rate) v /= ok;
  r.dv_quantile = estimate_quantile(r.dv_samples, prob.dv_probability);
  r.dv_quantile_executed = estimate_quantile(dv_exec, prob.dv_probability);
  r.dv_quantile_halfwidth =
      bootstrap_halfwidth(r.dv_samples, prob.dv_probability, 1000, opts.seed);
  r.dv_histogram = make_histogram(r.dv_samples, 20);
  for (int f = 0; f < nf; ++f) {
    FlybyStats fs;
    fs.nominal = pb.ev.periapsis[f];
    fs.floor = prob.flybys[f].rp_min;
    fs.min = *std::min_element(peri[f].begin(), peri[f].end());
    double sum = 0.0;
    for (double v : peri[f]) {
      sum += v;
      if (v < fs.floor) fs.below_floor += 1;
    }
    fs.mean = sum / ok;
    fs.histogram = make_histogram(peri[f], 20);
    r.flybys.push_back(fs);
  }
  Vec6 mean = Vec6::Zero();
  for (const auto& d : finals) mean += d;
  mean /= ok;
  Mat6 cov = Mat6::Zero();
  for (const auto& d : finals) cov += (d - mean) * (d - mean).transpose();
  if (ok > 1) cov /= (ok - 1);
  r.terminal_mean_defect = mean;
  r.terminal_cov_sample = cov;
  r.terminal_cov_predicted =
      pb.ev.factors.dispersion[n] * pb.ev.factors.dispersion[n].transpose() +
      pb.ev.kf.nodes[n].post_cov;
  r.terminal_cov_bound = prob.terminal.cov;
  Eigen::LLT<Mat6> llt(prob.terminal.cov);
  if (llt.info() == Eigen::Success) {
    const Mat6 Linv = Mat6(llt.matrixL()).inverse();
    Eigen::SelfAdjointEigenSolver<Mat6> es(Linv * cov * Linv.transpose());
    r.terminal_bound_ratio = es.eigenvalues().maxCoeff();
  } else {
    r.terminal_bound_ratio = std::numeric_limits<double>::quiet_NaN();
  }
  r.od_containment = od_all > 0 ? static_cast<double>(od_in) / od_all : 1.0;
  if (samples_out) *samples_out = std::move(samples);
  return r;
}

}  // namespace rtopt
