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

#include "rtopt/subproblem.hpp"

#include <cmath>
#include <map>

#include "rtopt/errors.hpp"
#include "rtopt/gravity_assist.hpp"

namespace rtopt {

PenaltyState PenaltyState::initial(int n_eq, int n_ineq, double weight, double tau) {
  PenaltyState ps;
  ps.lambda = VecX::Zero(n_eq);
  ps.mu = VecX::Zero(n_ineq);
  ps.weight = weight;
  ps.tau = tau;
  return ps;
}

double penalty_phi(double z, double tau) {
  return std::pow(std::abs(z), tau) / tau + 0.5 * z * z;
}

double penalty_phi_grad(double z, double tau) {
  if (z == 0.0) return 0.0;
  return std::copysign(std::pow(std::abs(z), tau - 1.0), z) + z;
}

double penalty_value(const VecX& eq, const VecX& ineq, const PenaltyState& ps) {
  if (eq.size() != ps.lambda.size() || ineq.size() != ps.mu.size())
    fail(ErrorKind::InvalidArgument, "penalty state does not match the constraints");
  const double w = ps.weight;
  double p = 0.0;
  for (int i = 0; i < eq.size(); ++i)
    p += ps.lambda(i) * eq(i) + penalty_phi(w * eq(i), ps.tau) / w;
  for (int i = 0; i < ineq.size(); ++i) {
    const double h = std::max(0.0, ineq(i));
    p += ps.mu(i) * h + penalty_phi(w * h, ps.tau) / w;
  }
  return p;
}

double augmented_cost(const Evaluation& ev, const PenaltyState& ps) {
  return ev.cost_bound + penalty_value(ev.eq_residual, ev.ineq_residual, ps);
}

double violation(const Evaluation& ev) {
  double v = ev.eq_residual.size() ? ev.eq_residual.cwiseAbs().maxCoeff() : 0.0;
  for (int i = 0; i < ev.ineq_residual.size(); ++i) v = std::max(v, ev.ineq_residual(i));
  return v;
}

namespace {

// Row-major entries of a matrix-valued affine expression.
struct MatExpr {
  int rows = 0;
  int cols = 0;
  std::vector<LinExpr> entries;

  MatExpr(int r, int c) : rows(r), cols(c), entries(static_cast<std::size_t>(r) * c) {}
  LinExpr& at(int r, int c) { return entries[static_cast<std::size_t>(r) * cols + c]; }
};

// |M| <= bound under the surrogate: one SOC for Frobenius, or the PSD cone
// [[t I, M], [M', t I]] for the spectral norm.
void add_norm_bound(ProgramBuilder& b, const LinExpr& bound, const MatExpr& m, MatrixNorm kind) {
  if (kind == MatrixNorm::Frobenius) {
    std::vector<LinExpr> rows;
    rows.reserve(m.entries.size() + 1);
    rows.push_back(bound);
    rows.insert(rows.end(), m.entries.begin(), m.entries.end());
    b.add_soc(rows);
    return;
  }
  const int order = m.rows + m.cols;
  std::vector<LinExpr> svec;
  svec.reserve(static_cast<std::size_t>(order) * (order + 1) / 2);
  for (int j = 0; j < order; ++j)
    for (int i = 0; i <= j; ++i) {
      LinExpr e;
      if (i == j) {
        e = bound;
      } else if (i < m.rows && j >= m.rows) {
        e.add(m.entries[static_cast<std::size_t>(i) * m.cols + (j - m.rows)], M_SQRT2);
      }
      svec.push_back(std::move(e));
    }
  b.add_psd(svec, order);
}

struct GainBasis {
  int rank = 0;
  MatX pinv;
  MatX null;
};

GainBasis gain_basis(const BlockSystem& bs, int k, int first) {
  const MatX G = gain_row_space(bs, k, first);
  GainBasis gb;
  Eigen::BDCSVD<MatX> svd(G, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const VecX& sv = svd.singularValues();
  if (sv.size() == 0 || sv(0) <= 0.0) return gb;
  while (gb.rank < sv.size() && sv(gb.rank) > 1e-10 * sv(0)) ++gb.rank;
  const MatX& U = svd.matrixU();
  const MatX& V = svd.matrixV();
  gb.pinv = V.leftCols(gb.rank) * sv.head(gb.rank).cwiseInverse().asDiagonal() *
            U.leftCols(gb.rank).transpose();
  gb.null = V.rightCols(G.cols() - gb.rank);
  return gb;
}

}  // namespace

Subproblem assemble(const MissionProblem& prob, const Iterate& ref, const Evaluation& ev,
                    const PenaltyState& ps, const TrustRegion& tr) {
  const int n = prob.segments();
  const int nf = static_cast<int>(prob.flybys.size());
  const int n_eq = 6 + 3 * nf;
  if (static_cast<int>(ev.states.size()) != n + 1 || static_cast<int>(ev.segments.size()) != n ||
      static_cast<int>(ref.controls.size()) != n)
    fail(ErrorKind::Assembly, "reference iterate does not match the grid");
  if (ps.lambda.size() != n_eq || ps.mu.size() != nf)
    fail(ErrorKind::Assembly, "penalty state does not match the relaxed constraints");
  const bool stoch = prob.stochastic;
  if (stoch && !ev.blocks) fail(ErrorKind::Assembly, "reference lacks the block system");
  const auto& kinds = prob.grid.kinds;

  Subproblem sp;
  ProgramBuilder b;
  sp.x_offset = b.add_variables("state", 6 * (n + 1));
  sp.u_offset = b.add_variables("control", 3 * n);
  sp.theta_offset = b.add_variables("turn_angle", nf);
  auto X = [&](int k, int i) { return sp.x_offset + 6 * k + i; };
  auto U = [&](int k, int i) { return sp.u_offset + 3 * k + i; };

  sp.factor_offset.assign(n, -1);
  sp.factor_cols.assign(n, 0);
  sp.factor_pinv.assign(n, MatX());
  std::vector<MatX> null_basis(n);
  if (stoch) {
    int total = 0;
    for (int k = 0; k < n; ++k) {
      if (kinds[k] != SegmentKind::Thrust) continue;
      GainBasis gb = gain_basis(*ev.blocks, k, prob.gain_first(k));
      if (gb.rank == 0) continue;
      sp.factor_offset[k] = total;
      sp.factor_cols[k] = ev.blocks->cols(k);
      sp.factor_pinv[k] = std::move(gb.pinv);
      null_basis[k] = std::move(gb.null);
      total += 3 * sp.factor_cols[k];
    }
    const int base = b.add_variables("control_factor", total);
    for (int k = 0; k < n; ++k)
      if (sp.factor_offset[k] >= 0) sp.factor_offset[k] += base;
  }
  // W_k(r, c), column-major.
  auto W = [&](int k, int r, int c) { return sp.factor_offset[k] + 3 * c + r; };

  sp.eq_buffer_offset = b.add_variables("eq_buffer", n_eq);
  sp.ineq_buffer_offset = b.add_variables("ineq_buffer", nf);

  std::vector<int> thrust_norm(n, -1), factor_norm(n, -1);
  {
    int nt = 0, ng = 0;
    for (int k = 0; k < n; ++k) {
      if (kinds[k] == SegmentKind::Thrust) thrust_norm[k] = nt++;
      if (sp.factor_offset[k] >= 0) factor_norm[k] = ng++;
    }
    const int t0 = b.add_variables("thrust_norm", nt);
    const int g0 = b.add_variables("factor_norm", ng);
    for (int k = 0; k < n; ++k) {
      if (thrust_norm[k] >= 0) thrust_norm[k] += t0;
      if (factor_norm[k] >= 0) factor_norm[k] += g0;
    }
  }
  const int speed_aux = b.add_variables("flyby_speed", nf);
  const int sigma_aux = b.add_variables("flyby_sigma", stoch ? nf : 0);
  const int n_buf = n_eq + nf;
  const int pen_pow = b.add_variables("penalty_power", n_buf);
  const int pen_quad = b.add_variables("penalty_quad", n_buf);

  const double mu_margin = thrust_margin(prob);
  const double cost_m = cost_margin(prob);
  const double ga_margin = flyby_margin(prob);

  // Launch.
  const double t_launch = prob.grid.epochs.front();
  if (prob.launch.from_body) {
    const Vec6 xb = prob.body_state(prob.launch.body, t_launch);
    std::vector<LinExpr> pos, cone;
    for (int i = 0; i < 3; ++i) pos.push_back(LinExpr::var(X(0, i)).add(LinExpr(-xb(i))));
    b.add_zero(pos);
    cone.emplace_back(prob.launch.vinf_max);
    for (int i = 3; i < 6; ++i) cone.push_back(LinExpr::var(X(0, i)).add(LinExpr(-xb(i))));
    b.add_soc(cone);
  } else {
    std::vector<LinExpr> rows;
    for (int i = 0; i < 6; ++i)
      rows.push_back(LinExpr::var(X(0, i)).add(LinExpr(-prob.launch.state(i))));
    b.add_zero(rows);
  }

  // Dynamics and per-segment control constraints.
  for (int k = 0; k < n; ++k) {
    const LinearSegment& s = ev.segments[k];
    std::vector<LinExpr> dyn(6);
    for (int i = 0; i < 6; ++i) {
      LinExpr& e = dyn[i];
      e.add(X(k + 1, i), 1.0);
      for (int j = 0; j < 6; ++j) e.add(X(k, j), -s.A(i, j));
      for (int j = 0; j < 3; ++j) e.add(U(k, j), -s.B(i, j));
      e.constant = -s.c(i);
    }
    b.add_zero(dyn);

    if (kinds[k] == SegmentKind::Coast) {
      std::vector<LinExpr> rows;
      for (int i = 0; i < 3; ++i) rows.push_back(LinExpr::var(U(k, i)));
      b.add_zero(rows);
      continue;
    }
    if (kinds[k] != SegmentKind::Thrust) continue;
    const double dt = prob.grid.duration(k);
    std::vector<LinExpr> cone{LinExpr::var(thrust_norm[k])};
    for (int i = 0; i < 3; ++i) cone.push_back(LinExpr::var(U(k, i)));
    b.add_soc(cone);
    b.add_cost(thrust_norm[k], dt);
    LinExpr limit(prob.u_max);
    limit.add(thrust_norm[k], -1.0);
    if (factor_norm[k] >= 0) {
      const int c = sp.factor_cols[k];
      MatExpr wm(3, c);
      for (int r = 0; r < 3; ++r)
        for (int col = 0; col < c; ++col) wm.at(r, col) = LinExpr::var(W(k, r, col));
      add_norm_bound(b, LinExpr::var(factor_norm[k]), wm, prob.matrix_norm);
      const MatX& nb = null_basis[k];
      if (nb.cols() > 0) {
        std::vector<LinExpr> rows;
        for (int r = 0; r < 3; ++r)
          for (int j = 0; j < nb.cols(); ++j) {
            LinExpr e;
            for (int col = 0; col < c; ++col)
              if (std::abs(nb(col, j)) > 1e-13) e.add(W(k, r, col), nb(col, j));
            rows.push_back(std::move(e));
          }
        b.add_zero(rows);
      }
      limit.add(factor_norm[k], -mu_margin);
      b.add_cost(factor_norm[k], dt * cost_m);
    }
    b.add_nonneg({limit});
  }

  // E (S_k + sum_j B(k, j) W_j), p x cols(k).
  auto dispersion_expr = [&](const MatX& E, int k) {
    const BlockSystem& bs = *ev.blocks;
    const MatX base = E * bs.dispersion_row(k);
    MatExpr m(static_cast<int>(E.rows()), bs.cols(k));
    for (int r = 0; r < m.rows; ++r)
      for (int c = 0; c < m.cols; ++c) m.at(r, c).constant = base(r, c);
    for (int j = 0; j < k; ++j) {
      if (sp.factor_offset[j] < 0) continue;
      const MatX Mj = E * bs.control_block(k, j);
      for (int r = 0; r < m.rows; ++r)
        for (int c = 0; c < sp.factor_cols[j]; ++c)
          for (int q = 0; q < 3; ++q) m.at(r, c).add(W(j, q, c), Mj(r, q));
    }
    return m;
  };

  // Final mean (buffered) and covariance.
  {
    const Vec6 xf = prob.terminal_target();
    std::vector<LinExpr> rows;
    for (int i = 0; i < 6; ++i) {
      LinExpr e = LinExpr::var(X(n, i));
      e.add(sp.eq_buffer_offset + i, -1.0);
      e.constant = -xf(i);
      rows.push_back(std::move(e));
    }
    b.add_zero(rows);
  }
  if (stoch) {
    const Mat6 room = prob.terminal.cov - ev.kf.nodes[n].post_cov;
    Eigen::LLT<Mat6> llt(0.5 * (room + room.transpose()));
    if (llt.info() != Eigen::Success)
      fail(ErrorKind::Config,
           "final covariance bound does not exceed the navigation error floor");
    const Mat6 Rinv = Mat6(llt.matrixL()).inverse();
    add_norm_bound(b, LinExpr(1.0), dispersion_expr(Rinv, n), prob.matrix_norm);
  }

  // Flybys.
  for (int f = 0; f < nf; ++f) {
    const FlybySpec& fb = prob.flybys[f];
    const int k = fb.segment;
    const int th = sp.theta_offset + f;
    const Vec6 body = prob.body_state(fb.body, prob.grid.epochs[k]);
    std::vector<LinExpr> pos;
    for (int i = 0; i < 3; ++i) {
      LinExpr e = LinExpr::var(X(k, i));
      e.add(sp.eq_buffer_offset + 6 + 3 * f + i, -1.0);
      e.constant = -body(i);
      pos.push_back(std::move(e));
    }
    b.add_zero(pos);

    const Vec3 vp = ev.planet_velocity[f];
    const double theta_ref = std::clamp(ev.turn_angles[f], fb.theta_min, fb.theta_max);
    const TurnAngleRow row = turn_angle_constraint_lin(ev.states[k], ev.states[k + 1],
                                                       theta_ref, vp);
    LinExpr turn(row.value - row.d_pre.dot(row.pre_ref) - row.d_post.dot(row.post_ref) -
                 row.d_theta * theta_ref);
    for (int i = 0; i < 6; ++i) {
      turn.add(X(k, i), row.d_pre(i));
      turn.add(X(k + 1, i), row.d_post(i));
    }
    turn.add(th, row.d_theta);
    b.add_zero({turn});

    b.add_nonneg({LinExpr::var(th).add(LinExpr(-fb.theta_min)),
                  LinExpr(fb.theta_max).add(th, -1.0)});

    std::vector<LinExpr> speed{LinExpr::var(speed_aux + f)};
    for (int i = 0; i < 3; ++i) speed.push_back(LinExpr::var(X(k, 3 + i)).add(LinExpr(-vp(i))));
    b.add_soc(speed);

    const ImpactConstraint ic = impact_cc_lin(theta_ref, vp, fb.mu, fb.rp_min, ga_margin);
    const int zeta = sp.ineq_buffer_offset + f;
    LinExpr slack = LinExpr::var(zeta);
    slack.add(speed_aux + f, -1.0);
    slack.add(th, ic.slope);
    slack.constant = ic.h_ref - ic.slope * theta_ref;
    if (stoch) {
      Eigen::Matrix<double, 3, 6> Ev = Eigen::Matrix<double, 3, 6>::Zero();
      Ev.rightCols<3>().setIdentity();
      const MatExpr hat = dispersion_expr(Ev, k);
      const MatX tilde = psd_factor(ev.kf.nodes[k].post_cov).bottomRows(3);
      MatExpr full(3, hat.cols + 6);
      for (int r = 0; r < 3; ++r) {
        for (int c = 0; c < hat.cols; ++c)
          full.at(r, c) = hat.entries[static_cast<std::size_t>(r) * hat.cols + c];
        for (int c = 0; c < 6; ++c) full.at(r, hat.cols + c).constant = tilde(r, c);
      }
      add_norm_bound(b, LinExpr::var(sigma_aux + f), full, prob.matrix_norm);
      slack.add(sigma_aux + f, -ga_margin);
    }
    b.add_nonneg({slack, LinExpr::var(zeta)});
  }

  // Augmented-Lagrangian penalty on the buffers.
  {
    const double w = ps.weight, tau = ps.tau;
    for (int e = 0; e < n_buf; ++e) {
      const int v = e < n_eq ? sp.eq_buffer_offset + e : sp.ineq_buffer_offset + (e - n_eq);
      b.add_cost(v, e < n_eq ? ps.lambda(e) : ps.mu(e - n_eq));
      b.add_power(LinExpr::var(pen_pow + e), LinExpr(1.0), LinExpr::var(v), 1.0 / tau);
      b.add_cost(pen_pow + e, std::pow(w, tau - 1.0) / tau);
      LinExpr hi = LinExpr::var(pen_quad + e), lo = LinExpr::var(pen_quad + e);
      hi.constant = 0.5;
      lo.constant = -0.5;
      b.add_soc({hi, LinExpr::var(v), lo});
      b.add_cost(pen_quad + e, w);
    }
  }

  // Trust region.
  {
    const double r = tr.radius;
    std::vector<LinExpr> rows;
    auto box = [&](int var, double ref_value, double scale) {
      LinExpr up(r + scale * ref_value), dn(r - scale * ref_value);
      up.add(var, -scale);
      dn.add(var, scale);
      rows.push_back(std::move(up));
      rows.push_back(std::move(dn));
    };
    for (int k = 0; k <= n; ++k)
      for (int i = 0; i < 6; ++i) box(X(k, i), ev.states[k](i), tr.scale_state);
    for (int k = 0; k < n; ++k) {
      if (kinds[k] == SegmentKind::Coast) continue;
      for (int i = 0; i < 3; ++i) box(U(k, i), ref.controls[k](i), tr.scale_control);
    }
    for (int f = 0; f < nf; ++f) {
      const auto& fb = prob.flybys[f];
      box(sp.theta_offset + f, std::clamp(ev.turn_angles[f], fb.theta_min, fb.theta_max),
          tr.scale_angle);
    }
    b.add_nonneg(rows);
  }

  sp.program = b.build();
  return sp;
}

Candidate extract(const MissionProblem& prob, const Subproblem& sp, const VecX& x,
                  const PenaltyState& ps) {
  const int n = prob.segments();
  const int nf = static_cast<int>(prob.flybys.size());
  if (x.size() != sp.program.num_vars)
    fail(ErrorKind::InvalidArgument, "solution size does not match the subproblem");
  Candidate c;
  c.iterate.x0 = x.segment<6>(sp.x_offset);
  c.iterate.controls.resize(n);
  for (int k = 0; k < n; ++k)
    c.iterate.controls[k] = prob.grid.kinds[k] == SegmentKind::Coast
                                ? Vec3::Zero()
                                : Vec3(x.segment<3>(sp.u_offset + 3 * k));
  c.control_factors.assign(n, MatX());
  if (prob.stochastic) {
    c.iterate.gains = GainMatrix::zero(n);
    for (int k = 0; k < n; ++k) {
      if (sp.factor_offset[k] < 0) continue;
      const int cols = sp.factor_cols[k];
      MatX w(3, cols);
      for (int col = 0; col < cols; ++col)
        w.col(col) = x.segment<3>(sp.factor_offset[k] + 3 * col);
      const MatX K = w * sp.factor_pinv[k];
      const int first = prob.gain_first(k);
      for (int i = first; i <= k; ++i) c.iterate.gains.blocks[k][i] = K.middleCols<6>(6 * (i - first));
      c.control_factors[k] = std::move(w);
    }
  }
  c.turn_angles.resize(nf);
  for (int f = 0; f < nf; ++f) c.turn_angles[f] = x(sp.theta_offset + f);
  c.eq_buffer = x.segment(sp.eq_buffer_offset, 6 + 3 * nf);
  c.ineq_buffer = x.segment(sp.ineq_buffer_offset, nf).cwiseMax(0.0);

  const double cost_m = cost_margin(prob);
  for (int k = 0; k < n; ++k) {
    if (prob.grid.kinds[k] != SegmentKind::Thrust) continue;
    double s = c.iterate.controls[k].norm();
    if (c.control_factors[k].size()) s += cost_m * matrix_norm(c.control_factors[k], prob.matrix_norm);
    c.cost_bound += s * prob.grid.duration(k);
  }
  c.predicted = c.cost_bound + penalty_value(c.eq_buffer, c.ineq_buffer, ps);
  return c;
}

std::vector<std::string> layout_audit(const ConicProgram& prog) {
  std::vector<std::string> out;
  out.push_back("variables " + std::to_string(prog.num_vars));
  for (const auto& s : prog.slices)
    out.push_back("slice " + s.name + " " + std::to_string(s.length));
  std::map<std::string, std::pair<int, int>> cones;
  for (const auto& c : prog.cones) {
    const char* name = c.kind == ConeKind::Zero           ? "zero"
                       : c.kind == ConeKind::Nonnegative  ? "nonneg"
                       : c.kind == ConeKind::SecondOrder  ? "soc"
                       : c.kind == ConeKind::Power        ? "power"
                                                          : "psd";
    auto& e = cones[name];
    e.first += 1;
    e.second += c.dim;
  }
  for (const auto& [name, cnt] : cones)
    out.push_back("cone " + name + " blocks " + std::to_string(cnt.first) + " rows " +
                  std::to_string(cnt.second));
  out.push_back("rows " + std::to_string(prog.rows()));
  return out;
}

}  // namespace rtopt
