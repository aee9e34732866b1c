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

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

#include <Eigen/SparseCholesky>

#include "rtopt/conic.hpp"
#include "rtopt/errors.hpp"

namespace rtopt {

namespace {

using SpMat = Eigen::SparseMatrix<double>;
constexpr double kInf = std::numeric_limits<double>::infinity();

double inf_norm(const VecX& v) { return v.size() ? v.cwiseAbs().maxCoeff() : 0.0; }

// ---------------------------------------------------------------------------
// Power cone barrier f(x,y,z) = -log(x^2a y^2b - z^2) - b log x - a log y,
// b = 1 - a. The dual cone uses g(w) = f(S w), S = diag(1/a, 1/b, 1).

bool pow_interior(double x, double y, double z, double a) {
  if (!(x > 0.0 && y > 0.0)) return false;
  if (z == 0.0) return true;
  return a * std::log(x) + (1.0 - a) * std::log(y) > std::log(std::abs(z));
}

bool pow_dual_interior(const double* w, double a) {
  return pow_interior(w[0] / a, w[1] / (1.0 - a), w[2], a);
}

void pow_barrier_derivs(const double* p, double a, Eigen::Vector3d& g, Eigen::Matrix3d& H) {
  const double b = 1.0 - a;
  const double x = p[0], y = p[1], z = p[2];
  const double P = std::exp(2.0 * a * std::log(x) + 2.0 * b * std::log(y));
  const double phi = P - z * z;
  const double px = 2.0 * a * P / x, py = 2.0 * b * P / y;
  g << -px / phi - b / x, -py / phi - a / y, 2.0 * z / phi;
  const double phi2 = phi * phi;
  H(0, 0) = px * px / phi2 - 2.0 * a * (2.0 * a - 1.0) * P / (x * x * phi) + b / (x * x);
  H(1, 1) = py * py / phi2 - 2.0 * b * (2.0 * b - 1.0) * P / (y * y * phi) + a / (y * y);
  H(0, 1) = px * py / phi2 - 4.0 * a * b * P / (x * y * phi);
  H(0, 2) = -2.0 * z * px / phi2;
  H(1, 2) = -2.0 * z * py / phi2;
  H(2, 2) = 4.0 * z * z / phi2 + 2.0 / phi;
  H(1, 0) = H(0, 1);
  H(2, 0) = H(0, 2);
  H(2, 1) = H(1, 2);
}

void pow_dual_derivs(const double* w, double a, Eigen::Vector3d& g, Eigen::Matrix3d& H) {
  const Eigen::Vector3d sd(1.0 / a, 1.0 / (1.0 - a), 1.0);
  const double p[3] = {w[0] * sd(0), w[1] * sd(1), w[2]};
  pow_barrier_derivs(p, a, g, H);
  g = sd.cwiseProduct(g);
  H = sd.asDiagonal() * H * sd.asDiagonal();
}

// ---------------------------------------------------------------------------
// Second-order cone helpers.

double soc_residual(const double* v, int dim) {
  double t = 0.0;
  for (int i = 1; i < dim; ++i) t += v[i] * v[i];
  return v[0] * v[0] - t;
}

// Largest alpha with x + alpha d in the cone (x interior).
double soc_step(const double* x, const double* d, int dim) {
  double a = d[0] * d[0], b = x[0] * d[0], c = x[0] * x[0];
  for (int i = 1; i < dim; ++i) {
    a -= d[i] * d[i];
    b -= x[i] * d[i];
    c -= x[i] * x[i];
  }
  b *= 2.0;
  c = std::max(c, 0.0);
  if (a == 0.0) return b >= 0.0 ? kInf : -c / b;
  const double disc = b * b - 4.0 * a * c;
  if (disc < 0.0) return kInf;
  const double t = -0.5 * (b + std::copysign(std::sqrt(disc), b));
  double best = kInf;
  for (double r : {t / a, t != 0.0 ? c / t : kInf})
    if (r >= 0.0 && r < best) best = r;
  return best;
}

// y = Jordan product u o v.
void soc_prod(const double* u, const double* v, double* y, int dim) {
  double dot = 0.0;
  for (int i = 0; i < dim; ++i) dot += u[i] * v[i];
  for (int i = 1; i < dim; ++i) y[i] = u[0] * v[i] + v[0] * u[i];
  y[0] = dot;
}

// Solve lambda o y = v.
void soc_div(const double* lam, const double* v, double* y, int dim) {
  const double rho = soc_residual(lam, dim);
  double dot = 0.0;
  for (int i = 1; i < dim; ++i) dot += lam[i] * v[i];
  const double y0 = (lam[0] * v[0] - dot) / rho;
  for (int i = 1; i < dim; ++i) y[i] = (v[i] - y0 * lam[i]) / lam[0];
  y[0] = y0;
}

struct ConeScale {
  // SOC: W = eta [[a, q'], [q, I + q q' / (1 + a)]], wbar = (a, q).
  double eta = 1.0;
  VecX wbar;
  VecX lambda;
  // Sparse expansion H = eta^2 (D + u u' - v v').
  double d1 = 1.0, u0 = 0.0, u1 = 0.0, v1 = 0.0;
  // Power cone: dual-scaling Hessian.
  Eigen::Matrix3d H = Eigen::Matrix3d::Identity();
  Eigen::Vector3d grad = Eigen::Vector3d::Zero();
};

class Ipm {
 public:
  Ipm(const ConicProgram& prog, const SolverSettings& st) : orig_(prog), st_(st) {}
  SolveResult run();

 private:
  void setup();
  void equilibrate();
  void set_identity_scaling();
  void update_scaling(double mu);
  void soc_expansion(ConeScale& c, int dim);
  bool factor();
  void assemble();
  VecX solve(const VecX& rhs);
  void apply_W(int k, const double* v, double* out, bool inverse) const;
  double step_length(const VecX& dx, const VecX& ds, const VecX& dz, double dtau,
                     double dkappa, bool affine, double sigma_mu_target);
  bool check_power(const VecX& s, const VecX& z, double mu_min_ratio) const;
  void unscaled(VecX& x, VecX& s, VecX& z) const;
  void evaluate(SolveResult& r) const;

  const ConicProgram& orig_;
  SolverSettings st_;
  int n_ = 0, m_ = 0;
  SpMat A_;
  VecX q_, b_, D_, E_;
  double cscale_ = 1.0;
  std::vector<ConeBlock> cones_;
  std::vector<int> off_;
  std::vector<int> aux_;
  int kdim_ = 0;
  double nu_ = 0.0;

  VecX x_, s_, z_;
  double tau_ = 1.0, kappa_ = 1.0;
  std::vector<ConeScale> sc_;

  std::vector<Eigen::Triplet<double>> trip_;
  SpMat K_;
  Eigen::SimplicialLDLT<SpMat, Eigen::Lower, Eigen::AMDOrdering<int>> ldlt_;
  bool analyzed_ = false;
  double delta_ = 1e-8;
  VecX reg_, sign_;
};

void Ipm::setup() {
  n_ = orig_.num_vars;
  m_ = orig_.rows();
  cones_ = orig_.cones;
  off_.resize(cones_.size());
  aux_.assign(cones_.size(), -1);
  int o = 0, aux = n_ + m_;
  nu_ = 0.0;
  for (std::size_t k = 0; k < cones_.size(); ++k) {
    off_[k] = o;
    o += cones_[k].dim;
    switch (cones_[k].kind) {
      case ConeKind::Nonnegative: nu_ += cones_[k].dim; break;
      case ConeKind::SecondOrder:
        nu_ += 1.0;
        if (cones_[k].dim > st_.dense_soc_limit) {
          aux_[k] = aux;
          aux += 2;
        }
        break;
      case ConeKind::Power: nu_ += 3.0; break;
      default: break;
    }
  }
  kdim_ = aux;
  sc_.resize(cones_.size());
  for (std::size_t k = 0; k < cones_.size(); ++k) {
    sc_[k].wbar = VecX::Zero(cones_[k].dim);
    sc_[k].lambda = VecX::Zero(cones_[k].dim);
  }
  sign_ = VecX::Ones(kdim_);
  sign_.segment(n_, m_).setConstant(-1.0);
  for (std::size_t k = 0; k < cones_.size(); ++k)
    if (aux_[k] >= 0) sign_(aux_[k]) = -1.0;  // v-part; u-part stays +1
  delta_ = st_.static_reg;
  equilibrate();
}

void Ipm::equilibrate() {
  A_ = orig_.A;
  q_ = orig_.q;
  b_ = orig_.b;
  D_ = VecX::Ones(n_);
  E_ = VecX::Ones(m_);
  for (int it = 0; it < st_.ruiz_iters; ++it) {
    VecX cn = VecX::Zero(n_), rn = VecX::Zero(m_);
    for (int j = 0; j < A_.outerSize(); ++j)
      for (SpMat::InnerIterator e(A_, j); e; ++e) {
        const double v = std::abs(e.value());
        cn(j) = std::max(cn(j), v);
        rn(e.row()) = std::max(rn(e.row()), v);
      }
    VecX dj(n_), ei(m_);
    for (int j = 0; j < n_; ++j) dj(j) = cn(j) > 0.0 ? 1.0 / std::sqrt(cn(j)) : 1.0;
    for (int i = 0; i < m_; ++i) ei(i) = rn(i) > 0.0 ? 1.0 / std::sqrt(rn(i)) : 1.0;
    // Non-separable cones share one row scale.
    for (std::size_t k = 0; k < cones_.size(); ++k) {
      const auto kind = cones_[k].kind;
      if (kind == ConeKind::Zero || kind == ConeKind::Nonnegative) continue;
      const double mean = ei.segment(off_[k], cones_[k].dim).mean();
      ei.segment(off_[k], cones_[k].dim).setConstant(mean);
    }
    for (int j = 0; j < n_; ++j) dj(j) = std::clamp(D_(j) * dj(j), 1e-4, 1e4) / D_(j);
    for (int i = 0; i < m_; ++i) ei(i) = std::clamp(E_(i) * ei(i), 1e-4, 1e4) / E_(i);
    A_ = ei.asDiagonal() * A_ * dj.asDiagonal();
    D_ = D_.cwiseProduct(dj);
    E_ = E_.cwiseProduct(ei);
  }
  q_ = D_.cwiseProduct(orig_.q);
  b_ = E_.cwiseProduct(orig_.b);
  const double qn = inf_norm(q_);
  cscale_ = qn > 0.0 ? std::clamp(1.0 / qn, 1e-4, 1e4) : 1.0;
  q_ *= cscale_;
}

void Ipm::soc_expansion(ConeScale& c, int dim) {
  const double a = c.wbar(0);
  const double a2 = a * a;
  const double L = 2.0 / (2.0 * a2 - 1.0);
  double v1sq;
  if (a2 < 1.5) {
    v1sq = 2.0 * L;
  } else {
    const double U = 1.0 / (a2 - 1.0);
    v1sq = 0.5 * (L + U);
  }
  c.v1 = std::sqrt(v1sq);
  c.u1 = std::sqrt(2.0 + v1sq);
  c.u0 = 2.0 * a / c.u1;
  c.d1 = 2.0 * a2 - 1.0 - c.u0 * c.u0;
  (void)dim;
}

void Ipm::set_identity_scaling() {
  for (std::size_t k = 0; k < cones_.size(); ++k) {
    auto& c = sc_[k];
    c.eta = 1.0;
    c.wbar.setZero();
    if (cones_[k].kind == ConeKind::SecondOrder) {
      c.wbar(0) = 1.0;
      soc_expansion(c, cones_[k].dim);
    } else if (cones_[k].kind == ConeKind::Nonnegative) {
      c.wbar.setOnes();
    }
    c.H.setIdentity();
  }
}

void Ipm::update_scaling(double mu) {
  for (std::size_t k = 0; k < cones_.size(); ++k) {
    auto& c = sc_[k];
    const int o = off_[k], d = cones_[k].dim;
    const double* s = s_.data() + o;
    const double* z = z_.data() + o;
    switch (cones_[k].kind) {
      case ConeKind::Nonnegative:
        for (int i = 0; i < d; ++i) {
          c.wbar(i) = std::sqrt(s[i] / z[i]);
          c.lambda(i) = std::sqrt(s[i] * z[i]);
        }
        break;
      case ConeKind::SecondOrder: {
        const double sr = std::sqrt(soc_residual(s, d));
        const double zr = std::sqrt(soc_residual(z, d));
        double dot = 0.0;
        for (int i = 0; i < d; ++i) dot += s[i] * z[i];
        const double gamma = std::sqrt(0.5 * (1.0 + dot / (sr * zr)));
        c.wbar(0) = (s[0] / sr + z[0] / zr) / (2.0 * gamma);
        for (int i = 1; i < d; ++i) c.wbar(i) = (s[i] / sr - z[i] / zr) / (2.0 * gamma);
        // Renormalize so that wbar' J wbar = 1 exactly.
        const double wr = std::sqrt(std::max(soc_residual(c.wbar.data(), d), 1e-300));
        c.wbar /= wr;
        c.eta = std::sqrt(sr / zr);
        apply_W(static_cast<int>(k), z, c.lambda.data(), false);
        soc_expansion(c, d);
        break;
      }
      case ConeKind::Power:
        pow_dual_derivs(z, cones_[k].alpha, c.grad, c.H);
        c.H *= mu;
        break;
      default: break;
    }
  }
}

void Ipm::apply_W(int k, const double* v, double* out, bool inverse) const {
  const auto& c = sc_[k];
  const int d = cones_[k].dim;
  if (cones_[k].kind == ConeKind::Nonnegative) {
    for (int i = 0; i < d; ++i) out[i] = inverse ? v[i] / c.wbar(i) : v[i] * c.wbar(i);
    return;
  }
  const double a = c.wbar(0);
  double qv = 0.0;
  for (int i = 1; i < d; ++i) qv += c.wbar(i) * v[i];
  const double sgn = inverse ? -1.0 : 1.0;
  const double scale = inverse ? 1.0 / c.eta : c.eta;
  const double v0 = v[0];
  const double coef = sgn * v0 + qv / (1.0 + a);
  for (int i = 1; i < d; ++i) out[i] = scale * (v[i] + coef * c.wbar(i));
  out[0] = scale * (a * v0 + sgn * qv);
}

void Ipm::assemble() {
  const bool first = trip_.empty();
  trip_.clear();
  trip_.reserve(n_ + A_.nonZeros() + 4 * m_);
  for (int j = 0; j < n_; ++j) trip_.emplace_back(j, j, delta_);
  for (int j = 0; j < A_.outerSize(); ++j)
    for (SpMat::InnerIterator e(A_, j); e; ++e) trip_.emplace_back(n_ + e.row(), j, e.value());
  for (std::size_t k = 0; k < cones_.size(); ++k) {
    const auto& c = sc_[k];
    const int r0 = n_ + off_[k], d = cones_[k].dim;
    switch (cones_[k].kind) {
      case ConeKind::Zero:
        for (int i = 0; i < d; ++i) trip_.emplace_back(r0 + i, r0 + i, -delta_);
        break;
      case ConeKind::Nonnegative:
        for (int i = 0; i < d; ++i)
          trip_.emplace_back(r0 + i, r0 + i, -(c.wbar(i) * c.wbar(i) + delta_));
        break;
      case ConeKind::SecondOrder: {
        const double e2 = c.eta * c.eta;
        if (aux_[k] < 0) {
          for (int i = 0; i < d; ++i)
            for (int j = 0; j <= i; ++j) {
              double h = 2.0 * c.wbar(i) * c.wbar(j);
              if (i == j) h += (i == 0 ? -1.0 : 1.0);
              trip_.emplace_back(r0 + i, r0 + j, -(e2 * h) - (i == j ? delta_ : 0.0));
            }
        } else {
          trip_.emplace_back(r0, r0, -(e2 * c.d1 + delta_));
          for (int i = 1; i < d; ++i) trip_.emplace_back(r0 + i, r0 + i, -(e2 + delta_));
          const int pv = aux_[k], pu = aux_[k] + 1;
          for (int i = 1; i < d; ++i) trip_.emplace_back(pv, r0 + i, c.eta * c.v1 * c.wbar(i));
          trip_.emplace_back(pv, pv, -1.0);
          trip_.emplace_back(pu, r0, c.eta * c.u0);
          for (int i = 1; i < d; ++i) trip_.emplace_back(pu, r0 + i, c.eta * c.u1 * c.wbar(i));
          trip_.emplace_back(pu, pu, 1.0);
        }
        break;
      }
      case ConeKind::Power:
        for (int i = 0; i < 3; ++i)
          for (int j = 0; j <= i; ++j)
            trip_.emplace_back(r0 + i, r0 + j, -c.H(i, j) - (i == j ? delta_ : 0.0));
        break;
      default: break;
    }
  }
  K_.resize(kdim_, kdim_);
  K_.setFromTriplets(trip_.begin(), trip_.end());
  if (first) analyzed_ = false;
}

bool Ipm::factor() {
  for (int attempt = 0; attempt < 6; ++attempt) {
    assemble();
    if (!analyzed_) {
      ldlt_.analyzePattern(K_);
      analyzed_ = true;
    }
    ldlt_.factorize(K_);
    bool ok = ldlt_.info() == Eigen::Success;
    if (ok) {
      const auto& idx = ldlt_.permutationP().indices();
      const VecX& Dv = ldlt_.vectorD();
      for (int i = 0; i < kdim_ && ok; ++i) {
        const double dv = Dv(idx(i));
        if (!(dv * sign_(i) > 0.0) || !std::isfinite(dv)) ok = false;
      }
    }
    if (ok) {
      reg_ = VecX::Zero(kdim_);
      reg_.head(n_).setConstant(delta_);
      reg_.segment(n_, m_).setConstant(-delta_);
      return true;
    }
    delta_ *= 100.0;
    if (delta_ > 1e-2) break;
  }
  return false;
}

VecX Ipm::solve(const VecX& rhs) {
  VecX sol = ldlt_.solve(rhs);
  const double rn = inf_norm(rhs);
  for (int it = 0; it < st_.refine_iters; ++it) {
    VecX Kv = K_.selfadjointView<Eigen::Lower>() * sol;
    Kv -= reg_.cwiseProduct(sol);
    const VecX r = rhs - Kv;
    if (inf_norm(r) <= 1e-13 * (1.0 + rn)) break;
    const VecX corr = ldlt_.solve(r);
    if (!corr.allFinite()) break;
    sol += corr;
  }
  return sol;
}

bool Ipm::check_power(const VecX& s, const VecX& z, double ratio) const {
  double mu = 0.0;
  if (ratio > 0.0) mu = (s.dot(z) + 0.0) / std::max(nu_, 1.0);
  for (std::size_t k = 0; k < cones_.size(); ++k) {
    if (cones_[k].kind != ConeKind::Power) continue;
    const double* sp = s.data() + off_[k];
    const double* zp = z.data() + off_[k];
    const double a = cones_[k].alpha;
    if (!pow_interior(sp[0], sp[1], sp[2], a) || !pow_dual_interior(zp, a)) return false;
    if (ratio > 0.0) {
      const double sz = sp[0] * zp[0] + sp[1] * zp[1] + sp[2] * zp[2];
      if (sz < ratio * 3.0 * mu) return false;
    }
  }
  return true;
}

double Ipm::step_length(const VecX& dx, const VecX& ds, const VecX& dz, double dtau,
                        double dkappa, bool affine, double) {
  (void)dx;
  double amax = 1e10;
  if (dtau < 0.0) amax = std::min(amax, -tau_ / dtau);
  if (dkappa < 0.0) amax = std::min(amax, -kappa_ / dkappa);
  bool has_pow = false;
  for (std::size_t k = 0; k < cones_.size(); ++k) {
    const int o = off_[k], d = cones_[k].dim;
    switch (cones_[k].kind) {
      case ConeKind::Nonnegative:
        for (int i = 0; i < d; ++i) {
          if (ds(o + i) < 0.0) amax = std::min(amax, -s_(o + i) / ds(o + i));
          if (dz(o + i) < 0.0) amax = std::min(amax, -z_(o + i) / dz(o + i));
        }
        break;
      case ConeKind::SecondOrder:
        amax = std::min(amax, soc_step(s_.data() + o, ds.data() + o, d));
        amax = std::min(amax, soc_step(z_.data() + o, dz.data() + o, d));
        break;
      case ConeKind::Power: has_pow = true; break;
      default: break;
    }
  }
  double alpha = affine ? std::min(1.0, amax) : std::min(1.0, st_.max_step * amax);
  if (has_pow) {
    const double ratio = affine ? 0.0 : 1e-2;
    for (int it = 0; it < 60; ++it) {
      const VecX st = s_ + alpha * ds;
      const VecX zt = z_ + alpha * dz;
      if (check_power(st, zt, ratio)) break;
      alpha *= 0.8;
      if (it == 59) alpha = 0.0;
    }
  }
  return alpha;
}

void Ipm::unscaled(VecX& x, VecX& s, VecX& z) const {
  x = D_.cwiseProduct(x_) / tau_;
  s = s_.cwiseQuotient(E_) / tau_;
  z = E_.cwiseProduct(z_) / (cscale_ * tau_);
}

void Ipm::evaluate(SolveResult& r) const {
  unscaled(r.x, r.s, r.z);
  const VecX rp = orig_.A * r.x + r.s - orig_.b;
  const VecX rd = orig_.A.transpose() * r.z + orig_.q;
  r.primal_residual =
      inf_norm(rp) / std::max(1.0, inf_norm(orig_.b) + inf_norm(r.x) + inf_norm(r.s));
  r.dual_residual =
      inf_norm(rd) / std::max(1.0, inf_norm(orig_.q) + inf_norm(r.x) + inf_norm(r.z));
  r.primal_objective = orig_.q.dot(r.x) + orig_.objective_offset;
  r.dual_objective = -orig_.b.dot(r.z) + orig_.objective_offset;
  r.gap = std::abs(r.primal_objective - r.dual_objective);
}

SolveResult Ipm::run() {
  SolveResult res;
  for (const auto& c : orig_.cones)
    if (c.kind == ConeKind::Psd) {
      res.status = SolveStatus::UnsupportedCone;
      return res;
    }
  setup();
  if (m_ == 0 && n_ == 0) {
    res.status = SolveStatus::Optimal;
    return res;
  }

  // Initial point from two regularized least-squares solves.
  set_identity_scaling();
  if (!factor()) {
    res.status = SolveStatus::NumericalFailure;
    return res;
  }
  VecX rhs = VecX::Zero(kdim_);
  rhs.segment(n_, m_) = b_;
  VecX p = solve(rhs);
  x_ = p.head(n_);
  s_ = -p.segment(n_, m_);
  rhs.setZero();
  rhs.head(n_) = -q_;
  VecX dsol = solve(rhs);
  z_ = dsol.segment(n_, m_);
  auto shift = [&](VecX& v) {
    double alpha = -kInf;
    for (std::size_t k = 0; k < cones_.size(); ++k) {
      const int o = off_[k], d = cones_[k].dim;
      if (cones_[k].kind == ConeKind::Nonnegative)
        for (int i = 0; i < d; ++i) alpha = std::max(alpha, -v(o + i));
      else if (cones_[k].kind == ConeKind::SecondOrder)
        alpha = std::max(alpha, v.segment(o + 1, d - 1).norm() - v(o));
    }
    const bool shift_needed = alpha >= -1e-8 * std::max(1.0, inf_norm(v));
    for (std::size_t k = 0; k < cones_.size(); ++k) {
      const int o = off_[k], d = cones_[k].dim;
      switch (cones_[k].kind) {
        case ConeKind::Zero: break;
        case ConeKind::Nonnegative:
          if (shift_needed) v.segment(o, d).array() += 1.0 + alpha;
          break;
        case ConeKind::SecondOrder:
          if (shift_needed) v(o) += 1.0 + alpha;
          break;
        case ConeKind::Power: v.segment(o, 3) << 1.0, 1.0, 0.0; break;
        default: break;
      }
    }
  };
  shift(s_);
  shift(z_);
  for (std::size_t k = 0; k < cones_.size(); ++k)
    if (cones_[k].kind == ConeKind::Zero) s_.segment(off_[k], cones_[k].dim).setZero();
  tau_ = kappa_ = 1.0;

  auto meets = [&](const SolveResult& r, double tol) {
    const double rel = r.gap / std::max(1.0, std::min(std::abs(r.primal_objective),
                                                      std::abs(r.dual_objective)));
    return r.primal_residual < tol && r.dual_residual < tol && (r.gap < tol || rel < tol);
  };

  SolveResult best;
  bool have_best = false;
  int stalls = 0;
  for (int iter = 0; iter <= st_.max_iter; ++iter) {
    res.iterations = iter;
    const VecX rx = A_.transpose() * z_ + q_ * tau_;
    const VecX rz = A_ * x_ + s_ - b_ * tau_;
    const double rtau = q_.dot(x_) + b_.dot(z_) + kappa_;

    evaluate(res);
    if (st_.verbose)
      std::fprintf(stderr, "%3d pobj %+.8e dobj %+.8e pres %.2e dres %.2e gap %.2e tau %.2e kap %.2e\n",
                   iter, res.primal_objective, res.dual_objective, res.primal_residual,
                   res.dual_residual, res.gap, tau_, kappa_);
    if (meets(res, st_.tol_feas)) {
      res.status = SolveStatus::Optimal;
      return res;
    }
    if (meets(res, st_.tol_reduced)) {
      best = res;
      have_best = true;
    }
    // Infeasibility certificates in unscaled coordinates.
    {
      const VecX zo = E_.cwiseProduct(z_) / cscale_;
      const VecX xo = D_.cwiseProduct(x_);
      const VecX so = s_.cwiseQuotient(E_);
      const double bz = orig_.b.dot(zo);
      const double qx = orig_.q.dot(xo);
      if (kappa_ > tau_ && bz < 0.0 &&
          inf_norm(orig_.A.transpose() * zo) <= st_.tol_infeas * (-bz) &&
          -bz > st_.tol_infeas * std::max(1.0, inf_norm(zo)) * 1e-2) {
        res.status = SolveStatus::PrimalInfeasible;
        return res;
      }
      if (kappa_ > tau_ && qx < 0.0 &&
          inf_norm(orig_.A * xo + so) <= st_.tol_infeas * (-qx)) {
        res.status = SolveStatus::DualInfeasible;
        return res;
      }
    }
    if (iter == st_.max_iter) break;

    const double mu = (s_.dot(z_) + tau_ * kappa_) / (nu_ + 1.0);
    update_scaling(mu);
    if (!factor()) break;

    VecX r1 = VecX::Zero(kdim_);
    r1.head(n_) = -q_;
    r1.segment(n_, m_) = b_;
    const VecX sol1 = solve(r1);
    const VecX x1 = sol1.head(n_), z1 = sol1.segment(n_, m_);
    const double denom = q_.dot(x1) + b_.dot(z1) - kappa_ / tau_;

    auto newton = [&](const VecX& dxr, const VecX& dzr, double dtr, const VecX& dsr,
                      double dkr, VecX& dx, VecX& dz, VecX& ds, double& dtau, double& dkap) {
      VecX r2 = VecX::Zero(kdim_);
      r2.head(n_) = dxr;
      r2.segment(n_, m_) = dzr - dsr;
      const VecX sol2 = solve(r2);
      const VecX x2 = sol2.head(n_), z2 = sol2.segment(n_, m_);
      dtau = (dtr - dkr / tau_ - q_.dot(x2) - b_.dot(z2)) / denom;
      dx = x2 + dtau * x1;
      dz = z2 + dtau * z1;
      // ds = d_s - H dz, with H applied cone by cone.
      ds = dsr;
      for (std::size_t k = 0; k < cones_.size(); ++k) {
        const int o = off_[k], d = cones_[k].dim;
        const auto& c = sc_[k];
        switch (cones_[k].kind) {
          case ConeKind::Zero: ds.segment(o, d).setZero(); break;
          case ConeKind::Nonnegative:
            for (int i = 0; i < d; ++i) ds(o + i) -= c.wbar(i) * c.wbar(i) * dz(o + i);
            break;
          case ConeKind::SecondOrder: {
            VecX t1(d), t2(d);
            apply_W(static_cast<int>(k), dz.data() + o, t1.data(), false);
            apply_W(static_cast<int>(k), t1.data(), t2.data(), false);
            ds.segment(o, d) -= t2;
            break;
          }
          case ConeKind::Power: ds.segment<3>(o) -= c.H * dz.segment<3>(o); break;
          default: break;
        }
      }
      dkap = (dkr - kappa_ * dtau) / tau_;
    };

    // Predictor.
    VecX dx, dz, ds;
    double dtau = 0.0, dkap = 0.0;
    VecX ds_aff = -s_;
    newton(-rx, -rz, -rtau, ds_aff, -tau_ * kappa_, dx, dz, ds, dtau, dkap);
    const double alpha_aff = step_length(dx, ds, dz, dtau, dkap, true, 0.0);
    double sigma = std::pow(1.0 - alpha_aff, 3);
    sigma = std::clamp(sigma, 0.0, 1.0);

    // Corrector.
    VecX dsc = VecX::Zero(m_);
    for (std::size_t k = 0; k < cones_.size(); ++k) {
      const int o = off_[k], d = cones_[k].dim;
      const auto& c = sc_[k];
      switch (cones_[k].kind) {
        case ConeKind::Nonnegative:
          for (int i = 0; i < d; ++i) {
            const double lam = c.lambda(i);
            const double corr = (ds(o + i) / c.wbar(i)) * (dz(o + i) * c.wbar(i));
            const double dl = -lam * lam - corr + sigma * mu;
            dsc(o + i) = c.wbar(i) * dl / lam;
          }
          break;
        case ConeKind::SecondOrder: {
          VecX a1(d), a2(d), prod(d), ll(d), dl(d), y(d);
          apply_W(static_cast<int>(k), ds.data() + o, a1.data(), true);
          apply_W(static_cast<int>(k), dz.data() + o, a2.data(), false);
          soc_prod(a1.data(), a2.data(), prod.data(), d);
          soc_prod(c.lambda.data(), c.lambda.data(), ll.data(), d);
          dl = -ll - prod;
          dl(0) += sigma * mu;
          soc_div(c.lambda.data(), dl.data(), y.data(), d);
          apply_W(static_cast<int>(k), y.data(), dsc.data() + o, false);
          break;
        }
        case ConeKind::Power:
          dsc.segment<3>(o) = -s_.segment<3>(o) - sigma * mu * c.grad;
          break;
        default: break;
      }
    }
    const double dkc = -tau_ * kappa_ - dtau * dkap + sigma * mu;
    newton(-(1.0 - sigma) * rx, -(1.0 - sigma) * rz, -(1.0 - sigma) * rtau, dsc, dkc, dx, dz,
           ds, dtau, dkap);
    const double alpha = step_length(dx, ds, dz, dtau, dkap, false, sigma * mu);
    if (!(alpha > 1e-10) || !dx.allFinite() || !dz.allFinite()) {
      if (++stalls > 3) break;
      delta_ *= 10.0;
      continue;
    }
    x_ += alpha * dx;
    s_ += alpha * ds;
    z_ += alpha * dz;
    tau_ += alpha * dtau;
    kappa_ += alpha * dkap;
    // Keep the homogeneous scale bounded.
    const double scale = std::max({1.0, tau_, kappa_});
    if (scale > 1e8) {
      x_ /= scale; s_ /= scale; z_ /= scale; tau_ /= scale; kappa_ /= scale;
    }
  }
  if (have_best) {
    best.status = SolveStatus::AlmostOptimal;
    return best;
  }
  evaluate(res);
  res.status = res.iterations >= st_.max_iter ? SolveStatus::IterationLimit
                                              : SolveStatus::NumericalFailure;
  return res;
}

}  // namespace

SolveResult solve_conic(const ConicProgram& prog, const SolverSettings& settings) {
  prog.check();
  Ipm ipm(prog, settings);
  return ipm.run();
}

}  // namespace rtopt
