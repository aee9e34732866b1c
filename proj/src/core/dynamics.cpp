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

#include "rtopt/dynamics.hpp"

#include <array>
#include <cmath>
#include <boost/numeric/odeint.hpp>

#include "rtopt/errors.hpp"

namespace rtopt {

namespace odeint = boost::numeric::odeint;

Vec6 ScaleSet::normalize_state(const Vec6& x_km) const {
  Vec6 x;
  x << x_km.head<3>() / length_km, x_km.tail<3>() / velocity_kms();
  return x;
}

Vec6 ScaleSet::dimensional_state(const Vec6& x) const {
  Vec6 out;
  out << x.head<3>() * length_km, x.tail<3>() * velocity_kms();
  return out;
}

ScaleSet ScaleSet::for_primary(double mu_km3s2, double length_km) {
  if (!(mu_km3s2 > 0.0) || !(length_km > 0.0))
    fail(ErrorKind::Domain, "scale set needs positive mu and length");
  ScaleSet s;
  s.length_km = length_km;
  s.time_s = std::sqrt(length_km * length_km * length_km / mu_km3s2);
  return s;
}

Vec6 OrbitalState::stacked() const {
  Vec6 x;
  x << r, v;
  return x;
}

OrbitalState OrbitalState::from(const Vec6& x) {
  return {x.head<3>(), x.tail<3>()};
}

Vec6 DynamicsModel::rhs(double t, const Vec6& x, const Vec3& u) const {
  Vec6 dx;
  const Vec3 r = x.head<3>();
  Vec3 acc = u;
  if (mu != 0.0) {
    const double rn = r.norm();
    if (!(rn >= singularity_radius))
      fail(ErrorKind::Singularity, "state reached the primary singularity");
    acc -= mu / (rn * rn * rn) * r;
  }
  if (perturbation) acc += perturbation(t, x);
  dx << x.tail<3>(), acc;
  return dx;
}

Mat6 DynamicsModel::jacobian(double t, const Vec6& x) const {
  Mat6 J = Mat6::Zero();
  J.block<3, 3>(0, 3).setIdentity();
  if (mu != 0.0) {
    const Vec3 r = x.head<3>();
    const double rn = r.norm();
    if (!(rn >= singularity_radius))
      fail(ErrorKind::Singularity, "state reached the primary singularity");
    const double r3 = rn * rn * rn;
    J.block<3, 3>(3, 0) =
        mu / r3 * (3.0 * r * r.transpose() / (rn * rn) - Mat3::Identity());
  }
  if (perturbation) {
    // Central differences; perturbations carry no analytic Jacobian.
    for (int j = 0; j < 6; ++j) {
      const double h = 1e-7 * std::max(1.0, std::abs(x(j)));
      Vec6 xp = x, xm = x;
      xp(j) += h;
      xm(j) -= h;
      J.block<3, 1>(3, j) += (perturbation(t, xp) - perturbation(t, xm)) / (2.0 * h);
    }
  }
  return J;
}

namespace {

constexpr std::size_t kMaxSteps = 5'000'000;

template <class State, class System>
void integrate(System&& sys, State& state, double t0, double t1,
               const PropagationOptions& opts) {
  if (t0 == t1) return;
  using Stepper = odeint::runge_kutta_dopri5<State>;
  auto stepper = odeint::make_controlled(opts.abs_tol, opts.rel_tol, Stepper());
  const double span = t1 - t0;
  const double dt0 = std::copysign(std::min(opts.initial_step, std::abs(span)), span);
  std::size_t steps = 0;
  auto observer = [&](const State&, double) {
    if (++steps > kMaxSteps)
      fail(ErrorKind::Integration, "integrator exceeded the step budget");
  };
  try {
    odeint::integrate_adaptive(stepper, sys, state, t0, t1, dt0, observer);
  } catch (const Error&) {
    throw;
  } catch (const std::exception& e) {
    fail(ErrorKind::Integration, std::string("step size underflow: ") + e.what());
  }
  for (double v : state)
    if (!std::isfinite(v))
      fail(ErrorKind::Integration, "non-finite state during integration");
}

}  // namespace

Vec6 propagate(const DynamicsModel& model, const Vec6& x0, const Vec3& u,
               double t0, double t1, const PropagationOptions& opts) {
  if (!x0.allFinite() || !u.allFinite())
    fail(ErrorKind::Domain, "propagate received a non-finite input");
  using State = std::array<double, 6>;
  State s;
  Eigen::Map<Vec6>(s.data()) = x0;
  auto sys = [&](const State& x, State& dx, double t) {
    Eigen::Map<Vec6>(dx.data()) = model.rhs(t, Eigen::Map<const Vec6>(x.data()), u);
  };
  integrate(sys, s, t0, t1, opts);
  return Eigen::Map<Vec6>(s.data());
}

LinearSegment linearize_segment(const DynamicsModel& model, const Vec6& x_ref,
                                const Vec3& u_ref, double t0, double t1,
                                const Mat3& exec_sqrt, const Mat63& process_sqrt,
                                const PropagationOptions& opts) {
  LinearSegment seg;
  seg.x_end = x_ref;
  if (t1 == t0) {
    seg.c = Vec6::Zero();
    return seg;
  }
  // Layout: x(6) | Phi(36) | B(18) | Q(36), column-major blocks.
  using State = std::array<double, 96>;
  State s{};
  Eigen::Map<Vec6>(s.data()) = x_ref;
  Eigen::Map<Mat6>(s.data() + 6).setIdentity();
  const Mat6 noise_rate = process_sqrt * process_sqrt.transpose();
  Mat63 F = Mat63::Zero();
  F.bottomRows<3>().setIdentity();

  auto sys = [&](const State& y, State& dy, double t) {
    Eigen::Map<const Vec6> x(y.data());
    Eigen::Map<const Mat6> phi(y.data() + 6);
    Eigen::Map<const Mat63> b(y.data() + 42);
    Eigen::Map<const Mat6> q(y.data() + 60);
    const Mat6 J = model.jacobian(t, x);
    Eigen::Map<Vec6>(dy.data()) = model.rhs(t, x, u_ref);
    Eigen::Map<Mat6>(dy.data() + 6) = J * phi;
    Eigen::Map<Mat63>(dy.data() + 42) = J * b + F;
    Eigen::Map<Mat6>(dy.data() + 60) = J * q + q * J.transpose() + noise_rate;
  };
  integrate(sys, s, t0, t1, opts);

  seg.x_end = Eigen::Map<Vec6>(s.data());
  seg.A = Eigen::Map<Mat6>(s.data() + 6);
  seg.B = Eigen::Map<Mat63>(s.data() + 42);
  seg.c = seg.x_end - seg.A * x_ref - seg.B * u_ref;
  seg.exec_noise = seg.B * exec_sqrt;

  Mat6 q = Eigen::Map<Mat6>(s.data() + 60);
  q = 0.5 * (q + q.transpose());
  if (q.cwiseAbs().maxCoeff() > 0.0) {
    Eigen::SelfAdjointEigenSolver<Mat6> eig(q);
    const Vec6 d = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    seg.process_noise = eig.eigenvectors() * d.asDiagonal();
  }
  return seg;
}

}  // namespace rtopt
