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

// Writes random feasible, bounded conic programs plus this solver's optimum
// for comparison against external solvers.
#include <cstdio>
#include <fstream>
#include <random>
#include <string>

#include "rtopt/conic.hpp"
#include "rtopt/numfmt.hpp"

using namespace rtopt;

int main(int argc, char** argv) {
  if (argc < 2) {
    std::fprintf(stderr, "usage: %s <dir> [count]\n", argv[0]);
    return 2;
  }
  const std::string dir = argv[1];
  const int count = argc > 2 ? std::stoi(argv[2]) : 10;
  std::mt19937_64 rng(20260101);
  std::normal_distribution<double> nd;
  std::uniform_int_distribution<int> pick(0, 3);
  for (int p = 0; p < count; ++p) {
    const int n = 6 + p;
    ProgramBuilder pb;
    const int x = pb.add_variables("x", n);
    VecX x0(n);
    for (int i = 0; i < n; ++i) x0(i) = nd(rng);
    std::vector<std::pair<std::vector<LinExpr>, ConeBlock>> blocks;
    VecX zsum = VecX::Zero(n);
    const int ncones = 4 + p % 3;
    for (int c = 0; c < ncones; ++c) {
      ConeBlock cb;
      const int kind = c == 0 ? 0 : pick(rng);
      if (kind == 0) cb = {ConeKind::Zero, 1 + p % 2, 0.0};
      else if (kind == 1) cb = {ConeKind::Nonnegative, 2, 0.0};
      else if (kind == 2) cb = {ConeKind::SecondOrder, 3 + (p + c) % 6, 0.0};
      else cb = {ConeKind::Power, 3, 0.2 + 0.1 * ((p + c) % 6)};
      // Interior slack s0 and dual z0.
      VecX s0 = VecX::Zero(cb.dim), z0 = VecX::Zero(cb.dim);
      for (int i = 0; i < cb.dim; ++i) {
        s0(i) = nd(rng);
        z0(i) = nd(rng);
      }
      if (cb.kind == ConeKind::Zero) s0.setZero();
      if (cb.kind == ConeKind::Nonnegative) {
        s0 = s0.cwiseAbs().array() + 0.1;
        z0 = z0.cwiseAbs().array() + 0.1;
      }
      if (cb.kind == ConeKind::SecondOrder) {
        s0(0) = s0.tail(cb.dim - 1).norm() + 0.5;
        z0(0) = z0.tail(cb.dim - 1).norm() + 0.5;
      }
      if (cb.kind == ConeKind::Power) {
        s0 << 1.0 + std::abs(s0(0)), 1.0 + std::abs(s0(1)), 0.3 * s0(2);
        z0 << 1.0 + std::abs(z0(0)), 1.0 + std::abs(z0(1)), 0.3 * z0(2);
      }
      std::vector<LinExpr> rows;
      for (int i = 0; i < cb.dim; ++i) {
        LinExpr e;
        Eigen::RowVectorXd a(n);
        for (int j = 0; j < n; ++j) a(j) = nd(rng);
        // s = b - A x = constant + coef x with coef = -a.
        for (int j = 0; j < n; ++j) e.add(x + j, -a(j));
        e.constant = s0(i) + a.dot(x0);
        zsum += a.transpose() * z0(i);
        rows.push_back(e);
      }
      blocks.push_back({rows, cb});
    }
    for (auto& [rows, cb] : blocks) {
      switch (cb.kind) {
        case ConeKind::Zero: pb.add_zero(rows); break;
        case ConeKind::Nonnegative: pb.add_nonneg(rows); break;
        case ConeKind::SecondOrder: pb.add_soc(rows); break;
        case ConeKind::Power: pb.add_power(rows[0], rows[1], rows[2], cb.alpha); break;
        default: break;
      }
    }
    for (int j = 0; j < n; ++j) pb.add_cost(x + j, -zsum(j));
    const ConicProgram prog = pb.build();
    const std::string base = dir + "/prog_" + std::to_string(p);
    std::ofstream os(base + ".txt");
    write_program(prog, os);
    const SolveResult r = solve_conic(prog);
    std::ofstream(base + ".sol") << to_string(r.status) << " "
                                 << format_double(r.primal_objective) << "\n";
  }
  return 0;
}
