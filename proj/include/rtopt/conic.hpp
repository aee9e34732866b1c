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

#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Sparse>

#include "rtopt/types.hpp"

namespace rtopt {

enum class ConeKind { Zero, Nonnegative, SecondOrder, Power, Psd };

/// One cone of the product. SecondOrder: (t, x) with |x| <= t.
/// Power: (x, y, z) with x^alpha y^(1-alpha) >= |z|.
/// Psd: scaled upper-triangular vectorization of an order-k matrix.
struct ConeBlock {
  ConeKind kind = ConeKind::Zero;
  int dim = 0;
  double alpha = 0.0;
};

struct VarSlice {
  std::string name;
  int offset = 0;
  int length = 0;
};

/// min q'x + offset  s.t.  A x + s = b,  s in K_1 x ... x K_p (rows in cone order).
struct ConicProgram {
  int num_vars = 0;
  std::vector<VarSlice> slices;
  VecX q;
  Eigen::SparseMatrix<double> A;
  VecX b;
  std::vector<ConeBlock> cones;
  double objective_offset = 0.0;

  int rows() const { return static_cast<int>(b.size()); }
  const VarSlice* slice(const std::string& name) const;
  void check() const;
};

/// Affine expression sum coef * x[var] + constant.
struct LinExpr {
  std::vector<std::pair<int, double>> terms;
  double constant = 0.0;

  LinExpr() = default;
  explicit LinExpr(double c) : constant(c) {}
  static LinExpr var(int index, double coef = 1.0) {
    LinExpr e;
    e.terms.emplace_back(index, coef);
    return e;
  }
  LinExpr& add(int index, double coef) {
    if (coef != 0.0) terms.emplace_back(index, coef);
    return *this;
  }
  LinExpr& add(const LinExpr& other, double scale = 1.0);
  double evaluate(const VecX& x) const;
};

/// Incremental construction of a ConicProgram. Each add_* call appends one
/// cone whose slack equals the given expressions; adjacent zero or
/// nonnegative cones are merged.
class ProgramBuilder {
 public:
  int add_variables(const std::string& name, int count);
  void add_cost(int var, double coef);
  void add_cost_constant(double c) { offset_ += c; }

  void add_zero(const std::vector<LinExpr>& rows);
  void add_nonneg(const std::vector<LinExpr>& rows);
  void add_soc(const std::vector<LinExpr>& rows);
  void add_power(const LinExpr& x, const LinExpr& y, const LinExpr& z, double alpha);
  void add_psd(const std::vector<LinExpr>& svec_rows, int order);

  int num_vars() const { return num_vars_; }
  int num_rows() const { return static_cast<int>(b_.size()); }
  ConicProgram build() const;

 private:
  void append(ConeKind kind, const std::vector<LinExpr>& rows, double alpha);

  int num_vars_ = 0;
  std::vector<VarSlice> slices_;
  std::vector<std::pair<int, double>> cost_;
  double offset_ = 0.0;
  std::vector<Eigen::Triplet<double>> trip_;
  std::vector<double> b_;
  std::vector<ConeBlock> cones_;
};

/// Versioned text dump, exact decimal round trip.
void write_program(const ConicProgram& prog, std::ostream& os);
ConicProgram read_program(std::istream& is);

enum class SolveStatus {
  Optimal,
  AlmostOptimal,
  PrimalInfeasible,
  DualInfeasible,
  NumericalFailure,
  IterationLimit,
  UnsupportedCone,
};

const char* to_string(SolveStatus s);

struct SolverSettings {
  int max_iter = 200;
  double tol_feas = 1e-8;
  double tol_gap_abs = 1e-8;
  double tol_gap_rel = 1e-8;
  double tol_infeas = 1e-8;
  double tol_reduced = 1e-5;
  double static_reg = 1e-8;
  int refine_iters = 10;
  int ruiz_iters = 10;
  double max_step = 0.99;
  int dense_soc_limit = 4;
  bool verbose = false;
};

struct SolveResult {
  SolveStatus status = SolveStatus::NumericalFailure;
  VecX x, s, z;
  double primal_objective = 0.0;
  double dual_objective = 0.0;
  double primal_residual = 0.0;
  double dual_residual = 0.0;
  double gap = 0.0;
  int iterations = 0;
};

/// Homogeneous self-dual interior-point method (predictor-corrector).
SolveResult solve_conic(const ConicProgram& prog, const SolverSettings& settings = {});

}  // namespace rtopt
