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
#include <istream>
#include <map>
#include <ostream>
#include <sstream>

#include "rtopt/conic.hpp"
#include "rtopt/errors.hpp"
#include "rtopt/numfmt.hpp"

namespace rtopt {

const VarSlice* ConicProgram::slice(const std::string& name) const {
  for (const auto& s : slices)
    if (s.name == name) return &s;
  return nullptr;
}

void ConicProgram::check() const {
  if (q.size() != num_vars || A.cols() != num_vars || A.rows() != b.size())
    fail(ErrorKind::Assembly, "conic program dimensions are inconsistent");
  long total = 0;
  for (const auto& c : cones) {
    if (c.dim < 1) fail(ErrorKind::Assembly, "cone with non-positive dimension");
    if (c.kind == ConeKind::Power && (c.dim != 3 || !(c.alpha > 0.0 && c.alpha < 1.0)))
      fail(ErrorKind::Assembly, "power cone needs dim 3 and alpha in (0, 1)");
    total += c.dim;
  }
  if (total != b.size()) fail(ErrorKind::Assembly, "cone dimensions do not cover all rows");
  if (!q.allFinite() || !b.allFinite())
    fail(ErrorKind::Assembly, "conic program holds non-finite data");
  for (int j = 0; j < A.outerSize(); ++j)
    for (Eigen::SparseMatrix<double>::InnerIterator it(A, j); it; ++it)
      if (!std::isfinite(it.value()))
        fail(ErrorKind::Assembly, "constraint matrix holds non-finite data");
}

LinExpr& LinExpr::add(const LinExpr& other, double scale) {
  for (const auto& [i, c] : other.terms) add(i, scale * c);
  constant += scale * other.constant;
  return *this;
}

double LinExpr::evaluate(const VecX& x) const {
  double v = constant;
  for (const auto& [i, c] : terms) v += c * x(i);
  return v;
}

int ProgramBuilder::add_variables(const std::string& name, int count) {
  const int off = num_vars_;
  slices_.push_back({name, off, count});
  num_vars_ += count;
  return off;
}

void ProgramBuilder::add_cost(int var, double coef) {
  if (coef != 0.0) cost_.emplace_back(var, coef);
}

void ProgramBuilder::append(ConeKind kind, const std::vector<LinExpr>& rows, double alpha) {
  if (rows.empty()) return;
  const int base = num_rows();
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (const auto& [i, c] : rows[r].terms) {
      if (i < 0 || i >= num_vars_)
        fail(ErrorKind::Assembly, "expression references an unknown variable");
      trip_.emplace_back(base + static_cast<int>(r), i, -c);
    }
    b_.push_back(rows[r].constant);
  }
  const bool mergeable = kind == ConeKind::Zero || kind == ConeKind::Nonnegative;
  if (mergeable && !cones_.empty() && cones_.back().kind == kind)
    cones_.back().dim += static_cast<int>(rows.size());
  else
    cones_.push_back({kind, static_cast<int>(rows.size()), alpha});
}

void ProgramBuilder::add_zero(const std::vector<LinExpr>& rows) {
  append(ConeKind::Zero, rows, 0.0);
}
void ProgramBuilder::add_nonneg(const std::vector<LinExpr>& rows) {
  append(ConeKind::Nonnegative, rows, 0.0);
}
void ProgramBuilder::add_soc(const std::vector<LinExpr>& rows) {
  append(ConeKind::SecondOrder, rows, 0.0);
}
void ProgramBuilder::add_power(const LinExpr& x, const LinExpr& y, const LinExpr& z,
                               double alpha) {
  append(ConeKind::Power, {x, y, z}, alpha);
}
void ProgramBuilder::add_psd(const std::vector<LinExpr>& rows, int order) {
  if (static_cast<int>(rows.size()) != order * (order + 1) / 2)
    fail(ErrorKind::Assembly, "PSD cone rows do not match the matrix order");
  append(ConeKind::Psd, rows, 0.0);
}

ConicProgram ProgramBuilder::build() const {
  ConicProgram p;
  p.num_vars = num_vars_;
  p.slices = slices_;
  p.q = VecX::Zero(num_vars_);
  for (const auto& [i, c] : cost_) p.q(i) += c;
  p.A.resize(num_rows(), num_vars_);
  p.A.setFromTriplets(trip_.begin(), trip_.end());
  p.A.prune(0.0);
  p.b = Eigen::Map<const VecX>(b_.data(), static_cast<long>(b_.size()));
  p.cones = cones_;
  p.objective_offset = offset_;
  p.check();
  return p;
}

namespace {

const char* cone_tag(ConeKind k) {
  switch (k) {
    case ConeKind::Zero: return "zero";
    case ConeKind::Nonnegative: return "nonneg";
    case ConeKind::SecondOrder: return "soc";
    case ConeKind::Power: return "pow";
    case ConeKind::Psd: return "psd";
  }
  return "?";
}

std::string next_token(std::istream& is, const char* what) {
  std::string tok;
  if (!(is >> tok)) fail(ErrorKind::Io, std::string("dump ended while reading ") + what);
  return tok;
}

void expect(std::istream& is, const char* word) {
  const std::string tok = next_token(is, word);
  if (tok != word) fail(ErrorKind::Io, "expected '" + std::string(word) + "', found '" + tok + "'");
}

long next_int(std::istream& is, const char* what) {
  const std::string tok = next_token(is, what);
  try {
    std::size_t pos = 0;
    const long v = std::stol(tok, &pos);
    if (pos != tok.size()) throw std::invalid_argument(tok);
    return v;
  } catch (const std::exception&) {
    fail(ErrorKind::Io, std::string("malformed integer for ") + what);
  }
}

}  // namespace

void write_program(const ConicProgram& p, std::ostream& os) {
  os << "rtopt-conic 1\n";
  os << "vars " << p.num_vars << "\n";
  os << "slices " << p.slices.size() << "\n";
  for (const auto& s : p.slices) os << s.name << " " << s.offset << " " << s.length << "\n";
  os << "rows " << p.rows() << "\n";
  os << "cones " << p.cones.size() << "\n";
  for (const auto& c : p.cones) {
    os << cone_tag(c.kind) << " " << c.dim;
    if (c.kind == ConeKind::Power) os << " " << format_double(c.alpha);
    os << "\n";
  }
  os << "offset " << format_double(p.objective_offset) << "\n";
  std::vector<int> qi;
  for (int i = 0; i < p.num_vars; ++i)
    if (p.q(i) != 0.0) qi.push_back(i);
  os << "q " << qi.size() << "\n";
  for (int i : qi) os << i << " " << format_double(p.q(i)) << "\n";
  std::vector<int> bi;
  for (int i = 0; i < p.rows(); ++i)
    if (p.b(i) != 0.0) bi.push_back(i);
  os << "b " << bi.size() << "\n";
  for (int i : bi) os << i << " " << format_double(p.b(i)) << "\n";
  const Eigen::SparseMatrix<double, Eigen::RowMajor> Ar = p.A;
  os << "A " << Ar.nonZeros() << "\n";
  for (int r = 0; r < Ar.outerSize(); ++r)
    for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator it(Ar, r); it; ++it)
      os << r << " " << it.col() << " " << format_double(it.value()) << "\n";
  os << "end\n";
}

ConicProgram read_program(std::istream& is) {
  expect(is, "rtopt-conic");
  if (next_int(is, "version") != 1) fail(ErrorKind::Io, "unsupported dump version");
  ConicProgram p;
  expect(is, "vars");
  p.num_vars = static_cast<int>(next_int(is, "vars"));
  expect(is, "slices");
  const long ns = next_int(is, "slices");
  for (long i = 0; i < ns; ++i) {
    VarSlice s;
    s.name = next_token(is, "slice name");
    s.offset = static_cast<int>(next_int(is, "slice offset"));
    s.length = static_cast<int>(next_int(is, "slice length"));
    p.slices.push_back(s);
  }
  expect(is, "rows");
  const long m = next_int(is, "rows");
  expect(is, "cones");
  const long nc = next_int(is, "cones");
  for (long i = 0; i < nc; ++i) {
    const std::string tag = next_token(is, "cone");
    ConeBlock c;
    if (tag == "zero") c.kind = ConeKind::Zero;
    else if (tag == "nonneg") c.kind = ConeKind::Nonnegative;
    else if (tag == "soc") c.kind = ConeKind::SecondOrder;
    else if (tag == "pow") c.kind = ConeKind::Power;
    else if (tag == "psd") c.kind = ConeKind::Psd;
    else fail(ErrorKind::Io, "unknown cone '" + tag + "'");
    c.dim = static_cast<int>(next_int(is, "cone dim"));
    if (c.kind == ConeKind::Power) c.alpha = parse_double(next_token(is, "alpha"));
    p.cones.push_back(c);
  }
  expect(is, "offset");
  p.objective_offset = parse_double(next_token(is, "offset"));
  p.q = VecX::Zero(p.num_vars);
  expect(is, "q");
  const long nq = next_int(is, "q");
  for (long i = 0; i < nq; ++i) {
    const long idx = next_int(is, "q index");
    if (idx < 0 || idx >= p.num_vars) fail(ErrorKind::Io, "q index out of range");
    p.q(idx) = parse_double(next_token(is, "q value"));
  }
  p.b = VecX::Zero(m);
  expect(is, "b");
  const long nb = next_int(is, "b");
  for (long i = 0; i < nb; ++i) {
    const long idx = next_int(is, "b index");
    if (idx < 0 || idx >= m) fail(ErrorKind::Io, "b index out of range");
    p.b(idx) = parse_double(next_token(is, "b value"));
  }
  expect(is, "A");
  const long na = next_int(is, "A");
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(na);
  for (long i = 0; i < na; ++i) {
    const long r = next_int(is, "A row");
    const long c = next_int(is, "A col");
    if (r < 0 || r >= m || c < 0 || c >= p.num_vars) fail(ErrorKind::Io, "A entry out of range");
    trip.emplace_back(r, c, parse_double(next_token(is, "A value")));
  }
  expect(is, "end");
  p.A.resize(m, p.num_vars);
  p.A.setFromTriplets(trip.begin(), trip.end());
  try {
    p.check();
  } catch (const Error& e) {
    fail(ErrorKind::Io, std::string("dump is inconsistent: ") + e.what());
  }
  return p;
}

const char* to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::Optimal: return "optimal";
    case SolveStatus::AlmostOptimal: return "almost_optimal";
    case SolveStatus::PrimalInfeasible: return "primal_infeasible";
    case SolveStatus::DualInfeasible: return "dual_infeasible";
    case SolveStatus::NumericalFailure: return "numerical_failure";
    case SolveStatus::IterationLimit: return "iteration_limit";
    case SolveStatus::UnsupportedCone: return "unsupported_cone";
  }
  return "?";
}

}  // namespace rtopt
