// Copyright 2026 The mpcard Authors
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

#include <algorithm>
#include <cassert>
#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mpcard/error.hpp"
#include "mpcard/program.hpp"

namespace mpcard {

enum class SolveStatus { kOptimal, kInfeasible, kUnbounded, kNumericalFailure };

inline const char* to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::kOptimal: return "optimal";
    case SolveStatus::kInfeasible: return "infeasible";
    case SolveStatus::kUnbounded: return "unbounded";
    case SolveStatus::kNumericalFailure: return "numerical_failure";
  }
  return "unknown";
}

struct SolverSettings {
  double feastol = 1e-8;   // relative primal/dual residual
  double abstol = 1e-9;    // absolute duality gap
  double reltol = 1e-8;    // relative duality gap
  int max_iterations = 200;
  double step_factor = 0.99;
  bool equilibrate = true;
  int ruiz_passes = 15;
  double regularization = 1e-10;
  int refinement_steps = 4;
  bool record_trace = false;
};

struct IterationRecord {
  int iteration = 0;
  double pcost = 0.0;
  double dcost = 0.0;
  double gap = 0.0;
  double primal_residual = 0.0;
  double dual_residual = 0.0;
  double step = 0.0;
  double sigma = 0.0;
};

struct ConicSolution {
  SolveStatus status = SolveStatus::kNumericalFailure;
  std::vector<std::string> names;  // copied from the IR
  std::vector<double> values;      // one per IR variable
  std::map<std::string, double> duals;  // equality and inequality rows
  double objective = std::numeric_limits<double>::quiet_NaN();
  double dual_objective = std::numeric_limits<double>::quiet_NaN();
  double primal_residual = 0.0;
  double dual_residual = 0.0;
  double gap_abs = 0.0;
  double gap_rel = 0.0;
  // Residual of the infeasibility certificate when status is infeasible.
  double certificate_residual = 0.0;
  int iterations = 0;
  std::vector<IterationRecord> trace;

  bool optimal() const { return status == SolveStatus::kOptimal; }

  double value(const std::string& name) const {
    for (std::size_t i = 0; i < names.size(); ++i) {
      if (names[i] == name) return values[i];
    }
    throw ValidationError("solution has no variable '" + name + "'");
  }
};

// Per-binary domain for relaxations: binaries[i] ranges over [lo[i], hi[i]].
struct BinaryDomain {
  std::vector<double> lo;
  std::vector<double> hi;

  static BinaryDomain relaxed(std::size_t count) {
    return {std::vector<double>(count, 0.0), std::vector<double>(count, 1.0)};
  }
};

namespace detail {

// Product of one nonnegative orthant and second-order cones, in that order.
struct ConeLayout {
  int lp = 0;
  std::vector<int> soc;

  int size() const {
    int s = lp;
    for (int q : soc) s += q;
    return s;
  }
  int degree() const { return lp + static_cast<int>(soc.size()); }
};

// Standard form after presolve:
//   min c'x + c0  s.t.  A x = b,  G x + s = h,  s in K.
struct StandardForm {
  MatrixXd A, G;
  VectorXd b, h, c;
  double c0 = 0.0;
  ConeLayout cones;
  std::vector<int> columns;          // IR variable of each column
  std::vector<double> fixed_values;  // per IR variable (NaN = free)
  std::vector<int> eq_rows;          // IR equality index per A row (-1: derived)
  std::vector<int> ineq_rows;        // IR inequality index per LP row (-1: bound row)
};

struct PresolveOutcome {
  std::optional<StandardForm> form;
  SolveStatus status = SolveStatus::kOptimal;  // meaningful when !form
  std::vector<double> values;                  // when presolve fixed everything
};

inline double feas_tol(double scale) { return 1e-9 * (1.0 + std::abs(scale)); }

// Presolve: binary fixings, singleton equalities, forcing inequalities
// (all coefficients positive against known lower bounds), zero-headed
// cones, and empty rows. Loops to a fixed point.
inline PresolveOutcome presolve(const ConicProgramIR& ir, const BinaryDomain& dom) {
  const std::size_t n = ir.variables.size();
  const double kNaN = std::numeric_limits<double>::quiet_NaN();
  std::vector<double> fixed(n, kNaN);
  std::vector<double> lower(n, -std::numeric_limits<double>::infinity());
  std::vector<double> upper(n, std::numeric_limits<double>::infinity());
  for (const SocCone& c : ir.soc_cones) lower[static_cast<std::size_t>(c.head)] = 0.0;
  for (std::size_t i = 0; i < ir.binaries.size(); ++i) {
    const auto v = static_cast<std::size_t>(ir.binaries[i]);
    lower[v] = dom.lo[i];
    upper[v] = dom.hi[i];
    if (dom.lo[i] > dom.hi[i]) return {std::nullopt, SolveStatus::kInfeasible, {}};
    if (dom.lo[i] == dom.hi[i]) fixed[v] = dom.lo[i];
  }
  auto is_fixed = [&](int v) { return !std::isnan(fixed[static_cast<std::size_t>(v)]); };

  struct Row {
    std::vector<LinearTerm> terms;
    double rhs;
    int source;
    bool alive = true;
  };
  std::vector<Row> eqs, ineqs;
  for (std::size_t i = 0; i < ir.equalities.size(); ++i) {
    eqs.push_back({ir.equalities[i].terms, ir.equalities[i].rhs, static_cast<int>(i)});
  }
  for (std::size_t i = 0; i < ir.inequalities.size(); ++i) {
    ineqs.push_back({ir.inequalities[i].terms, ir.inequalities[i].rhs, static_cast<int>(i)});
  }
  std::vector<bool> cone_alive(ir.soc_cones.size(), true);

  auto reduce = [&](const std::vector<LinearTerm>& terms, double& shift) {
    std::vector<LinearTerm> out;
    shift = 0.0;
    for (const LinearTerm& t : terms) {
      if (t.coef == 0.0) continue;
      if (is_fixed(t.var)) {
        shift += t.coef * fixed[static_cast<std::size_t>(t.var)];
      } else {
        out.push_back(t);
      }
    }
    return out;
  };
  auto fix = [&](int v, double value) -> bool {
    const auto i = static_cast<std::size_t>(v);
    if (value < lower[i] - feas_tol(value) || value > upper[i] + feas_tol(value)) return false;
    fixed[i] = std::clamp(value, lower[i], upper[i]);
    return true;
  };

  bool changed = true;
  while (changed) {
    changed = false;
    for (Row& r : eqs) {
      if (!r.alive) continue;
      double shift = 0.0;
      const auto free_terms = reduce(r.terms, shift);
      const double rhs = r.rhs - shift;
      if (free_terms.empty()) {
        if (std::abs(rhs) > feas_tol(r.rhs)) return {std::nullopt, SolveStatus::kInfeasible, {}};
        r.alive = false;
        changed = true;
      } else if (free_terms.size() == 1) {
        if (!fix(free_terms[0].var, rhs / free_terms[0].coef)) {
          return {std::nullopt, SolveStatus::kInfeasible, {}};
        }
        r.alive = false;
        changed = true;
      }
    }
    for (Row& r : ineqs) {
      if (!r.alive) continue;
      double shift = 0.0;
      const auto free_terms = reduce(r.terms, shift);
      const double rhs = r.rhs - shift;
      if (free_terms.empty()) {
        if (rhs < -feas_tol(r.rhs)) return {std::nullopt, SolveStatus::kInfeasible, {}};
        r.alive = false;
        changed = true;
        continue;
      }
      double floor_sum = 0.0;
      bool forcing = true;
      for (const LinearTerm& t : free_terms) {
        const double lo = lower[static_cast<std::size_t>(t.var)];
        if (t.coef <= 0.0 || !std::isfinite(lo)) {
          forcing = false;
          break;
        }
        floor_sum += t.coef * lo;
      }
      if (forcing && floor_sum >= rhs - feas_tol(rhs)) {
        if (floor_sum > rhs + feas_tol(rhs)) return {std::nullopt, SolveStatus::kInfeasible, {}};
        for (const LinearTerm& t : free_terms) fix(t.var, lower[static_cast<std::size_t>(t.var)]);
        r.alive = false;
        changed = true;
      }
    }
    for (std::size_t ci = 0; ci < ir.soc_cones.size(); ++ci) {
      if (!cone_alive[ci]) continue;
      const SocCone& cone = ir.soc_cones[ci];
      if (!is_fixed(cone.head)) continue;
      const double head = fixed[static_cast<std::size_t>(cone.head)];
      if (head < -feas_tol(0.0)) return {std::nullopt, SolveStatus::kInfeasible, {}};
      if (head > feas_tol(0.0)) continue;
      // A zero head forces every entry to zero.
      for (const AffineExpr& e : cone.entries) {
        double shift = 0.0;
        const auto free_terms = reduce(e.terms, shift);
        const double value = e.constant + shift;
        if (free_terms.empty()) {
          if (std::abs(value) > feas_tol(e.constant)) {
            return {std::nullopt, SolveStatus::kInfeasible, {}};
          }
        } else if (free_terms.size() == 1) {
          if (!fix(free_terms[0].var, -value / free_terms[0].coef)) {
            return {std::nullopt, SolveStatus::kInfeasible, {}};
          }
        } else {
          eqs.push_back({free_terms, -value, -1});
        }
      }
      cone_alive[ci] = false;
      changed = true;
    }
  }

  // Columns: free variables that appear somewhere.
  std::vector<int> col_of(n, -1);
  std::vector<bool> used(n, false);
  auto mark = [&](const std::vector<LinearTerm>& terms) {
    for (const LinearTerm& t : terms) {
      if (t.coef != 0.0 && !is_fixed(t.var)) used[static_cast<std::size_t>(t.var)] = true;
    }
  };
  for (const Row& r : eqs) if (r.alive) mark(r.terms);
  for (const Row& r : ineqs) if (r.alive) mark(r.terms);
  for (std::size_t ci = 0; ci < ir.soc_cones.size(); ++ci) {
    if (!cone_alive[ci]) continue;
    const SocCone& cone = ir.soc_cones[ci];
    if (!is_fixed(cone.head)) used[static_cast<std::size_t>(cone.head)] = true;
    for (const AffineExpr& e : cone.entries) mark(e.terms);
  }
  for (int b : ir.binaries) {
    if (!is_fixed(b)) used[static_cast<std::size_t>(b)] = true;
  }
  std::vector<double> cost(n, 0.0);
  for (const LinearTerm& t : ir.objective.terms) cost[static_cast<std::size_t>(t.var)] += t.coef;

  StandardForm sf;
  for (std::size_t v = 0; v < n; ++v) {
    if (is_fixed(static_cast<int>(v))) continue;
    if (!used[v]) {
      if (cost[v] != 0.0) return {std::nullopt, SolveStatus::kUnbounded, {}};
      fixed[v] = 0.0;
      continue;
    }
    col_of[v] = static_cast<int>(sf.columns.size());
    sf.columns.push_back(static_cast<int>(v));
  }

  if (sf.columns.empty()) {
    PresolveOutcome out;
    out.values = fixed;
    return out;
  }

  const auto ncol = static_cast<Eigen::Index>(sf.columns.size());
  auto fill = [&](MatrixXd& mat, Eigen::Index row, const std::vector<LinearTerm>& terms,
                  double sign) {
    double shift = 0.0;
    for (const LinearTerm& t : terms) {
      if (is_fixed(t.var)) {
        shift += t.coef * fixed[static_cast<std::size_t>(t.var)];
      } else {
        mat(row, col_of[static_cast<std::size_t>(t.var)]) += sign * t.coef;
      }
    }
    return shift;
  };

  std::vector<const Row*> live_eq;
  for (const Row& r : eqs) if (r.alive) live_eq.push_back(&r);
  sf.A = MatrixXd::Zero(static_cast<Eigen::Index>(live_eq.size()), ncol);
  sf.b = VectorXd::Zero(static_cast<Eigen::Index>(live_eq.size()));
  for (std::size_t i = 0; i < live_eq.size(); ++i) {
    const auto row = static_cast<Eigen::Index>(i);
    const double shift = fill(sf.A, row, live_eq[i]->terms, 1.0);
    sf.b(row) = live_eq[i]->rhs - shift;
    sf.eq_rows.push_back(live_eq[i]->source);
  }

  // G rows: LP rows, binary bounds, then cones.
  struct GRow {
    std::vector<LinearTerm> terms;  // G row (sign already applied)
    double h;
  };
  std::vector<GRow> lp_rows;
  for (const Row& r : ineqs) {
    if (!r.alive) continue;
    lp_rows.push_back({r.terms, r.rhs});
    sf.ineq_rows.push_back(r.source);
  }
  for (std::size_t i = 0; i < ir.binaries.size(); ++i) {
    const int v = ir.binaries[i];
    if (is_fixed(v)) continue;
    lp_rows.push_back({{{v, 1.0}}, dom.hi[i]});
    sf.ineq_rows.push_back(-1);
    lp_rows.push_back({{{v, -1.0}}, -dom.lo[i]});
    sf.ineq_rows.push_back(-1);
  }
  std::vector<std::vector<GRow>> cone_rows;
  for (std::size_t ci = 0; ci < ir.soc_cones.size(); ++ci) {
    if (!cone_alive[ci]) continue;
    const SocCone& cone = ir.soc_cones[ci];
    std::vector<GRow> rows;
    // s_head = head, s_k = entry_k  =>  G = -coef, h = constant
    rows.push_back({{{cone.head, -1.0}}, 0.0});
    for (const AffineExpr& e : cone.entries) {
      std::vector<LinearTerm> neg;
      for (const LinearTerm& t : e.terms) neg.push_back({t.var, -t.coef});
      rows.push_back({neg, e.constant});
    }
    cone_rows.push_back(std::move(rows));
  }
  Eigen::Index total = static_cast<Eigen::Index>(lp_rows.size());
  for (const auto& rows : cone_rows) total += static_cast<Eigen::Index>(rows.size());
  sf.G = MatrixXd::Zero(total, ncol);
  sf.h = VectorXd::Zero(total);
  Eigen::Index row = 0;
  for (const GRow& r : lp_rows) {
    const double shift = fill(sf.G, row, r.terms, 1.0);
    sf.h(row) = r.h - shift;
    ++row;
  }
  sf.cones.lp = static_cast<int>(lp_rows.size());
  for (const auto& rows : cone_rows) {
    for (const GRow& r : rows) {
      const double shift = fill(sf.G, row, r.terms, 1.0);
      sf.h(row) = r.h - shift;
      ++row;
    }
    sf.cones.soc.push_back(static_cast<int>(rows.size()));
  }

  sf.c = VectorXd::Zero(ncol);
  sf.c0 = ir.objective.constant;
  for (std::size_t v = 0; v < n; ++v) {
    if (col_of[v] >= 0) {
      sf.c(col_of[v]) = cost[v];
    } else {
      sf.c0 += cost[v] * fixed[v];
    }
  }
  sf.fixed_values = std::move(fixed);
  PresolveOutcome out;
  out.form = std::move(sf);
  return out;
}

// --- cone arithmetic -------------------------------------------------------

template <typename Fn>
void for_each_soc(const ConeLayout& k, Fn&& fn) {
  int off = k.lp;
  for (int q : k.soc) {
    fn(off, q);
    off += q;
  }
}

inline VectorXd cone_e(const ConeLayout& k) {
  VectorXd e = VectorXd::Zero(k.size());
  e.head(k.lp).setOnes();
  for_each_soc(k, [&](int off, int) { e(off) = 1.0; });
  return e;
}

// How far u is from the interior: > 0 means outside.
inline double cone_violation(const ConeLayout& k, const VectorXd& u) {
  double worst = -std::numeric_limits<double>::infinity();
  if (k.lp > 0) worst = std::max(worst, -u.head(k.lp).minCoeff());
  for_each_soc(k, [&](int off, int q) {
    worst = std::max(worst, u.segment(off + 1, q - 1).norm() - u(off));
  });
  return worst;
}

inline VectorXd jordan(const ConeLayout& k, const VectorXd& u, const VectorXd& v) {
  VectorXd w(u.size());
  w.head(k.lp) = u.head(k.lp).cwiseProduct(v.head(k.lp));
  for_each_soc(k, [&](int off, int q) {
    w(off) = u.segment(off, q).dot(v.segment(off, q));
    w.segment(off + 1, q - 1) = u(off) * v.segment(off + 1, q - 1) + v(off) * u.segment(off + 1, q - 1);
  });
  return w;
}

// x such that lambda o x = v.
inline VectorXd jordan_solve(const ConeLayout& k, const VectorXd& lambda, const VectorXd& v) {
  VectorXd x(v.size());
  x.head(k.lp) = v.head(k.lp).cwiseQuotient(lambda.head(k.lp));
  for_each_soc(k, [&](int off, int q) {
    const double l0 = lambda(off);
    const auto l1 = lambda.segment(off + 1, q - 1);
    const double det = l0 * l0 - l1.squaredNorm();
    const double x0 = (l0 * v(off) - l1.dot(v.segment(off + 1, q - 1))) / det;
    x(off) = x0;
    x.segment(off + 1, q - 1) = (v.segment(off + 1, q - 1) - x0 * l1) / l0;
  });
  return x;
}

// Largest alpha with u + alpha d in the cone (u interior).
inline double max_step(const ConeLayout& k, const VectorXd& u, const VectorXd& d) {
  double alpha = std::numeric_limits<double>::infinity();
  for (int i = 0; i < k.lp; ++i) {
    if (d(i) < 0.0) alpha = std::min(alpha, -u(i) / d(i));
  }
  for_each_soc(k, [&](int off, int q) {
    const double u0 = u(off), d0 = d(off);
    const auto u1 = u.segment(off + 1, q - 1);
    const auto d1 = d.segment(off + 1, q - 1);
    const double a = d0 * d0 - d1.squaredNorm();
    const double b = u0 * d0 - u1.dot(d1);
    const double un = u1.norm();
    const double c = (u0 - un) * (u0 + un);
    double step = std::numeric_limits<double>::infinity();
    if (std::abs(a) <= 1e-14 * (d0 * d0 + d1.squaredNorm())) {
      if (b < 0.0) step = -c / (2.0 * b);
    } else {
      const double disc = b * b - a * c;
      if (disc >= 0.0) {
        const double sq = std::sqrt(disc);
        const double qq = -(b + std::copysign(sq, b));
        double r1 = qq / a;
        double r2 = qq != 0.0 ? c / qq : std::numeric_limits<double>::infinity();
        if (r1 > r2) std::swap(r1, r2);
        if (a > 0.0) {
          if (r1 > 0.0) step = r1;
        } else {
          step = r2;
        }
      }
    }
    if (d0 < 0.0) step = std::min(step, -u0 / d0);
    alpha = std::min(alpha, step);
  });
  return alpha;
}

// Nesterov-Todd scaling: W z = W^{-1} s = lambda. W is block diagonal and
// symmetric.
struct NtScaling {
  VectorXd lp_w;  // sqrt(s / z)
  std::vector<MatrixXd> soc_w, soc_winv;
  VectorXd lambda;

  static NtScaling compute(const ConeLayout& k, const VectorXd& s, const VectorXd& z) {
    NtScaling sc;
    sc.lp_w = s.head(k.lp).cwiseQuotient(z.head(k.lp)).cwiseSqrt();
    for_each_soc(k, [&](int off, int q) {
      const VectorXd sb = s.segment(off, q);
      const VectorXd zb = z.segment(off, q);
      const double sn = sb.tail(q - 1).norm();
      const double zn = zb.tail(q - 1).norm();
      const double ss = (sb(0) - sn) * (sb(0) + sn);
      const double zz = (zb(0) - zn) * (zb(0) + zn);
      const VectorXd sbar = sb / std::sqrt(ss);
      const VectorXd zbar = zb / std::sqrt(zz);
      const double gamma = std::sqrt(0.5 * (1.0 + sbar.dot(zbar)));
      VectorXd wbar(q);
      wbar(0) = (sbar(0) + zbar(0)) / (2.0 * gamma);
      wbar.tail(q - 1) = (sbar.tail(q - 1) - zbar.tail(q - 1)) / (2.0 * gamma);
      const double eta = std::pow(ss / zz, 0.25);
      const auto w1 = wbar.tail(q - 1);
      MatrixXd inner = MatrixXd::Identity(q - 1, q - 1) + w1 * w1.transpose() / (1.0 + wbar(0));
      MatrixXd w(q, q), winv(q, q);
      w(0, 0) = wbar(0);
      w.block(0, 1, 1, q - 1) = w1.transpose();
      w.block(1, 0, q - 1, 1) = w1;
      w.block(1, 1, q - 1, q - 1) = inner;
      winv = w;
      winv.block(0, 1, 1, q - 1) *= -1.0;
      winv.block(1, 0, q - 1, 1) *= -1.0;
      sc.soc_w.push_back(eta * w);
      sc.soc_winv.push_back(winv / eta);
    });
    sc.lambda = sc.apply(k, z);
    return sc;
  }

  VectorXd apply(const ConeLayout& k, const VectorXd& v) const {
    VectorXd out(v.size());
    out.head(k.lp) = lp_w.cwiseProduct(v.head(k.lp));
    std::size_t i = 0;
    for_each_soc(k, [&](int off, int q) { out.segment(off, q) = soc_w[i++] * v.segment(off, q); });
    return out;
  }

  VectorXd apply_inverse(const ConeLayout& k, const VectorXd& v) const {
    VectorXd out(v.size());
    out.head(k.lp) = v.head(k.lp).cwiseQuotient(lp_w);
    std::size_t i = 0;
    for_each_soc(k, [&](int off, int q) { out.segment(off, q) = soc_winv[i++] * v.segment(off, q); });
    return out;
  }
};

}  // namespace detail

// Primal-dual interior-point method on the homogeneous self-dual embedding,
// with Mehrotra predictor-corrector steps. One instance per thread; the
// workspace is reused between solves.
class SocpSolver {
 public:
  explicit SocpSolver(SolverSettings settings = {}) : settings_(settings) {}

  const SolverSettings& settings() const { return settings_; }

  // Binaries relaxed to their domain intervals.
  ConicSolution solve(const ConicProgramIR& ir, const BinaryDomain& domain);

  // Every binary fixed; `fixings` maps binary variable names to 0/1.
  ConicSolution solve(const ConicProgramIR& ir, const std::map<std::string, int>& fixings) {
    BinaryDomain dom = BinaryDomain::relaxed(ir.binaries.size());
    for (std::size_t i = 0; i < ir.binaries.size(); ++i) {
      const std::string& name = ir.variables[static_cast<std::size_t>(ir.binaries[i])];
      auto it = fixings.find(name);
      if (it == fixings.end()) throw ValidationError("binary '" + name + "' is not fixed");
      if (it->second != 0 && it->second != 1) {
        throw ValidationError("binary '" + name + "' must be fixed to 0 or 1");
      }
      dom.lo[i] = dom.hi[i] = it->second;
    }
    return solve(ir, dom);
  }

 private:
  struct Direction {
    VectorXd x, y, z, s;
    double tau = 0.0, kappa = 0.0;
  };

  void factor(const MatrixXd& w2);
  void solve_kkt(const VectorXd& rx, const VectorXd& ry, const VectorXd& rz, VectorXd& x,
                 VectorXd& y, VectorXd& z) const;
  ConicSolution run(const detail::StandardForm& sf);

  SolverSettings settings_;
  // Workspace for the current problem (equilibrated data).
  MatrixXd a_, g_;
  VectorXd b_, h_, c_;
  detail::ConeLayout cones_;
  MatrixXd kkt_;
  Eigen::PartialPivLU<MatrixXd> lu_;
};

inline void SocpSolver::factor(const MatrixXd& w2) {
  const Eigen::Index n = g_.cols();
  const Eigen::Index p = a_.rows();
  const Eigen::Index mg = g_.rows();
  const double reg = settings_.regularization;
  kkt_.setZero(n + p + mg, n + p + mg);
  kkt_.block(0, n, n, p) = a_.transpose();
  kkt_.block(0, n + p, n, mg) = g_.transpose();
  kkt_.block(n, 0, p, n) = a_;
  kkt_.block(n + p, 0, mg, n) = g_;
  kkt_.block(n + p, n + p, mg, mg) = -w2;
  MatrixXd regularized = kkt_;
  regularized.diagonal().head(n).array() += reg;
  regularized.diagonal().tail(p + mg).array() -= reg;
  lu_.compute(regularized);
}

// Solves [0 A' G'; A 0 0; G 0 -W^2] [x; y; z] = [rx; ry; rz] with the
// regularised factorisation, refining against the unregularised matrix.
inline void SocpSolver::solve_kkt(const VectorXd& rx, const VectorXd& ry, const VectorXd& rz,
                                  VectorXd& x, VectorXd& y, VectorXd& z) const {
  const Eigen::Index n = g_.cols();
  const Eigen::Index p = a_.rows();
  const Eigen::Index mg = g_.rows();
  VectorXd rhs(n + p + mg);
  rhs << rx, ry, rz;
  VectorXd sol = lu_.solve(rhs);
  for (int it = 0; it < settings_.refinement_steps; ++it) {
    const VectorXd err = rhs - kkt_ * sol;
    if (err.lpNorm<Eigen::Infinity>() <= 1e-15 * (1.0 + rhs.lpNorm<Eigen::Infinity>())) break;
    sol += lu_.solve(err);
  }
  x = sol.head(n);
  y = sol.segment(n, p);
  z = sol.tail(mg);
}

inline ConicSolution SocpSolver::run(const detail::StandardForm& sf) {
  using detail::ConeLayout;
  cones_ = sf.cones;
  const ConeLayout& k = cones_;
  const Eigen::Index n = sf.c.size();
  const Eigen::Index p = sf.A.rows();
  const Eigen::Index mg = sf.G.rows();

  // Ruiz equilibration; cone blocks share one row scale.
  VectorXd dcol = VectorXd::Ones(n), erow_a = VectorXd::Ones(p), erow_g = VectorXd::Ones(mg);
  a_ = sf.A;
  g_ = sf.G;
  if (settings_.equilibrate) {
    for (int pass = 0; pass < settings_.ruiz_passes; ++pass) {
      VectorXd cn = VectorXd::Zero(n);
      for (Eigen::Index j = 0; j < n; ++j) {
        double mx = 0.0;
        if (p > 0) mx = std::max(mx, a_.col(j).lpNorm<Eigen::Infinity>());
        if (mg > 0) mx = std::max(mx, g_.col(j).lpNorm<Eigen::Infinity>());
        cn(j) = mx > 0.0 ? 1.0 / std::sqrt(mx) : 1.0;
      }
      VectorXd ra(p), rg(mg);
      for (Eigen::Index i = 0; i < p; ++i) {
        const double mx = a_.row(i).lpNorm<Eigen::Infinity>();
        ra(i) = mx > 0.0 ? 1.0 / std::sqrt(mx) : 1.0;
      }
      for (Eigen::Index i = 0; i < k.lp; ++i) {
        const double mx = g_.row(i).lpNorm<Eigen::Infinity>();
        rg(i) = mx > 0.0 ? 1.0 / std::sqrt(mx) : 1.0;
      }
      detail::for_each_soc(k, [&](int off, int q) {
        const double mx = g_.middleRows(off, q).lpNorm<Eigen::Infinity>();
        rg.segment(off, q).setConstant(mx > 0.0 ? 1.0 / std::sqrt(mx) : 1.0);
      });
      a_ = ra.asDiagonal() * a_ * cn.asDiagonal();
      g_ = rg.asDiagonal() * g_ * cn.asDiagonal();
      dcol = dcol.cwiseProduct(cn);
      erow_a = erow_a.cwiseProduct(ra);
      erow_g = erow_g.cwiseProduct(rg);
    }
  }
  b_ = erow_a.cwiseProduct(sf.b);
  h_ = erow_g.cwiseProduct(sf.h);
  c_ = dcol.cwiseProduct(sf.c);

  const double bnorm = sf.b.norm(), hnorm = sf.h.norm(), cnorm = sf.c.norm();
  const VectorXd e = detail::cone_e(k);
  const double degree = k.degree();

  // Initial point from two least-squares problems with W = I.
  VectorXd x, y, z, s;
  double tau = 1.0, kappa = 1.0;
  {
    const MatrixXd eye = MatrixXd::Identity(mg, mg);
    factor(eye);
    VectorXd xs, ys, zs;
    solve_kkt(VectorXd::Zero(n), b_, h_, xs, ys, zs);
    x = xs;
    s = -zs;
    double alpha = detail::cone_violation(k, s);
    if (alpha >= -1e-8) s += (1.0 + std::max(alpha, 0.0)) * e;
    solve_kkt(-c_, VectorXd::Zero(p), VectorXd::Zero(mg), xs, ys, zs);
    y = ys;
    z = zs;
    alpha = detail::cone_violation(k, z);
    if (alpha >= -1e-8) z += (1.0 + std::max(alpha, 0.0)) * e;
  }

  ConicSolution sol;
  sol.status = SolveStatus::kNumericalFailure;

  auto unscaled = [&](VectorXd& xu, VectorXd& yu, VectorXd& zu, VectorXd& su) {
    xu = dcol.cwiseProduct(x);
    yu = erow_a.cwiseProduct(y);
    zu = erow_g.cwiseProduct(z);
    su = s.cwiseQuotient(erow_g);
  };

  for (int iter = 0; iter <= settings_.max_iterations; ++iter) {
    const VectorXd rx = a_.transpose() * y + g_.transpose() * z + c_ * tau;
    const VectorXd ry = a_ * x - b_ * tau;
    const VectorXd rz = s + g_ * x - h_ * tau;
    const double rt = kappa + c_.dot(x) + b_.dot(y) + h_.dot(z);

    // Convergence in the original scaling.
    VectorXd xu, yu, zu, su;
    unscaled(xu, yu, zu, su);
    const double pcost = sf.c.dot(xu) / tau;
    const double dcost = -(sf.b.dot(yu) + sf.h.dot(zu)) / tau;
    const double pres = std::max(p > 0 ? (sf.A * xu / tau - sf.b).norm() / (1.0 + bnorm) : 0.0,
                                 (sf.G * xu / tau + su / tau - sf.h).norm() / (1.0 + hnorm));
    const VectorXd dvec = (p > 0 ? VectorXd(sf.A.transpose() * yu) : VectorXd::Zero(n)) +
                          sf.G.transpose() * zu;
    const double dres = (dvec / tau + sf.c).norm() / (1.0 + cnorm);
    const double gap = su.dot(zu) / (tau * tau);
    double relgap = std::numeric_limits<double>::infinity();
    if (pcost + sf.c0 < 0.0) {
      relgap = gap / -(pcost + sf.c0);
    } else if (dcost + sf.c0 > 0.0) {
      relgap = gap / (dcost + sf.c0);
    }
    const double hz_by = sf.b.dot(yu) + sf.h.dot(zu);
    const double cx = sf.c.dot(xu);

    sol.iterations = iter;
    sol.primal_residual = pres;
    sol.dual_residual = dres;
    sol.gap_abs = gap;
    sol.gap_rel = relgap;
    if (settings_.record_trace) {
      sol.trace.push_back({iter, pcost + sf.c0, dcost + sf.c0, gap, pres, dres, 0.0, 0.0});
    }

    if (pres <= settings_.feastol && dres <= settings_.feastol &&
        (gap <= settings_.abstol || relgap <= settings_.reltol)) {
      sol.status = SolveStatus::kOptimal;
      sol.objective = pcost + sf.c0;
      sol.dual_objective = dcost + sf.c0;
      // Weak duality at the returned iterate.
      assert(sol.objective >= sol.dual_objective - 10.0 * (settings_.abstol + std::abs(sol.objective) * settings_.reltol));
      x = xu / tau;
      y = yu / tau;
      z = zu / tau;
      break;
    }
    if (hz_by < 0.0) {
      const double res = dvec.norm() / -hz_by;
      if (res <= settings_.feastol) {
        sol.status = SolveStatus::kInfeasible;
        sol.certificate_residual = res;
        break;
      }
    }
    if (cx < 0.0) {
      const double res =
          std::max(p > 0 ? (sf.A * xu).norm() : 0.0, (sf.G * xu + su).norm()) / -cx;
      if (res <= settings_.feastol) {
        sol.status = SolveStatus::kUnbounded;
        sol.certificate_residual = res;
        break;
      }
    }
    if (iter == settings_.max_iterations) break;

    const double mu = (s.dot(z) + tau * kappa) / (degree + 1.0);
    const auto scaling = detail::NtScaling::compute(k, s, z);
    const VectorXd& lambda = scaling.lambda;
    MatrixXd w2(mg, mg);
    {
      w2.setZero();
      for (int i = 0; i < k.lp; ++i) w2(i, i) = scaling.lp_w(i) * scaling.lp_w(i);
      std::size_t bi = 0;
      detail::for_each_soc(k, [&](int off, int q) {
        w2.block(off, off, q, q) = scaling.soc_w[bi] * scaling.soc_w[bi];
        ++bi;
      });
    }
    factor(w2);

    VectorXd x1, y1, z1;
    solve_kkt(-c_, b_, h_, x1, y1, z1);

    auto direction = [&](double dr, const VectorXd& ds, double dk) {
      Direction d;
      const VectorXd ls = detail::jordan_solve(k, lambda, ds);
      VectorXd x2, y2, z2;
      solve_kkt(-dr * rx, -dr * ry, -dr * rz - scaling.apply(k, ls), x2, y2, z2);
      const double dt = -dr * rt;
      const double num = dt - dk / tau - c_.dot(x2) - b_.dot(y2) - h_.dot(z2);
      const double den = -kappa / tau + c_.dot(x1) + b_.dot(y1) + h_.dot(z1);
      d.tau = num / den;
      d.x = x2 + d.tau * x1;
      d.y = y2 + d.tau * y1;
      d.z = z2 + d.tau * z1;
      d.s = scaling.apply(k, ls - scaling.apply(k, d.z));
      d.kappa = (dk - kappa * d.tau) / tau;
      return d;
    };
    auto step_to_boundary = [&](const Direction& d) {
      double a = std::min(detail::max_step(k, s, d.s), detail::max_step(k, z, d.z));
      if (d.tau < 0.0) a = std::min(a, -tau / d.tau);
      if (d.kappa < 0.0) a = std::min(a, -kappa / d.kappa);
      return a;
    };

    const Direction aff = direction(1.0, -detail::jordan(k, lambda, lambda), -tau * kappa);
    const double alpha_aff = std::min(1.0, step_to_boundary(aff));
    const double sigma = std::clamp(std::pow(1.0 - alpha_aff, 3), 0.0, 1.0);

    const VectorXd corr = detail::jordan(k, scaling.apply_inverse(k, aff.s), scaling.apply(k, aff.z));
    const VectorXd ds = -detail::jordan(k, lambda, lambda) - corr + sigma * mu * e;
    const double dk = -tau * kappa - aff.tau * aff.kappa + sigma * mu;
    const Direction dir = direction(1.0 - sigma, ds, dk);
    const double alpha = std::min(1.0, settings_.step_factor * step_to_boundary(dir));
    if (!std::isfinite(alpha) || alpha < 1e-12) break;
    if (settings_.record_trace) {
      sol.trace.back().step = alpha;
      sol.trace.back().sigma = sigma;
    }

    x += alpha * dir.x;
    y += alpha * dir.y;
    z += alpha * dir.z;
    s += alpha * dir.s;
    tau += alpha * dir.tau;
    kappa += alpha * dir.kappa;
    if (!x.allFinite() || !z.allFinite() || !s.allFinite() || !std::isfinite(tau)) break;
  }

  sol.values = sf.fixed_values;
  if (sol.status == SolveStatus::kOptimal) {
    for (std::size_t j = 0; j < sf.columns.size(); ++j) {
      sol.values[static_cast<std::size_t>(sf.columns[j])] = x(static_cast<Eigen::Index>(j));
    }
    for (std::size_t i = 0; i < sf.eq_rows.size(); ++i) {
      if (sf.eq_rows[i] >= 0) sol.duals["eq:" + std::to_string(sf.eq_rows[i])] = y(static_cast<Eigen::Index>(i));
    }
    for (std::size_t i = 0; i < sf.ineq_rows.size(); ++i) {
      if (sf.ineq_rows[i] >= 0) sol.duals["ineq:" + std::to_string(sf.ineq_rows[i])] = z(static_cast<Eigen::Index>(i));
    }
  } else {
    for (double& v : sol.values) {
      if (std::isnan(v)) v = 0.0;
    }
  }
  return sol;
}

inline ConicSolution SocpSolver::solve(const ConicProgramIR& ir, const BinaryDomain& domain) {
  if (domain.lo.size() != ir.binaries.size() || domain.hi.size() != ir.binaries.size()) {
    throw ValidationError("binary domain does not match the IR's binaries");
  }
  detail::PresolveOutcome pre = detail::presolve(ir, domain);
  ConicSolution sol;
  if (!pre.form) {
    sol.names = ir.variables;
    sol.status = pre.status;
    if (pre.status == SolveStatus::kOptimal) {
      sol.values = pre.values;
      sol.objective = sol.dual_objective = ir.objective_value(sol.values);
    } else {
      sol.values.assign(ir.variables.size(), 0.0);
    }
    return sol;
  }
  sol = run(*pre.form);
  sol.names = ir.variables;
  // Rename row duals to IR row names.
  std::map<std::string, double> named;
  for (const auto& [key, value] : sol.duals) {
    const auto colon = key.find(':');
    const int idx = std::stoi(key.substr(colon + 1));
    const auto& rows = key.compare(0, colon, "eq") == 0 ? ir.equalities : ir.inequalities;
    named[rows[static_cast<std::size_t>(idx)].name] = value;
  }
  sol.duals = std::move(named);
  if (sol.optimal()) sol.objective = ir.objective_value(sol.values);
  return sol;
}

// Solves the SOCP with every binary fixed (or no binaries at all).
inline ConicSolution solve_socp(const ConicProgramIR& ir,
                                const std::map<std::string, int>& fixings = {},
                                const SolverSettings& settings = {}) {
  SocpSolver solver(settings);
  return solver.solve(ir, fixings);
}

// |epigraph - quadratic| / max(1, quadratic) for the network-loss cone.
inline double check_relaxation_tightness(const ConicProgramIR& ir, const ConicSolution& sol) {
  if (!sol.optimal()) throw ValidationError("relaxation tightness needs an optimal solution");
  if (!ir.loss_model) throw ValidationError("IR carries no loss model");
  const double quad = ir.loss_model->evaluate(sol.values);
  const double epi = sol.values[static_cast<std::size_t>(ir.variable("P_loss_ntwk"))];
  return std::abs(epi - quad) / std::max(1.0, std::abs(quad));
}

}  // namespace mpcard
