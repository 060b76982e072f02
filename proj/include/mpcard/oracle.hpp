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
#include <cmath>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include "mpcard/error.hpp"
#include "mpcard/program.hpp"
#include "mpcard/solver.hpp"

namespace mpcard {

// Terminal indices (0-based) allowed to carry power.
struct SupportPattern {
  std::vector<int> terminals;

  std::string to_string() const {
    std::string s = "{";
    for (std::size_t i = 0; i < terminals.size(); ++i) {
      if (i) s += ",";
      s += std::to_string(terminals[i] + 1);
    }
    return s + "}";
  }
};

// Every subset of {0..m-1} with at most n elements, ordered by size and then
// lexicographically.
inline std::vector<SupportPattern> supports_up_to(int m, int n) {
  std::vector<SupportPattern> out;
  for (int size = 0; size <= std::min(n, m); ++size) {
    std::vector<int> pick(static_cast<std::size_t>(size));
    for (int i = 0; i < size; ++i) pick[static_cast<std::size_t>(i)] = i;
    while (true) {
      out.push_back({pick});
      int i = size - 1;
      while (i >= 0 && pick[static_cast<std::size_t>(i)] == m - size + i) --i;
      if (i < 0) break;
      ++pick[static_cast<std::size_t>(i)];
      for (int j = i + 1; j < size; ++j) {
        pick[static_cast<std::size_t>(j)] = pick[static_cast<std::size_t>(j - 1)] + 1;
      }
    }
  }
  return out;
}

struct EnumerationResult {
  SolveStatus status = SolveStatus::kInfeasible;
  double objective = std::numeric_limits<double>::infinity();
  ConicSolution best;
  SupportPattern support;
  int subsets_solved = 0;
  int subsets_feasible = 0;
};

// Solves the fixed-binary SOCP for every support of size <= n and keeps the
// cheapest.
inline EnumerationResult enumerate_supports(const ConicProgramIR& ir, int n,
                                            const SolverSettings& settings = {}) {
  const int m = static_cast<int>(ir.binaries.size());
  if (m == 0) throw ValidationError("enumerate_supports needs an IR with binaries");
  if (m > 12) throw ValidationError("support enumeration is limited to m <= 12");
  if (n < 0) throw ValidationError("cardinality limit must be >= 0");

  SocpSolver solver(settings);
  EnumerationResult out;
  bool numerical = false;
  for (const SupportPattern& sp : supports_up_to(m, n)) {
    BinaryDomain dom{std::vector<double>(static_cast<std::size_t>(m), 0.0),
                     std::vector<double>(static_cast<std::size_t>(m), 0.0)};
    for (int t : sp.terminals) dom.lo[static_cast<std::size_t>(t)] = dom.hi[static_cast<std::size_t>(t)] = 1.0;
    ConicSolution sol = solver.solve(ir, dom);
    ++out.subsets_solved;
    if (sol.status == SolveStatus::kNumericalFailure) numerical = true;
    if (!sol.optimal()) continue;
    ++out.subsets_feasible;
    if (sol.objective < out.objective) {
      out.objective = sol.objective;
      out.best = std::move(sol);
      out.support = sp;
    }
  }
  if (out.subsets_feasible > 0) {
    out.status = SolveStatus::kOptimal;
  } else if (numerical) {
    out.status = SolveStatus::kNumericalFailure;
  }
  return out;
}

struct GridSearchResult {
  bool feasible = false;
  double objective = std::numeric_limits<double>::infinity();
  std::vector<double> values;
  SupportPattern support;
  long points_evaluated = 0;
};

namespace detail {

// Reads the converter parameters the grid search needs back out of the IR.
struct ConverterView {
  int m = 0;
  std::vector<int> pc, qc, sc, pdc, ploss, z;
  int pder = -1, pntwk = -1, epi = -1;
  double k = 0.0, p_der = 0.0, s_total = 0.0;
  int card_limit = -1;
};

inline ConverterView view_converter(const ConicProgramIR& ir) {
  ConverterView v;
  while (ir.find_variable(indexed("P_c", static_cast<std::size_t>(v.m))) >= 0) ++v.m;
  if (v.m == 0) throw ValidationError("IR has no converter variables");
  for (std::size_t i = 0; i < static_cast<std::size_t>(v.m); ++i) {
    v.pc.push_back(ir.variable(indexed("P_c", i)));
    v.qc.push_back(ir.variable(indexed("Q_c", i)));
    v.sc.push_back(ir.variable(indexed("S_c", i)));
    v.pdc.push_back(ir.variable(indexed("P_dc", i)));
    v.ploss.push_back(ir.variable(indexed("P_loss_conv", i)));
    const int zi = ir.find_variable(indexed("z", i));
    if (zi >= 0) v.z.push_back(zi);
  }
  v.pder = ir.find_variable(indexed("P_dc", static_cast<std::size_t>(v.m)));
  v.pntwk = ir.variable("P_loss_ntwk");
  v.epi = ir.variable("epi_head");
  const LinearRow* loss = ir.find_row("conv_loss[1]");
  if (loss == nullptr) throw ValidationError("IR has no conv_loss[1] row");
  for (const LinearTerm& t : loss->terms) {
    if (t.var == v.sc[0]) v.k = -t.coef;
  }
  if (const LinearRow* der = ir.find_row("dc_der")) v.p_der = der->rhs;
  const LinearRow* cap = ir.find_row("capacity_total");
  if (cap == nullptr) throw ValidationError("IR has no capacity_total row");
  v.s_total = cap->rhs;
  if (const LinearRow* card = ir.find_row("cardinality")) {
    v.card_limit = static_cast<int>(std::floor(card->rhs + 1e-9));
  }
  if (!ir.loss_model) throw ValidationError("IR has no loss_model section");
  return v;
}

}  // namespace detail

// Dense scan over the transfer box for small instances. For each admissible
// support the free coordinates are (P, Q) of every active leg except the last,
// plus Q of the last; its P follows from the dc balance in closed form. The
// network loss is evaluated from the exact quadratic and every IR row is
// checked. The scan starts on a coarse lattice and zooms in around the best
// points until the step reaches `resolution`.
inline GridSearchResult grid_search_continuous(const ConicProgramIR& ir, double resolution,
                                               double feas_tol = 1e-9) {
  if (!(resolution > 0.0)) throw ValidationError("resolution must be > 0");
  const detail::ConverterView cv = detail::view_converter(ir);
  const int max_active = cv.card_limit >= 0 ? std::min(cv.card_limit, cv.m) : cv.m;
  if (2 * max_active - 1 > 4) {
    throw ValidationError("grid search supports at most 4 continuous dimensions");
  }
  if (!(cv.k < 1.0)) throw ValidationError("grid search needs k < 1");
  const LossModelSection& lm = *ir.loss_model;
  const double s = cv.s_total;

  GridSearchResult out;
  std::vector<double> values(ir.variables.size(), 0.0);

  // Fills `values` for the given support and coordinates; false if outside
  // the capacity box.
  auto complete = [&](const std::vector<int>& active, const std::vector<double>& c) {
    std::fill(values.begin(), values.end(), 0.0);
    double dc_sum = cv.p_der;
    double s_sum = 0.0;
    const std::size_t a = active.size();
    for (std::size_t j = 0; j + 1 < a; ++j) {
      const auto i = static_cast<std::size_t>(active[j]);
      const double p = c[2 * j], q = c[2 * j + 1];
      const double si = std::hypot(p, q);
      values[static_cast<std::size_t>(cv.pc[i])] = p;
      values[static_cast<std::size_t>(cv.qc[i])] = q;
      values[static_cast<std::size_t>(cv.sc[i])] = si;
      dc_sum += p - cv.k * si;
      s_sum += si;
    }
    if (a > 0) {
      const auto i = static_cast<std::size_t>(active[a - 1]);
      const double q = c[2 * (a - 1)];
      // p - k hypot(p, q) = -dc_sum
      const double rhs = -dc_sum;
      const double kk = 1.0 - cv.k * cv.k;
      const double p = (rhs + cv.k * std::sqrt(rhs * rhs + kk * q * q)) / kk;
      const double si = std::hypot(p, q);
      values[static_cast<std::size_t>(cv.pc[i])] = p;
      values[static_cast<std::size_t>(cv.qc[i])] = q;
      values[static_cast<std::size_t>(cv.sc[i])] = si;
      s_sum += si;
    }
    if (s_sum > s * (1.0 + 1e-12)) return false;
    for (std::size_t i = 0; i < static_cast<std::size_t>(cv.m); ++i) {
      const double si = values[static_cast<std::size_t>(cv.sc[i])];
      const double loss = cv.k * si;
      values[static_cast<std::size_t>(cv.ploss[i])] = loss;
      values[static_cast<std::size_t>(cv.pdc[i])] = values[static_cast<std::size_t>(cv.pc[i])] - loss;
      if (!cv.z.empty()) values[static_cast<std::size_t>(cv.z[i])] = si > 0.0 ? 1.0 : 0.0;
    }
    if (cv.pder >= 0) values[static_cast<std::size_t>(cv.pder)] = cv.p_der;
    const double ntwk = lm.evaluate(values);
    double linear = 0.0;
    for (std::size_t j = 0; j < lm.x.size(); ++j) {
      linear += lm.lambda(static_cast<Eigen::Index>(j)) * values[static_cast<std::size_t>(lm.x[j])];
    }
    values[static_cast<std::size_t>(cv.pntwk)] = ntwk;
    values[static_cast<std::size_t>(cv.epi)] = ntwk - linear - lm.sigma + 1.0;
    return true;
  };

  struct Candidate {
    double objective;
    std::vector<double> coords;
  };

  for (const SupportPattern& sp : supports_up_to(cv.m, max_active)) {
    const std::size_t dims = sp.terminals.empty() ? 0 : 2 * sp.terminals.size() - 1;
    std::vector<Candidate> best;  // kept sorted, at most kKeep entries
    constexpr std::size_t kKeep = 4;

    auto scan = [&](const std::vector<double>& center, double step, int half) {
      const int per_dim = 2 * half + 1;
      long total = 1;
      for (std::size_t d = 0; d < dims; ++d) total *= per_dim;
      std::vector<double> c(dims);
      for (long idx = 0; idx < total; ++idx) {
        long rem = idx;
        bool inside = true;
        for (std::size_t d = 0; d < dims; ++d) {
          c[d] = center[d] + step * static_cast<double>(rem % per_dim - half);
          rem /= per_dim;
          if (std::abs(c[d]) > s * (1.0 + 1e-12)) inside = false;
        }
        if (!inside) continue;
        ++out.points_evaluated;
        if (!complete(sp.terminals, c)) continue;
        if (ir.max_violation(values) > feas_tol) continue;
        const double obj = ir.objective_value(values);
        if (best.size() < kKeep || obj < best.back().objective) {
          best.push_back({obj, c});
          std::stable_sort(best.begin(), best.end(), [](const Candidate& x, const Candidate& y) {
            return x.objective < y.objective;
          });
          if (best.size() > kKeep) best.pop_back();
        }
      }
    };

    if (dims == 0) {
      scan({}, 0.0, 0);
    } else {
      constexpr int kCoarseHalf = 32;
      double step = std::max(resolution, s / kCoarseHalf);
      scan(std::vector<double>(dims, 0.0), step, static_cast<int>(std::ceil(s / step)));
      while (step > resolution && !best.empty()) {
        step = std::max(resolution, 0.5 * step);
        const std::vector<Candidate> seeds = best;
        for (const Candidate& seed : seeds) scan(seed.coords, step, 3);
      }
    }
    if (!best.empty() && best.front().objective < out.objective) {
      complete(sp.terminals, best.front().coords);
      out.feasible = true;
      out.objective = best.front().objective;
      out.values = values;
      out.support = sp;
    }
  }
  return out;
}

}  // namespace mpcard
