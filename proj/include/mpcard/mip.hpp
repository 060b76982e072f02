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
#include <optional>
#include <queue>
#include <string>
#include <vector>

#include "mpcard/error.hpp"
#include "mpcard/program.hpp"
#include "mpcard/solver.hpp"

namespace mpcard {

struct BnBConfig {
  double rel_gap = 1e-4;
  double abs_gap = 1e-5;
  long node_limit = 10000;
  double integrality_tol = 1e-6;
  bool record_trace = false;

  void validate() const {
    if (!(rel_gap >= 0.0) || !(abs_gap >= 0.0)) throw ValidationError("MIP gaps must be >= 0");
    if (node_limit < 1) throw ValidationError("node limit must be >= 1");
  }
};

enum class MipStatus { kOptimal, kGapReached, kInfeasible, kNodeLimit, kNumericalFailure };

inline const char* to_string(MipStatus s) {
  switch (s) {
    case MipStatus::kOptimal: return "optimal";
    case MipStatus::kGapReached: return "gap_reached";
    case MipStatus::kInfeasible: return "infeasible";
    case MipStatus::kNodeLimit: return "node_limit";
    case MipStatus::kNumericalFailure: return "numerical_failure";
  }
  return "unknown";
}

struct MipNodeRecord {
  long node = 0;
  int depth = 0;
  double bound = 0.0;
  double incumbent = 0.0;
  int branch_binary = -1;  // index into ir.binaries, -1 if not branched
  std::string outcome;
};

struct MipSolution {
  ConicSolution incumbent;
  double bound = -std::numeric_limits<double>::infinity();
  double gap_abs = std::numeric_limits<double>::infinity();
  double gap_rel = std::numeric_limits<double>::infinity();
  long nodes_explored = 0;
  MipStatus status = MipStatus::kInfeasible;
  std::vector<MipNodeRecord> trace;

  bool has_incumbent() const {
    return status == MipStatus::kOptimal || status == MipStatus::kGapReached ||
           (status == MipStatus::kNodeLimit && incumbent.optimal());
  }
  double objective() const { return incumbent.objective; }
};

// A search-tree node: the domain of every binary plus the parent's bound.
struct BnBNode {
  BinaryDomain domain;
  double bound = -std::numeric_limits<double>::infinity();
  long id = 0;
  int depth = 0;
};

// Most-fractional binary among `values` (closest to 0.5); ties go to the
// lowest index. nullopt when every value is within `tol` of an integer.
inline std::optional<std::size_t> most_fractional(const std::vector<double>& values, double tol) {
  std::optional<std::size_t> best;
  double best_dist = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double frac = values[i] - std::floor(values[i]);
    if (frac <= tol || frac >= 1.0 - tol) continue;
    const double dist = std::abs(frac - 0.5);
    if (dist < best_dist - 1e-12) {
      best_dist = dist;
      best = i;
    }
  }
  return best;
}

// Children fixing `binary` to 0 and to 1, in that order.
inline std::pair<BnBNode, BnBNode> branch(const BnBNode& node, std::size_t binary, double bound,
                                          long next_id) {
  BnBNode down = node, up = node;
  down.domain.hi[binary] = 0.0;
  up.domain.lo[binary] = 1.0;
  down.bound = up.bound = bound;
  down.depth = up.depth = node.depth + 1;
  down.id = next_id;
  up.id = next_id + 1;
  return {std::move(down), std::move(up)};
}

// Best-bound-first branch and bound over the IR's binaries.
class BranchAndBound {
 public:
  explicit BranchAndBound(BnBConfig cfg = {}, SolverSettings solver = {})
      : cfg_(cfg), solver_(solver) {
    cfg_.validate();
  }

  MipSolution solve(const ConicProgramIR& ir);

 private:
  std::vector<double> binary_values(const ConicProgramIR& ir, const ConicSolution& sol) const {
    std::vector<double> out;
    for (int b : ir.binaries) out.push_back(sol.values[static_cast<std::size_t>(b)]);
    return out;
  }

  double tolerance(double incumbent) const {
    return std::max(cfg_.abs_gap, cfg_.rel_gap * std::abs(incumbent));
  }

  // Solve with all binaries fixed to `z`.
  ConicSolution solve_fixed(const ConicProgramIR& ir, const std::vector<double>& z) {
    BinaryDomain dom{z, z};
    return solver_.solve(ir, dom);
  }

  BnBConfig cfg_;
  SocpSolver solver_;
};

inline MipSolution BranchAndBound::solve(const ConicProgramIR& ir) {
  MipSolution out;
  if (ir.binaries.empty()) {
    out.incumbent = solver_.solve(ir, BinaryDomain{});
    out.nodes_explored = 1;
    switch (out.incumbent.status) {
      case SolveStatus::kOptimal:
        out.status = MipStatus::kOptimal;
        out.bound = out.incumbent.objective;
        out.gap_abs = out.gap_rel = 0.0;
        break;
      case SolveStatus::kInfeasible: out.status = MipStatus::kInfeasible; break;
      default: out.status = MipStatus::kNumericalFailure; break;
    }
    return out;
  }

  const std::size_t nb = ir.binaries.size();
  const LinearRow* card = ir.find_row("cardinality");
  const double inf = std::numeric_limits<double>::infinity();

  auto cmp = [](const BnBNode& a, const BnBNode& b) {
    if (a.bound != b.bound) return a.bound > b.bound;
    return a.id > b.id;
  };
  std::priority_queue<BnBNode, std::vector<BnBNode>, decltype(cmp)> open(cmp);
  open.push({BinaryDomain::relaxed(nb), -inf, 0, 0});
  long next_id = 1;

  double incumbent = inf;
  double pruned_min = inf;  // smallest bound among nodes pruned by tolerance
  bool terminated_by_gap = false;
  bool hit_node_limit = false;
  bool numerical_trouble = false;

  auto offer = [&](const ConicSolution& cand) {
    if (cand.optimal() && cand.objective < incumbent) {
      incumbent = cand.objective;
      out.incumbent = cand;
    }
  };
  auto log = [&](const BnBNode& node, double bound, int branched, const char* outcome) {
    if (cfg_.record_trace) {
      out.trace.push_back({node.id, node.depth, bound, incumbent, branched, outcome});
    }
  };

  while (!open.empty()) {
    const double top = open.top().bound;
    if (std::isfinite(incumbent)) {
      if (top >= incumbent) {
        // Every remaining node is dominated.
        while (!open.empty()) {
          log(open.top(), open.top().bound, -1, "pruned");
          open.pop();
        }
        break;
      }
      const double global_lb = std::min(top, pruned_min);
      if (incumbent - global_lb <= tolerance(incumbent)) {
        terminated_by_gap = true;
        break;
      }
    }
    if (out.nodes_explored >= cfg_.node_limit) {
      hit_node_limit = true;
      break;
    }
    BnBNode node = open.top();
    open.pop();
    ++out.nodes_explored;

    const ConicSolution relax = solver_.solve(ir, node.domain);
    if (relax.status == SolveStatus::kInfeasible) {
      log(node, node.bound, -1, "infeasible");
      continue;
    }
    std::vector<double> z;
    double bound = node.bound;
    if (relax.optimal()) {
      bound = std::max(bound, relax.objective);
      z = binary_values(ir, relax);
    } else {
      // Fall back to the node domain midpoint so the subtree is still covered.
      numerical_trouble = true;
      for (std::size_t i = 0; i < nb; ++i) z.push_back(0.5 * (node.domain.lo[i] + node.domain.hi[i]));
    }
    if (std::isfinite(incumbent) && bound >= incumbent - tolerance(incumbent)) {
      if (bound < incumbent) pruned_min = std::min(pruned_min, bound);
      log(node, bound, -1, "pruned");
      continue;
    }

    const auto pick = most_fractional(z, cfg_.integrality_tol);
    if (!pick) {
      // Integral: round and verify with every binary fixed.
      for (double& v : z) v = std::round(v);
      const ConicSolution fixed = solve_fixed(ir, z);
      if (fixed.status == SolveStatus::kNumericalFailure) numerical_trouble = true;
      offer(fixed);
      log(node, bound, -1, fixed.optimal() ? "integral" : "integral_rejected");
      continue;
    }

    if (node.depth == 0 && card != nullptr && relax.optimal()) {
      // Rounding heuristic: keep the largest relaxed binaries up to the limit.
      const auto limit = static_cast<std::size_t>(std::floor(card->rhs + 1e-9));
      std::vector<std::size_t> order(nb);
      for (std::size_t i = 0; i < nb; ++i) order[i] = i;
      std::stable_sort(order.begin(), order.end(),
                       [&](std::size_t a, std::size_t b) { return z[a] > z[b]; });
      std::vector<double> rounded(nb, 0.0);
      for (std::size_t r = 0; r < std::min(limit, nb); ++r) {
        if (z[order[r]] > cfg_.integrality_tol) rounded[order[r]] = 1.0;
      }
      offer(solve_fixed(ir, rounded));
    }

    auto [down, up] = branch(node, *pick, bound, next_id);
    next_id += 2;
    log(node, bound, static_cast<int>(*pick), "branched");
    open.push(std::move(down));
    open.push(std::move(up));
  }

  double global_lb = std::min(pruned_min, incumbent);
  if (!open.empty()) global_lb = std::min(global_lb, open.top().bound);
  out.bound = global_lb;

  if (!std::isfinite(incumbent)) {
    out.status = hit_node_limit      ? MipStatus::kNodeLimit
                 : numerical_trouble ? MipStatus::kNumericalFailure
                                     : MipStatus::kInfeasible;
    if (out.status == MipStatus::kInfeasible) out.incumbent.status = SolveStatus::kInfeasible;
    out.incumbent.names = ir.variables;
    if (out.incumbent.values.empty()) out.incumbent.values.assign(ir.variables.size(), 0.0);
    return out;
  }
  out.gap_abs = std::max(0.0, incumbent - global_lb);
  out.gap_rel = out.gap_abs / std::max(std::abs(incumbent), 1e-10);
  if (hit_node_limit) {
    out.status = MipStatus::kNodeLimit;
  } else if (terminated_by_gap) {
    out.status = MipStatus::kGapReached;
  } else {
    out.status = MipStatus::kOptimal;
  }
  return out;
}

inline MipSolution solve_misocp(const ConicProgramIR& ir, const BnBConfig& cfg = {},
                                const SolverSettings& solver = {}) {
  BranchAndBound bnb(cfg, solver);
  return bnb.solve(ir);
}

}  // namespace mpcard
