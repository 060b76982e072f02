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
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

#include "mpcard/error.hpp"
#include "mpcard/grid.hpp"

namespace mpcard {

struct LinearTerm {
  int var = 0;
  double coef = 0.0;

  friend bool operator==(const LinearTerm&, const LinearTerm&) = default;
};

struct AffineExpr {
  std::vector<LinearTerm> terms;
  double constant = 0.0;

  double evaluate(const std::vector<double>& values) const {
    double acc = constant;
    for (const LinearTerm& t : terms) acc += t.coef * values[static_cast<std::size_t>(t.var)];
    return acc;
  }

  friend bool operator==(const AffineExpr&, const AffineExpr&) = default;
};

// Equality rows read `terms == rhs`; inequality rows read `terms <= rhs`.
struct LinearRow {
  std::string name;
  std::vector<LinearTerm> terms;
  double rhs = 0.0;

  double lhs(const std::vector<double>& values) const {
    double acc = 0.0;
    for (const LinearTerm& t : terms) acc += t.coef * values[static_cast<std::size_t>(t.var)];
    return acc;
  }

  friend bool operator==(const LinearRow&, const LinearRow&) = default;
};

// head >= || (entries[0], entries[1], ...) ||_2
struct SocCone {
  std::string name;
  int head = 0;
  std::vector<AffineExpr> entries;

  friend bool operator==(const SocCone&, const SocCone&) = default;
};

// The quadratic that the network-loss epigraph relaxes, over variables `x`.
struct LossModelSection {
  std::vector<int> x;
  Eigen::MatrixXd Lambda;
  Eigen::VectorXd lambda;
  double sigma = 0.0;

  double evaluate(const std::vector<double>& values) const {
    Eigen::VectorXd xv(static_cast<Eigen::Index>(x.size()));
    for (std::size_t i = 0; i < x.size(); ++i) {
      xv(static_cast<Eigen::Index>(i)) = values[static_cast<std::size_t>(x[i])];
    }
    return xv.dot(Lambda * xv) + lambda.dot(xv) + sigma;
  }

  friend bool operator==(const LossModelSection& a, const LossModelSection& b) {
    return a.x == b.x && a.Lambda.rows() == b.Lambda.rows() &&
           a.Lambda.cols() == b.Lambda.cols() && a.Lambda == b.Lambda &&
           a.lambda.size() == b.lambda.size() && a.lambda == b.lambda && a.sigma == b.sigma;
  }
};

// Solver-independent description of one timestep's mixed-integer conic
// program. Binaries are ordinary entries of `variables` listed again in
// `binaries`; their [0, 1] domain is implicit.
struct ConicProgramIR {
  std::vector<std::string> variables;
  std::vector<LinearRow> equalities;
  std::vector<LinearRow> inequalities;
  std::vector<SocCone> soc_cones;
  std::vector<int> binaries;
  AffineExpr objective;
  double big_m = 0.0;
  std::optional<LossModelSection> loss_model;

  std::size_t variable_count() const { return variables.size(); }

  int find_variable(const std::string& name) const {
    for (std::size_t i = 0; i < variables.size(); ++i) {
      if (variables[i] == name) return static_cast<int>(i);
    }
    return -1;
  }

  int variable(const std::string& name) const {
    const int i = find_variable(name);
    if (i < 0) throw ValidationError("IR has no variable '" + name + "'");
    return i;
  }

  const LinearRow* find_row(const std::string& name) const {
    for (const auto* rows : {&equalities, &inequalities}) {
      for (const LinearRow& r : *rows) {
        if (r.name == name) return &r;
      }
    }
    return nullptr;
  }

  bool is_binary(int var) const {
    return std::find(binaries.begin(), binaries.end(), var) != binaries.end();
  }

  double objective_value(const std::vector<double>& values) const {
    return objective.evaluate(values);
  }

  // Largest violation of any row, cone or binary domain at `values`.
  double max_violation(const std::vector<double>& values) const {
    double worst = 0.0;
    for (const LinearRow& r : equalities) worst = std::max(worst, std::abs(r.lhs(values) - r.rhs));
    for (const LinearRow& r : inequalities) worst = std::max(worst, r.lhs(values) - r.rhs);
    for (const SocCone& c : soc_cones) {
      double sq = 0.0;
      for (const AffineExpr& e : c.entries) {
        const double v = e.evaluate(values);
        sq += v * v;
      }
      worst = std::max(worst, std::sqrt(sq) - values[static_cast<std::size_t>(c.head)]);
    }
    for (int b : binaries) {
      const double v = values[static_cast<std::size_t>(b)];
      worst = std::max({worst, -v, v - 1.0});
    }
    return worst;
  }

  // Structural invariants; throws ValidationError.
  void validate() const;

  friend bool operator==(const ConicProgramIR&, const ConicProgramIR&) = default;
};

inline void ConicProgramIR::validate() const {
  const int n = static_cast<int>(variables.size());
  auto check_terms = [&](const std::vector<LinearTerm>& terms, const std::string& where) {
    for (const LinearTerm& t : terms) {
      if (t.var < 0 || t.var >= n) throw ValidationError(where + ": variable index out of range");
      if (!std::isfinite(t.coef)) throw ValidationError(where + ": non-finite coefficient");
    }
  };
  std::unordered_map<std::string, int> seen;
  for (int i = 0; i < n; ++i) {
    if (!seen.emplace(variables[static_cast<std::size_t>(i)], i).second) {
      throw ValidationError("duplicate variable '" + variables[static_cast<std::size_t>(i)] + "'");
    }
  }
  for (const LinearRow& r : equalities) check_terms(r.terms, "equality " + r.name);
  for (const LinearRow& r : inequalities) check_terms(r.terms, "inequality " + r.name);
  check_terms(objective.terms, "objective");
  std::vector<int> head_uses(static_cast<std::size_t>(n), 0);
  for (const SocCone& c : soc_cones) {
    if (c.head < 0 || c.head >= n) throw ValidationError("cone " + c.name + ": bad head");
    ++head_uses[static_cast<std::size_t>(c.head)];
    for (const AffineExpr& e : c.entries) check_terms(e.terms, "cone " + c.name);
  }
  for (const SocCone& c : soc_cones) {
    if (head_uses[static_cast<std::size_t>(c.head)] != 1) {
      throw ValidationError("cone head '" + variables[static_cast<std::size_t>(c.head)] +
                            "' appears in more than one cone");
    }
  }
  for (int b : binaries) {
    if (b < 0 || b >= n) throw ValidationError("binary index out of range");
    auto uses = [b](const std::vector<LinearTerm>& terms) {
      return std::any_of(terms.begin(), terms.end(),
                         [b](const LinearTerm& t) { return t.var == b; });
    };
    for (const LinearRow& r : equalities) {
      if (uses(r.terms)) throw ValidationError("binary used in equality " + r.name);
    }
    for (const LinearRow& r : inequalities) {
      if (uses(r.terms) && r.name.rfind("big_m[", 0) != 0 && r.name != "cardinality") {
        throw ValidationError("binary used outside big-M/cardinality rows: " + r.name);
      }
    }
    if (uses(objective.terms)) throw ValidationError("binary used in objective");
    for (const SocCone& c : soc_cones) {
      if (c.head == b) throw ValidationError("binary used as cone head");
      for (const AffineExpr& e : c.entries) {
        if (uses(e.terms)) throw ValidationError("binary used in cone " + c.name);
      }
    }
  }
}

// --- Converter and timestep inputs ----------------------------------------

struct ConverterSpec {
  std::vector<std::string> pcc_buses;
  double k = 0.01;       // converter loss coefficient
  double s_total = 1.0;  // total idealised ac/dc capacity, pu
  bool has_dc_der = false;

  std::size_t m() const { return pcc_buses.size(); }

  void validate() const {
    if (pcc_buses.size() < 2) throw ValidationError("converter needs at least two terminals");
    for (std::size_t i = 0; i < pcc_buses.size(); ++i) {
      for (std::size_t j = i + 1; j < pcc_buses.size(); ++j) {
        if (pcc_buses[i] == pcc_buses[j]) {
          throw ValidationError("PCC bus '" + pcc_buses[i] + "' listed twice");
        }
      }
    }
    if (!(k >= 0.0)) throw ValidationError("loss coefficient k must be >= 0");
    if (!(s_total > 0.0)) throw ValidationError("s_total must be > 0");
  }
};

// Upper bound on the number of legs carrying power. std::nullopt means
// unconstrained (pure SOCP, no binaries).
class Cardinality {
 public:
  Cardinality() = default;
  static Cardinality unconstrained() { return {}; }
  static Cardinality at_most(int n) {
    if (n < 0) throw ValidationError("cardinality limit must be >= 0");
    Cardinality c;
    c.limit_ = n;
    return c;
  }

  bool constrained() const { return limit_.has_value(); }
  int limit() const { return *limit_; }
  std::string label() const { return limit_ ? "n" + std::to_string(*limit_) : "unconstrained"; }

  friend bool operator==(const Cardinality&, const Cardinality&) = default;

 private:
  std::optional<int> limit_;
};

struct TimestepInput {
  VectorXcd background_injections;  // per non-slack bus, pu; empty = none
  double p_der = 0.0;
  double v_min = 0.95;
  double v_max = 1.05;
  Cardinality cardinality;
  // Buses whose voltage is bounded; empty = every non-slack bus.
  std::vector<std::string> monitored_buses;
};

// The tightest uniform bound available: every leg is capped by the total.
inline double big_m_value(const ConverterSpec& conv) {
  conv.validate();
  return conv.s_total;
}

namespace detail {

inline std::string indexed(const char* base, std::size_t i) {
  return std::string(base) + "[" + std::to_string(i + 1) + "]";
}

// Lambda = F' F via eigen-decomposition; rows for zero eigenvalues are dropped.
inline MatrixXd psd_factor(const MatrixXd& lambda) {
  if (lambda.size() == 0) return MatrixXd(0, 0);
  const MatrixXd sym = 0.5 * (lambda + lambda.transpose());
  Eigen::SelfAdjointEigenSolver<MatrixXd> eig(sym);
  if (eig.info() != Eigen::Success) throw ModelError("loss matrix eigen-decomposition failed");
  const VectorXd& vals = eig.eigenvalues();
  if (vals.minCoeff() < -1e-9) {
    throw ModelError("loss matrix is not positive semidefinite (min eigenvalue " +
                     std::to_string(vals.minCoeff()) + ")");
  }
  const double cutoff = 1e-14 * std::max(1.0, vals.maxCoeff());
  std::vector<Eigen::Index> keep;
  for (Eigen::Index i = vals.size() - 1; i >= 0; --i) {
    if (vals(i) > cutoff) keep.push_back(i);
  }
  MatrixXd f(static_cast<Eigen::Index>(keep.size()), sym.cols());
  for (std::size_t r = 0; r < keep.size(); ++r) {
    const Eigen::Index i = keep[r];
    f.row(static_cast<Eigen::Index>(r)) = std::sqrt(vals(i)) * eig.eigenvectors().col(i).transpose();
  }
  return f;
}

}  // namespace detail

// Assembles one timestep's scheduling program:
//   min  P_loss_ntwk + sum_i P_loss_conv[i]
//   s.t. S_c[i] >= ||(P_c[i], Q_c[i])||
//        sum P_dc = 0,  P_dc[i] + P_loss_conv[i] = P_c[i],  P_dc[m+1] = P_DER
//        P_loss_conv[i] = k S_c[i]
//        P_loss_ntwk >= x' Lambda x + lambda' x + sigma   (rotated cone)
//        v_min <= K x + b <= v_max,  sum S_c <= s_total
//        S_c[i] <= M z[i],  sum z <= n                   (constrained only)
inline ConicProgramIR build_timestep_program(const LinearizedGrid& grid, const ConverterSpec& conv,
                                             const TimestepInput& ts) {
  conv.validate();
  if (conv.pcc_buses != grid.pcc_buses()) {
    throw ValidationError("converter PCC buses do not match the linearised grid");
  }
  if (!(ts.v_min < ts.v_max)) throw ValidationError("v_min must be below v_max");
  const std::size_t m = conv.m();
  if (ts.cardinality.constrained() && static_cast<std::size_t>(ts.cardinality.limit()) > m) {
    throw ValidationError("cardinality limit " + std::to_string(ts.cardinality.limit()) +
                          " exceeds terminal count " + std::to_string(m));
  }
  if (!conv.has_dc_der && ts.p_der != 0.0) {
    throw ValidationError("p_der given but the converter has no dc-link DER");
  }

  const VectorXcd background =
      ts.background_injections.size() == 0
          ? VectorXcd::Zero(static_cast<Eigen::Index>(grid.bus_ids().size()))
          : ts.background_injections;
  const FoldedModel model = grid.fold(background);
  const MatrixXd factor = detail::psd_factor(model.loss.Lambda);

  ConicProgramIR ir;
  auto add_var = [&ir](std::string name) {
    ir.variables.push_back(std::move(name));
    return static_cast<int>(ir.variables.size() - 1);
  };
  std::vector<int> pc(m), qc(m), sc(m), pdc(m), ploss(m), z;
  for (std::size_t i = 0; i < m; ++i) pc[i] = add_var(detail::indexed("P_c", i));
  for (std::size_t i = 0; i < m; ++i) qc[i] = add_var(detail::indexed("Q_c", i));
  for (std::size_t i = 0; i < m; ++i) sc[i] = add_var(detail::indexed("S_c", i));
  for (std::size_t i = 0; i < m; ++i) pdc[i] = add_var(detail::indexed("P_dc", i));
  const int pder = conv.has_dc_der ? add_var(detail::indexed("P_dc", m)) : -1;
  for (std::size_t i = 0; i < m; ++i) ploss[i] = add_var(detail::indexed("P_loss_conv", i));
  const int pntwk = add_var("P_loss_ntwk");
  const int epi = add_var("epi_head");

  // x = [P_c; Q_c]
  std::vector<int> x(pc);
  x.insert(x.end(), qc.begin(), qc.end());

  // dc node balance
  LinearRow dc{"dc_balance", {}, 0.0};
  for (std::size_t i = 0; i < m; ++i) dc.terms.push_back({pdc[i], 1.0});
  if (pder >= 0) dc.terms.push_back({pder, 1.0});
  ir.equalities.push_back(std::move(dc));
  for (std::size_t i = 0; i < m; ++i) {
    ir.equalities.push_back(
        {detail::indexed("leg_balance", i), {{pdc[i], 1.0}, {ploss[i], 1.0}, {pc[i], -1.0}}, 0.0});
  }
  if (pder >= 0) ir.equalities.push_back({"dc_der", {{pder, 1.0}}, ts.p_der});
  for (std::size_t i = 0; i < m; ++i) {
    ir.equalities.push_back(
        {detail::indexed("conv_loss", i), {{ploss[i], 1.0}, {sc[i], -conv.k}}, 0.0});
  }
  // epi_head = t + 1 with t = P_loss_ntwk - lambda' x - sigma
  {
    LinearRow link{"loss_epigraph_link", {{epi, 1.0}, {pntwk, -1.0}}, 1.0 - model.loss.sigma};
    for (std::size_t j = 0; j < x.size(); ++j) {
      const double l = model.loss.lambda(static_cast<Eigen::Index>(j));
      if (l != 0.0) link.terms.push_back({x[j], l});
    }
    ir.equalities.push_back(std::move(link));
  }

  // capacity
  {
    LinearRow cap{"capacity_total", {}, conv.s_total};
    for (std::size_t i = 0; i < m; ++i) cap.terms.push_back({sc[i], 1.0});
    ir.inequalities.push_back(std::move(cap));
  }
  // voltage bounds
  std::vector<std::size_t> monitored;
  if (ts.monitored_buses.empty()) {
    for (std::size_t r = 0; r < grid.bus_ids().size(); ++r) monitored.push_back(r);
  } else {
    for (const std::string& id : ts.monitored_buses) {
      auto it = std::find(grid.bus_ids().begin(), grid.bus_ids().end(), id);
      if (it == grid.bus_ids().end()) {
        throw ValidationError("monitored bus '" + id + "' is not a non-slack bus");
      }
      monitored.push_back(static_cast<std::size_t>(it - grid.bus_ids().begin()));
    }
  }
  for (std::size_t r : monitored) {
    const auto row = static_cast<Eigen::Index>(r);
    LinearRow up{"v_max[" + grid.bus_ids()[r] + "]", {}, ts.v_max - model.b(row)};
    LinearRow lo{"v_min[" + grid.bus_ids()[r] + "]", {}, model.b(row) - ts.v_min};
    for (std::size_t j = 0; j < x.size(); ++j) {
      const double kij = model.K(row, static_cast<Eigen::Index>(j));
      if (kij == 0.0) continue;
      up.terms.push_back({x[j], kij});
      lo.terms.push_back({x[j], -kij});
    }
    ir.inequalities.push_back(std::move(up));
    ir.inequalities.push_back(std::move(lo));
  }

  // apparent power cones
  for (std::size_t i = 0; i < m; ++i) {
    ir.soc_cones.push_back(
        {detail::indexed("apparent", i), sc[i], {{{{pc[i], 1.0}}, 0.0}, {{{qc[i], 1.0}}, 0.0}}});
  }
  // (t + 1) >= ||(2 F x, t - 1)||  <=>  t >= ||F x||^2
  {
    SocCone cone{"ntwk_loss", epi, {}};
    for (Eigen::Index r = 0; r < factor.rows(); ++r) {
      AffineExpr e;
      for (std::size_t j = 0; j < x.size(); ++j) {
        const double f = 2.0 * factor(r, static_cast<Eigen::Index>(j));
        if (f != 0.0) e.terms.push_back({x[j], f});
      }
      cone.entries.push_back(std::move(e));
    }
    AffineExpr tail{{{pntwk, 1.0}}, -model.loss.sigma - 1.0};
    for (std::size_t j = 0; j < x.size(); ++j) {
      const double l = model.loss.lambda(static_cast<Eigen::Index>(j));
      if (l != 0.0) tail.terms.push_back({x[j], -l});
    }
    cone.entries.push_back(std::move(tail));
    ir.soc_cones.push_back(std::move(cone));
  }

  ir.big_m = big_m_value(conv);
  if (ts.cardinality.constrained()) {
    for (std::size_t i = 0; i < m; ++i) z.push_back(add_var(detail::indexed("z", i)));
    for (std::size_t i = 0; i < m; ++i) {
      ir.inequalities.push_back(
          {detail::indexed("big_m", i), {{sc[i], 1.0}, {z[i], -ir.big_m}}, 0.0});
    }
    LinearRow card{"cardinality", {}, static_cast<double>(ts.cardinality.limit())};
    for (int zi : z) card.terms.push_back({zi, 1.0});
    ir.inequalities.push_back(std::move(card));
    ir.binaries = z;
  }

  ir.objective.terms.push_back({pntwk, 1.0});
  for (std::size_t i = 0; i < m; ++i) ir.objective.terms.push_back({ploss[i], 1.0});

  ir.loss_model = LossModelSection{x, model.loss.Lambda, model.loss.lambda, model.loss.sigma};
  return ir;
}

}  // namespace mpcard
