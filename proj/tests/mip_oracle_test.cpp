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

#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "mpcard/grid.hpp"
#include "mpcard/mip.hpp"
#include "mpcard/mission.hpp"
#include "mpcard/oracle.hpp"
#include "mpcard/program.hpp"
#include "mpcard/solver.hpp"
#include "test_util.hpp"

namespace mpcard {
namespace {

using testing::five_bus;
using testing::ieee33;
using testing::ieee33_pcc;

const LinearizedGrid& grid33() {
  static const LinearizedGrid g(ieee33(), ieee33_pcc());
  return g;
}

const LinearizedGrid& grid5() {
  static const LinearizedGrid g(five_bus(), {"a2", "b2"});
  return g;
}

// Feeder-end demand that makes the converter worth using.
ConicProgramIR instance33(Cardinality card, std::uint64_t seed = 11, double k = 0.01) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  TimestepInput ts;
  ts.background_injections = VectorXcd::Zero(32);
  for (Eigen::Index i = 0; i < 32; ++i) ts.background_injections(i) = Complex(-0.1 * u(rng), -0.06 * u(rng));
  ts.v_min = 0.9;
  ts.v_max = 1.1;
  ts.cardinality = card;
  return build_timestep_program(grid33(), {ieee33_pcc(), k, 0.75, false}, ts);
}

ConicProgramIR instance5(Cardinality card, double v_min = 0.9, double v_max = 1.1) {
  TimestepInput ts;
  ts.background_injections = VectorXcd::Zero(4);
  ts.background_injections(1) = Complex(-0.3, -0.1);
  ts.background_injections(3) = Complex(-0.05, -0.02);
  ts.v_min = v_min;
  ts.v_max = v_max;
  ts.cardinality = card;
  return build_timestep_program(grid5(), {{"a2", "b2"}, 0.01, 0.2, false}, ts);
}

std::vector<double> leg_powers(const ConicProgramIR& ir, const ConicSolution& sol, std::size_t m) {
  std::vector<double> s;
  for (std::size_t i = 0; i < m; ++i) {
    s.push_back(std::hypot(sol.value(detail::indexed("P_c", i)), sol.value(detail::indexed("Q_c", i))));
  }
  (void)ir;
  return s;
}

TEST(Branching, MostFractional) {
  EXPECT_EQ(most_fractional({0.5, 0.9}, 1e-6), 0u);
  EXPECT_EQ(most_fractional({0.5, 0.5}, 1e-6), 0u);
  EXPECT_EQ(most_fractional({0.1, 0.45, 0.55}, 1e-6), 1u);
  EXPECT_FALSE(most_fractional({0.0, 1.0, 1e-7, 1.0 - 1e-7}, 1e-6).has_value());
}

TEST(Branching, ChildrenFixTheChosenBinary) {
  BnBNode root{BinaryDomain::relaxed(3), -1.0, 0, 0};
  auto [down, up] = branch(root, 1, 0.25, 5);
  EXPECT_EQ(down.domain.hi[1], 0.0);
  EXPECT_EQ(down.domain.lo[1], 0.0);
  EXPECT_EQ(up.domain.lo[1], 1.0);
  EXPECT_EQ(up.domain.hi[1], 1.0);
  EXPECT_EQ(down.domain.hi[0], 1.0);
  EXPECT_EQ(down.depth, 1);
  EXPECT_EQ(down.bound, 0.25);
  EXPECT_EQ(down.id, 5);
  EXPECT_EQ(up.id, 6);
}

TEST(Mip, FullCardinalityMatchesUnconstrained) {
  const ConicSolution free_sol = solve_socp(instance33(Cardinality::unconstrained()));
  const MipSolution mip = solve_misocp(instance33(Cardinality::at_most(4)));
  ASSERT_TRUE(free_sol.optimal());
  ASSERT_TRUE(mip.has_incumbent());
  EXPECT_NEAR(mip.objective(), free_sol.objective, 1e-8);
}

TEST(Mip, MatchesSupportEnumeration) {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const ConicProgramIR ir = instance33(Cardinality::at_most(2), seed);
    const MipSolution mip = solve_misocp(ir);
    const EnumerationResult en = enumerate_supports(ir, 2);
    EXPECT_EQ(en.subsets_solved, 11);
    ASSERT_TRUE(mip.has_incumbent());
    ASSERT_TRUE(en.best.optimal());
    EXPECT_NEAR(mip.objective(), en.objective, std::max(1e-8, 1e-4 * std::abs(en.objective)));
    EXPECT_LE(mip.bound, en.objective + 1e-9);
  }
}

TEST(Mip, ExhaustiveWithZeroGaps) {
  BnBConfig cfg;
  cfg.rel_gap = 0.0;
  cfg.abs_gap = 0.0;
  for (int n = 0; n <= 4; ++n) {
    const ConicProgramIR ir = instance33(Cardinality::at_most(n), 5);
    const MipSolution mip = solve_misocp(ir, cfg);
    const EnumerationResult en = enumerate_supports(ir, n);
    ASSERT_TRUE(mip.has_incumbent()) << n;
    EXPECT_NEAR(mip.objective(), en.objective, 1e-8) << "n=" << n;
  }
}

TEST(Mip, GapSettingsHonoured) {
  const BnBConfig cfg;
  for (int n = 0; n <= 4; ++n) {
    const MipSolution mip = solve_misocp(instance33(Cardinality::at_most(n), 8), cfg);
    ASSERT_TRUE(mip.status == MipStatus::kOptimal || mip.status == MipStatus::kGapReached);
    EXPECT_TRUE(mip.gap_abs <= cfg.abs_gap || mip.gap_rel <= cfg.rel_gap)
        << mip.gap_abs << " " << mip.gap_rel;
  }
}

TEST(Mip, IncumbentRespectsCardinality) {
  for (int n = 0; n <= 4; ++n) {
    const ConicProgramIR ir = instance33(Cardinality::at_most(n), 9);
    const MipSolution mip = solve_misocp(ir);
    ASSERT_TRUE(mip.has_incumbent());
    const auto s = leg_powers(ir, mip.incumbent, 4);
    EXPECT_LE(electrical_cardinality(s, 1e-5 * 0.75), n);
    for (int b : ir.binaries) {
      const double z = mip.incumbent.values[static_cast<std::size_t>(b)];
      EXPECT_TRUE(z == 0.0 || z == 1.0);
      if (z == 0.0) {
        const std::string leg = "S_c" + ir.variables[static_cast<std::size_t>(b)].substr(1);
        EXPECT_LE(mip.incumbent.value(leg), 1e-9);
      }
    }
  }
}

TEST(Mip, MonotoneInCardinality) {
  double prev = std::numeric_limits<double>::infinity();
  for (int n = 0; n <= 4; ++n) {
    const MipSolution mip = solve_misocp(instance33(Cardinality::at_most(n), 4));
    ASSERT_TRUE(mip.has_incumbent());
    EXPECT_LE(mip.objective(), prev + 1e-5);
    prev = mip.objective();
  }
}

TEST(Mip, DcDerWithoutLegsIsInfeasible) {
  TimestepInput ts;
  ts.p_der = 0.05;
  ts.v_min = 0.9;
  ts.v_max = 1.1;
  ts.cardinality = Cardinality::at_most(0);
  const ConicProgramIR ir = build_timestep_program(grid5(), {{"a2", "b2"}, 0.01, 0.2, true}, ts);
  EXPECT_EQ(solve_misocp(ir).status, MipStatus::kInfeasible);
  EXPECT_FALSE(enumerate_supports(ir, 0).best.optimal());
}

TEST(Mip, NodeLimitReturnsBestIncumbent) {
  BnBConfig cfg;
  cfg.node_limit = 1;
  cfg.rel_gap = 0.0;
  cfg.abs_gap = 0.0;
  const MipSolution mip = solve_misocp(instance33(Cardinality::at_most(1), 2), cfg);
  EXPECT_EQ(mip.status, MipStatus::kNodeLimit);
  EXPECT_EQ(mip.nodes_explored, 1);
}

TEST(Mip, TraceRecordsNodes) {
  BnBConfig cfg;
  cfg.record_trace = true;
  const MipSolution mip = solve_misocp(instance33(Cardinality::at_most(1), 2), cfg);
  ASSERT_FALSE(mip.trace.empty());
  EXPECT_EQ(mip.trace.front().node, 0);
  EXPECT_EQ(mip.trace.front().outcome, "branched");
}

TEST(Mip, NoBinariesDelegates) {
  const ConicProgramIR ir = instance33(Cardinality::unconstrained());
  const MipSolution mip = solve_misocp(ir);
  EXPECT_EQ(mip.status, MipStatus::kOptimal);
  EXPECT_EQ(mip.objective(), solve_socp(ir).objective);
}

TEST(Mip, ConfigValidation) {
  BnBConfig cfg;
  cfg.rel_gap = -1.0;
  EXPECT_THROW(cfg.validate(), ValidationError);
  cfg.rel_gap = 1e-4;
  cfg.node_limit = 0;
  EXPECT_THROW(cfg.validate(), ValidationError);
}

TEST(Oracle, SupportsUpTo) {
  EXPECT_EQ(supports_up_to(4, 2).size(), 11u);
  EXPECT_EQ(supports_up_to(4, 4).size(), 16u);
  EXPECT_EQ(supports_up_to(3, 0).size(), 1u);
  EXPECT_EQ(supports_up_to(3, 2)[5].to_string(), "{1,3}");
}

TEST(Oracle, FullSupportEqualsUnconstrained) {
  const EnumerationResult en = enumerate_supports(instance33(Cardinality::at_most(4), 6), 4);
  const ConicSolution free_sol = solve_socp(instance33(Cardinality::unconstrained(), 6));
  EXPECT_NEAR(en.objective, free_sol.objective, 1e-8);
}

TEST(Oracle, EnumerationGuards) {
  ConicProgramIR ir;
  for (int i = 0; i < 13; ++i) {
    ir.variables.push_back("z[" + std::to_string(i + 1) + "]");
    ir.binaries.push_back(i);
  }
  EXPECT_THROW(enumerate_supports(ir, 2), ValidationError);
  EXPECT_THROW(enumerate_supports(instance33(Cardinality::unconstrained()), 2), ValidationError);
}

TEST(Oracle, GridSearchZeroDemandAtOrigin) {
  TimestepInput ts;
  ts.v_min = 0.9;
  ts.v_max = 1.1;
  const ConicProgramIR ir = build_timestep_program(grid5(), {{"a2", "b2"}, 0.01, 0.2, false}, ts);
  const GridSearchResult gs = grid_search_continuous(ir, 1e-3);
  ASSERT_TRUE(gs.feasible);
  EXPECT_NEAR(gs.objective, 0.0, 1e-12);
  for (const char* v : {"P_c[1]", "P_c[2]", "Q_c[1]", "Q_c[2]"}) {
    EXPECT_EQ(gs.values[static_cast<std::size_t>(ir.variable(v))], 0.0);
  }
}

TEST(Oracle, GridSearchAgreesWithSocp) {
  const ConicProgramIR ir = instance5(Cardinality::unconstrained());
  const GridSearchResult gs = grid_search_continuous(ir, 1e-3);
  const ConicSolution sol = solve_socp(ir);
  ASSERT_TRUE(gs.feasible);
  ASSERT_TRUE(sol.optimal());
  EXPECT_NEAR(gs.objective, sol.objective, 1e-4);
  EXPECT_GE(gs.objective, sol.objective - 1e-9);  // the scan only visits feasible points
  // The scan evaluates the quadratic directly, so this also checks tightness.
  EXPECT_LT(std::abs(sol.value("P_loss_ntwk") - ir.loss_model->evaluate(sol.values)), 3e-5);
}

TEST(Oracle, GridSearchRespectsCardinality) {
  const ConicProgramIR ir = instance5(Cardinality::at_most(1));
  const GridSearchResult gs = grid_search_continuous(ir, 1e-3);
  const MipSolution mip = solve_misocp(ir);
  ASSERT_TRUE(gs.feasible);
  EXPECT_EQ(gs.support.terminals.size(), 1u);
  EXPECT_NEAR(gs.objective, mip.objective(), 1e-4);
}

TEST(Oracle, GridSearchInfeasibleVoltageBox) {
  const ConicProgramIR ir = instance5(Cardinality::unconstrained(), 1.2, 1.3);
  EXPECT_FALSE(grid_search_continuous(ir, 1e-3).feasible);
  EXPECT_EQ(solve_socp(ir).status, SolveStatus::kInfeasible);
}

TEST(Oracle, GridSearchDimensionGuard) {
  EXPECT_THROW(grid_search_continuous(instance33(Cardinality::unconstrained()), 1e-3), ValidationError);
  EXPECT_THROW(grid_search_continuous(instance5(Cardinality::unconstrained()), 0.0), ValidationError);
}

TEST(Oracle, ShrinkageThinsSupport) {
  int prev = 5;
  for (double k : {0.0, 0.005, 0.01, 0.02, 0.05}) {
    const ConicProgramIR ir = instance33(Cardinality::unconstrained(), 12, k);
    const ConicSolution sol = solve_socp(ir);
    ASSERT_TRUE(sol.optimal());
    const int ec = electrical_cardinality(leg_powers(ir, sol, 4), 1e-5 * 0.75);
    EXPECT_LE(ec, prev) << "k=" << k;
    prev = ec;
  }
}

}  // namespace
}  // namespace mpcard
