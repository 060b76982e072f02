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
#include <sstream>

#include <gtest/gtest.h>

#include "mpcard/config.hpp"
#include "mpcard/grid.hpp"
#include "mpcard/mission.hpp"
#include "mpcard/profiles.hpp"
#include "test_util.hpp"

namespace mpcard {
namespace {

using testing::five_bus;
using testing::ieee33;
using testing::ieee33_pcc;

TEST(ElectricalCardinality, Examples) {
  EXPECT_EQ(electrical_cardinality({0.0, 0.0, 0.0}, 1e-3), 0);
  const double eps = 1e-5 * 3200.0;
  EXPECT_NEAR(eps, 0.032, 1e-15);
  EXPECT_EQ(electrical_cardinality({500.0, 0.0, 250.0}, eps), 2);
  EXPECT_EQ(electrical_cardinality({eps, eps}, eps), 0);
  EXPECT_EQ(electrical_cardinality({std::nextafter(eps, 1.0), eps}, eps), 1);
}

TEST(ElectricalCardinality, Errors) {
  EXPECT_THROW(electrical_cardinality({1.0, -1e-12}, 0.1), ValidationError);
  EXPECT_THROW(electrical_cardinality({1.0}, 0.0), ValidationError);
}

MissionProfile profile_with_ec(const std::vector<std::vector<double>>& s) {
  MissionProfile p;
  p.m = s.front().size();
  p.s_total_kva = 1000.0;
  p.p_mp = MatrixXd::Zero(static_cast<Eigen::Index>(s.size()), static_cast<Eigen::Index>(p.m));
  p.q_mp = p.p_mp;
  for (std::size_t t = 0; t < s.size(); ++t) {
    for (std::size_t i = 0; i < p.m; ++i) p.p_mp(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(i)) = s[t][i];
  }
  p.refresh_cardinality();
  const std::size_t tau = s.size();
  p.objective.assign(tau, 1.0);
  p.ntwk_loss.assign(tau, 1.0);
  p.conv_loss.assign(tau, 0.0);
  p.baseline_loss.assign(tau, 1.0);
  p.status.assign(tau, "optimal");
  p.relaxation_gap.assign(tau, 0.0);
  return p;
}

TEST(Mec, Examples) {
  EXPECT_EQ(mec(profile_with_ec({{0, 0}, {0, 0}})), 0);
  const MissionProfile p = profile_with_ec({{0, 0, 0}, {5, -3, 0}, {0, 0, 2}});
  EXPECT_EQ(p.ec_series, (std::vector<int>{0, 2, 1}));
  EXPECT_EQ(mec(p), 2);
  EXPECT_THROW(mec(MissionProfile{}), ValidationError);
}

TEST(Summarize, AllZeroProfile) {
  const MissionProfile p = profile_with_ec({{0, 0}, {0, 0}, {0, 0}});
  const SummaryReport rep = summarize({p}, p.objective);
  ASSERT_EQ(rep.runs.size(), 1u);
  EXPECT_EQ(rep.runs[0].loss_reduction_kwh, 0.0);
  EXPECT_EQ(rep.runs[0].ec_histogram, (std::vector<int>{3, 0, 0}));
  EXPECT_EQ(rep.runs[0].zero_ec_count, 3);
  EXPECT_EQ(rep.runs[0].zero_ec_fraction, 1.0);
  EXPECT_FALSE(rep.runs[0].fraction_of_reference.has_value());
}

TEST(Summarize, IdenticalProfiles) {
  MissionProfile p = profile_with_ec({{1, 0}, {2, 2}});
  p.label = "n2";
  p.objective = {0.5, 0.25};
  MissionProfile q = p;
  q.label = "unconstrained";
  const SummaryReport rep = summarize({p, q}, {1.0, 1.0});
  EXPECT_EQ(rep.reference, "unconstrained");
  ASSERT_TRUE(rep.runs[0].fraction_of_reference.has_value());
  EXPECT_DOUBLE_EQ(*rep.runs[0].fraction_of_reference, 1.0);
  EXPECT_DOUBLE_EQ(rep.runs[0].total_loss_kwh, rep.runs[1].total_loss_kwh);
  EXPECT_DOUBLE_EQ(rep.runs[0].total_loss_kwh, 0.75 * 0.5);
  EXPECT_EQ(rep.runs[0].ec_histogram, rep.runs[1].ec_histogram);
}

TEST(Summarize, MismatchedLengths) {
  const MissionProfile a = profile_with_ec({{1, 0}, {2, 2}});
  const MissionProfile b = profile_with_ec({{1, 0}});
  EXPECT_THROW(summarize({a, b}, {1.0, 1.0}), ValidationError);
  EXPECT_THROW(summarize({a}, {1.0}), ValidationError);
}

HorizonInput flat_horizon(std::size_t tau, double demand_kw) {
  HorizonInput h;
  h.series["flat"] = std::vector<double>(tau, 1.0);
  h.loads.push_back({"a2", demand_kw, 0.3 * demand_kw, "flat"});
  h.v_min = 0.9;
  h.v_max = 1.1;
  return h;
}

TEST(Schedule, ZeroDemandGivesZeroRow) {
  const LinearizedGrid grid(five_bus(), {"a2", "b2"});
  const MissionProfile p =
      schedule_horizon(grid, {{"a2", "b2"}, 0.01, 0.2, false}, flat_horizon(1, 0.0));
  ASSERT_EQ(p.length(), 1u);
  EXPECT_EQ(p.ec_series[0], 0);
  EXPECT_EQ(p.status[0], "optimal");
  EXPECT_LT(p.s_mp.cwiseAbs().maxCoeff(), ec_tolerance(p.s_total_kva));
}

TEST(Schedule, DcDerWithNoLegsRecordsInfeasibleRows) {
  const LinearizedGrid grid(five_bus(), {"a2", "b2"});
  HorizonInput h = flat_horizon(2, 100.0);
  h.ders.push_back({"pv", "", 50.0, "flat"});
  h.cardinality = Cardinality::at_most(0);
  const MissionProfile p = schedule_horizon(grid, {{"a2", "b2"}, 0.01, 0.2, true}, h);
  ASSERT_EQ(p.length(), 2u);
  for (std::size_t t = 0; t < 2; ++t) {
    EXPECT_EQ(p.status[t], "infeasible");
    EXPECT_EQ(p.ec_series[t], 0);
    EXPECT_EQ(p.objective[t], p.baseline_loss[t]);
  }
  const SummaryReport rep = summarize({p}, p.baseline_loss);
  EXPECT_EQ(rep.runs[0].infeasible_count, 2);
}

TEST(Schedule, InputValidation) {
  const LinearizedGrid grid(five_bus(), {"a2", "b2"});
  const ConverterSpec conv{{"a2", "b2"}, 0.01, 0.2, false};
  HorizonInput h = flat_horizon(3, 10.0);
  h.series["flat"][1] = -0.5;
  EXPECT_THROW(schedule_horizon(grid, conv, h), ValidationError);
  h = flat_horizon(3, 10.0);
  h.series["short"] = {1.0};
  EXPECT_THROW(schedule_horizon(grid, conv, h), ValidationError);
  h = flat_horizon(3, 10.0);
  h.loads[0].bus = "zz";
  EXPECT_THROW(schedule_horizon(grid, conv, h), ValidationError);
  h = flat_horizon(3, 10.0);
  h.ders.push_back({"pv", "", 5.0, "flat"});
  EXPECT_THROW(schedule_horizon(grid, conv, h), ValidationError);  // conv has no dc DER
}

// One synthetic day on the 33-bus feeder.
HorizonInput synthetic_day(Cardinality card) {
  std::vector<std::pair<std::string, ProfileKind>> cols;
  HorizonInput h;
  const BusNetwork net = ieee33();
  for (const std::string& bus : net.load_bus_ids()) {
    cols.emplace_back(bus, std::stoi(bus) % 3 == 0 ? ProfileKind::kCommercial : ProfileKind::kResidential);
    h.loads.push_back({bus, 110.0, 70.0, bus});
  }
  const ProfileTable t = synthetic_profiles({1, 48, 99}, cols);
  h.series = t.columns;
  h.v_min = 0.94;
  h.v_max = 1.05;
  h.cardinality = card;
  return h;
}

TEST(Schedule, ReducedCardinalityTracksFullConverter) {
  const LinearizedGrid grid(ieee33(), ieee33_pcc());
  const ConverterSpec conv{ieee33_pcc(), 0.01, 0.75, false};
  const MissionProfile full = schedule_horizon(grid, conv, synthetic_day(Cardinality::at_most(4)));
  const MissionProfile two = schedule_horizon(grid, conv, synthetic_day(Cardinality::at_most(2)));
  const SummaryReport rep = summarize({two, full}, full.baseline_loss);
  ASSERT_TRUE(rep.runs[0].fraction_of_reference.has_value());
  EXPECT_GT(*rep.runs[0].fraction_of_reference, 0.0);
  EXPECT_LE(*rep.runs[0].fraction_of_reference, 1.0 + 1e-9);
  EXPECT_LE(two.mec, 2);
  int agreeing = 0;
  for (std::size_t t = 0; t < full.length(); ++t) {
    EXPECT_LE(full.objective[t], two.objective[t] + 1e-4 * std::abs(two.objective[t]) + 1e-5 * 1000.0);
    if (full.ec_series[t] <= 2) {
      ++agreeing;
      const double tol = 1e-4 * std::abs(full.objective[t]) + 1e-5 * 1000.0;
      EXPECT_NEAR(two.objective[t], full.objective[t], tol) << "t=" << t;
    }
  }
  (void)agreeing;
}

TEST(Schedule, ParallelMatchesSerial) {
  const LinearizedGrid grid(ieee33(), ieee33_pcc());
  const ConverterSpec conv{ieee33_pcc(), 0.01, 0.75, false};
  ScheduleOptions serial, parallel;
  parallel.jobs = 3;
  const HorizonInput h = synthetic_day(Cardinality::at_most(2));
  const MissionProfile a = schedule_horizon(grid, conv, h, {}, serial);
  const MissionProfile b = schedule_horizon(grid, conv, h, {}, parallel);
  EXPECT_EQ(a.objective, b.objective);
  EXPECT_EQ(a.ec_series, b.ec_series);
  EXPECT_TRUE(a.p_mp == b.p_mp);
  EXPECT_TRUE(a.q_mp == b.q_mp);
}

TEST(Schedule, RowsAreConsistent) {
  const LinearizedGrid grid(ieee33(), ieee33_pcc());
  const ConverterSpec conv{ieee33_pcc(), 0.01, 0.75, false};
  const MissionProfile p = schedule_horizon(grid, conv, synthetic_day(Cardinality::unconstrained()));
  const double eps = ec_tolerance(p.s_total_kva);
  for (std::size_t t = 0; t < p.length(); ++t) {
    const auto r = static_cast<Eigen::Index>(t);
    std::vector<double> row;
    for (Eigen::Index i = 0; i < 4; ++i) {
      EXPECT_NEAR(p.s_mp(r, i), std::hypot(p.p_mp(r, i), p.q_mp(r, i)), 1e-9);
      row.push_back(p.s_mp(r, i));
    }
    EXPECT_EQ(p.ec_series[t], electrical_cardinality(row, eps));
    EXPECT_NEAR(p.objective[t], p.ntwk_loss[t] + p.conv_loss[t], 1e-6);
    EXPECT_LE(p.relaxation_gap[t], 3e-5);
  }
}

TEST(Profiles, CsvRoundTrip) {
  ProfileTable t;
  t.ids = {"7", "pv"};
  t.columns["7"] = {0.5, 0.25, 1.0 / 3.0};
  t.columns["pv"] = {0.0, 0.1, 0.9};
  std::stringstream buf;
  write_profiles_csv(buf, t);
  const ProfileTable back = parse_profiles_csv(buf);
  EXPECT_EQ(back.ids, t.ids);
  EXPECT_EQ(back.columns, t.columns);
}

TEST(Profiles, CsvErrorsAreLocated) {
  std::stringstream bad_header("time,a\n0,1\n");
  EXPECT_THROW(parse_profiles_csv(bad_header), ParseError);
  std::stringstream bad_cell("timestep,a\n0,1\n1,x\n");
  try {
    parse_profiles_csv(bad_cell, "p.csv");
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.locus(), "p.csv:3");
  }
  std::stringstream negative("timestep,a\n0,-1\n");
  EXPECT_THROW(parse_profiles_csv(negative), ParseError);
  std::stringstream ragged("timestep,a,b\n0,1\n");
  EXPECT_THROW(parse_profiles_csv(ragged), ParseError);
}

TEST(Profiles, SyntheticIsSeeded) {
  const std::vector<std::pair<std::string, ProfileKind>> cols{
      {"r", ProfileKind::kResidential}, {"c", ProfileKind::kCommercial},
      {"s", ProfileKind::kSolar}, {"w", ProfileKind::kWind}};
  const ProfileTable a = synthetic_profiles({2, 48, 5}, cols);
  const ProfileTable b = synthetic_profiles({2, 48, 5}, cols);
  const ProfileTable c = synthetic_profiles({2, 48, 6}, cols);
  EXPECT_EQ(a.columns, b.columns);
  EXPECT_NE(a.columns, c.columns);
  EXPECT_EQ(a.length(), 96u);
  for (const auto& [id, v] : a.columns) {
    for (double x : v) EXPECT_GE(x, 0.0) << id;
  }
  EXPECT_EQ(a.columns.at("s")[0], 0.0);  // midnight
  EXPECT_GT(a.columns.at("s")[26], 0.0);  // 13:00
  EXPECT_THROW(synthetic_profiles({0, 48, 5}, cols), ValidationError);
}

TEST(Config, ShippedFixtureParses) {
  const RunConfig cfg = load_config(testing::fixture("ieee33_config.json"));
  EXPECT_EQ(cfg.pcc_buses, ieee33_pcc());
  EXPECT_EQ(cfg.loads.size(), 32u);
  EXPECT_DOUBLE_EQ(cfg.k, 0.01);
  EXPECT_EQ(cfg.cardinality.size(), 2u);
  EXPECT_NO_THROW(cfg.validate(load_network(cfg.network_path)));
}

TEST(Config, RejectsBadInput) {
  const auto base = nlohmann::json::parse(R"({"network": "n.json",
      "converter": {"pcc_buses": ["a2", "b2"], "s_total_kva": 200},
      "cardinality": [1, "unconstrained"]})");
  const RunConfig ok = config_from_json(base, "");
  EXPECT_NO_THROW(ok.validate(five_bus()));

  auto bad_card = base;
  bad_card["cardinality"] = {"two"};
  EXPECT_THROW(config_from_json(bad_card, ""), ParseError);

  auto too_many = base;
  too_many["cardinality"] = {3};
  EXPECT_THROW(config_from_json(too_many, "").validate(five_bus()), ValidationError);

  auto unknown_bus = base;
  unknown_bus["converter"]["pcc_buses"] = {"a2", "q9"};
  EXPECT_THROW(config_from_json(unknown_bus, "").validate(five_bus()), ValidationError);

  auto no_converter = base;
  no_converter.erase("converter");
  EXPECT_THROW(config_from_json(no_converter, ""), ParseError);
}

TEST(Config, CardinalityList) {
  const auto list = parse_cardinality_list("0,2,unconstrained");
  ASSERT_EQ(list.size(), 3u);
  EXPECT_EQ(list[0].limit(), 0);
  EXPECT_FALSE(list[2].constrained());
  EXPECT_TRUE(parse_cardinality_list("").empty());
  EXPECT_THROW(parse_cardinality_list("1,x"), ValidationError);
}

}  // namespace
}  // namespace mpcard
