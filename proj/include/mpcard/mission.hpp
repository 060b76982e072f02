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
#include <atomic>
#include <cmath>
#include <exception>
#include <map>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "mpcard/error.hpp"
#include "mpcard/grid.hpp"
#include "mpcard/ir_json.hpp"
#include "mpcard/mip.hpp"
#include "mpcard/program.hpp"
#include "mpcard/solver.hpp"

namespace mpcard {

// Number of entries strictly greater than eps.
inline int electrical_cardinality(std::span<const double> row, double eps) {
  if (!(eps > 0.0)) throw ValidationError("EC tolerance must be > 0");
  int count = 0;
  for (double v : row) {
    if (v < 0.0 || std::isnan(v)) throw ValidationError("apparent power entries must be >= 0");
    if (v > eps) ++count;
  }
  return count;
}

inline int electrical_cardinality(std::initializer_list<double> row, double eps) {
  return electrical_cardinality(std::span<const double>(row.begin(), row.size()), eps);
}

// EC tolerance relative to the total converter capacity.
inline double ec_tolerance(double s_total_kva) { return 1e-5 * s_total_kva; }

struct MissionProfile {
  std::string label;
  std::size_t m = 0;
  double timestep_hours = 0.5;
  double s_total_kva = 0.0;
  // tau x m, kW / kvar / kVA
  MatrixXd p_mp, q_mp, s_mp;
  std::vector<int> ec_series;
  int mec = 0;
  // per timestep, kW
  std::vector<double> objective, ntwk_loss, conv_loss, baseline_loss;
  std::vector<std::string> status;
  std::vector<double> relaxation_gap;  // NaN when not optimal
  std::vector<double> mip_gap;         // 0 for pure SOCP
  std::vector<long> nodes;

  // Optional per-timestep artifacts.
  std::vector<std::string> ir_dumps;
  std::vector<std::vector<IterationRecord>> solver_traces;
  std::vector<std::vector<MipNodeRecord>> mip_traces;

  std::size_t length() const { return ec_series.size(); }

  // Recomputes s_mp, ec_series and mec from p_mp/q_mp.
  void refresh_cardinality() {
    const auto tau = p_mp.rows();
    s_mp.resize(tau, p_mp.cols());
    ec_series.assign(static_cast<std::size_t>(tau), 0);
    const double eps = ec_tolerance(s_total_kva);
    std::vector<double> row(static_cast<std::size_t>(p_mp.cols()));
    for (Eigen::Index t = 0; t < tau; ++t) {
      for (Eigen::Index i = 0; i < p_mp.cols(); ++i) {
        s_mp(t, i) = std::hypot(p_mp(t, i), q_mp(t, i));
        row[static_cast<std::size_t>(i)] = s_mp(t, i);
      }
      ec_series[static_cast<std::size_t>(t)] = electrical_cardinality(row, eps);
    }
    mec = ec_series.empty() ? 0 : *std::max_element(ec_series.begin(), ec_series.end());
  }
};

inline int mec(const MissionProfile& profile) {
  if (profile.ec_series.empty()) throw ValidationError("mission profile is empty");
  return *std::max_element(profile.ec_series.begin(), profile.ec_series.end());
}

struct BusLoad {
  std::string bus;
  double p_kw = 0.0;
  double q_kvar = 0.0;
  std::string profile;  // key into HorizonInput::series
};

// Generation at unity power factor. An empty bus places the unit on the dc
// link of the converter.
struct DerUnit {
  std::string id;
  std::string bus;
  double peak_kw = 0.0;
  std::string profile;
};

struct HorizonInput {
  double s_base_kva = 1000.0;
  double timestep_hours = 0.5;
  std::vector<BusLoad> loads;
  std::vector<DerUnit> ders;
  std::map<std::string, std::vector<double>> series;
  double v_min = 0.95;
  double v_max = 1.05;
  std::vector<std::string> monitored;
  Cardinality cardinality;

  std::size_t length() const { return series.empty() ? 0 : series.begin()->second.size(); }

  bool has_dc_der() const {
    return std::any_of(ders.begin(), ders.end(), [](const DerUnit& d) { return d.bus.empty(); });
  }

  void validate(const LinearizedGrid& grid) const {
    if (!(s_base_kva > 0.0)) throw ValidationError("s_base must be > 0");
    if (!(timestep_hours > 0.0)) throw ValidationError("timestep duration must be > 0");
    if (length() == 0) throw ValidationError("horizon has no timesteps");
    for (const auto& [id, values] : series) {
      if (values.size() != length()) {
        throw ValidationError("profile '" + id + "' has " + std::to_string(values.size()) +
                              " entries, expected " + std::to_string(length()));
      }
      for (double v : values) {
        if (!(v >= 0.0)) throw ValidationError("profile '" + id + "' has a negative entry");
      }
    }
    const auto& ids = grid.bus_ids();
    auto known = [&](const std::string& bus) {
      return std::find(ids.begin(), ids.end(), bus) != ids.end();
    };
    for (const BusLoad& l : loads) {
      if (!known(l.bus)) throw ValidationError("load at unknown bus '" + l.bus + "'");
      if (!series.contains(l.profile)) {
        throw ValidationError("load at bus '" + l.bus + "' uses unknown profile '" + l.profile + "'");
      }
    }
    int dc = 0;
    for (const DerUnit& d : ders) {
      if (d.bus.empty()) {
        ++dc;
      } else if (!known(d.bus)) {
        throw ValidationError("DER '" + d.id + "' at unknown bus '" + d.bus + "'");
      }
      if (!series.contains(d.profile)) {
        throw ValidationError("DER '" + d.id + "' uses unknown profile '" + d.profile + "'");
      }
    }
    if (dc > 1) throw ValidationError("at most one DER may sit on the dc link");
  }

  // Per non-slack bus complex injection in pu (generation positive).
  VectorXcd background(std::size_t t, const LinearizedGrid& grid) const {
    const auto& ids = grid.bus_ids();
    VectorXcd s = VectorXcd::Zero(static_cast<Eigen::Index>(ids.size()));
    auto row = [&](const std::string& bus) {
      return static_cast<Eigen::Index>(std::find(ids.begin(), ids.end(), bus) - ids.begin());
    };
    for (const BusLoad& l : loads) {
      const double mult = series.at(l.profile)[t];
      s(row(l.bus)) -= Complex(l.p_kw, l.q_kvar) * (mult / s_base_kva);
    }
    for (const DerUnit& d : ders) {
      if (d.bus.empty()) continue;
      s(row(d.bus)) += Complex(d.peak_kw * series.at(d.profile)[t] / s_base_kva, 0.0);
    }
    return s;
  }

  double p_der(std::size_t t) const {
    for (const DerUnit& d : ders) {
      if (d.bus.empty()) return d.peak_kw * series.at(d.profile)[t] / s_base_kva;
    }
    return 0.0;
  }
};

struct ScheduleOptions {
  int jobs = 1;
  SolverSettings solver;
  bool keep_ir = false;
  bool keep_solver_trace = false;
  bool keep_mip_trace = false;
};

namespace detail {

struct TimestepOutcome {
  std::vector<double> p, q;  // pu
  std::string status;
  bool solved = false;
  double objective = 0.0, ntwk = 0.0, conv = 0.0, baseline = 0.0;
  double relaxation_gap = std::numeric_limits<double>::quiet_NaN();
  double mip_gap = 0.0;
  long nodes = 0;
  std::string ir;
  std::vector<IterationRecord> solver_trace;
  std::vector<MipNodeRecord> mip_trace;
};

inline TimestepOutcome solve_timestep(const LinearizedGrid& grid, const ConverterSpec& conv,
                                      const HorizonInput& horizon, std::size_t t,
                                      const BnBConfig& cfg, const ScheduleOptions& opts) {
  TimestepInput ts;
  ts.background_injections = horizon.background(t, grid);
  ts.p_der = horizon.p_der(t);
  ts.v_min = horizon.v_min;
  ts.v_max = horizon.v_max;
  ts.cardinality = horizon.cardinality;
  ts.monitored_buses = horizon.monitored;
  const ConicProgramIR ir = build_timestep_program(grid, conv, ts);

  TimestepOutcome out;
  out.baseline = ir.loss_model->sigma;
  if (opts.keep_ir) out.ir = serialize_ir(ir);

  ConicSolution sol;
  if (!ts.cardinality.constrained()) {
    SolverSettings s = opts.solver;
    s.record_trace = opts.keep_solver_trace;
    sol = SocpSolver(s).solve(ir, BinaryDomain{});
    out.status = to_string(sol.status);
    out.solved = sol.optimal();
    out.nodes = 1;
  } else {
    BnBConfig c = cfg;
    c.record_trace = opts.keep_mip_trace;
    SolverSettings s = opts.solver;
    s.record_trace = false;
    MipSolution mip = solve_misocp(ir, c, s);
    out.status = to_string(mip.status);
    out.solved = mip.has_incumbent();
    out.mip_gap = out.solved ? mip.gap_rel : 0.0;
    out.nodes = mip.nodes_explored;
    out.mip_trace = std::move(mip.trace);
    sol = std::move(mip.incumbent);
    if (opts.keep_solver_trace && out.solved) {
      // Re-solve the incumbent's support to capture a representative trace.
      std::map<std::string, int> fix;
      for (int b : ir.binaries) {
        fix[ir.variables[static_cast<std::size_t>(b)]] =
            static_cast<int>(std::lround(sol.values[static_cast<std::size_t>(b)]));
      }
      s.record_trace = true;
      out.solver_trace = SocpSolver(s).solve(ir, fix).trace;
    }
  }
  if (!ts.cardinality.constrained()) out.solver_trace = sol.trace;

  const std::size_t m = conv.m();
  out.p.assign(m, 0.0);
  out.q.assign(m, 0.0);
  if (out.solved) {
    for (std::size_t i = 0; i < m; ++i) {
      out.p[i] = sol.value(indexed("P_c", i));
      out.q[i] = sol.value(indexed("Q_c", i));
      out.conv += sol.value(indexed("P_loss_conv", i));
    }
    out.ntwk = sol.value("P_loss_ntwk");
    out.objective = sol.objective;
    out.relaxation_gap = check_relaxation_tightness(ir, sol);
  } else {
    // No converter action: the network carries the background alone.
    out.ntwk = out.baseline;
    out.objective = out.baseline;
  }
  return out;
}

}  // namespace detail

// Solves every timestep of the horizon. Timesteps run on up to opts.jobs
// workers; results are stored by index so the output does not depend on
// scheduling.
inline MissionProfile schedule_horizon(const LinearizedGrid& grid, const ConverterSpec& conv,
                                       const HorizonInput& horizon, const BnBConfig& cfg = {},
                                       const ScheduleOptions& opts = {}) {
  conv.validate();
  cfg.validate();
  horizon.validate(grid);
  if (horizon.has_dc_der() != conv.has_dc_der) {
    throw ValidationError("dc-link DER in the horizon does not match the converter spec");
  }
  if (opts.jobs < 1) throw ValidationError("jobs must be >= 1");

  const std::size_t tau = horizon.length();
  std::vector<detail::TimestepOutcome> results(tau);
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mu;

  auto worker = [&] {
    while (true) {
      const std::size_t t = next.fetch_add(1);
      if (t >= tau) return;
      try {
        results[t] = detail::solve_timestep(grid, conv, horizon, t, cfg, opts);
      } catch (...) {
        std::lock_guard<std::mutex> lock(failure_mu);
        if (!failure) failure = std::current_exception();
        next = tau;
        return;
      }
    }
  };
  const auto workers = static_cast<std::size_t>(std::min<std::size_t>(
      static_cast<std::size_t>(opts.jobs), std::max<std::size_t>(tau, 1)));
  if (workers <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (std::thread& th : pool) th.join();
  }
  if (failure) std::rethrow_exception(failure);

  const std::size_t m = conv.m();
  const double base = horizon.s_base_kva;
  MissionProfile mp;
  mp.label = horizon.cardinality.label();
  mp.m = m;
  mp.timestep_hours = horizon.timestep_hours;
  mp.s_total_kva = conv.s_total * base;
  mp.p_mp.resize(static_cast<Eigen::Index>(tau), static_cast<Eigen::Index>(m));
  mp.q_mp.resizeLike(mp.p_mp);
  for (std::size_t t = 0; t < tau; ++t) {
    const detail::TimestepOutcome& r = results[t];
    for (std::size_t i = 0; i < m; ++i) {
      mp.p_mp(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(i)) = r.p[i] * base;
      mp.q_mp(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(i)) = r.q[i] * base;
    }
    mp.objective.push_back(r.objective * base);
    mp.ntwk_loss.push_back(r.ntwk * base);
    mp.conv_loss.push_back(r.conv * base);
    mp.baseline_loss.push_back(r.baseline * base);
    mp.status.push_back(r.status);
    mp.relaxation_gap.push_back(r.relaxation_gap);
    mp.mip_gap.push_back(r.mip_gap);
    mp.nodes.push_back(r.nodes);
    if (opts.keep_ir) mp.ir_dumps.push_back(r.ir);
    if (opts.keep_solver_trace) mp.solver_traces.push_back(r.solver_trace);
    if (opts.keep_mip_trace) mp.mip_traces.push_back(r.mip_trace);
  }
  mp.refresh_cardinality();
  return mp;
}

struct RunSummary {
  std::string label;
  std::size_t timesteps = 0;
  int mec = 0;
  double total_loss_kwh = 0.0;
  double network_loss_kwh = 0.0;
  double converter_loss_kwh = 0.0;
  double baseline_loss_kwh = 0.0;
  double loss_reduction_kwh = 0.0;
  // Share of the reference run's reduction; nullopt when that is zero.
  std::optional<double> fraction_of_reference;
  std::vector<int> ec_histogram;  // counts of EC = 0..m
  int zero_ec_count = 0;
  double zero_ec_fraction = 0.0;
  int infeasible_count = 0;
  double max_relaxation_gap = 0.0;
};

struct SummaryReport {
  std::string reference;  // label of the run fractions are measured against
  std::vector<RunSummary> runs;
  // Per-timestep share of the reference reduction, one series per run.
  std::vector<std::vector<double>> fraction_series;
};

namespace detail {

inline bool is_feasible_status(const std::string& s) {
  return s == "optimal" || s == "gap_reached" || s == "node_limit";
}

}  // namespace detail

// Energy totals and cardinality statistics. The reference run is the
// unconstrained one if present, else the last profile.
inline SummaryReport summarize(const std::vector<MissionProfile>& profiles,
                               const std::vector<double>& baseline_kw) {
  SummaryReport rep;
  if (profiles.empty()) return rep;
  const std::size_t tau = profiles.front().length();
  if (baseline_kw.size() != tau) throw ValidationError("baseline length differs from profile");
  for (const MissionProfile& p : profiles) {
    if (p.length() != tau || p.objective.size() != tau) {
      throw ValidationError("profiles have different horizon lengths");
    }
  }

  std::size_t ref = profiles.size() - 1;
  for (std::size_t i = 0; i < profiles.size(); ++i) {
    if (profiles[i].label == "unconstrained") ref = i;
  }
  rep.reference = profiles[ref].label;

  auto energy = [](const std::vector<double>& kw, double dt) {
    double e = 0.0;
    for (double v : kw) e += v * dt;
    return e;
  };
  const double dt = profiles.front().timestep_hours;
  const double baseline_kwh = energy(baseline_kw, dt);
  const double ref_reduction = baseline_kwh - energy(profiles[ref].objective, dt);

  for (const MissionProfile& p : profiles) {
    RunSummary s;
    s.label = p.label;
    s.timesteps = tau;
    s.mec = tau == 0 ? 0 : mec(p);
    s.total_loss_kwh = energy(p.objective, dt);
    s.network_loss_kwh = energy(p.ntwk_loss, dt);
    s.converter_loss_kwh = energy(p.conv_loss, dt);
    s.baseline_loss_kwh = baseline_kwh;
    s.loss_reduction_kwh = baseline_kwh - s.total_loss_kwh;
    if (ref_reduction != 0.0) s.fraction_of_reference = s.loss_reduction_kwh / ref_reduction;
    s.ec_histogram.assign(p.m + 1, 0);
    for (int ec : p.ec_series) ++s.ec_histogram[static_cast<std::size_t>(ec)];
    s.zero_ec_count = s.ec_histogram[0];
    s.zero_ec_fraction = tau == 0 ? 0.0 : static_cast<double>(s.zero_ec_count) / static_cast<double>(tau);
    for (std::size_t t = 0; t < tau; ++t) {
      if (!detail::is_feasible_status(p.status[t])) ++s.infeasible_count;
      if (std::isfinite(p.relaxation_gap[t])) {
        s.max_relaxation_gap = std::max(s.max_relaxation_gap, p.relaxation_gap[t]);
      }
    }
    rep.runs.push_back(std::move(s));

    std::vector<double> frac(tau, std::numeric_limits<double>::quiet_NaN());
    for (std::size_t t = 0; t < tau; ++t) {
      const double denom = baseline_kw[t] - profiles[ref].objective[t];
      if (std::abs(denom) > 1e-12) frac[t] = (baseline_kw[t] - p.objective[t]) / denom;
    }
    rep.fraction_series.push_back(std::move(frac));
  }
  return rep;
}

}  // namespace mpcard
