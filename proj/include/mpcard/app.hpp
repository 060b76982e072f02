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

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "mpcard/config.hpp"
#include "mpcard/error.hpp"
#include "mpcard/grid.hpp"
#include "mpcard/ir_json.hpp"
#include "mpcard/mip.hpp"
#include "mpcard/mission.hpp"
#include "mpcard/network.hpp"
#include "mpcard/oracle.hpp"
#include "mpcard/profiles.hpp"
#include "mpcard/program.hpp"
#include "mpcard/solver.hpp"
#include "mpcard/svg.hpp"

namespace mpcard::app {

namespace fs = std::filesystem;

// Command-line overrides applied on top of the JSON config.
struct Overrides {
  std::optional<std::string> network, profiles, out, cardinality;
  std::optional<double> s_total_kva, k, v_min, v_max, rel_gap, abs_gap;
  std::optional<long> node_limit;
  std::optional<int> jobs;
  std::optional<std::uint64_t> seed;
  bool dump_ir = false, solver_trace = false, mip_trace = false;
};

inline void apply(RunConfig& cfg, const Overrides& o) {
  if (o.network) cfg.network_path = *o.network;
  if (o.profiles) cfg.profiles_path = *o.profiles;
  if (o.out) cfg.out_dir = *o.out;
  if (o.cardinality) cfg.cardinality = parse_cardinality_list(*o.cardinality);
  if (o.s_total_kva) cfg.s_total_kva = *o.s_total_kva;
  if (o.k) cfg.k = *o.k;
  if (o.v_min) cfg.v_min = *o.v_min;
  if (o.v_max) cfg.v_max = *o.v_max;
  if (o.rel_gap) cfg.mip.rel_gap = *o.rel_gap;
  if (o.abs_gap) cfg.mip.abs_gap = *o.abs_gap;
  if (o.node_limit) cfg.mip.node_limit = *o.node_limit;
  if (o.jobs) cfg.jobs = *o.jobs;
  if (o.seed) cfg.synthetic.seed = *o.seed;
  cfg.dump_ir = cfg.dump_ir || o.dump_ir;
  cfg.solver_trace = cfg.solver_trace || o.solver_trace;
  cfg.mip_trace = cfg.mip_trace || o.mip_trace;
}

// Everything a command needs, built once from the config.
struct Study {
  BusNetwork net;
  LinearizedGrid grid;
  ConverterSpec conv;
  ProfileTable profiles;
  HorizonInput horizon;
};

inline ProfileTable study_profiles(const RunConfig& cfg) {
  if (cfg.profiles_path) return load_profiles_csv(*cfg.profiles_path);
  std::vector<std::pair<std::string, ProfileKind>> cols;
  for (const LoadConfig& l : cfg.loads) cols.emplace_back(l.bus, parse_profile_kind(l.kind));
  for (const DerConfig& d : cfg.ders) cols.emplace_back(d.id, parse_profile_kind(d.kind));
  return synthetic_profiles(cfg.synthetic, cols);
}

inline Study prepare(const RunConfig& cfg) {
  if (!fs::exists(cfg.network_path)) {
    throw ValidationError("network file '" + cfg.network_path + "' not found");
  }
  BusNetwork net = load_network(cfg.network_path);
  cfg.validate(net);
  LinearizedGrid grid(net, cfg.pcc_buses);
  const double base = net.s_base_kva();
  ConverterSpec conv{cfg.pcc_buses, cfg.k, cfg.s_total_kva / base, cfg.has_dc_der()};
  ProfileTable profiles = study_profiles(cfg);

  HorizonInput h;
  h.s_base_kva = base;
  h.timestep_hours = cfg.timestep_hours;
  h.v_min = cfg.v_min;
  h.v_max = cfg.v_max;
  h.monitored = cfg.monitored;
  auto use = [&](const std::string& id) {
    auto it = profiles.columns.find(id);
    if (it == profiles.columns.end()) throw ValidationError("profiles have no column '" + id + "'");
    h.series[id] = it->second;
  };
  for (const LoadConfig& l : cfg.loads) {
    h.loads.push_back({l.bus, l.p_kw, l.q_kvar, l.bus});
    use(l.bus);
  }
  for (const DerConfig& d : cfg.ders) {
    h.ders.push_back({d.id, d.bus == "dc" ? std::string() : d.bus, d.peak_kw, d.id});
    use(d.id);
  }
  if (h.series.empty()) {
    throw ValidationError("config has no loads or DERs, so the horizon is empty");
  }
  h.validate(grid);
  return {std::move(net), std::move(grid), std::move(conv), std::move(profiles), std::move(h)};
}

// ---------------------------------------------------------------------------
// Writers

inline std::string fmt(double v) { return detail::format_double(v); }

inline void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write '" + path.string() + "'");
  out << text;
}

inline std::string mission_csv(const MissionProfile& p) {
  std::ostringstream out;
  out << "t";
  for (const char* col : {"P_c_", "Q_c_", "S_c_"}) {
    for (std::size_t i = 0; i < p.m; ++i) out << ',' << col << i + 1;
  }
  out << ",EC,status,obj,ntwk_loss,conv_loss\n";
  for (std::size_t t = 0; t < p.length(); ++t) {
    const auto r = static_cast<Eigen::Index>(t);
    out << t;
    for (const MatrixXd* mat : {&p.p_mp, &p.q_mp, &p.s_mp}) {
      for (Eigen::Index i = 0; i < mat->cols(); ++i) out << ',' << fmt((*mat)(r, i));
    }
    out << ',' << p.ec_series[t] << ',' << p.status[t] << ',' << fmt(p.objective[t]) << ','
        << fmt(p.ntwk_loss[t]) << ',' << fmt(p.conv_loss[t]) << '\n';
  }
  return out.str();
}

inline nlohmann::json summary_json(const RunSummary& s, const SummaryReport& rep,
                                   const MissionProfile& p) {
  nlohmann::json j;
  j["label"] = s.label;
  j["reference"] = rep.reference;
  j["timesteps"] = s.timesteps;
  j["timestep_hours"] = p.timestep_hours;
  j["s_total_kva"] = p.s_total_kva;
  j["ec_tolerance_kva"] = ec_tolerance(p.s_total_kva);
  j["mec"] = s.mec;
  j["total_loss_kwh"] = s.total_loss_kwh;
  j["network_loss_kwh"] = s.network_loss_kwh;
  j["converter_loss_kwh"] = s.converter_loss_kwh;
  j["baseline_loss_kwh"] = s.baseline_loss_kwh;
  j["loss_reduction_kwh"] = s.loss_reduction_kwh;
  j["fraction_of_reference_reduction"] =
      s.fraction_of_reference ? nlohmann::json(*s.fraction_of_reference) : nlohmann::json(nullptr);
  j["ec_histogram"] = s.ec_histogram;
  j["zero_ec_count"] = s.zero_ec_count;
  j["zero_ec_fraction"] = s.zero_ec_fraction;
  j["infeasible_count"] = s.infeasible_count;
  j["max_relaxation_gap"] = s.max_relaxation_gap;
  std::map<std::string, int> statuses;
  for (const std::string& st : p.status) ++statuses[st];
  j["status_counts"] = statuses;
  return j;
}

inline std::string solver_trace_csv(const MissionProfile& p) {
  std::ostringstream out;
  out << "t,iteration,pcost,dcost,gap,primal_residual,dual_residual,step,sigma\n";
  for (std::size_t t = 0; t < p.solver_traces.size(); ++t) {
    for (const IterationRecord& r : p.solver_traces[t]) {
      out << t << ',' << r.iteration << ',' << fmt(r.pcost) << ',' << fmt(r.dcost) << ','
          << fmt(r.gap) << ',' << fmt(r.primal_residual) << ',' << fmt(r.dual_residual) << ','
          << fmt(r.step) << ',' << fmt(r.sigma) << '\n';
    }
  }
  return out.str();
}

inline std::string mip_trace_csv(const MissionProfile& p) {
  std::ostringstream out;
  out << "t,node,depth,bound,incumbent,branch_binary,outcome\n";
  for (std::size_t t = 0; t < p.mip_traces.size(); ++t) {
    for (const MipNodeRecord& r : p.mip_traces[t]) {
      out << t << ',' << r.node << ',' << r.depth << ',' << fmt(r.bound) << ','
          << fmt(r.incumbent) << ',' << r.branch_binary << ',' << r.outcome << '\n';
    }
  }
  return out.str();
}

inline std::vector<double> hours(const MissionProfile& p) {
  std::vector<double> x(p.length());
  for (std::size_t t = 0; t < x.size(); ++t) x[t] = static_cast<double>(t) * p.timestep_hours;
  return x;
}

inline void write_plots(const fs::path& dir, const std::vector<MissionProfile>& runs,
                        const SummaryReport& rep) {
  for (const MissionProfile& p : runs) {
    const std::vector<double> x = hours(p);
    std::vector<svg::Series> power;
    for (Eigen::Index i = 0; i < p.p_mp.cols(); ++i) {
      const auto col = [&](const MatrixXd& mat) {
        return std::vector<double>(mat.col(i).data(), mat.col(i).data() + mat.rows());
      };
      power.push_back({"P" + std::to_string(i + 1) + " (kW)", x, col(p.p_mp)});
      power.push_back({"Q" + std::to_string(i + 1) + " (kvar)", x, col(p.q_mp)});
    }
    write_file(dir / ("power_" + p.label + ".svg"),
               svg::line_plot("Terminal power transfers, " + p.label, "time (h)", "kW / kvar", power));
    std::vector<double> ec(p.ec_series.begin(), p.ec_series.end());
    write_file(dir / ("ec_" + p.label + ".svg"),
               svg::line_plot("Electrical cardinality, " + p.label, "time (h)", "EC",
                              {{"EC", x, ec, true}}));
  }
  if (runs.empty()) return;
  const std::vector<double> x = hours(runs.front());
  std::vector<svg::Series> frac, hist;
  std::vector<std::string> cats;
  for (std::size_t e = 0; e <= runs.front().m; ++e) cats.push_back(std::to_string(e));
  for (std::size_t r = 0; r < runs.size(); ++r) {
    frac.push_back({runs[r].label, x, rep.fraction_series[r]});
    std::vector<double> h(rep.runs[r].ec_histogram.begin(), rep.runs[r].ec_histogram.end());
    hist.push_back({runs[r].label, {}, h});
  }
  write_file(dir / "loss_reduction_fraction.svg",
             svg::line_plot("Fraction of " + rep.reference + " loss reduction", "time (h)",
                            "fraction", frac));
  write_file(dir / "ec_histogram.svg",
             svg::bar_plot("Distribution of electrical cardinality", "EC", "timesteps", cats, hist));
}

// ---------------------------------------------------------------------------
// Commands. Each returns the process exit code; validation errors propagate
// as exceptions and are mapped to exit code 2 by the caller.

inline int run(const RunConfig& cfg, std::ostream& log) {
  const Study st = prepare(cfg);
  if (cfg.cardinality.empty()) {
    log << "warning: cardinality list is empty, nothing to run\n";
    return 0;
  }
  const fs::path dir(cfg.out_dir);
  fs::create_directories(dir);
  {
    std::ostringstream prof;
    ProfileTable used;
    for (const auto& [id, series] : st.horizon.series) {
      used.ids.push_back(id);
      used.columns[id] = series;
    }
    write_profiles_csv(prof, used);
    write_file(dir / "profiles_used.csv", prof.str());
  }

  ScheduleOptions opts;
  opts.jobs = cfg.jobs;
  opts.solver = cfg.solver;
  opts.keep_ir = cfg.dump_ir;
  opts.keep_solver_trace = cfg.solver_trace;
  opts.keep_mip_trace = cfg.mip_trace;

  std::vector<MissionProfile> runs;
  for (const Cardinality& c : cfg.cardinality) {
    HorizonInput h = st.horizon;
    h.cardinality = c;
    runs.push_back(schedule_horizon(st.grid, st.conv, h, cfg.mip, opts));
    log << "solved " << c.label() << ": " << runs.back().length() << " timesteps, MEC "
        << runs.back().mec << "\n";
  }
  const SummaryReport rep = summarize(runs, runs.front().baseline_loss);

  for (std::size_t r = 0; r < runs.size(); ++r) {
    const MissionProfile& p = runs[r];
    write_file(dir / ("mission_" + p.label + ".csv"), mission_csv(p));
    write_file(dir / ("summary_" + p.label + ".json"),
               summary_json(rep.runs[r], rep, p).dump(2) + "\n");
    if (cfg.dump_ir) {
      const fs::path ir_dir = dir / ("ir_" + p.label);
      fs::create_directories(ir_dir);
      for (std::size_t t = 0; t < p.ir_dumps.size(); ++t) {
        write_file(ir_dir / ("t" + std::to_string(t) + ".json"), p.ir_dumps[t]);
      }
    }
    if (cfg.solver_trace) write_file(dir / ("solver_trace_" + p.label + ".csv"), solver_trace_csv(p));
    if (cfg.mip_trace) write_file(dir / ("mip_trace_" + p.label + ".csv"), mip_trace_csv(p));
    const RunSummary& s = rep.runs[r];
    log << p.label << ": total loss " << fmt(s.total_loss_kwh) << " kWh, reduction "
        << fmt(s.loss_reduction_kwh) << " kWh";
    if (s.fraction_of_reference) log << " (" << fmt(*s.fraction_of_reference) << " of " << rep.reference << ")";
    log << ", zero-EC periods " << s.zero_ec_count << ", infeasible " << s.infeasible_count << "\n";
  }
  write_plots(dir, runs, rep);
  return 0;
}

// Linearisation about the no-load point, one CSV per quantity.
inline void write_linearization(const Study& st, const fs::path& dir) {
  fs::create_directories(dir);
  const std::size_t m = st.grid.terminal_count();
  std::vector<std::string> xs;
  for (const char* pre : {"P_", "Q_"}) {
    for (std::size_t i = 0; i < m; ++i) xs.push_back(pre + st.grid.pcc_buses()[i]);
  }
  auto header = [&](const char* first) {
    std::string h = first;
    for (const std::string& x : xs) h += "," + x;
    return h + "\n";
  };
  std::string k = header("bus"), b = "bus,b\n", lam = header("x"), lin = "x,lambda\n";
  for (std::size_t r = 0; r < st.grid.bus_ids().size(); ++r) {
    const auto row = static_cast<Eigen::Index>(r);
    k += st.grid.bus_ids()[r];
    for (Eigen::Index c = 0; c < st.grid.K().cols(); ++c) k += "," + fmt(st.grid.K()(row, c));
    k += "\n";
    b += st.grid.bus_ids()[r] + "," + fmt(st.grid.b()(row)) + "\n";
  }
  for (std::size_t r = 0; r < xs.size(); ++r) {
    const auto row = static_cast<Eigen::Index>(r);
    lam += xs[r];
    for (Eigen::Index c = 0; c < st.grid.loss().Lambda.cols(); ++c) {
      lam += "," + fmt(st.grid.loss().Lambda(row, c));
    }
    lam += "\n";
    lin += xs[r] + "," + fmt(st.grid.loss().lambda(row)) + "\n";
  }
  write_file(dir / "K.csv", k);
  write_file(dir / "b.csv", b);
  write_file(dir / "Lambda.csv", lam);
  write_file(dir / "lambda.csv", lin);
  write_file(dir / "sigma.csv", "sigma\n" + fmt(st.grid.loss().sigma) + "\n");
}

inline int linearize(const RunConfig& cfg, std::ostream& log) {
  const Study st = prepare(cfg);
  const fs::path dir = fs::path(cfg.out_dir) / "linearization";
  write_linearization(st, dir);
  log << "wrote linearization for " << st.grid.terminal_count() << " terminals to " << dir.string()
      << "\n";
  return 0;
}

// Reads a square matrix written by write_linearization (first column and
// header row are labels).
inline MatrixXd read_labelled_matrix(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open '" + path.string() + "'");
  std::string line;
  std::getline(in, line);
  const std::size_t cols = detail::split_csv(line).size() - 1;
  std::vector<std::vector<double>> rows;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto cells = detail::split_csv(line);
    const std::string locus = path.string() + ":" + std::to_string(lineno);
    if (cells.size() != cols + 1) throw ParseError(locus, "wrong number of cells");
    std::vector<double> r;
    for (std::size_t c = 1; c < cells.size(); ++c) r.push_back(detail::parse_number(cells[c], locus));
    rows.push_back(std::move(r));
  }
  MatrixXd out(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      out(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
    }
  }
  return out;
}

struct CheckRow {
  std::string check;
  std::string instance;
  double value = 0.0;
  double threshold = 0.0;
  bool pass = false;
};

// Timesteps sampled evenly across the horizon.
inline std::vector<std::size_t> sample_timesteps(std::size_t tau, int samples) {
  std::vector<std::size_t> out;
  const auto s = static_cast<std::size_t>(std::max(1, samples));
  for (std::size_t i = 0; i < std::min(s, tau); ++i) {
    const std::size_t t = (2 * i + 1) * tau / (2 * std::min(s, tau));
    if (out.empty() || out.back() != t) out.push_back(t);
  }
  return out;
}

inline std::vector<CheckRow> verify_checks(const RunConfig& cfg, const Study& st) {
  std::vector<CheckRow> rows;
  const VerifyConfig& vc = cfg.verify;

  const LinearizationCheck lc = check_linearization(st.net, st.grid, vc.fd_step);
  rows.push_back({"fd_K", "no-load", lc.k_error, vc.fd_tolerance, lc.k_error <= vc.fd_tolerance});
  rows.push_back({"fd_lambda", "no-load", lc.lambda_error, vc.fd_tolerance,
                  lc.lambda_error <= vc.fd_tolerance});
  rows.push_back({"lambda_psd", "no-load", lc.min_eigenvalue, -1e-9, lc.min_eigenvalue >= -1e-9});

  if (vc.linearization_dir) {
    const MatrixXd lam = read_labelled_matrix(fs::path(*vc.linearization_dir) / "Lambda.csv");
    const MatrixXd& ref = st.grid.loss().Lambda;
    double min_eig = -std::numeric_limits<double>::infinity();
    double diff = std::numeric_limits<double>::infinity();
    if (lam.rows() == lam.cols() && lam.rows() == ref.rows()) {
      Eigen::SelfAdjointEigenSolver<MatrixXd> eig(0.5 * (lam + lam.transpose()));
      min_eig = eig.eigenvalues().minCoeff();
      diff = (lam - ref).cwiseAbs().maxCoeff() / std::max(1.0, ref.cwiseAbs().maxCoeff());
    }
    rows.push_back({"dumped_lambda_psd", *vc.linearization_dir, min_eig, -1e-9, min_eig >= -1e-9});
    rows.push_back({"dumped_lambda_match", *vc.linearization_dir, diff, 1e-9, diff <= 1e-9});
  }

  const int m = static_cast<int>(st.conv.m());
  for (std::size_t t : sample_timesteps(st.horizon.length(), vc.samples)) {
    TimestepInput ts;
    ts.background_injections = st.horizon.background(t, st.grid);
    ts.p_der = st.horizon.p_der(t);
    ts.v_min = st.horizon.v_min;
    ts.v_max = st.horizon.v_max;
    ts.monitored_buses = st.horizon.monitored;
    const std::string where = "t=" + std::to_string(t);

    ts.cardinality = Cardinality::unconstrained();
    const ConicProgramIR free_ir = build_timestep_program(st.grid, st.conv, ts);
    const ConicSolution free_sol = SocpSolver(cfg.solver).solve(free_ir, BinaryDomain{});
    if (free_sol.optimal()) {
      const double gap = check_relaxation_tightness(free_ir, free_sol);
      rows.push_back({"relaxation_tightness", where + " unconstrained", gap, vc.tightness_tolerance,
                      gap <= vc.tightness_tolerance});
      if (m == 2) {
        const GridSearchResult gs = grid_search_continuous(free_ir, vc.grid_resolution);
        const double d = gs.feasible ? std::abs(gs.objective - free_sol.objective)
                                     : std::numeric_limits<double>::infinity();
        rows.push_back({"grid_search", where, d, vc.grid_tolerance, d <= vc.grid_tolerance});
      }
    }

    double prev = std::numeric_limits<double>::infinity();
    for (int n = 0; n <= m; ++n) {
      ts.cardinality = Cardinality::at_most(n);
      const ConicProgramIR ir = build_timestep_program(st.grid, st.conv, ts);
      const MipSolution mip = solve_misocp(ir, cfg.mip, cfg.solver);
      const EnumerationResult en = enumerate_supports(ir, n, cfg.solver);
      const std::string inst = where + " n=" + std::to_string(n);
      const bool both_infeasible = !mip.has_incumbent() && !en.best.optimal();
      const double tol = std::max(1e-8, 1e-4 * std::abs(en.objective));
      double d = both_infeasible ? 0.0 : std::abs(mip.objective() - en.objective);
      if (!both_infeasible && (!mip.has_incumbent() || !en.best.optimal())) {
        d = std::numeric_limits<double>::infinity();
      }
      rows.push_back({"oracle_enumeration", inst, d, tol, d <= tol});
      if (mip.has_incumbent()) {
        const double gap = check_relaxation_tightness(ir, mip.incumbent);
        rows.push_back({"relaxation_tightness", inst, gap, vc.tightness_tolerance,
                        gap <= vc.tightness_tolerance});
        const double slack = mip.objective() - prev;
        const double mtol = std::max(cfg.mip.abs_gap, cfg.mip.rel_gap * std::abs(prev));
        if (std::isfinite(prev)) {
          rows.push_back({"monotone_in_n", inst, slack, mtol, slack <= mtol});
        }
        prev = mip.objective();
      }
    }
  }
  return rows;
}

inline int verify(const RunConfig& cfg, std::ostream& log) {
  const Study st = prepare(cfg);
  const std::vector<CheckRow> rows = verify_checks(cfg, st);
  std::ostringstream csv;
  csv << "check,instance,value,threshold,result\n";
  bool ok = true;
  for (const CheckRow& r : rows) {
    csv << r.check << ',' << r.instance << ',' << fmt(r.value) << ',' << fmt(r.threshold) << ','
        << (r.pass ? "pass" : "fail") << '\n';
    ok = ok && r.pass;
  }
  fs::create_directories(cfg.out_dir);
  write_file(fs::path(cfg.out_dir) / "verify.csv", csv.str());
  log << csv.str();
  log << (ok ? "verify: all checks passed\n" : "verify: FAILED\n");
  return ok ? 0 : 1;
}

// EC and MEC recomputed from the S_c columns of a mission-profile CSV.
inline int ec(const std::string& csv_path, double s_total_kva, std::ostream& log) {
  if (!(s_total_kva > 0.0)) throw ValidationError("ec needs a positive --s-total");
  std::ifstream in(csv_path);
  if (!in) throw ValidationError("cannot open mission profile '" + csv_path + "'");
  std::string line;
  if (!std::getline(in, line)) throw ParseError(csv_path + ":1", "empty file");
  const auto header = detail::split_csv(line);
  std::vector<std::size_t> s_cols;
  for (std::size_t c = 0; c < header.size(); ++c) {
    if (header[c].rfind("S_c_", 0) == 0) s_cols.push_back(c);
  }
  if (s_cols.empty()) throw ParseError(csv_path + ":1", "no S_c_ columns");
  const double eps = ec_tolerance(s_total_kva);
  log << "t,EC\n";
  int best = 0;
  std::size_t lineno = 1, rows = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto cells = detail::split_csv(line);
    const std::string locus = csv_path + ":" + std::to_string(lineno);
    if (cells.size() != header.size()) throw ParseError(locus, "wrong number of cells");
    std::vector<double> s;
    for (std::size_t c : s_cols) s.push_back(detail::parse_number(cells[c], locus));
    const int e = electrical_cardinality(s, eps);
    best = std::max(best, e);
    log << cells[0] << ',' << e << '\n';
    ++rows;
  }
  if (rows == 0) throw ValidationError("mission profile has no rows");
  log << "MEC," << best << '\n';
  return 0;
}

}  // namespace mpcard::app
