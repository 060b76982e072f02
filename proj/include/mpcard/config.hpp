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

#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "mpcard/error.hpp"
#include "mpcard/mip.hpp"
#include "mpcard/network.hpp"
#include "mpcard/profiles.hpp"
#include "mpcard/program.hpp"
#include "mpcard/solver.hpp"

namespace mpcard {

struct LoadConfig {
  std::string bus;
  double p_kw = 0.0;
  double q_kvar = 0.0;
  std::string kind = "residential";
};

// A DER on bus "dc" sits on the converter's dc link.
struct DerConfig {
  std::string id;
  std::string bus;
  double peak_kw = 0.0;
  std::string kind = "solar";
};

struct VerifyConfig {
  int samples = 3;  // timesteps checked by the oracle suite
  double grid_resolution = 1e-3;
  double grid_tolerance = 1e-4;
  double fd_step = 1e-6;
  double fd_tolerance = 1e-5;
  double tightness_tolerance = 3e-5;
  std::optional<std::string> linearization_dir;
};

struct RunConfig {
  std::string network_path;
  std::optional<std::string> profiles_path;
  SyntheticSpec synthetic;
  std::vector<std::string> pcc_buses;
  double s_total_kva = 1000.0;
  double k = 0.01;
  std::vector<LoadConfig> loads;
  std::vector<DerConfig> ders;
  double v_min = 0.95;
  double v_max = 1.05;
  std::vector<std::string> monitored;
  std::vector<Cardinality> cardinality;
  double timestep_hours = 0.5;
  BnBConfig mip;
  SolverSettings solver;
  std::string out_dir = "out";
  int jobs = 1;
  bool dump_ir = false;
  bool solver_trace = false;
  bool mip_trace = false;
  VerifyConfig verify;

  bool has_dc_der() const {
    for (const DerConfig& d : ders) {
      if (d.bus == "dc") return true;
    }
    return false;
  }

  // Checks that every referenced bus exists and the cardinality list fits m.
  void validate(const BusNetwork& net) const {
    if (pcc_buses.size() < 2) throw ValidationError("converter needs at least two PCC buses");
    for (const std::string& b : pcc_buses) {
      if (!net.contains(b)) throw ValidationError("PCC bus '" + b + "' is not in the network");
      net.load_index_of(b);
    }
    for (const LoadConfig& l : loads) {
      if (!net.contains(l.bus)) throw ValidationError("load bus '" + l.bus + "' is not in the network");
      net.load_index_of(l.bus);
      parse_profile_kind(l.kind);
    }
    int dc = 0;
    for (const DerConfig& d : ders) {
      if (d.bus == "dc") {
        ++dc;
      } else if (!net.contains(d.bus)) {
        throw ValidationError("DER '" + d.id + "' bus '" + d.bus + "' is not in the network");
      } else {
        net.load_index_of(d.bus);
      }
      parse_profile_kind(d.kind);
    }
    if (dc > 1) throw ValidationError("at most one DER may sit on the dc link");
    for (const std::string& b : monitored) {
      if (!net.contains(b)) throw ValidationError("monitored bus '" + b + "' is not in the network");
    }
    for (const Cardinality& c : cardinality) {
      if (c.constrained() && static_cast<std::size_t>(c.limit()) > pcc_buses.size()) {
        throw ValidationError("cardinality " + std::to_string(c.limit()) + " exceeds m = " +
                              std::to_string(pcc_buses.size()));
      }
    }
    if (!(s_total_kva > 0.0)) throw ValidationError("s_total must be > 0");
    if (!(k >= 0.0 && k < 1.0)) throw ValidationError("loss coefficient must be in [0, 1)");
    if (!(v_min < v_max)) throw ValidationError("v_min must be below v_max");
    if (!(timestep_hours > 0.0)) throw ValidationError("timestep_hours must be > 0");
    if (jobs < 1) throw ValidationError("jobs must be >= 1");
    mip.validate();
  }
};

inline Cardinality parse_cardinality(const std::string& token) {
  if (token == "unconstrained") return Cardinality::unconstrained();
  std::size_t used = 0;
  int n = -1;
  try {
    n = std::stoi(token, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != token.size() || n < 0) {
    throw ValidationError("cardinality entry '" + token + "' must be a non-negative integer or 'unconstrained'");
  }
  return Cardinality::at_most(n);
}

// Comma-separated list, e.g. "1,2,unconstrained". Empty string gives an
// empty list.
inline std::vector<Cardinality> parse_cardinality_list(const std::string& list) {
  std::vector<Cardinality> out;
  for (const std::string& tok : detail::split_csv(list)) {
    if (!tok.empty()) out.push_back(parse_cardinality(tok));
  }
  return out;
}

namespace detail {

inline std::string resolve_path(const std::filesystem::path& base, const std::string& p) {
  const std::filesystem::path path(p);
  return (path.is_absolute() || base.empty() ? path : base / path).lexically_normal().string();
}

template <typename T>
T get_or(const nlohmann::json& j, const char* key, T fallback, const std::string& locus) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ParseError(locus + "." + key, "wrong type");
  }
}

}  // namespace detail

// Parses a run configuration. Relative paths resolve against `base_dir`.
inline RunConfig config_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir) {
  using detail::get_or;
  if (!j.is_object()) throw ParseError("config", "expected an object");
  RunConfig cfg;
  if (!j.contains("network")) throw ParseError("config.network", "missing");
  cfg.network_path = detail::resolve_path(base_dir, get_or<std::string>(j, "network", "", "config"));
  if (j.contains("profiles") && !j.at("profiles").is_null()) {
    cfg.profiles_path = detail::resolve_path(base_dir, get_or<std::string>(j, "profiles", "", "config"));
  }
  if (j.contains("synthetic")) {
    const auto& s = j.at("synthetic");
    cfg.synthetic.days = get_or<int>(s, "days", cfg.synthetic.days, "config.synthetic");
    cfg.synthetic.steps_per_day = get_or<int>(s, "steps_per_day", cfg.synthetic.steps_per_day, "config.synthetic");
    cfg.synthetic.seed = get_or<std::uint64_t>(s, "seed", cfg.synthetic.seed, "config.synthetic");
  }
  if (!j.contains("converter")) throw ParseError("config.converter", "missing");
  {
    const auto& c = j.at("converter");
    cfg.pcc_buses = get_or<std::vector<std::string>>(c, "pcc_buses", {}, "config.converter");
    cfg.s_total_kva = get_or<double>(c, "s_total_kva", cfg.s_total_kva, "config.converter");
    cfg.k = get_or<double>(c, "k", cfg.k, "config.converter");
  }
  if (j.contains("loads")) {
    const auto& loads = j.at("loads");
    if (!loads.is_object()) throw ParseError("config.loads", "expected an object keyed by bus id");
    for (const auto& [bus, v] : loads.items()) {
      const std::string locus = "config.loads." + bus;
      LoadConfig l;
      l.bus = bus;
      if (v.is_array() && v.size() == 2 && v[0].is_number() && v[1].is_number()) {
        l.p_kw = v[0].get<double>();
        l.q_kvar = v[1].get<double>();
      } else if (v.is_object()) {
        l.p_kw = get_or<double>(v, "p_kw", 0.0, locus);
        l.q_kvar = get_or<double>(v, "q_kvar", 0.0, locus);
        l.kind = get_or<std::string>(v, "kind", l.kind, locus);
      } else {
        throw ParseError(locus, "expected [p_kw, q_kvar] or an object");
      }
      cfg.loads.push_back(std::move(l));
    }
  }
  if (j.contains("ders")) {
    const auto& ders = j.at("ders");
    if (!ders.is_array()) throw ParseError("config.ders", "expected an array");
    for (std::size_t i = 0; i < ders.size(); ++i) {
      const std::string locus = "config.ders[" + std::to_string(i) + "]";
      DerConfig d;
      d.id = get_or<std::string>(ders[i], "id", "", locus);
      d.bus = get_or<std::string>(ders[i], "bus", "", locus);
      d.peak_kw = get_or<double>(ders[i], "peak_kw", 0.0, locus);
      d.kind = get_or<std::string>(ders[i], "kind", d.kind, locus);
      if (d.id.empty()) throw ParseError(locus + ".id", "missing");
      if (d.bus.empty()) throw ParseError(locus + ".bus", "missing");
      cfg.ders.push_back(std::move(d));
    }
  }
  if (j.contains("voltage")) {
    const auto& v = j.at("voltage");
    cfg.v_min = get_or<double>(v, "v_min", cfg.v_min, "config.voltage");
    cfg.v_max = get_or<double>(v, "v_max", cfg.v_max, "config.voltage");
    cfg.monitored = get_or<std::vector<std::string>>(v, "monitored", {}, "config.voltage");
  }
  if (j.contains("cardinality")) {
    const auto& list = j.at("cardinality");
    if (!list.is_array()) throw ParseError("config.cardinality", "expected an array");
    for (std::size_t i = 0; i < list.size(); ++i) {
      const std::string locus = "config.cardinality[" + std::to_string(i) + "]";
      if (list[i].is_number_integer()) {
        if (list[i].get<int>() < 0) throw ParseError(locus, "must be >= 0");
        cfg.cardinality.push_back(Cardinality::at_most(list[i].get<int>()));
      } else if (list[i].is_string() && list[i].get<std::string>() == "unconstrained") {
        cfg.cardinality.push_back(Cardinality::unconstrained());
      } else {
        throw ParseError(locus, "expected an integer or \"unconstrained\"");
      }
    }
  }
  cfg.timestep_hours = get_or<double>(j, "timestep_hours", cfg.timestep_hours, "config");
  if (j.contains("mip")) {
    const auto& m = j.at("mip");
    cfg.mip.rel_gap = get_or<double>(m, "rel_gap", cfg.mip.rel_gap, "config.mip");
    cfg.mip.abs_gap = get_or<double>(m, "abs_gap", cfg.mip.abs_gap, "config.mip");
    cfg.mip.node_limit = get_or<long>(m, "node_limit", cfg.mip.node_limit, "config.mip");
  }
  if (j.contains("solver")) {
    const auto& s = j.at("solver");
    cfg.solver.feastol = get_or<double>(s, "feastol", cfg.solver.feastol, "config.solver");
    cfg.solver.abstol = get_or<double>(s, "abstol", cfg.solver.abstol, "config.solver");
    cfg.solver.reltol = get_or<double>(s, "reltol", cfg.solver.reltol, "config.solver");
    cfg.solver.max_iterations = get_or<int>(s, "max_iterations", cfg.solver.max_iterations, "config.solver");
  }
  if (j.contains("out")) cfg.out_dir = detail::resolve_path(base_dir, get_or<std::string>(j, "out", "", "config"));
  cfg.jobs = get_or<int>(j, "jobs", cfg.jobs, "config");
  if (j.contains("verify")) {
    const auto& v = j.at("verify");
    cfg.verify.samples = get_or<int>(v, "samples", cfg.verify.samples, "config.verify");
    cfg.verify.grid_resolution = get_or<double>(v, "grid_resolution", cfg.verify.grid_resolution, "config.verify");
    if (v.contains("linearization_dir")) {
      cfg.verify.linearization_dir =
          detail::resolve_path(base_dir, get_or<std::string>(v, "linearization_dir", "", "config.verify"));
    }
  }
  return cfg;
}

inline RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open config file '" + path + "'");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(path, e.what());
  }
  return config_from_json(j, std::filesystem::path(path).parent_path());
}

}  // namespace mpcard
