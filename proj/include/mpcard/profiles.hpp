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
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <map>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "mpcard/error.hpp"

namespace mpcard {

// Normalised time series keyed by column id (bus id for loads, DER id for
// generators).
struct ProfileTable {
  std::vector<std::string> ids;  // column order
  std::map<std::string, std::vector<double>> columns;

  std::size_t length() const { return columns.empty() ? 0 : columns.begin()->second.size(); }
};

namespace detail {

inline std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) {
    while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ')) cell.pop_back();
    while (!cell.empty() && cell.front() == ' ') cell.erase(cell.begin());
    out.push_back(cell);
  }
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

inline double parse_number(const std::string& cell, const std::string& locus) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(cell, &used);
  } catch (const std::exception&) {
    throw ParseError(locus, "'" + cell + "' is not a number");
  }
  if (used != cell.size()) throw ParseError(locus, "'" + cell + "' is not a number");
  return v;
}

inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace detail

inline ProfileTable parse_profiles_csv(std::istream& in, const std::string& source = "profiles") {
  ProfileTable table;
  std::string line;
  if (!std::getline(in, line)) throw ParseError(source + ":1", "empty profiles file");
  const std::vector<std::string> header = detail::split_csv(line);
  if (header.empty() || header[0] != "timestep") {
    throw ParseError(source + ":1", "header must start with 'timestep'");
  }
  for (std::size_t c = 1; c < header.size(); ++c) {
    if (header[c].empty()) throw ParseError(source + ":1", "empty column name");
    if (table.columns.contains(header[c])) {
      throw ParseError(source + ":1", "duplicate column '" + header[c] + "'");
    }
    table.ids.push_back(header[c]);
    table.columns[header[c]];
  }
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    const std::vector<std::string> cells = detail::split_csv(line);
    const std::string locus = source + ":" + std::to_string(lineno);
    if (cells.size() != header.size()) {
      throw ParseError(locus, "expected " + std::to_string(header.size()) + " cells, got " +
                                  std::to_string(cells.size()));
    }
    for (std::size_t c = 1; c < cells.size(); ++c) {
      const double v = detail::parse_number(cells[c], locus);
      if (!(v >= 0.0)) throw ParseError(locus, "profile values must be >= 0");
      table.columns[header[c]].push_back(v);
    }
  }
  if (table.length() == 0) throw ParseError(source, "profiles file has no rows");
  return table;
}

inline ProfileTable load_profiles_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open profiles file '" + path + "'");
  return parse_profiles_csv(in, path);
}

inline void write_profiles_csv(std::ostream& out, const ProfileTable& table) {
  out << "timestep";
  for (const std::string& id : table.ids) out << ',' << id;
  out << '\n';
  for (std::size_t t = 0; t < table.length(); ++t) {
    out << t;
    for (const std::string& id : table.ids) out << ',' << detail::format_double(table.columns.at(id)[t]);
    out << '\n';
  }
}

enum class ProfileKind { kResidential, kCommercial, kSolar, kWind };

struct SyntheticSpec {
  int days = 7;
  int steps_per_day = 48;
  std::uint64_t seed = 1;
};

namespace detail {

// Gaussian bump on the 24 h circle.
inline double bump(double hour, double centre, double width) {
  double d = std::fmod(std::abs(hour - centre), 24.0);
  d = std::min(d, 24.0 - d);
  return std::exp(-0.5 * (d / width) * (d / width));
}

}  // namespace detail

// Seeded demand and renewable shapes. Demand follows a daily double peak
// (residential) or a daytime plateau (commercial) with a weekly and seasonal
// modulation; solar is a clear-sky arc scaled by a per-day clearness index;
// wind is a clipped AR(1) process. Columns are generated in `ids` order from a
// single generator, so the table is a pure function of (spec, ids, kinds).
inline ProfileTable synthetic_profiles(const SyntheticSpec& spec,
                                       const std::vector<std::pair<std::string, ProfileKind>>& cols) {
  if (spec.days < 1 || spec.steps_per_day < 1) {
    throw ValidationError("synthetic profiles need days >= 1 and steps_per_day >= 1");
  }
  const int tau = spec.days * spec.steps_per_day;
  std::mt19937_64 rng(spec.seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);

  ProfileTable table;
  for (const auto& [id, kind] : cols) {
    if (table.columns.contains(id)) throw ValidationError("duplicate profile id '" + id + "'");
    std::vector<double> v(static_cast<std::size_t>(tau));
    switch (kind) {
      case ProfileKind::kResidential:
      case ProfileKind::kCommercial: {
        const double scale = 0.85 + 0.2 * unif(rng);
        const double shift = 1.5 * (unif(rng) - 0.5);
        for (int t = 0; t < tau; ++t) {
          const int day = t / spec.steps_per_day;
          const double h = 24.0 * (t % spec.steps_per_day) / spec.steps_per_day + shift;
          const double season = 1.0 + 0.15 * std::cos(2.0 * std::numbers::pi * day / 365.0);
          const bool weekend = day % 7 >= 5;
          double base;
          if (kind == ProfileKind::kResidential) {
            base = 0.12 + 0.25 * detail::bump(h, 8.0, 1.5) + 0.65 * detail::bump(h, 19.0, 2.2);
            if (weekend) base *= 1.05;
          } else {
            base = 0.1 + 0.8 * detail::bump(h, 13.0, 3.0);
            if (weekend) base *= 0.6;
          }
          v[static_cast<std::size_t>(t)] = std::max(0.0, scale * season * base + 0.03 * gauss(rng));
        }
        break;
      }
      case ProfileKind::kSolar: {
        double clearness = 1.0;
        for (int t = 0; t < tau; ++t) {
          if (t % spec.steps_per_day == 0) clearness = 0.25 + 0.75 * unif(rng);
          const double h = 24.0 * (t % spec.steps_per_day) / spec.steps_per_day;
          const double arc = (h > 6.0 && h < 20.0) ? std::sin(std::numbers::pi * (h - 6.0) / 14.0) : 0.0;
          const double cloud = 1.0 - 0.25 * unif(rng) * (1.0 - clearness);
          v[static_cast<std::size_t>(t)] = std::clamp(arc * arc * clearness * cloud, 0.0, 1.0);
        }
        break;
      }
      case ProfileKind::kWind: {
        double w = 0.35;
        for (int t = 0; t < tau; ++t) {
          w = std::clamp(0.97 * w + 0.03 * 0.35 + 0.06 * gauss(rng), 0.0, 1.0);
          v[static_cast<std::size_t>(t)] = w;
        }
        break;
      }
    }
    table.ids.push_back(id);
    table.columns[id] = std::move(v);
  }
  return table;
}

inline ProfileKind parse_profile_kind(const std::string& s) {
  if (s == "residential") return ProfileKind::kResidential;
  if (s == "commercial") return ProfileKind::kCommercial;
  if (s == "solar") return ProfileKind::kSolar;
  if (s == "wind") return ProfileKind::kWind;
  throw ValidationError("unknown profile kind '" + s + "'");
}

}  // namespace mpcard
