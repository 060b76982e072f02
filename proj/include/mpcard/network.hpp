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

#include <complex>
#include <fstream>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "json.hpp"
#include "mpcard/error.hpp"

namespace mpcard {

using Complex = std::complex<double>;

enum class BusKind { kSlack, kLoad };

struct Bus {
  std::string id;
  BusKind kind = BusKind::kLoad;
};

// Pi-model branch; `shunt_susceptance` is the total line charging, split
// equally between both ends.
struct Branch {
  std::string from_bus;
  std::string to_bus;
  double series_resistance = 0.0;
  double series_reactance = 0.0;
  double shunt_susceptance = 0.0;
};

// Raw single-phase equivalent network in per unit. Construct through
// `BusNetwork::Create` or `load_network` so the invariants hold.
class BusNetwork {
 public:
  static BusNetwork Create(std::vector<Bus> buses, std::vector<Branch> branches,
                           Complex slack_voltage = {1.0, 0.0},
                           double s_base_kva = 1000.0);

  const std::vector<Bus>& buses() const { return buses_; }
  const std::vector<Branch>& branches() const { return branches_; }
  Complex slack_voltage() const { return slack_voltage_; }
  double s_base_kva() const { return s_base_kva_; }
  std::size_t size() const { return buses_.size(); }

  // Internal ordering puts the slack bus at index 0; non-slack buses keep
  // their document order.
  std::size_t index_of(const std::string& id) const;
  bool contains(const std::string& id) const { return index_.count(id) > 0; }

  // Index among the non-slack buses (index_of(id) - 1).
  std::size_t load_index_of(const std::string& id) const;

  std::vector<std::string> load_bus_ids() const;

 private:
  BusNetwork() = default;

  std::vector<Bus> buses_;
  std::vector<Branch> branches_;
  Complex slack_voltage_{1.0, 0.0};
  double s_base_kva_ = 1000.0;
  std::unordered_map<std::string, std::size_t> index_;
};

inline BusNetwork BusNetwork::Create(std::vector<Bus> buses,
                                     std::vector<Branch> branches,
                                     Complex slack_voltage, double s_base_kva) {
  if (!(s_base_kva > 0.0)) throw ModelError("s_base_kva must be positive");
  if (buses.size() < 2) throw ModelError("network needs at least two buses");

  BusNetwork net;
  net.slack_voltage_ = slack_voltage;
  net.s_base_kva_ = s_base_kva;

  std::optional<std::size_t> slack;
  for (std::size_t i = 0; i < buses.size(); ++i) {
    if (buses[i].kind == BusKind::kSlack) {
      if (slack) throw ModelError("more than one slack bus");
      slack = i;
    }
  }
  if (!slack) throw ModelError("no slack bus");

  net.buses_.push_back(buses[*slack]);
  for (std::size_t i = 0; i < buses.size(); ++i) {
    if (i != *slack) net.buses_.push_back(buses[i]);
  }
  for (std::size_t i = 0; i < net.buses_.size(); ++i) {
    if (!net.index_.emplace(net.buses_[i].id, i).second) {
      throw ModelError("duplicate bus id '" + net.buses_[i].id + "'");
    }
  }

  for (const Branch& br : branches) {
    if (!net.contains(br.from_bus) || !net.contains(br.to_bus)) {
      throw ModelError("branch " + br.from_bus + "-" + br.to_bus +
                       " references an unknown bus");
    }
    if (br.from_bus == br.to_bus) {
      throw ModelError("branch " + br.from_bus + "-" + br.to_bus + " is a self loop");
    }
    if (br.series_resistance < 0.0) {
      throw ModelError("branch " + br.from_bus + "-" + br.to_bus +
                       " has negative resistance");
    }
  }
  net.branches_ = std::move(branches);

  // Connectivity from the slack bus.
  const std::size_t n = net.buses_.size();
  std::vector<std::vector<std::size_t>> adj(n);
  for (const Branch& br : net.branches_) {
    const std::size_t f = net.index_of(br.from_bus);
    const std::size_t t = net.index_of(br.to_bus);
    adj[f].push_back(t);
    adj[t].push_back(f);
  }
  std::vector<bool> seen(n, false);
  std::vector<std::size_t> stack{0};
  seen[0] = true;
  while (!stack.empty()) {
    const std::size_t u = stack.back();
    stack.pop_back();
    for (std::size_t v : adj[u]) {
      if (!seen[v]) {
        seen[v] = true;
        stack.push_back(v);
      }
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (!seen[i]) {
      throw ModelError("bus '" + net.buses_[i].id + "' is not connected to the slack bus");
    }
  }
  return net;
}

inline std::size_t BusNetwork::index_of(const std::string& id) const {
  auto it = index_.find(id);
  if (it == index_.end()) throw ModelError("unknown bus '" + id + "'");
  return it->second;
}

inline std::size_t BusNetwork::load_index_of(const std::string& id) const {
  const std::size_t i = index_of(id);
  if (i == 0) throw ModelError("bus '" + id + "' is the slack bus");
  return i - 1;
}

inline std::vector<std::string> BusNetwork::load_bus_ids() const {
  std::vector<std::string> ids;
  for (std::size_t i = 1; i < buses_.size(); ++i) ids.push_back(buses_[i].id);
  return ids;
}

// {"s_base_kva", "slack_voltage_pu": [re, im], "buses": [{"id", "kind"}],
//  "branches": [{"from", "to", "r_pu", "x_pu", "b_shunt_pu"}]}
inline BusNetwork network_from_json(const nlohmann::json& doc) {
  auto field = [](const nlohmann::json& obj, const char* key,
                  const std::string& where) -> const nlohmann::json& {
    if (!obj.is_object() || !obj.contains(key)) {
      throw ParseError(where, std::string("missing field '") + key + "'");
    }
    return obj.at(key);
  };
  try {
    const double s_base = field(doc, "s_base_kva", "network").get<double>();
    Complex slack{1.0, 0.0};
    if (doc.contains("slack_voltage_pu")) {
      const auto& v = doc.at("slack_voltage_pu");
      if (!v.is_array() || v.size() != 2) {
        throw ParseError("network.slack_voltage_pu", "expected [re, im]");
      }
      slack = {v[0].get<double>(), v[1].get<double>()};
    }
    std::vector<Bus> buses;
    const auto& jb = field(doc, "buses", "network");
    for (std::size_t i = 0; i < jb.size(); ++i) {
      const std::string where = "network.buses[" + std::to_string(i) + "]";
      Bus b;
      b.id = field(jb[i], "id", where).get<std::string>();
      const std::string kind = field(jb[i], "kind", where).get<std::string>();
      if (kind == "slack") {
        b.kind = BusKind::kSlack;
      } else if (kind == "load") {
        b.kind = BusKind::kLoad;
      } else {
        throw ParseError(where + ".kind", "expected \"slack\" or \"load\"");
      }
      buses.push_back(std::move(b));
    }
    std::vector<Branch> branches;
    const auto& jr = field(doc, "branches", "network");
    for (std::size_t i = 0; i < jr.size(); ++i) {
      const std::string where = "network.branches[" + std::to_string(i) + "]";
      Branch br;
      br.from_bus = field(jr[i], "from", where).get<std::string>();
      br.to_bus = field(jr[i], "to", where).get<std::string>();
      br.series_resistance = field(jr[i], "r_pu", where).get<double>();
      br.series_reactance = field(jr[i], "x_pu", where).get<double>();
      br.shunt_susceptance = jr[i].value("b_shunt_pu", 0.0);
      branches.push_back(std::move(br));
    }
    return BusNetwork::Create(std::move(buses), std::move(branches), slack, s_base);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("network", e.what());
  }
}

inline BusNetwork load_network(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError(path, "cannot open network file");
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path, e.what());
  }
  return network_from_json(doc);
}

}  // namespace mpcard
