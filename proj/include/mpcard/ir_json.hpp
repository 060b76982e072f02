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

#include <string>
#include <unordered_map>

#include "json.hpp"
#include "mpcard/error.hpp"
#include "mpcard/program.hpp"

namespace mpcard {

namespace detail {

inline nlohmann::json terms_to_json(const ConicProgramIR& ir, const std::vector<LinearTerm>& terms) {
  nlohmann::json out = nlohmann::json::array();
  for (const LinearTerm& t : terms) {
    out.push_back({ir.variables[static_cast<std::size_t>(t.var)], t.coef});
  }
  return out;
}

inline nlohmann::json rows_to_json(const ConicProgramIR& ir, const std::vector<LinearRow>& rows) {
  nlohmann::json out = nlohmann::json::array();
  for (const LinearRow& r : rows) {
    out.push_back({{"name", r.name}, {"rhs", r.rhs}, {"terms", terms_to_json(ir, r.terms)}});
  }
  return out;
}

class IrReader {
 public:
  explicit IrReader(const nlohmann::json& doc) : doc_(doc) {}

  ConicProgramIR read() {
    if (!doc_.is_object()) throw ParseError("", "IR document must be a JSON object");
    ConicProgramIR ir;
    const auto& vars = section("variables");
    if (!vars.is_array()) throw ParseError("variables", "expected an array");
    for (std::size_t i = 0; i < vars.size(); ++i) {
      if (!vars[i].is_string()) {
        throw ParseError("variables[" + std::to_string(i) + "]", "expected a string");
      }
      const std::string name = vars[i].get<std::string>();
      if (!index_.emplace(name, static_cast<int>(i)).second) {
        throw ParseError("variables[" + std::to_string(i) + "]", "duplicate variable '" + name + "'");
      }
      ir.variables.push_back(name);
    }
    ir.equalities = rows("equalities");
    ir.inequalities = rows("inequalities");

    const auto& cones = section("soc_cones");
    if (!cones.is_array()) throw ParseError("soc_cones", "expected an array");
    for (std::size_t i = 0; i < cones.size(); ++i) {
      const std::string where = "soc_cones[" + std::to_string(i) + "]";
      SocCone c;
      c.name = string_field(cones[i], "name", where);
      c.head = var_ref(field(cones[i], "head", where), where + ".head");
      const auto& entries = field(cones[i], "entries", where);
      if (!entries.is_array()) throw ParseError(where + ".entries", "expected an array");
      for (std::size_t e = 0; e < entries.size(); ++e) {
        c.entries.push_back(affine(entries[e], where + ".entries[" + std::to_string(e) + "]"));
      }
      ir.soc_cones.push_back(std::move(c));
    }

    const auto& bins = section("binaries");
    if (!bins.is_array()) throw ParseError("binaries", "expected an array");
    for (std::size_t i = 0; i < bins.size(); ++i) {
      ir.binaries.push_back(var_ref(bins[i], "binaries[" + std::to_string(i) + "]"));
    }
    ir.objective = affine(section("objective"), "objective");
    ir.big_m = number(section("big_m"), "big_m");

    if (doc_.contains("loss_model")) {
      const auto& lm = doc_.at("loss_model");
      LossModelSection s;
      const auto& xs = field(lm, "x", "loss_model");
      for (std::size_t i = 0; i < xs.size(); ++i) {
        s.x.push_back(var_ref(xs[i], "loss_model.x[" + std::to_string(i) + "]"));
      }
      const auto n = static_cast<Eigen::Index>(s.x.size());
      const auto& lam = field(lm, "Lambda", "loss_model");
      if (!lam.is_array() || static_cast<Eigen::Index>(lam.size()) != n) {
        throw ParseError("loss_model.Lambda", "expected " + std::to_string(n) + " rows");
      }
      s.Lambda.resize(n, n);
      for (Eigen::Index r = 0; r < n; ++r) {
        const auto& row = lam[static_cast<std::size_t>(r)];
        const std::string where = "loss_model.Lambda[" + std::to_string(r) + "]";
        if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != n) {
          throw ParseError(where, "expected " + std::to_string(n) + " columns");
        }
        for (Eigen::Index c = 0; c < n; ++c) {
          s.Lambda(r, c) = number(row[static_cast<std::size_t>(c)], where);
        }
      }
      const auto& lv = field(lm, "lambda", "loss_model");
      if (!lv.is_array() || static_cast<Eigen::Index>(lv.size()) != n) {
        throw ParseError("loss_model.lambda", "expected " + std::to_string(n) + " entries");
      }
      s.lambda.resize(n);
      for (Eigen::Index r = 0; r < n; ++r) {
        s.lambda(r) = number(lv[static_cast<std::size_t>(r)], "loss_model.lambda");
      }
      s.sigma = number(field(lm, "sigma", "loss_model"), "loss_model.sigma");
      ir.loss_model = std::move(s);
    }
    return ir;
  }

 private:
  const nlohmann::json& section(const char* key) {
    if (!doc_.contains(key)) throw ParseError(key, "missing section");
    return doc_.at(key);
  }

  static const nlohmann::json& field(const nlohmann::json& obj, const char* key,
                                     const std::string& where) {
    if (!obj.is_object() || !obj.contains(key)) {
      throw ParseError(where, std::string("missing field '") + key + "'");
    }
    return obj.at(key);
  }

  static double number(const nlohmann::json& v, const std::string& where) {
    if (!v.is_number()) throw ParseError(where, "expected a number");
    return v.get<double>();
  }

  static std::string string_field(const nlohmann::json& obj, const char* key,
                                  const std::string& where) {
    const auto& v = field(obj, key, where);
    if (!v.is_string()) throw ParseError(where + "." + key, "expected a string");
    return v.get<std::string>();
  }

  int var_ref(const nlohmann::json& v, const std::string& where) const {
    if (!v.is_string()) throw ParseError(where, "expected a variable name");
    auto it = index_.find(v.get<std::string>());
    if (it == index_.end()) {
      throw ParseError(where, "unknown variable '" + v.get<std::string>() + "'");
    }
    return it->second;
  }

  std::vector<LinearTerm> terms(const nlohmann::json& v, const std::string& where) const {
    if (!v.is_array()) throw ParseError(where, "expected an array of [variable, coefficient]");
    std::vector<LinearTerm> out;
    for (std::size_t i = 0; i < v.size(); ++i) {
      const std::string at = where + "[" + std::to_string(i) + "]";
      if (!v[i].is_array() || v[i].size() != 2) {
        throw ParseError(at, "expected [variable, coefficient]");
      }
      out.push_back({var_ref(v[i][0], at), number(v[i][1], at)});
    }
    return out;
  }

  AffineExpr affine(const nlohmann::json& v, const std::string& where) const {
    AffineExpr e;
    e.terms = terms(field(v, "terms", where), where + ".terms");
    e.constant = number(field(v, "constant", where), where + ".constant");
    return e;
  }

  std::vector<LinearRow> rows(const char* key) {
    const auto& arr = section(key);
    if (!arr.is_array()) throw ParseError(key, "expected an array");
    std::vector<LinearRow> out;
    for (std::size_t i = 0; i < arr.size(); ++i) {
      const std::string where = std::string(key) + "[" + std::to_string(i) + "]";
      LinearRow r;
      r.name = string_field(arr[i], "name", where);
      r.terms = terms(field(arr[i], "terms", where), where + ".terms");
      r.rhs = number(field(arr[i], "rhs", where), where + ".rhs");
      out.push_back(std::move(r));
    }
    return out;
  }

  const nlohmann::json& doc_;
  std::unordered_map<std::string, int> index_;
};

}  // namespace detail

inline nlohmann::json ir_to_json(const ConicProgramIR& ir) {
  nlohmann::json doc;
  doc["variables"] = ir.variables;
  doc["equalities"] = detail::rows_to_json(ir, ir.equalities);
  doc["inequalities"] = detail::rows_to_json(ir, ir.inequalities);
  nlohmann::json cones = nlohmann::json::array();
  for (const SocCone& c : ir.soc_cones) {
    nlohmann::json entries = nlohmann::json::array();
    for (const AffineExpr& e : c.entries) {
      entries.push_back({{"constant", e.constant}, {"terms", detail::terms_to_json(ir, e.terms)}});
    }
    cones.push_back({{"name", c.name},
                     {"head", ir.variables[static_cast<std::size_t>(c.head)]},
                     {"entries", std::move(entries)}});
  }
  doc["soc_cones"] = std::move(cones);
  nlohmann::json bins = nlohmann::json::array();
  for (int b : ir.binaries) bins.push_back(ir.variables[static_cast<std::size_t>(b)]);
  doc["binaries"] = std::move(bins);
  doc["objective"] = {{"constant", ir.objective.constant},
                      {"terms", detail::terms_to_json(ir, ir.objective.terms)}};
  doc["big_m"] = ir.big_m;
  if (ir.loss_model) {
    const LossModelSection& lm = *ir.loss_model;
    nlohmann::json xs = nlohmann::json::array();
    for (int v : lm.x) xs.push_back(ir.variables[static_cast<std::size_t>(v)]);
    nlohmann::json lam = nlohmann::json::array();
    for (Eigen::Index r = 0; r < lm.Lambda.rows(); ++r) {
      nlohmann::json row = nlohmann::json::array();
      for (Eigen::Index c = 0; c < lm.Lambda.cols(); ++c) row.push_back(lm.Lambda(r, c));
      lam.push_back(std::move(row));
    }
    nlohmann::json lv = nlohmann::json::array();
    for (Eigen::Index r = 0; r < lm.lambda.size(); ++r) lv.push_back(lm.lambda(r));
    doc["loss_model"] = {{"x", std::move(xs)}, {"Lambda", std::move(lam)},
                         {"lambda", std::move(lv)}, {"sigma", lm.sigma}};
  }
  return doc;
}

// Canonical text: sorted keys, two-space indent, shortest round-trip doubles.
inline std::string serialize_ir(const ConicProgramIR& ir) { return ir_to_json(ir).dump(2) + "\n"; }

inline ConicProgramIR ir_from_json(const nlohmann::json& doc) { return detail::IrReader(doc).read(); }

inline ConicProgramIR parse_ir(const std::string& text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError("byte " + std::to_string(e.byte), e.what());
  }
  return ir_from_json(doc);
}

}  // namespace mpcard
