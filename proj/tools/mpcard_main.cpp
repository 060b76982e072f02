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

#include <exception>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "mpcard/app.hpp"

namespace {

struct Options {
  std::string config;
  std::string csv;
  mpcard::app::Overrides over;
};

void add_common(CLI::App* cmd, Options& o) {
  auto& v = o.over;
  cmd->add_option("--config", o.config, "Run configuration (JSON)");
  cmd->add_option("--network", v.network, "Network file, overrides the config");
  cmd->add_option("--profiles", v.profiles, "Profiles CSV, overrides synthetic profiles");
  cmd->add_option("--cardinality", v.cardinality, "Comma-separated list, e.g. 1,2,unconstrained");
  cmd->add_option("--s-total", v.s_total_kva, "Total converter capacity (kVA)");
  cmd->add_option("--loss-coeff", v.k, "Converter loss coefficient k");
  cmd->add_option("--vmin", v.v_min, "Lower voltage limit (pu)");
  cmd->add_option("--vmax", v.v_max, "Upper voltage limit (pu)");
  cmd->add_option("--out", v.out, "Output directory");
  cmd->add_option("--jobs", v.jobs, "Worker threads for timestep solves");
  cmd->add_option("--seed", v.seed, "Seed for synthetic profiles");
  cmd->add_flag("--dump-ir", v.dump_ir, "Write every timestep program as JSON");
  cmd->add_flag("--solver-trace", v.solver_trace, "Write interior-point iteration logs");
  cmd->add_flag("--mip-trace", v.mip_trace, "Write branch-and-bound node logs");
  cmd->add_option("--mip-rel-gap", v.rel_gap, "Relative integer gap");
  cmd->add_option("--mip-abs-gap", v.abs_gap, "Absolute integer gap");
  cmd->add_option("--node-limit", v.node_limit, "Branch-and-bound node limit");
}

mpcard::RunConfig resolve(const Options& o) {
  if (o.config.empty()) throw mpcard::ValidationError("--config is required");
  mpcard::RunConfig cfg = mpcard::load_config(o.config);
  mpcard::app::apply(cfg, o.over);
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App cli{"Cardinality-constrained scheduling of multiport converters"};
  cli.require_subcommand(1);
  Options o;
  CLI::App* run = cli.add_subcommand("run", "Schedule the horizon for every cardinality level");
  CLI::App* verify = cli.add_subcommand("verify", "Run the oracle and linearisation checks");
  CLI::App* linearize = cli.add_subcommand("linearize", "Dump K, b, Lambda, lambda and sigma as CSV");
  CLI::App* ec = cli.add_subcommand("ec", "EC and MEC of an existing mission-profile CSV");
  for (CLI::App* cmd : {run, verify, linearize}) add_common(cmd, o);
  ec->add_option("csv", o.csv, "Mission-profile CSV")->required();
  ec->add_option("--config", o.config, "Run configuration supplying s_total");
  ec->add_option("--s-total", o.over.s_total_kva, "Total converter capacity (kVA)");

  try {
    cli.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = cli.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (run->parsed()) return mpcard::app::run(resolve(o), std::cout);
    if (verify->parsed()) return mpcard::app::verify(resolve(o), std::cout);
    if (linearize->parsed()) return mpcard::app::linearize(resolve(o), std::cout);
    double s_total = 0.0;
    if (!o.config.empty()) s_total = mpcard::load_config(o.config).s_total_kva;
    if (o.over.s_total_kva) s_total = *o.over.s_total_kva;
    return mpcard::app::ec(o.csv, s_total, std::cout);
  } catch (const mpcard::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const mpcard::ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const mpcard::ModelError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 1;
  }
}
