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

// Dispatches a four-terminal converter on the five-bus fixture for one
// timestep under each cardinality limit and prints the resulting transfers.
//
// Usage: single_timestep [path/to/five_bus.json]

#include <cstdio>
#include <string>
#include <vector>

#include "mpcard/grid.hpp"
#include "mpcard/mip.hpp"
#include "mpcard/mission.hpp"
#include "mpcard/program.hpp"

int main(int argc, char** argv) {
  using namespace mpcard;
  const std::string path = argc > 1 ? argv[1] : MPCARD_SAMPLE_NETWORK;
  const BusNetwork net = load_network(path);
  const std::vector<std::string> pcc{"a1", "a2", "b1", "b2"};
  const LinearizedGrid grid(net, pcc);
  const ConverterSpec conv{pcc, 0.01, 0.3, false};

  TimestepInput ts;
  ts.background_injections = VectorXcd::Zero(static_cast<Eigen::Index>(grid.bus_ids().size()));
  for (Eigen::Index i = 0; i < ts.background_injections.size(); ++i) {
    ts.background_injections(i) = grid.bus_ids()[static_cast<std::size_t>(i)][0] == 'a'
                                      ? Complex(-0.25, -0.08)
                                      : Complex(-0.03, -0.01);
  }

  for (int n = 0; n <= static_cast<int>(pcc.size()); ++n) {
    ts.cardinality = Cardinality::at_most(n);
    const ConicProgramIR ir = build_timestep_program(grid, conv, ts);
    const MipSolution sol = solve_misocp(ir);
    if (!sol.has_incumbent()) {
      std::printf("n=%d: %s\n", n, to_string(sol.status));
      continue;
    }
    std::vector<double> s(pcc.size());
    for (std::size_t i = 0; i < pcc.size(); ++i) {
      s[i] = sol.incumbent.value("S_c[" + std::to_string(i + 1) + "]");
    }
    std::printf("n=%d: loss %.6f pu, EC %d, S =", n, sol.objective(),
                electrical_cardinality(s, 1e-5 * conv.s_total));
    for (double v : s) std::printf(" %.4f", v);
    std::printf("  (%s)\n", to_string(sol.status));
  }
  return 0;
}
