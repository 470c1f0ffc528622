// Copyright 2026 The Riverguard Authors
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

#include <utility>
#include <vector>

#include "riverguard/adversary.hpp"
#include "riverguard/instance.hpp"
#include "riverguard/pareto.hpp"
#include "riverguard/rng.hpp"

namespace riverguard {

struct PointResult {
  Policy policy;
  double value = 0.0;
  double cost = 0.0;
};

/// Best policy for one fixed probability assignment: maximize expected
/// accessible reward subject to the budget.  Ties on value go to the
/// cheaper policy.
inline PointResult solve_point(const NetworkInstance& inst,
                               const ParamVector& params) {
  TreeView tv(inst);
  FrontierDp dp(tv, prob_table(tv, params), inst.budget);
  const auto& front = dp.frontier(tv.index_of(inst.root));
  const int entry = static_cast<int>(front.size()) - 1;
  PointResult res;
  res.value = front[static_cast<std::size_t>(entry)].value;
  res.cost = front[static_cast<std::size_t>(entry)].cost;
  dp.recover(tv.index_of(inst.root), entry, &res.policy);
  return res;
}

/// Point-optimal policy when every interval collapses to its midpoint.
inline PointResult midpoint_policy(const NetworkInstance& inst) {
  return solve_point(inst, midpoint_params(inst));
}

/// Point-optimal policy when every interval collapses to its lower bound.
inline PointResult worst_policy(const NetworkInstance& inst) {
  return solve_point(inst, lower_params(inst));
}

/// Feasible policy drawn at random: edges are visited in shuffled order
/// and each receives a uniformly random action still affordable at that
/// moment.  Deterministic in the seed.
inline Policy random_policy(const NetworkInstance& inst, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<std::size_t> order(inst.edges.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  for (std::size_t i = order.size(); i > 1; --i)
    std::swap(order[i - 1], order[static_cast<std::size_t>(
                                rng.below(static_cast<std::uint64_t>(i)))]);
  Policy pi;
  double remaining = inst.budget;
  for (std::size_t idx : order) {
    const Edge& e = inst.edges[idx];
    std::vector<int> affordable;
    for (int i = 0; i < static_cast<int>(e.actions.size()); ++i)
      if (within_budget(e.actions[static_cast<std::size_t>(i)].cost, remaining))
        affordable.push_back(i);
    const int pick = affordable[static_cast<std::size_t>(
        rng.below(static_cast<std::uint64_t>(affordable.size())))];
    pi.action[e.child] = pick;
    remaining -= e.actions[static_cast<std::size_t>(pick)].cost;
  }
  return pi;
}

struct RobustnessReport {
  double robust_ratio = 0.0;
  double regret = 0.0;
  AdversaryResult ratio_case;   // certificate attaining the ratio
  AdversaryResult regret_case;  // certificate attaining the regret
};

/// Worst-case quality of a fixed policy: its robust ratio and its regret,
/// each with the adversarial certificate.
inline RobustnessReport evaluate_robustness(
    const NetworkInstance& inst, const Policy& pi,
    const RoundingConfig& cfg = RoundingConfig::exact_mode()) {
  RobustnessReport rep;
  rep.ratio_case = solve_adversary(inst, pi, Objective::ratio, cfg);
  rep.regret_case = solve_adversary(inst, pi, Objective::regret, cfg);
  rep.robust_ratio = rep.ratio_case.value;
  rep.regret = rep.regret_case.value;
  return rep;
}

}  // namespace riverguard
