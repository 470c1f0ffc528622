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

#include <algorithm>
#include <stdexcept>
#include <vector>

#include "riverguard/instance.hpp"
#include "riverguard/rng.hpp"

namespace riverguard {

/// Random river networks: a uniform-attachment tree whose edges carry
/// either a culvert (cheap, passable, fully repairable) or a dam
/// (expensive, nearly opaque, partially repairable).  All passage
/// intervals are a nominal point widened by the relative radius `beta`.
struct GeneratorConfig {
  int n = 22;
  double beta = 0.3;
  double reward_min = 1.0;
  double reward_max = 10.0;
  double culvert_fraction = 0.8;
  double budget_fraction = 0.1;
  std::uint64_t seed = 0;
  /// Cap on children per node; 0 leaves the attachment unconstrained.
  int max_children = 0;
  double culvert_cost = 100000.0;
  double dam_cost = 173030.0;
};

namespace detail {

inline Action widened(double center, double beta, double cost) {
  Action a;
  a.cost = cost;
  a.p_low = std::max(0.0, center * (1.0 - beta));
  a.p_high = std::min(1.0, center * (1.0 + beta));
  return a;
}

}  // namespace detail

inline NetworkInstance generate(const GeneratorConfig& cfg) {
  if (cfg.n < 1) throw std::invalid_argument("generate: n must be positive");
  if (cfg.beta < 0.0)
    throw std::invalid_argument("generate: beta must be nonnegative");
  if (cfg.culvert_fraction < 0.0 || cfg.culvert_fraction > 1.0)
    throw std::invalid_argument("generate: culvert fraction outside [0, 1]");
  if (cfg.budget_fraction < 0.0 || cfg.budget_fraction > 1.0)
    throw std::invalid_argument("generate: budget fraction outside [0, 1]");
  if (cfg.reward_min <= 0.0 || cfg.reward_min > cfg.reward_max)
    throw std::invalid_argument("generate: need 0 < reward_min <= reward_max");
  if (cfg.culvert_cost <= 0.0 || cfg.dam_cost <= 0.0)
    throw std::invalid_argument("generate: barrier costs must be positive");

  Rng rng(cfg.seed);
  NetworkInstance inst;
  inst.root = 0;

  // Tree shape first: node v attaches to a uniformly random earlier node,
  // skipping nodes already at the child cap.
  std::vector<NodeId> parent(static_cast<std::size_t>(cfg.n), -1);
  std::vector<int> fanout(static_cast<std::size_t>(cfg.n), 0);
  std::vector<NodeId> eligible{0};
  for (int v = 1; v < cfg.n; ++v) {
    const std::size_t at = static_cast<std::size_t>(
        rng.below(static_cast<std::uint64_t>(eligible.size())));
    const NodeId p = eligible[at];
    parent[static_cast<std::size_t>(v)] = p;
    if (cfg.max_children > 0 &&
        ++fanout[static_cast<std::size_t>(p)] >= cfg.max_children) {
      eligible[at] = eligible.back();
      eligible.pop_back();
    }
    eligible.push_back(v);
  }

  for (int v = 0; v < cfg.n; ++v) {
    Node node;
    node.id = v;
    node.reward = rng.uniform(cfg.reward_min, cfg.reward_max);
    inst.nodes.push_back(node);
  }

  double action_total = 0.0;
  for (int v = 1; v < cfg.n; ++v) {
    Edge e;
    e.parent = parent[static_cast<std::size_t>(v)];
    e.child = v;
    if (rng.uniform() < cfg.culvert_fraction) {
      const double p = rng.uniform(0.8, 0.9);
      e.actions.push_back(detail::widened(p, cfg.beta, 0.0));
      Action repair;
      repair.cost = cfg.culvert_cost;
      repair.p_low = 1.0;
      repair.p_high = 1.0;
      e.actions.push_back(repair);
    } else {
      const double p = rng.uniform(0.05, 0.2);
      e.actions.push_back(detail::widened(p, cfg.beta, 0.0));
      const double lifted = std::min(1.0, p + rng.uniform(0.5, 0.9));
      e.actions.push_back(detail::widened(lifted, cfg.beta, cfg.dam_cost));
    }
    for (const Action& a : e.actions) action_total += a.cost;
    inst.edges.push_back(e);
  }
  inst.budget = cfg.budget_fraction * action_total;
  return inst;
}

}  // namespace riverguard
