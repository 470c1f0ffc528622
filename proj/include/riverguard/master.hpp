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
#include <limits>
#include <stdexcept>
#include <vector>

#include "riverguard/instance.hpp"
#include "riverguard/pareto.hpp"

namespace riverguard {

/// One adversarial counterexample: the rival policy, the probability
/// assignment, and the rival's value under it (kept as a constant so the
/// master problem stays linear in the decision).
struct Scenario {
  Policy policy;
  ParamVector params;
  double value = 0.0;
};

using ScenarioSet = std::vector<Scenario>;

struct MasterResult {
  Policy policy;
  /// Scenario-wise extremum at the returned policy: the smallest ratio
  /// z(pi)/z(rival) under the ratio objective, the largest difference
  /// z(rival) - z(pi) under regret.
  double value = 0.0;
  double cost = 0.0;
  std::vector<double> scenario_values;  // z(policy; params_k) per scenario
};

namespace detail {

/// Depth-first branch and bound over one action per edge.  Edges are
/// visited parents first, siblings by descending subtree reward, so the
/// most consequential choices are fixed early; actions are tried by
/// descending probability upper bound to reach strong incumbents fast.
/// The bound at a partial assignment gives every unassigned subtree the
/// whole remaining budget via its (value, cost) frontier, which cannot
/// undershoot any completion.
class MasterSearch {
 public:
  MasterSearch(const TreeView& tv, const NetworkInstance& inst,
               const ScenarioSet& scenarios, Objective objective)
      : tv_(tv), inst_(inst), scenarios_(scenarios), objective_(objective) {
    const int n = tv.size();
    for (const Scenario& sc : scenarios) {
      prob_.push_back(prob_table(tv, sc.params));
      dps_.emplace_back(tv, prob_.back(), inst.budget);
    }

    std::vector<double> mass(static_cast<std::size_t>(n), 0.0);
    const auto& pre = tv.preorder();
    for (auto it = pre.rbegin(); it != pre.rend(); ++it) {
      mass[static_cast<std::size_t>(*it)] += tv.node(*it).reward;
      if (const Edge* e = tv.edge_in(*it))
        mass[static_cast<std::size_t>(tv.index_of(e->parent))] +=
            mass[static_cast<std::size_t>(*it)];
    }
    std::vector<int> stack{tv.index_of(inst.root)};
    while (!stack.empty()) {
      const int u = stack.back();
      stack.pop_back();
      if (u != tv.index_of(inst.root)) order_.push_back(u);
      std::vector<int> kids = tv.children(u);
      std::stable_sort(kids.begin(), kids.end(), [&](int a, int b) {
        return mass[static_cast<std::size_t>(a)] >
               mass[static_cast<std::size_t>(b)];
      });
      for (auto it = kids.rbegin(); it != kids.rend(); ++it)
        stack.push_back(*it);
    }

    tried_.resize(static_cast<std::size_t>(n));
    for (int v : order_) {
      const Edge& e = *tv.edge_in(v);
      auto& acts = tried_[static_cast<std::size_t>(v)];
      for (int i = 0; i < static_cast<int>(e.actions.size()); ++i)
        acts.push_back(i);
      std::stable_sort(acts.begin(), acts.end(), [&](int a, int b) {
        return e.actions[static_cast<std::size_t>(a)].p_high >
               e.actions[static_cast<std::size_t>(b)].p_high;
      });
    }

    alpha_.assign(scenarios.size(),
                  std::vector<double>(static_cast<std::size_t>(n), 0.0));
    fixed_.assign(scenarios.size(), 0.0);
    const int root = tv.index_of(inst.root);
    for (std::size_t k = 0; k < scenarios.size(); ++k) {
      alpha_[k][static_cast<std::size_t>(root)] = 1.0;
      fixed_[k] = tv.node(root).reward;
    }
    for (int c : tv.children(root)) boundary_.push_back(c);
    act_.assign(static_cast<std::size_t>(n), -1);
  }

  MasterResult run() {
    descend(0, inst_.budget);
    if (best_.scenario_values.empty())
      throw std::logic_error("master search found no feasible policy");
    return std::move(best_);
  }

 private:
  double score(std::size_t k, double z) const {
    return objective_ == Objective::ratio ? z / scenarios_[k].value
                                          : z - scenarios_[k].value;
  }

  double bound(double remaining) const {
    double worst = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < scenarios_.size(); ++k) {
      double total = fixed_[k];
      for (int u : boundary_) {
        const int parent =
            tv_.index_of(tv_.edge_in(u)->parent);
        total += alpha_[k][static_cast<std::size_t>(parent)] *
                 dps_[k].best_edge_value(u, remaining);
      }
      worst = std::min(worst, score(k, total));
    }
    return worst;
  }

  void leaf() {
    Policy pi;
    std::vector<int> vec;
    vec.reserve(inst_.edges.size());
    for (const Edge& e : inst_.edges) {
      const int a = act_[static_cast<std::size_t>(tv_.index_of(e.child))];
      pi.action[e.child] = a;
      vec.push_back(a);
    }
    std::vector<double> values;
    values.reserve(scenarios_.size());
    double s = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < scenarios_.size(); ++k) {
      const double z = evaluate(tv_, pi, scenarios_[k].params);
      values.push_back(z);
      s = std::min(s, score(k, z));
    }
    const double cost = policy_cost(inst_, pi);

    bool better = s > best_score_;
    if (!better && s == best_score_) {
      if (cost < best_.cost)
        better = true;
      else if (cost == best_.cost && vec < best_vec_)
        better = true;
    }
    if (better) {
      best_score_ = s;
      best_.policy = std::move(pi);
      best_.cost = cost;
      best_.scenario_values = std::move(values);
      best_.value = objective_ == Objective::ratio ? s : -s;
      best_vec_ = std::move(vec);
    }
  }

  void descend(std::size_t depth, double remaining) {
    if (depth == order_.size()) {
      leaf();
      return;
    }
    const int v = order_[depth];
    const Edge& e = *tv_.edge_in(v);
    const int parent = tv_.index_of(e.parent);
    const auto kids = tv_.children(v);

    const auto it = std::find(boundary_.begin(), boundary_.end(), v);
    const std::size_t pos =
        static_cast<std::size_t>(it - boundary_.begin());
    boundary_.erase(it);
    for (int c : kids) boundary_.push_back(c);
    const std::vector<double> saved_fixed = fixed_;

    for (int i : tried_[static_cast<std::size_t>(v)]) {
      const double cost = e.actions[static_cast<std::size_t>(i)].cost;
      if (!within_budget(cost, remaining)) continue;
      act_[static_cast<std::size_t>(v)] = i;
      for (std::size_t k = 0; k < scenarios_.size(); ++k) {
        const double a =
            alpha_[k][static_cast<std::size_t>(parent)] *
            prob_[k][static_cast<std::size_t>(v)][static_cast<std::size_t>(i)];
        alpha_[k][static_cast<std::size_t>(v)] = a;
        fixed_[k] = saved_fixed[k] + a * tv_.node(v).reward;
      }
      const double rest = remaining - cost;
      if (bound(rest) > best_score_ - 1e-12) descend(depth + 1, rest);
    }

    act_[static_cast<std::size_t>(v)] = -1;
    fixed_ = saved_fixed;
    boundary_.resize(boundary_.size() - kids.size());
    boundary_.insert(boundary_.begin() + static_cast<std::ptrdiff_t>(pos), v);
  }

  const TreeView& tv_;
  const NetworkInstance& inst_;
  const ScenarioSet& scenarios_;
  Objective objective_;
  std::vector<std::vector<std::vector<double>>> prob_;
  std::vector<FrontierDp> dps_;
  std::vector<int> order_;
  std::vector<std::vector<int>> tried_;
  std::vector<std::vector<double>> alpha_;
  std::vector<double> fixed_;
  std::vector<int> boundary_;
  std::vector<int> act_;
  double best_score_ = -std::numeric_limits<double>::infinity();
  std::vector<int> best_vec_;
  MasterResult best_;
};

}  // namespace detail

/// Best decision policy against a finite scenario set: maximizes the
/// smallest ratio z(pi)/z(rival) (ratio objective) or minimizes the
/// largest shortfall z(rival) - z(pi) (regret objective).  Exact; ties
/// go to the cheaper policy, then the lexicographically smallest action
/// vector in edge order.
inline MasterResult solve_master(const NetworkInstance& inst,
                                 const ScenarioSet& scenarios,
                                 Objective objective) {
  if (scenarios.empty())
    throw std::invalid_argument("solve_master: empty scenario set");
  for (const Scenario& sc : scenarios)
    if (!(sc.value > 0.0))
      throw std::invalid_argument(
          "solve_master: scenario value must be positive");
  TreeView tv(inst);
  detail::MasterSearch search(tv, inst, scenarios, objective);
  return search.run();
}

}  // namespace riverguard
