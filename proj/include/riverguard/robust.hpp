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

#include <stdexcept>
#include <string>
#include <vector>

#include "riverguard/adversary.hpp"
#include "riverguard/instance.hpp"
#include "riverguard/master.hpp"

namespace riverguard {

struct RobustConfig {
  RoundingConfig rounding = RoundingConfig::exact_mode();
  /// Absolute gap (on the ratio or regret scale) at which to stop.
  double threshold = 1e-3;
  int max_iter = 200;
};

struct IterationRecord {
  double upper = 0.0;
  /// The adversary's found value before any certification correction.
  double lower_hat = 0.0;
  double lower = 0.0;
};

struct RobustResult {
  Objective objective = Objective::ratio;
  Policy policy;
  double upper = 0.0;
  double lower = 0.0;
  int iterations = 0;
  bool converged = false;
  /// "threshold", "duplicate-scenario", or "iteration-cap".
  std::string reason;
  ScenarioSet scenarios;
  std::vector<IterationRecord> trace;
};

namespace detail {

/// Constraint generation: alternate the scenario-restricted decision
/// optimum with the adversary's best response to it, growing the scenario
/// set until the bounds meet.  Ratio orientation: the master value upper-
/// bounds the optimum, the adversary certifies a lower bound (divided by
/// 1+epsilon when the response came from a rounded DP).  Regret
/// orientation: the master value is the lower bound; the upper bound is
/// the adversary's found table optimum, which cannot under-estimate the
/// candidate's true worst regret under the regret rounding directions.
inline RobustResult robust_loop(const NetworkInstance& inst,
                                Objective objective,
                                const RobustConfig& rc) {
  if (rc.threshold < 0.0)
    throw std::invalid_argument("robust loop: threshold must be nonnegative");
  if (rc.max_iter < 1)
    throw std::invalid_argument("robust loop: iteration cap must be positive");

  const double correction =
      objective == Objective::ratio &&
              rc.rounding.mode == RoundingConfig::Mode::epsilon
          ? 1.0 + rc.rounding.epsilon
          : 1.0;

  RobustResult out;
  out.objective = objective;
  {
    Scenario first;
    first.policy = null_policy(inst);
    first.params = midpoint_params(inst);
    first.value = evaluate(inst, first.policy, first.params);
    out.scenarios.push_back(std::move(first));
  }

  for (int t = 1; t <= rc.max_iter; ++t) {
    MasterResult master = solve_master(inst, out.scenarios, objective);
    AdversaryResult adv =
        solve_adversary(inst, master.policy, objective, rc.rounding);

    IterationRecord rec;
    rec.lower_hat = adv.value;
    if (objective == Objective::ratio) {
      rec.upper = master.value;
      rec.lower = adv.value / correction;
    } else {
      rec.lower = master.value;
      rec.upper = adv.table_value;
    }
    out.trace.push_back(rec);
    out.policy = std::move(master.policy);
    out.upper = rec.upper;
    out.lower = rec.lower;
    out.iterations = t;

    if (rec.upper - rec.lower <= rc.threshold) {
      out.converged = true;
      out.reason = "threshold";
      return out;
    }

    Scenario next;
    next.policy = std::move(adv.policy);
    next.params = std::move(adv.params);
    next.value = evaluate(inst, next.policy, next.params);
    bool duplicate = false;
    for (const Scenario& sc : out.scenarios) {
      if (sc.policy.action == next.policy.action &&
          sc.params.prob == next.params.prob) {
        duplicate = true;
        break;
      }
    }
    if (duplicate) {
      out.converged = true;
      out.reason = "duplicate-scenario";
      return out;
    }
    out.scenarios.push_back(std::move(next));
  }

  out.converged = false;
  out.reason = "iteration-cap";
  return out;
}

}  // namespace detail

/// Policy maximizing the robust ratio, with certified bounds.
inline RobustResult solve_mrr(const NetworkInstance& inst,
                              const RobustConfig& rc = RobustConfig{}) {
  return detail::robust_loop(inst, Objective::ratio, rc);
}

/// Policy minimizing the worst-case regret, with bounds.
inline RobustResult solve_mr(const NetworkInstance& inst,
                             const RobustConfig& rc = RobustConfig{}) {
  return detail::robust_loop(inst, Objective::regret, rc);
}

}  // namespace riverguard
