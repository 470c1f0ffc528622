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

#include <cmath>
#include <limits>

#include <catch2/catch_amalgamated.hpp>

#include "oracles.hpp"
#include "riverguard/baselines.hpp"
#include "riverguard/lp_export.hpp"
#include "riverguard/master.hpp"

using namespace riverguard;

namespace {

Scenario make_scenario(const NetworkInstance& inst, const Policy& pi,
                       const ParamVector& params) {
  Scenario sc;
  sc.policy = pi;
  sc.params = params;
  sc.value = evaluate(inst, pi, params);
  return sc;
}

ScenarioSet random_scenarios(const NetworkInstance& inst, int count,
                             Rng& rng) {
  ScenarioSet set;
  for (int k = 0; k < count; ++k)
    set.push_back(make_scenario(inst, testutil::draw_policy(inst, rng),
                                testutil::draw_params(inst, rng)));
  return set;
}

struct MasterOracle {
  double score = -std::numeric_limits<double>::infinity();
  double cost = std::numeric_limits<double>::infinity();
};

// Maximizes min over scenarios of the unified score (ratio, or value
// difference whose negation is the reported regret).
MasterOracle master_by_enumeration(const NetworkInstance& inst,
                                   const ScenarioSet& scenarios,
                                   Objective objective) {
  MasterOracle best;
  testutil::for_each_feasible_policy(inst, [&](const Policy& pi) {
    double s = std::numeric_limits<double>::infinity();
    for (const Scenario& sc : scenarios) {
      const double z = evaluate(inst, pi, sc.params);
      s = std::min(s, objective == Objective::ratio ? z / sc.value
                                                    : z - sc.value);
    }
    const double c = policy_cost(inst, pi);
    if (s > best.score + 1e-12 ||
        (std::abs(s - best.score) <= 1e-12 && c < best.cost)) {
      best.score = s;
      best.cost = c;
    }
  });
  return best;
}

}  // namespace

TEST_CASE("master solves the two-node instance against one scenario") {
  auto inst = testutil::tiny_instance();
  Policy repair;
  repair.action[1] = 1;
  ParamVector upper;
  upper.prob[1] = {0.4, 1.0};
  ScenarioSet set{make_scenario(inst, repair, upper)};
  REQUIRE_THAT(set[0].value, Catch::Matchers::WithinAbs(2.0, 1e-12));

  const auto res = solve_master(inst, set, Objective::ratio);
  CHECK(res.policy.at(1) == 1);
  CHECK_THAT(res.value, Catch::Matchers::WithinAbs(1.0, 1e-12));
  REQUIRE(res.scenario_values.size() == 1);
  CHECK_THAT(res.scenario_values[0], Catch::Matchers::WithinAbs(2.0, 1e-12));
  CHECK_THAT(res.cost, Catch::Matchers::WithinAbs(1.0, 1e-12));
}

TEST_CASE("one degenerate scenario reduces the master to point optimization") {
  for (std::uint64_t seed = 0; seed < 12; ++seed) {
    testutil::RandomSpec spec;
    spec.n = 6;
    spec.degenerate_fraction = 1.0;
    auto inst = testutil::random_instance(spec, seed * 17 + 2);
    const ParamVector mid = midpoint_params(inst);
    ScenarioSet set{make_scenario(inst, null_policy(inst), mid)};

    const auto res = solve_master(inst, set, Objective::ratio);
    const auto point = solve_point(inst, mid);
    CHECK_THAT(evaluate(inst, res.policy, mid),
               Catch::Matchers::WithinAbs(point.value, 1e-9));
    CHECK_THAT(res.value * set[0].value,
               Catch::Matchers::WithinAbs(point.value, 1e-9));
  }
}

TEST_CASE("master matches enumeration for both objectives") {
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    testutil::RandomSpec spec;
    spec.n = 2 + static_cast<int>(seed % 9);
    spec.max_actions = 3;
    auto inst = testutil::random_instance(spec, seed * 211 + 13);
    Rng rng(seed * 7 + 1);
    const auto set =
        random_scenarios(inst, 1 + static_cast<int>(seed % 3), rng);

    for (Objective objective : {Objective::ratio, Objective::regret}) {
      const auto oracle = master_by_enumeration(inst, set, objective);
      const auto res = solve_master(inst, set, objective);
      const double oracle_value =
          objective == Objective::ratio ? oracle.score : -oracle.score;
      CAPTURE(seed, to_string(objective));
      CHECK_THAT(res.value, Catch::Matchers::WithinAbs(oracle_value, 1e-9));
      CHECK(res.cost <= oracle.cost + 1e-9);
      CHECK(within_budget(res.cost, inst.budget));

      // The reported value must recompute from the returned policy.
      double extremum = objective == Objective::ratio
                            ? std::numeric_limits<double>::infinity()
                            : -std::numeric_limits<double>::infinity();
      REQUIRE(res.scenario_values.size() == set.size());
      for (std::size_t k = 0; k < set.size(); ++k) {
        const double z = evaluate(inst, res.policy, set[k].params);
        CHECK_THAT(res.scenario_values[k],
                   Catch::Matchers::WithinAbs(z, 1e-9));
        if (objective == Objective::ratio)
          extremum = std::min(extremum, z / set[k].value);
        else
          extremum = std::max(extremum, set[k].value - z);
      }
      CHECK_THAT(res.value, Catch::Matchers::WithinAbs(extremum, 1e-9));
    }
  }
}

TEST_CASE("appending scenarios never improves the master value") {
  testutil::RandomSpec spec;
  spec.n = 8;
  spec.max_actions = 3;
  auto inst = testutil::random_instance(spec, 1234);
  Rng rng(55);
  const auto all = random_scenarios(inst, 6, rng);

  double prev_ratio = std::numeric_limits<double>::infinity();
  double prev_regret = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 1; k <= all.size(); ++k) {
    ScenarioSet head(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(k));
    const double u = solve_master(inst, head, Objective::ratio).value;
    CHECK(u <= prev_ratio + 1e-12);
    prev_ratio = u;
    const double r = solve_master(inst, head, Objective::regret).value;
    CHECK(r >= prev_regret - 1e-12);
    prev_regret = r;
  }
}

TEST_CASE("a pointwise-dominating scenario decides the master alone") {
  auto inst = testutil::tiny_instance();
  const ParamVector mid = midpoint_params(inst);
  Policy repair;
  repair.action[1] = 1;
  // Both scenarios share the parameters, so the larger rival value gives
  // a pointwise smaller ratio for every decision policy.
  ScenarioSet both{make_scenario(inst, null_policy(inst), mid),
                   make_scenario(inst, repair, mid)};
  ScenarioSet dominant{both[1]};

  const auto with_both = solve_master(inst, both, Objective::ratio);
  const auto alone = solve_master(inst, dominant, Objective::ratio);
  CHECK(with_both.policy.action == alone.policy.action);
  CHECK_THAT(with_both.value, Catch::Matchers::WithinAbs(alone.value, 1e-12));
}

TEST_CASE("master rejects degenerate scenario sets") {
  auto inst = testutil::tiny_instance();
  CHECK_THROWS_AS(solve_master(inst, {}, Objective::ratio),
                  std::invalid_argument);
  Scenario bad = make_scenario(inst, null_policy(inst), midpoint_params(inst));
  bad.value = 0.0;
  CHECK_THROWS_AS(solve_master(inst, {bad}, Objective::ratio),
                  std::invalid_argument);
}

TEST_CASE("master handles a single-node instance") {
  NetworkInstance inst;
  inst.root = 0;
  inst.budget = 3.0;
  inst.nodes.push_back(Node{0, 2.0, false});
  Scenario sc;
  sc.policy = null_policy(inst);
  sc.params = midpoint_params(inst);
  sc.value = evaluate(inst, sc.policy, sc.params);
  const auto res = solve_master(inst, {sc}, Objective::ratio);
  CHECK(res.policy.action.empty());
  CHECK_THAT(res.value, Catch::Matchers::WithinAbs(1.0, 1e-12));
}

TEST_CASE("exported model for the two-node instance has the textbook shape") {
  auto inst = testutil::tiny_instance();
  ScenarioSet set{
      make_scenario(inst, null_policy(inst), midpoint_params(inst))};
  const auto model = parse_lp(export_milp(inst, set));

  CHECK(model.maximize);
  REQUIRE(model.objective.size() == 1);
  CHECK(model.objective[0].var == "M");

  CHECK(model.binaries.size() == 2);
  int alphas = 0, lambdas = 0, zs = 0;
  for (const auto& v : model.variables) {
    if (v.rfind("a_", 0) == 0) ++alphas;
    if (v.rfind("l_", 0) == 0) ++lambdas;
    if (v.rfind("z_", 0) == 0) ++zs;
  }
  CHECK(alphas == 2);
  CHECK(lambdas == 2);
  CHECK(zs == 1);
  CHECK(model.variables.size() == 8);

  // Scenario block plus the one-action rule and the budget row.
  CHECK(model.constraints.size() == 10);
  REQUIRE(model.find("root_s0") != nullptr);
  CHECK(model.find("root_s0")->rhs == 1.0);
  REQUIRE(model.find("budget") != nullptr);
  CHECK_THAT(model.find("budget")->rhs,
             Catch::Matchers::WithinAbs(inst.budget, 1e-15));
}

TEST_CASE("exported model counts follow the instance shape") {
  for (std::uint64_t seed = 0; seed < 8; ++seed) {
    testutil::RandomSpec spec;
    spec.n = 3 + static_cast<int>(seed % 6);
    spec.max_actions = 3;
    auto inst = testutil::random_instance(spec, seed * 37 + 3);
    Rng rng(seed + 100);
    const int K = 1 + static_cast<int>(seed % 3);
    const auto set = random_scenarios(inst, K, rng);
    const auto model = parse_lp(export_milp(inst, set));

    std::size_t actions = 0;
    for (const auto& e : inst.edges) actions += e.actions.size();
    const std::size_t nodes = inst.nodes.size();
    const std::size_t per_scenario = 3 + (nodes - 1) + 2 * actions;

    CHECK(model.binaries.size() == actions);
    CHECK(model.constraints.size() ==
          static_cast<std::size_t>(K) * per_scenario + inst.edges.size() + 1);
    CHECK(model.variables.size() ==
          1 + static_cast<std::size_t>(K) * (1 + nodes + actions) + actions);

    // Every alpha and lambda is box-bounded to [0, 1].
    std::size_t boxed = 0;
    for (const auto& [var, box] : model.bounds) {
      CHECK(box.first == 0.0);
      CHECK(box.second == 1.0);
      CHECK((var.rfind("a_", 0) == 0 || var.rfind("l_", 0) == 0));
      ++boxed;
    }
    CHECK(boxed == static_cast<std::size_t>(K) * (nodes + actions));
  }
}

TEST_CASE("model accessibilities replay the product form for any assignment") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    testutil::RandomSpec spec;
    spec.n = 7;
    spec.max_actions = 3;
    spec.separated = true;
    auto inst = testutil::random_instance(spec, seed * 19 + 11);
    Rng rng(seed * 3 + 2);
    const auto set = random_scenarios(inst, 2, rng);
    const auto model = parse_lp(export_milp(inst, set));

    TreeView tv(inst);
    const Policy pi = testutil::draw_policy(inst, rng);
    for (std::size_t k = 0; k < set.size(); ++k) {
      const std::string sk = "s" + std::to_string(k);
      std::map<NodeId, double> alpha{{inst.root, 1.0}};
      for (int u : tv.preorder()) {
        const Edge* e = tv.edge_in(u);
        if (e == nullptr) continue;
        const auto* acc = model.find("acc_" + sk + "_" +
                                     std::to_string(e->child));
        REQUIRE(acc != nullptr);
        const std::string parent_var =
            "a_" + sk + "_" + std::to_string(e->parent);
        double p0 = 0.0;
        for (const auto& term : acc->terms)
          if (term.var == parent_var) p0 = -term.coef;

        const int taken = pi.at(e->child);
        double lam = 0.0;
        const auto* cap =
            model.find("cap_" + sk + "_" + std::to_string(e->child) + "_" +
                       std::to_string(taken));
        REQUIRE(cap != nullptr);
        for (const auto& term : cap->terms)
          if (term.var == parent_var) lam = -term.coef * alpha[e->parent];
        alpha[e->child] = p0 * alpha[e->parent] + lam;
      }
      double z = 0.0;
      for (const Node& nd : inst.nodes) z += nd.reward * alpha[nd.id];
      CHECK_THAT(z, Catch::Matchers::WithinAbs(
                        evaluate(inst, pi, set[k].params), 1e-9));
    }
  }
}

TEST_CASE("budget row survives an all-free instance") {
  auto inst = testutil::tiny_instance();
  inst.edges[0].actions[1].cost = 0.0;
  ScenarioSet set{
      make_scenario(inst, null_policy(inst), midpoint_params(inst))};
  const auto model = parse_lp(export_milp(inst, set));
  const auto* budget = model.find("budget");
  REQUIRE(budget != nullptr);
  REQUIRE(budget->terms.size() == 1);
  CHECK(budget->terms[0].coef == 0.0);
}
