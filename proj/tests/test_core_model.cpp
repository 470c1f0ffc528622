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

#include <algorithm>
#include <set>

#include <catch2/catch_amalgamated.hpp>

#include "oracles.hpp"
#include "riverguard/binarize.hpp"
#include "riverguard/instance.hpp"
#include "riverguard/json_io.hpp"

using namespace riverguard;
using testutil::chain_instance;
using testutil::tiny_instance;

TEST_CASE("validate accepts well-formed instances") {
  CHECK(validate(tiny_instance()).empty());
  CHECK(validate(chain_instance()).empty());
  for (std::uint64_t seed = 0; seed < 25; ++seed) {
    testutil::RandomSpec spec;
    spec.n = 7;
    CHECK(validate(testutil::random_instance(spec, seed)).empty());
  }
}

TEST_CASE("validate reports a two-node cycle") {
  NetworkInstance inst;
  inst.root = 0;
  inst.budget = 0.0;
  inst.nodes = {Node{0, 1.0}, Node{1, 1.0}};
  inst.edges = {Edge{0, 1, {Action{0.0, 0.5, 0.5}}},
                Edge{1, 0, {Action{0.0, 0.5, 0.5}}}};
  const auto v = validate(inst);
  REQUIRE(v.size() == 1);
  CHECK(v[0] == "cycle detected at 1");
}

TEST_CASE("validate reports interval and cost defects") {
  auto inst = tiny_instance();
  inst.edges[0].actions[1].p_low = 0.9;
  inst.edges[0].actions[1].p_high = 0.7;
  auto v = validate(inst);
  REQUIRE(v.size() == 1);
  CHECK(v[0] == "inverted interval on (0,1) action 1");

  inst = tiny_instance();
  inst.edges[0].actions[0].p_low = -0.1;
  v = validate(inst);
  REQUIRE(v.size() == 1);
  CHECK(v[0] == "interval outside [0,1] on (0,1) action 0");

  inst = tiny_instance();
  inst.edges[0].actions[0].cost = 2.0;
  v = validate(inst);
  REQUIRE(v.size() == 1);
  CHECK(v[0] == "action 0 on edge (0,1) must have zero cost");

  inst = tiny_instance();
  inst.edges[0].actions[1].cost = -1.0;
  v = validate(inst);
  REQUIRE(v.size() == 1);
  CHECK(v[0] == "negative cost on (0,1) action 1");

  inst = tiny_instance();
  inst.edges[0].actions.clear();
  v = validate(inst);
  REQUIRE(v.size() == 1);
  CHECK(v[0] == "edge (0,1) has no actions");
}

TEST_CASE("validate reports structural defects") {
  auto inst = tiny_instance();
  inst.budget = -2.0;
  CHECK(validate(inst) == std::vector<std::string>{"negative budget"});

  inst = tiny_instance();
  inst.nodes[1].reward = -1.0;
  CHECK(validate(inst) == std::vector<std::string>{"negative reward on node 1"});

  inst = tiny_instance();
  inst.nodes[0].reward = 0.0;
  CHECK(validate(inst) == std::vector<std::string>{"root reward must be positive"});

  inst = tiny_instance();
  inst.root = 9;
  CHECK(validate(inst) == std::vector<std::string>{"unknown root 9"});

  inst = tiny_instance();
  inst.nodes.push_back(Node{1, 2.0});
  auto v = validate(inst);
  REQUIRE(!v.empty());
  CHECK(v[0] == "duplicate node id 1");

  // Detached node: present in the node list, no incoming edge.
  inst = tiny_instance();
  inst.nodes.push_back(Node{2, 2.0});
  CHECK(validate(inst) ==
        std::vector<std::string>{"node 2 unreachable from root"});

  // Two parents for one child.
  inst = tiny_instance();
  inst.nodes.push_back(Node{2, 2.0});
  inst.edges.push_back(Edge{0, 2, {Action{0.0, 0.5, 0.5}}});
  inst.edges.push_back(Edge{2, 1, {Action{0.0, 0.5, 0.5}}});
  v = validate(inst);
  REQUIRE(v.size() == 1);
  CHECK(v[0] == "node 1 has multiple parents");

  inst = tiny_instance();
  inst.edges[0].parent = 7;
  v = validate(inst);
  CHECK(std::find(v.begin(), v.end(),
                  "edge (7,1) references unknown node 7") != v.end());
}

TEST_CASE("evaluate matches hand-computed values") {
  const auto tiny = tiny_instance();
  Policy paid;
  paid.action[1] = 1;
  CHECK(evaluate(tiny, paid, midpoint_params(tiny)) ==
        Catch::Approx(1.9).epsilon(1e-12));
  Policy free;
  free.action[1] = 0;
  CHECK(evaluate(tiny, free, midpoint_params(tiny)) ==
        Catch::Approx(1.3).epsilon(1e-12));

  const auto chain = chain_instance();
  CHECK(evaluate(chain, null_policy(chain), midpoint_params(chain)) ==
        Catch::Approx(2.75).epsilon(1e-12));
}

TEST_CASE("evaluate agrees with the path-product oracle") {
  for (std::uint64_t seed = 0; seed < 60; ++seed) {
    testutil::RandomSpec spec;
    spec.n = 2 + static_cast<int>(seed % 9);
    const auto inst = testutil::random_instance(spec, 1000 + seed);
    Rng rng(seed * 17 + 3);
    const auto pi = testutil::draw_policy(inst, rng);
    const auto p = testutil::draw_params(inst, rng);
    CHECK(evaluate(inst, pi, p) ==
          Catch::Approx(testutil::eval_by_paths(inst, pi, p)).margin(1e-12));
    CHECK(policy_cost(inst, pi) ==
          Catch::Approx(testutil::cost_by_sum(inst, pi)).margin(1e-12));
  }
}

TEST_CASE("evaluate requires full coverage") {
  const auto tiny = tiny_instance();
  Policy empty;
  CHECK_THROWS_AS(evaluate(tiny, empty, midpoint_params(tiny)),
                  std::out_of_range);
  Policy paid;
  paid.action[1] = 1;
  ParamVector short_params;
  short_params.prob[1] = {0.3};
  CHECK_THROWS_AS(evaluate(tiny, paid, short_params), std::out_of_range);
  Policy bad;
  bad.action[1] = 5;
  CHECK_THROWS_AS(policy_cost(tiny, bad), std::out_of_range);
}

TEST_CASE("TreeView orders parents before children") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    testutil::RandomSpec spec;
    spec.n = 12;
    const auto inst = testutil::random_instance(spec, 500 + seed);
    TreeView tv(inst);
    std::set<int> seen;
    for (int u : tv.preorder()) {
      if (tv.parent(u) >= 0) CHECK(seen.count(tv.parent(u)) == 1);
      seen.insert(u);
    }
    CHECK(seen.size() == inst.nodes.size());
  }
  auto bad = tiny_instance();
  bad.budget = -1.0;
  CHECK_THROWS_AS(TreeView(bad), ValidationError);
}

TEST_CASE("binarize leaves binary trees untouched") {
  const auto chain = chain_instance();
  const auto bin = binarize(chain);
  CHECK(to_json(bin.instance) == to_json(chain));
  REQUIRE(bin.original_id.size() == 3);
  for (const auto& [now, orig] : bin.original_id) CHECK(now == orig);
}

TEST_CASE("binarize splits a three-child star through one dummy") {
  NetworkInstance star;
  star.root = 0;
  star.budget = 0.0;
  star.nodes = {Node{0, 1.0}, Node{1, 1.0}, Node{2, 1.0}, Node{3, 1.0}};
  for (NodeId c : {1, 2, 3})
    star.edges.push_back(Edge{0, c, {Action{0.0, 0.5, 0.5}}});

  const auto bin = binarize(star);
  REQUIRE(bin.instance.nodes.size() == 5);
  const Node& dummy = bin.instance.nodes[4];
  CHECK(dummy.dummy);
  CHECK(dummy.reward == 0.0);
  CHECK(dummy.id == 4);

  TreeView tv(bin.instance);
  const auto& root_children = tv.children(tv.index_of(0));
  REQUIRE(root_children.size() == 2);
  CHECK(tv.node(root_children[0]).id == 1);
  CHECK(tv.node(root_children[1]).id == 4);
  const auto& dummy_children = tv.children(tv.index_of(4));
  REQUIRE(dummy_children.size() == 2);
  CHECK(tv.node(dummy_children[0]).id == 2);
  CHECK(tv.node(dummy_children[1]).id == 3);

  const Edge* in = tv.edge_in(tv.index_of(4));
  REQUIRE(in != nullptr);
  REQUIRE(in->actions.size() == 1);
  CHECK(in->actions[0].cost == 0.0);
  CHECK(in->actions[0].p_low == 1.0);
  CHECK(in->actions[0].p_high == 1.0);
}

TEST_CASE("binarize preserves values, costs and policies") {
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    testutil::RandomSpec spec;
    spec.n = 3 + static_cast<int>(seed % 10);
    spec.max_children = 0;  // fan out freely
    const auto inst = testutil::random_instance(spec, 9000 + seed);
    const auto bin = binarize(inst);
    CHECK(validate(bin.instance).empty());

    TreeView tv(bin.instance);
    for (int u = 0; u < tv.size(); ++u) CHECK(tv.children(u).size() <= 2);

    Rng rng(seed + 1);
    const auto pi = testutil::draw_policy(inst, rng);
    const auto p = testutil::draw_params(inst, rng);
    const auto lifted_pi = lift_policy(bin, pi);
    const auto lifted_p = lift_params(bin, p);
    CHECK(evaluate(bin.instance, lifted_pi, lifted_p) ==
          Catch::Approx(evaluate(inst, pi, p)).margin(1e-12));
    CHECK(policy_cost(bin.instance, lifted_pi) ==
          Catch::Approx(policy_cost(inst, pi)).margin(1e-12));
    CHECK(project_policy(bin, lifted_pi).action == pi.action);
    CHECK(project_params(bin, lifted_p).prob == p.prob);
  }
}

TEST_CASE("instance JSON round trip is faithful and stable") {
  for (std::uint64_t seed = 0; seed < 15; ++seed) {
    testutil::RandomSpec spec;
    spec.n = 9;
    const auto inst = testutil::random_instance(spec, 777 + seed);
    const Json j = to_json(inst);
    const auto back = instance_from_json(j);
    CHECK(to_json(back) == j);
    CHECK(dump_stable(j) == dump_stable(to_json(back)));
  }
  // Dummy flags survive a round trip of a binarized instance.
  testutil::RandomSpec spec;
  spec.n = 8;
  spec.max_children = 0;
  const auto bin = binarize(testutil::random_instance(spec, 4242));
  const auto back = instance_from_json(to_json(bin.instance));
  CHECK(to_json(back) == to_json(bin.instance));
}

TEST_CASE("instance parsing rejects bad documents") {
  auto inst = tiny_instance();
  inst.budget = -1.0;
  CHECK_THROWS_AS(instance_from_json(to_json(inst)), ValidationError);
  CHECK_THROWS(instance_from_json(Json::parse("{\"root\": 0}")));
}

TEST_CASE("policy and params JSON round trip") {
  const auto tiny = tiny_instance();
  Policy pi;
  pi.action[1] = 1;
  CHECK(policy_from_json(to_json(pi)).action == pi.action);
  const auto p = midpoint_params(tiny);
  CHECK(params_from_json(to_json(p)).prob == p.prob);
}
