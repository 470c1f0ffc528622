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
//
// JSON readers and writers for every on-disk format.  Readers validate on
// the way in and throw (ValidationError for structural problems,
// nlohmann::json exceptions for malformed documents); writers produce
// byte-stable output for identical inputs.

#pragma once

#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "riverguard/adversary.hpp"
#include "riverguard/instance.hpp"
#include "riverguard/master.hpp"
#include "riverguard/robust.hpp"

namespace riverguard {

using Json = nlohmann::json;

inline Json to_json(const NetworkInstance& inst) {
  Json nodes = Json::array();
  for (const Node& node : inst.nodes) {
    Json n{{"id", node.id}, {"reward", node.reward}};
    if (node.dummy) n["dummy"] = true;
    nodes.push_back(std::move(n));
  }
  Json edges = Json::array();
  for (const Edge& e : inst.edges) {
    Json actions = Json::array();
    for (const Action& a : e.actions)
      actions.push_back(
          {{"cost", a.cost}, {"p_low", a.p_low}, {"p_high", a.p_high}});
    edges.push_back({{"parent", e.parent},
                     {"child", e.child},
                     {"actions", std::move(actions)}});
  }
  return Json{{"root", inst.root},
              {"budget", inst.budget},
              {"nodes", std::move(nodes)},
              {"edges", std::move(edges)}};
}

inline NetworkInstance instance_from_json(const Json& j) {
  NetworkInstance inst;
  inst.root = j.at("root").get<NodeId>();
  inst.budget = j.at("budget").get<double>();
  for (const Json& n : j.at("nodes")) {
    Node node;
    node.id = n.at("id").get<NodeId>();
    node.reward = n.at("reward").get<double>();
    node.dummy = n.value("dummy", false);
    inst.nodes.push_back(node);
  }
  for (const Json& ej : j.at("edges")) {
    Edge e;
    e.parent = ej.at("parent").get<NodeId>();
    e.child = ej.at("child").get<NodeId>();
    for (const Json& aj : ej.at("actions")) {
      Action a;
      a.cost = aj.at("cost").get<double>();
      a.p_low = aj.at("p_low").get<double>();
      a.p_high = aj.at("p_high").get<double>();
      e.actions.push_back(a);
    }
    inst.edges.push_back(std::move(e));
  }
  auto violations = validate(inst);
  if (!violations.empty()) throw ValidationError(std::move(violations));
  return inst;
}

inline Json to_json(const Policy& policy) {
  Json j = Json::object();
  for (const auto& [edge, action] : policy.action)
    j[std::to_string(edge)] = action;
  return j;
}

inline Policy policy_from_json(const Json& j) {
  Policy out;
  for (const auto& [key, value] : j.items())
    out.action[static_cast<NodeId>(std::stoll(key))] = value.get<int>();
  return out;
}

inline Json to_json(const ParamVector& params) {
  Json j = Json::object();
  for (const auto& [edge, probs] : params.prob) {
    Json row = Json::object();
    for (std::size_t i = 0; i < probs.size(); ++i)
      row[std::to_string(i)] = probs[i];
    j[std::to_string(edge)] = row;
  }
  return j;
}

inline ParamVector params_from_json(const Json& j) {
  ParamVector out;
  for (const auto& [key, value] : j.items()) {
    auto& probs = out.prob[static_cast<NodeId>(std::stoll(key))];
    if (value.is_array()) {
      probs = value.get<std::vector<double>>();
      continue;
    }
    for (const auto& [idx, p] : value.items()) {
      const auto i = static_cast<std::size_t>(std::stoul(idx));
      if (i >= probs.size()) probs.resize(i + 1, 0.0);
      probs[i] = p.get<double>();
    }
  }
  return out;
}

inline Json to_json(const AdversaryResult& res) {
  return Json{{"objective", to_string(res.objective)},
              {"value", res.value},
              {"cost", res.cost},
              {"policy", to_json(res.policy)},
              {"params", to_json(res.params)}};
}

inline Json to_json(const Scenario& sc) {
  return Json{{"policy", to_json(sc.policy)},
              {"params", to_json(sc.params)},
              {"value", sc.value}};
}

inline Scenario scenario_from_json(const Json& j,
                                   const NetworkInstance& inst) {
  Scenario sc;
  sc.policy = policy_from_json(j.at("policy"));
  sc.params = params_from_json(j.at("params"));
  sc.value = j.contains("value") ? j.at("value").get<double>()
                                 : evaluate(inst, sc.policy, sc.params);
  return sc;
}

inline Json to_json(const ScenarioSet& set) {
  Json arr = Json::array();
  for (const Scenario& sc : set) arr.push_back(to_json(sc));
  return arr;
}

inline ScenarioSet scenarios_from_json(const Json& j,
                                       const NetworkInstance& inst) {
  ScenarioSet set;
  for (const Json& item : j) set.push_back(scenario_from_json(item, inst));
  return set;
}

inline Json to_json(const RobustResult& res) {
  Json trace = Json::array();
  for (const IterationRecord& rec : res.trace)
    trace.push_back(Json{{"upper", rec.upper},
                         {"lower_hat", rec.lower_hat},
                         {"lower", rec.lower}});
  return Json{{"objective", to_string(res.objective)},
              {"policy", to_json(res.policy)},
              {"upper", res.upper},
              {"lower", res.lower},
              {"iterations", res.iterations},
              {"converged", res.converged},
              {"reason", res.reason},
              {"scenarios", to_json(res.scenarios)},
              {"trace", std::move(trace)}};
}

inline Json load_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  return Json::parse(in);
}

inline void save_json(const std::string& path, const Json& j) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << j.dump(2) << '\n';
}

inline NetworkInstance load_instance(const std::string& path) {
  return instance_from_json(load_json(path));
}

inline std::string dump_stable(const Json& j) { return j.dump(2) + "\n"; }

}  // namespace riverguard
