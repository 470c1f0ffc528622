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

#include <cmath>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

namespace riverguard {

using NodeId = std::int64_t;

/// What the robust solvers optimize: the worst-case ratio of achieved to
/// best attainable value (maximized), or the worst-case shortfall against
/// the best attainable value (minimized).
enum class Objective { ratio, regret };

inline const char* to_string(Objective obj) {
  return obj == Objective::ratio ? "ratio" : "regret";
}

/// One repair option on an edge.  Action 0 is always the null action
/// (do nothing, zero cost); higher indices are progressively stronger
/// interventions.  Passage probability is only known to lie in
/// [p_low, p_high].
struct Action {
  double cost = 0.0;
  double p_low = 0.0;
  double p_high = 0.0;
};

struct Node {
  NodeId id = 0;
  double reward = 0.0;
  /// Set on zero-reward nodes inserted to make the tree binary; never
  /// present in user-supplied instances.
  bool dummy = false;
};

/// A barrier between `parent` and `child`.  Edges are identified by their
/// child node id, which is unique because every node has at most one
/// incoming edge.
struct Edge {
  NodeId parent = 0;
  NodeId child = 0;
  std::vector<Action> actions;
};

/// A rooted tree of stream segments.  Each node carries the habitat reward
/// of its segment, each edge a set of candidate barrier repairs with
/// interval-bounded passage probabilities.  Instances are plain data; use
/// validate() to check structural invariants before running any solver.
struct NetworkInstance {
  NodeId root = 0;
  double budget = 0.0;
  std::vector<Node> nodes;
  std::vector<Edge> edges;
};

/// Repair decision: one action index per edge, keyed by the edge's child
/// node id.  A policy is feasible when its total cost is within budget.
struct Policy {
  std::map<NodeId, int> action;

  int at(NodeId edge) const {
    auto it = action.find(edge);
    if (it == action.end())
      throw std::out_of_range("policy has no action for edge " +
                              std::to_string(edge));
    return it->second;
  }
};

/// One realized passage probability per (edge, action), stored densely per
/// edge.  Entry `prob[e][i]` must lie inside the interval of action i on
/// edge e.
struct ParamVector {
  std::map<NodeId, std::vector<double>> prob;

  double at(NodeId edge, int action) const {
    auto it = prob.find(edge);
    if (it == prob.end() || action < 0 ||
        static_cast<std::size_t>(action) >= it->second.size())
      throw std::out_of_range("params have no probability for edge " +
                              std::to_string(edge) + " action " +
                              std::to_string(action));
    return it->second[static_cast<std::size_t>(action)];
  }
};

/// Raised by parsers and accessors when an instance fails validate().
class ValidationError : public std::runtime_error {
 public:
  explicit ValidationError(std::vector<std::string> violations)
      : std::runtime_error(join(violations)), violations_(std::move(violations)) {}

  const std::vector<std::string>& violations() const { return violations_; }

 private:
  static std::string join(const std::vector<std::string>& violations) {
    std::string msg = "invalid instance";
    for (const auto& v : violations) msg += "\n  " + v;
    return msg;
  }

  std::vector<std::string> violations_;
};

namespace detail {

inline std::string edge_label(const Edge& e) {
  return "(" + std::to_string(e.parent) + "," + std::to_string(e.child) + ")";
}

}  // namespace detail

/// Checks structural invariants and returns one message per violation.
/// An empty result means the instance is a well-formed rooted tree:
/// unique ids, every non-root node with exactly one parent, all nodes
/// reachable from the root, no cycles, intervals inside [0,1] and not
/// inverted, action 0 free, costs and rewards nonnegative, and a strictly
/// positive root reward.
inline std::vector<std::string> validate(const NetworkInstance& inst) {
  std::vector<std::string> out;

  std::unordered_map<NodeId, int> index;
  for (std::size_t i = 0; i < inst.nodes.size(); ++i) {
    const Node& node = inst.nodes[i];
    if (!index.emplace(node.id, static_cast<int>(i)).second)
      out.push_back("duplicate node id " + std::to_string(node.id));
    if (node.reward < 0.0)
      out.push_back("negative reward on node " + std::to_string(node.id));
  }
  if (inst.nodes.empty()) {
    out.push_back("instance has no nodes");
    return out;
  }
  auto root_it = index.find(inst.root);
  if (root_it == index.end()) {
    out.push_back("unknown root " + std::to_string(inst.root));
    return out;
  }
  if (inst.nodes[static_cast<std::size_t>(root_it->second)].reward <= 0.0)
    out.push_back("root reward must be positive");
  if (inst.budget < 0.0) out.push_back("negative budget");

  std::unordered_map<NodeId, NodeId> parent;
  for (const Edge& e : inst.edges) {
    bool endpoints_ok = true;
    if (index.find(e.parent) == index.end()) {
      out.push_back("edge " + detail::edge_label(e) + " references unknown node " +
                    std::to_string(e.parent));
      endpoints_ok = false;
    }
    if (index.find(e.child) == index.end()) {
      out.push_back("edge " + detail::edge_label(e) + " references unknown node " +
                    std::to_string(e.child));
      endpoints_ok = false;
    }
    if (endpoints_ok && !parent.emplace(e.child, e.parent).second)
      out.push_back("node " + std::to_string(e.child) + " has multiple parents");

    if (e.actions.empty()) {
      out.push_back("edge " + detail::edge_label(e) + " has no actions");
    } else if (e.actions[0].cost != 0.0) {
      out.push_back("action 0 on edge " + detail::edge_label(e) +
                    " must have zero cost");
    }
    for (std::size_t i = 0; i < e.actions.size(); ++i) {
      const Action& a = e.actions[i];
      const std::string where =
          detail::edge_label(e) + " action " + std::to_string(i);
      if (a.cost < 0.0) out.push_back("negative cost on " + where);
      if (a.p_low > a.p_high) out.push_back("inverted interval on " + where);
      if (a.p_low < 0.0 || a.p_high > 1.0)
        out.push_back("interval outside [0,1] on " + where);
    }
  }

  // DFS from the root over child lists.  An edge into a node currently on
  // the stack closes a cycle; nodes never reached are detached from the
  // root.  Colors: 0 unvisited, 1 on stack, 2 done.
  const int n = static_cast<int>(inst.nodes.size());
  std::vector<std::vector<int>> children(static_cast<std::size_t>(n));
  for (const Edge& e : inst.edges) {
    auto pit = index.find(e.parent);
    auto cit = index.find(e.child);
    if (pit != index.end() && cit != index.end())
      children[static_cast<std::size_t>(pit->second)].push_back(cit->second);
  }
  std::vector<int> color(static_cast<std::size_t>(n), 0);
  std::vector<std::pair<int, std::size_t>> stack;
  const int root = root_it->second;
  color[static_cast<std::size_t>(root)] = 1;
  stack.emplace_back(root, 0);
  while (!stack.empty()) {
    auto& [u, next] = stack.back();
    const auto& ch = children[static_cast<std::size_t>(u)];
    if (next == ch.size()) {
      color[static_cast<std::size_t>(u)] = 2;
      stack.pop_back();
      continue;
    }
    const int c = ch[next++];
    if (color[static_cast<std::size_t>(c)] == 1) {
      out.push_back("cycle detected at " +
                    std::to_string(inst.nodes[static_cast<std::size_t>(u)].id));
    } else if (color[static_cast<std::size_t>(c)] == 0) {
      color[static_cast<std::size_t>(c)] = 1;
      stack.emplace_back(c, 0);
    }
  }
  for (int i = 0; i < n; ++i) {
    if (color[static_cast<std::size_t>(i)] == 0)
      out.push_back("node " +
                    std::to_string(inst.nodes[static_cast<std::size_t>(i)].id) +
                    " unreachable from root");
  }
  return out;
}

/// Budget feasibility with a relative slack so that float summation order
/// never flips a boundary case.  Every component (solvers, oracles,
/// reports) must go through this predicate.
inline bool within_budget(double cost, double budget) {
  return cost <= budget + 1e-9 * std::max(1.0, std::abs(budget));
}

/// Index structure over a valid instance: O(1) id lookup, children lists,
/// and a preorder sequence (parents before children).  Construction throws
/// ValidationError if the instance is not a well-formed tree.
class TreeView {
 public:
  explicit TreeView(const NetworkInstance& inst) : inst_(&inst) {
    auto violations = validate(inst);
    if (!violations.empty()) throw ValidationError(std::move(violations));

    const int n = static_cast<int>(inst.nodes.size());
    for (int i = 0; i < n; ++i) index_[inst.nodes[i].id] = i;
    parent_.assign(static_cast<std::size_t>(n), -1);
    edge_in_.assign(static_cast<std::size_t>(n), -1);
    children_.assign(static_cast<std::size_t>(n), {});
    for (std::size_t k = 0; k < inst.edges.size(); ++k) {
      const Edge& e = inst.edges[k];
      const int u = index_.at(e.parent);
      const int v = index_.at(e.child);
      parent_[static_cast<std::size_t>(v)] = u;
      edge_in_[static_cast<std::size_t>(v)] = static_cast<int>(k);
      children_[static_cast<std::size_t>(u)].push_back(v);
    }
    preorder_.reserve(static_cast<std::size_t>(n));
    std::vector<int> stack{index_.at(inst.root)};
    while (!stack.empty()) {
      const int u = stack.back();
      stack.pop_back();
      preorder_.push_back(u);
      const auto& ch = children_[static_cast<std::size_t>(u)];
      for (auto it = ch.rbegin(); it != ch.rend(); ++it) stack.push_back(*it);
    }
  }

  const NetworkInstance& instance() const { return *inst_; }
  int size() const { return static_cast<int>(inst_->nodes.size()); }
  int root() const { return index_.at(inst_->root); }
  int index_of(NodeId id) const { return index_.at(id); }
  const Node& node(int i) const {
    return inst_->nodes[static_cast<std::size_t>(i)];
  }
  int parent(int i) const { return parent_[static_cast<std::size_t>(i)]; }
  /// Incoming edge of node i, or nullptr for the root.
  const Edge* edge_in(int i) const {
    const int k = edge_in_[static_cast<std::size_t>(i)];
    return k < 0 ? nullptr : &inst_->edges[static_cast<std::size_t>(k)];
  }
  const std::vector<int>& children(int i) const {
    return children_[static_cast<std::size_t>(i)];
  }
  /// Node indices, every parent before its children.
  const std::vector<int>& preorder() const { return preorder_; }

 private:
  const NetworkInstance* inst_;
  std::unordered_map<NodeId, int> index_;
  std::vector<int> parent_;
  std::vector<int> edge_in_;
  std::vector<std::vector<int>> children_;
  std::vector<int> preorder_;
};

/// Expected habitat value of `policy` when passage probabilities take the
/// values in `params`: sum over nodes of reward times the product of
/// probabilities along the root path.  Computed in one preorder pass.
inline double evaluate(const TreeView& tv, const Policy& policy,
                       const ParamVector& params) {
  std::vector<double> access(static_cast<std::size_t>(tv.size()), 0.0);
  access[static_cast<std::size_t>(tv.root())] = 1.0;
  double total = 0.0;
  for (int u : tv.preorder()) {
    if (const Edge* e = tv.edge_in(u)) {
      const double p = params.at(e->child, policy.at(e->child));
      access[static_cast<std::size_t>(u)] =
          access[static_cast<std::size_t>(tv.parent(u))] * p;
    }
    total += tv.node(u).reward * access[static_cast<std::size_t>(u)];
  }
  return total;
}

inline double evaluate(const NetworkInstance& inst, const Policy& policy,
                       const ParamVector& params) {
  return evaluate(TreeView(inst), policy, params);
}

/// Accessibility of every node under a policy: the product of passage
/// probabilities along its root path, keyed by node id.
inline std::map<NodeId, double> accessibilities(const TreeView& tv,
                                                const Policy& policy,
                                                const ParamVector& params) {
  std::vector<double> access(static_cast<std::size_t>(tv.size()), 0.0);
  access[static_cast<std::size_t>(tv.root())] = 1.0;
  std::map<NodeId, double> out;
  for (int u : tv.preorder()) {
    if (const Edge* e = tv.edge_in(u)) {
      const double p = params.at(e->child, policy.at(e->child));
      access[static_cast<std::size_t>(u)] =
          access[static_cast<std::size_t>(tv.parent(u))] * p;
    }
    out[tv.node(u).id] = access[static_cast<std::size_t>(u)];
  }
  return out;
}

/// Total repair cost of a policy.  Throws if the policy is missing an edge
/// or names an action the edge does not have.
inline double policy_cost(const NetworkInstance& inst, const Policy& policy) {
  double total = 0.0;
  for (const Edge& e : inst.edges) {
    const int a = policy.at(e.child);
    if (a < 0 || static_cast<std::size_t>(a) >= e.actions.size())
      throw std::out_of_range("policy names missing action " +
                              std::to_string(a) + " on edge " +
                              detail::edge_label(e));
    total += e.actions[static_cast<std::size_t>(a)].cost;
  }
  return total;
}

/// Null policy: action 0 everywhere.
inline Policy null_policy(const NetworkInstance& inst) {
  Policy pi;
  for (const Edge& e : inst.edges) pi.action[e.child] = 0;
  return pi;
}

/// Probabilities at the midpoint of every interval.
inline ParamVector midpoint_params(const NetworkInstance& inst) {
  ParamVector p;
  for (const Edge& e : inst.edges) {
    auto& row = p.prob[e.child];
    row.reserve(e.actions.size());
    for (const Action& a : e.actions) row.push_back(0.5 * (a.p_low + a.p_high));
  }
  return p;
}

/// Probabilities at the lower bound of every interval.
inline ParamVector lower_params(const NetworkInstance& inst) {
  ParamVector p;
  for (const Edge& e : inst.edges) {
    auto& row = p.prob[e.child];
    row.reserve(e.actions.size());
    for (const Action& a : e.actions) row.push_back(a.p_low);
  }
  return p;
}

}  // namespace riverguard
