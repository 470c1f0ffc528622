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
#include <map>
#include <vector>

#include "riverguard/instance.hpp"

namespace riverguard {

/// A binarized copy of an instance together with the id bookkeeping needed
/// to move policies and parameter vectors between the two shapes.
struct Binarized {
  NetworkInstance instance;
  /// New node id -> original node id.  Dummy nodes are absent; original
  /// nodes keep their ids, so this is the identity on them.
  std::map<NodeId, NodeId> original_id;
};

/// Rewrites the tree so every node has at most two children.  A node with
/// children c1..ck (k > 2) keeps c1 and gains a chain of zero-reward dummy
/// nodes, each carrying the next original child; dummy edges have the
/// single action {cost 0, [1,1]} and therefore change no objective value.
/// Already-binary instances come back unchanged apart from the copy.
inline Binarized binarize(const NetworkInstance& inst) {
  TreeView tv(inst);

  Binarized out;
  out.instance.root = inst.root;
  out.instance.budget = inst.budget;
  out.instance.nodes = inst.nodes;
  for (const Node& node : inst.nodes) out.original_id[node.id] = node.id;

  NodeId next_id = 0;
  for (const Node& node : inst.nodes) next_id = std::max(next_id, node.id + 1);

  // New parent of each original child, filled in where chains are built.
  std::map<NodeId, NodeId> reparent;
  std::vector<Edge> dummy_edges;
  for (int u : tv.preorder()) {
    const auto& ch = tv.children(u);
    if (ch.size() <= 2) continue;
    NodeId tail = tv.node(u).id;
    for (std::size_t j = 1; j + 1 < ch.size(); ++j) {
      const NodeId d = next_id++;
      out.instance.nodes.push_back(Node{d, 0.0, /*dummy=*/true});
      dummy_edges.push_back(
          Edge{tail, d, {Action{0.0, 1.0, 1.0}}});
      reparent[tv.node(ch[j]).id] = d;
      tail = d;
    }
    reparent[tv.node(ch.back()).id] = tail;
  }

  out.instance.edges = inst.edges;
  for (Edge& e : out.instance.edges) {
    auto it = reparent.find(e.child);
    if (it != reparent.end()) e.parent = it->second;
  }
  out.instance.edges.insert(out.instance.edges.end(), dummy_edges.begin(),
                            dummy_edges.end());
  return out;
}

/// Extends a policy on the original instance to the binarized one (dummy
/// edges take their only action, 0).
inline Policy lift_policy(const Binarized& bin, const Policy& original) {
  Policy out = original;
  for (const Node& node : bin.instance.nodes)
    if (node.dummy) out.action[node.id] = 0;
  return out;
}

/// Extends a parameter vector to the binarized instance (dummy edges pass
/// with probability 1).
inline ParamVector lift_params(const Binarized& bin, const ParamVector& original) {
  ParamVector out = original;
  for (const Node& node : bin.instance.nodes)
    if (node.dummy) out.prob[node.id] = {1.0};
  return out;
}

/// Restricts a policy on the binarized instance to the original edges.
inline Policy project_policy(const Binarized& bin, const Policy& lifted) {
  Policy out;
  for (const Node& node : bin.instance.nodes) {
    if (node.dummy) continue;
    auto it = lifted.action.find(node.id);
    if (it != lifted.action.end()) out.action[node.id] = it->second;
  }
  return out;
}

/// Restricts a parameter vector on the binarized instance to the original
/// edges.
inline ParamVector project_params(const Binarized& bin, const ParamVector& lifted) {
  ParamVector out;
  for (const Node& node : bin.instance.nodes) {
    if (node.dummy) continue;
    auto it = lifted.prob.find(node.id);
    if (it != lifted.prob.end()) out.prob[node.id] = it->second;
  }
  return out;
}

}  // namespace riverguard
