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
#include <numeric>
#include <vector>

#include "riverguard/instance.hpp"

namespace riverguard {

/// Budgeted subtree optimization for one fixed probability per (edge,
/// action): per node, the Pareto frontier of achievable (value, cost)
/// pairs, value counted with the node entered at accessibility one.
/// Frontiers are staircases: cost strictly increasing, value strictly
/// increasing, at most one point per distinct cost.  Backpointers allow
/// recovering a witness policy for any frontier point.
class FrontierDp {
 public:
  struct Point {
    double value = 0.0;
    double cost = 0.0;
    std::int32_t prev = -1;         // point in the previous merge stage
    std::int32_t action = -1;       // action on the edge to this stage's child
    std::int32_t child_entry = -1;  // frontier point inside that child
  };

  /// `prob[v][i]` is the probability of action i on the edge into node v
  /// (by node position); the root row is ignored.  Pairs costing more than
  /// `cost_cap` are discarded everywhere.
  FrontierDp(const TreeView& tv, const std::vector<std::vector<double>>& prob,
             double cost_cap)
      : tv_(&tv),
        stages_(static_cast<std::size_t>(tv.size())),
        edge_frontier_(static_cast<std::size_t>(tv.size())),
        final_(static_cast<std::size_t>(tv.size())) {
    const auto& pre = tv.preorder();
    for (auto it = pre.rbegin(); it != pre.rend(); ++it) {
      const int u = *it;
      std::vector<Point> acc{
          Point{tv.node(u).reward, 0.0, -1, -1, -1}};
      const auto& ch = tv.children(u);
      for (std::size_t j = 0; j < ch.size(); ++j) {
        const int v = ch[j];
        const Edge& e = *tv.edge_in(v);
        const auto& pv = prob[static_cast<std::size_t>(v)];
        // Options on this edge: action choice times the child's frontier.
        std::vector<Point> options;
        for (std::int32_t i = 0; i < static_cast<std::int32_t>(e.actions.size());
             ++i) {
          const auto& sub = frontier(v);
          for (std::int32_t s = 0; s < static_cast<std::int32_t>(sub.size());
               ++s) {
            options.push_back(Point{
                pv[static_cast<std::size_t>(i)] * sub[static_cast<std::size_t>(s)].value,
                e.actions[static_cast<std::size_t>(i)].cost +
                    sub[static_cast<std::size_t>(s)].cost,
                -1, i, s});
          }
        }
        prune(options, cost_cap);
        edge_frontier_[static_cast<std::size_t>(v)] = options;

        std::vector<Point> next;
        next.reserve(acc.size() * options.size());
        for (std::int32_t a = 0; a < static_cast<std::int32_t>(acc.size());
             ++a) {
          for (const Point& o : options) {
            next.push_back(Point{acc[static_cast<std::size_t>(a)].value + o.value,
                                 acc[static_cast<std::size_t>(a)].cost + o.cost,
                                 a, o.action, o.child_entry});
          }
        }
        prune(next, cost_cap);
        stages_[static_cast<std::size_t>(u)].push_back(next);
        acc = std::move(next);
      }
      final_[static_cast<std::size_t>(u)] = std::move(acc);
    }
  }

  /// Frontier of the subtree rooted at node u.
  const std::vector<Point>& frontier(int u) const {
    return final_[static_cast<std::size_t>(u)];
  }

  /// Frontier of one edge: value scaled by the action's probability,
  /// cost including the action itself.  Indexed by the child node.
  const std::vector<Point>& edge_frontier(int v) const {
    return edge_frontier_[static_cast<std::size_t>(v)];
  }

  /// Largest frontier value of u's subtree with cost within `cap`, or
  /// `fallback` when nothing fits (possible only if cap < 0).
  double best_value(int u, double cap, double fallback = 0.0) const {
    const auto& f = final_[static_cast<std::size_t>(u)];
    double best = fallback;
    for (const Point& pt : f) {
      if (!within_budget(pt.cost, cap)) break;
      best = pt.value;
    }
    return best;
  }

  /// Largest edge-frontier value for the edge into v with cost within
  /// `cap`.  The staircase is binary-searched, so this is cheap enough
  /// for bound evaluations in inner loops.
  double best_edge_value(int v, double cap) const {
    const auto& f = edge_frontier_[static_cast<std::size_t>(v)];
    auto it = std::partition_point(
        f.begin(), f.end(),
        [cap](const Point& p) { return within_budget(p.cost, cap); });
    return it == f.begin() ? 0.0 : std::prev(it)->value;
  }

  /// Witness policy for frontier point `entry` of node u, covering exactly
  /// the edges in u's subtree.
  void recover(int u, int entry, Policy* out) const {
    const auto& ch = tv_->children(u);
    if (ch.empty()) return;
    const auto& st = stages_[static_cast<std::size_t>(u)];
    std::int32_t idx = static_cast<std::int32_t>(entry);
    for (std::size_t j = ch.size(); j-- > 0;) {
      const Point& pt = st[j][static_cast<std::size_t>(idx)];
      const int v = ch[j];
      out->action[tv_->node(v).id] = pt.action;
      recover(v, pt.child_entry, out);
      idx = pt.prev;
    }
  }

 private:
  static void prune(std::vector<Point>& pts, double cap) {
    std::erase_if(pts, [cap](const Point& p) {
      return !within_budget(p.cost, cap);
    });
    std::vector<std::size_t> order(pts.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      if (pts[a].cost != pts[b].cost) return pts[a].cost < pts[b].cost;
      if (pts[a].value != pts[b].value) return pts[a].value > pts[b].value;
      return a < b;
    });
    std::vector<Point> kept;
    kept.reserve(pts.size());
    double best = -1.0;
    for (std::size_t i : order) {
      if (pts[i].value > best) {
        kept.push_back(pts[i]);
        best = pts[i].value;
      }
    }
    pts = std::move(kept);
  }

  const TreeView* tv_;
  std::vector<std::vector<std::vector<Point>>> stages_;
  std::vector<std::vector<Point>> edge_frontier_;
  std::vector<std::vector<Point>> final_;
};

/// Dense per-(edge, action) probability table indexed by node position,
/// extracted from a parameter vector.
inline std::vector<std::vector<double>> prob_table(const TreeView& tv,
                                                   const ParamVector& params) {
  std::vector<std::vector<double>> out(static_cast<std::size_t>(tv.size()));
  for (int u = 0; u < tv.size(); ++u) {
    const Edge* e = tv.edge_in(u);
    if (e == nullptr) continue;
    auto& row = out[static_cast<std::size_t>(u)];
    row.reserve(e->actions.size());
    for (std::size_t i = 0; i < e->actions.size(); ++i)
      row.push_back(params.at(e->child, static_cast<int>(i)));
  }
  return out;
}

}  // namespace riverguard
