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
// Worst-case response to a fixed repair decision: over all budget-feasible
// repair policies and all probabilities inside the intervals, minimize the
// ratio of the decision's value to the response's value, or maximize the
// value shortfall.  Solved by a bottom-up table DP over the (binary) tree,
// either exactly or on a discretized value grid with a one-sided error
// guarantee.

#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <exception>
#include <limits>
#include <stdexcept>
#include <thread>
#include <unordered_map>
#include <vector>

#include "riverguard/binarize.hpp"
#include "riverguard/instance.hpp"

namespace riverguard {

/// A joint choice of repair action and passage probabilities on one edge
/// that the worst case can restrict itself to: probabilities sit at
/// interval endpoints, with only the probabilities of the response action
/// and of the fixed decision action away from their defaults.
struct PolicyParamAction {
  int adversary_action = 0;
  std::vector<double> prob;  // one probability per action on the edge
  double cost = 0.0;
};

/// Endpoint patterns that cover the worst case on one edge, given the
/// decision's action on it.  For response action i != j the response's
/// probability goes high while the decision's goes low; for i == j the
/// shared probability can sit at either end, giving |actions| + 1 entries
/// in total.  Probabilities of uninvolved actions default to their lower
/// bounds.
inline std::vector<PolicyParamAction> gen_pp_actions(const Edge& edge,
                                                     int decision_action) {
  const auto& acts = edge.actions;
  if (decision_action < 0 ||
      static_cast<std::size_t>(decision_action) >= acts.size())
    throw std::out_of_range("decision action " +
                            std::to_string(decision_action) +
                            " out of range on edge " + detail::edge_label(edge));
  std::vector<PolicyParamAction> out;
  out.reserve(acts.size() + 1);
  for (std::size_t i = 0; i < acts.size(); ++i) {
    PolicyParamAction pp;
    pp.adversary_action = static_cast<int>(i);
    pp.cost = acts[i].cost;
    pp.prob.resize(acts.size());
    for (std::size_t k = 0; k < acts.size(); ++k) pp.prob[k] = acts[k].p_low;
    if (static_cast<int>(i) != decision_action) {
      pp.prob[i] = acts[i].p_high;
      out.push_back(std::move(pp));
    } else {
      out.push_back(pp);
      pp.prob[i] = acts[i].p_high;
      out.push_back(std::move(pp));
    }
  }
  return out;
}

/// Value discretization for the response DP.
struct RoundingConfig {
  enum class Mode {
    exact,     // no rounding, tables keyed on exact values
    epsilon,   // per-node grid mu * reward with mu = eps / (2 + eps)
    constant,  // fixed grid width at every non-dummy node
  };
  Mode mode = Mode::exact;
  double epsilon = 0.1;   // relative error target, mode == epsilon
  double constant = 5.0;  // grid width, mode == constant

  /// Drop table entries whose repair cost already exceeds the budget.
  /// Subtree costs only grow toward the root, so this never changes the
  /// optimal value; certificates can differ between equally good entries.
  bool budget_prune = true;
  /// Drop entries beaten on all three coordinates by another entry.  Value
  /// preserving because the combine step is monotone in both child values;
  /// certificates can land on a different equally good entry.  Dominated
  /// entries are the bulk of every large table, so this stays on.
  bool dominance_prune = true;

  static RoundingConfig exact_mode() { return RoundingConfig{}; }
  static RoundingConfig with_epsilon(double eps) {
    RoundingConfig cfg;
    cfg.mode = Mode::epsilon;
    cfg.epsilon = eps;
    return cfg;
  }
  static RoundingConfig with_constant(double k) {
    RoundingConfig cfg;
    cfg.mode = Mode::constant;
    cfg.constant = k;
    return cfg;
  }
};

/// One achievable (response value, decision value) pair for a subtree,
/// with the least repair cost that achieves it and backpointers for
/// certificate recovery.
struct DpEntry {
  double za = 0.0;    // subtree value under the response policy
  double zd = 0.0;    // subtree value under the fixed decision
  double cost = 0.0;  // minimum response repair cost in the subtree
  std::int32_t pp_left = -1;
  std::int32_t pp_right = -1;
  std::int32_t entry_left = -1;
  std::int32_t entry_right = -1;
};

/// Run of table entries sharing one exact repair cost.  When a table has
/// been filtered and classified, entries are grouped into such runs sorted
/// by rising cost, and within a run rise in za (hence also in zd, since a
/// filtered run is a two-dimensional frontier).
struct CostClass {
  double cost = 0.0;
  std::int32_t begin = 0;
  std::int32_t end = 0;
};

struct DpTable {
  std::vector<DpEntry> entries;
  std::vector<CostClass> classes;  // empty until classified

  std::size_t distinct_a() const { return distinct(&DpEntry::za); }
  std::size_t distinct_d() const { return distinct(&DpEntry::zd); }

 private:
  std::size_t distinct(double DpEntry::* field) const {
    std::vector<double> vals;
    vals.reserve(entries.size());
    for (const DpEntry& e : entries) vals.push_back(e.*field);
    std::sort(vals.begin(), vals.end());
    return static_cast<std::size_t>(
        std::unique(vals.begin(), vals.end()) - vals.begin());
  }
};

/// Child-side inputs to a combine step: the child's finished table, the
/// endpoint patterns of the connecting edge, and which action the fixed
/// decision takes on that edge.
struct ChildInput {
  const DpTable* table = nullptr;
  const std::vector<PolicyParamAction>* pp = nullptr;
  std::size_t decision_prob_index = 0;
};

namespace detail {

struct TableKey {
  std::uint64_t a = 0;
  std::uint64_t d = 0;
  bool operator==(const TableKey&) const = default;
};

struct TableKeyHash {
  std::size_t operator()(const TableKey& k) const {
    std::uint64_t h = k.a * 0x9e3779b97f4a7c15ULL;
    h ^= k.d + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
    return static_cast<std::size_t>(h);
  }
};

}  // namespace detail

namespace detail {
inline void dominance_filter(
    DpTable& table,
    double cost_floor = -std::numeric_limits<double>::infinity());

/// Append sink for unrounded nodes whose exact value pairs rarely repeat.
/// Entries are partitioned by repair cost clamped from below to
/// `cost_floor`; within one class a 2D value frontier is all that can ever
/// matter, and few classes arise in practice (costs at or under the floor
/// all share one, the rest take few distinct values), so each class stays
/// small enough to compact in cache.  Should the cost values turn out
/// continuous, the partition degrades into one buffer per entry; past a
/// class cap the sink falls back to a single buffer with full three-way
/// filtering.
class CostClassSink {
 public:
  explicit CostClassSink(
      double cost_floor = -std::numeric_limits<double>::infinity())
      : floor_(cost_floor) {}

  void push(const DpEntry& entry) {
    if (fallback_) {
      push_flat(entry);
      return;
    }
    const std::uint64_t bits =
        std::bit_cast<std::uint64_t>(std::max(entry.cost, floor_));
    if (bits != last_bits_ || last_class_ == kNoClass) {
      auto [it, inserted] = index_.emplace(bits, classes_.size());
      if (inserted) {
        if (classes_.size() == kMaxClasses) {
          index_.clear();
          to_flat();
          push_flat(entry);
          return;
        }
        classes_.emplace_back();
      }
      last_bits_ = bits;
      last_class_ = it->second;
    }
    ClassBuf& buf = classes_[last_class_];
    buf.entries.push_back(entry);
    if (buf.entries.size() >= std::max<std::size_t>(64, buf.frontier * 4)) {
      pareto2d(buf.entries);
      buf.frontier = buf.entries.size();
    }
  }

  void finish(DpTable& out) {
    if (fallback_) {
      out.entries = std::move(flat_);
      return;
    }
    for (ClassBuf& buf : classes_) {
      pareto2d(buf.entries);
      out.entries.insert(out.entries.end(), buf.entries.begin(),
                         buf.entries.end());
    }
  }

 private:
  static constexpr std::size_t kMaxClasses = 4096;
  static constexpr std::size_t kNoClass = ~std::size_t{0};

  struct ClassBuf {
    std::vector<DpEntry> entries;
    std::size_t frontier = 0;
  };

  /// Within a single cost class only (za high, zd low) matters; at equal
  /// value pairs the cheapest entry survives.
  static void pareto2d(std::vector<DpEntry>& entries) {
    std::sort(entries.begin(), entries.end(),
              [](const DpEntry& a, const DpEntry& b) {
                if (a.za != b.za) return a.za > b.za;
                if (a.zd != b.zd) return a.zd < b.zd;
                return a.cost < b.cost;
              });
    std::size_t kept = 0;
    double best_zd = std::numeric_limits<double>::infinity();
    for (const DpEntry& e : entries) {
      if (e.zd >= best_zd) continue;
      best_zd = e.zd;
      entries[kept++] = e;
    }
    entries.resize(kept);
  }

  void push_flat(const DpEntry& entry) {
    flat_.push_back(entry);
    if (flat_.size() >= compact_at_) {
      DpTable tmp;
      tmp.entries = std::move(flat_);
      dominance_filter(tmp, floor_);
      flat_ = std::move(tmp.entries);
      compact_at_ = std::max<std::size_t>(1 << 16, flat_.size() * 4);
    }
  }

  void to_flat() {
    fallback_ = true;
    for (ClassBuf& buf : classes_)
      flat_.insert(flat_.end(), buf.entries.begin(), buf.entries.end());
    classes_.clear();
    compact_at_ = std::max<std::size_t>(1 << 16, flat_.size() * 4);
  }

  double floor_;
  std::unordered_map<std::uint64_t, std::size_t> index_;
  std::vector<ClassBuf> classes_;
  std::vector<DpEntry> flat_;
  std::uint64_t last_bits_ = 0;
  std::size_t last_class_ = kNoClass;
  std::size_t compact_at_ = 1 << 16;
  bool fallback_ = false;
};

/// Worker count for sharded combines: RIVERGUARD_THREADS when set, else
/// the hardware concurrency.  Read once; the same knob caps the CLI's own
/// pools, so one setting governs both layers.
inline int combine_threads() {
  static const int n = [] {
    if (const char* env = std::getenv("RIVERGUARD_THREADS")) {
      const int v = std::atoi(env);
      if (v >= 1 && v <= 256) return v;
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<int>(hw);
  }();
  return n;
}

/// Per-shard output of a parallel combine.  Hash-keyed entries keep their
/// keys so the merge can replay them into the shared table in shard order,
/// which reproduces the sequential min-cost and tie outcomes.
struct ShardBuf {
  std::unordered_map<TableKey, std::int32_t, TableKeyHash> seen;
  std::vector<TableKey> keys;
  std::vector<DpEntry> entries;
  CostClassSink sink;

  explicit ShardBuf(double cost_floor) : sink(cost_floor) {}
};

}  // namespace detail

/// Builds the table of a node from its children's tables.  `grid` == 0
/// keeps exact values; otherwise the response value is pushed down to a
/// grid multiple and the decision value up (flipped under the regret
/// objective, so the rounded objective always errs against the decision).
/// `budget_cap` < 0 disables cost filtering.  Children may be null (leaf)
/// or only `left` set (single child).
///
/// `frontier_only` promises the caller will dominance filter the result,
/// which licenses two shortcuts that never change the surviving frontier:
/// combinations that cannot fit the budget are skipped without being
/// formed, and at unrounded nodes (where exact value pairs rarely
/// coincide and a dedup map would hold millions of doomed entries) the
/// entries stream through a cost-partitioned frontier sink instead.
/// `cost_floor` feeds the sink's partition; pass the largest cost this
/// node's entries can carry while staying feasible under every possible
/// completion, so that always-feasible entries share one class.
inline DpTable combine_tables(
    double reward, Objective objective, double grid, double budget_cap,
    const ChildInput* left, const ChildInput* right, bool frontier_only = false,
    double cost_floor = -std::numeric_limits<double>::infinity()) {
  DpTable out;
  std::unordered_map<detail::TableKey, std::int32_t, detail::TableKeyHash> seen;
  const bool streamed = frontier_only && grid <= 0.0;
  detail::CostClassSink sink(cost_floor);

  const bool floor_a = objective == Objective::ratio;

  // One emit body serves both the sequential pass and the per-shard
  // buffers of a parallel pass, so the dedup and min-cost rules cannot
  // drift apart.  `keys` is only recorded when a later merge needs to
  // replay the entries; the sequential destination passes nullptr.
  using SeenMap =
      std::unordered_map<detail::TableKey, std::int32_t, detail::TableKeyHash>;
  auto put_into = [&](detail::CostClassSink* dst_sink, SeenMap* dst_seen,
                      std::vector<detail::TableKey>* keys,
                      std::vector<DpEntry>* dst) {
    return [&, dst_sink, dst_seen, keys, dst](
               double raw_a, double raw_d, double cost, std::int32_t pl,
               std::int32_t el, std::int32_t pr, std::int32_t er) {
      if (budget_cap >= 0.0 && !within_budget(cost, budget_cap)) return;
      DpEntry entry;
      entry.cost = cost;
      entry.pp_left = pl;
      entry.entry_left = el;
      entry.pp_right = pr;
      entry.entry_right = er;
      detail::TableKey key;
      if (grid > 0.0) {
        const std::int64_t ba =
            floor_a ? static_cast<std::int64_t>(std::floor(raw_a / grid))
                    : static_cast<std::int64_t>(std::ceil(raw_a / grid));
        const std::int64_t bd =
            floor_a ? static_cast<std::int64_t>(std::ceil(raw_d / grid))
                    : static_cast<std::int64_t>(std::floor(raw_d / grid));
        entry.za = static_cast<double>(ba) * grid;
        entry.zd = static_cast<double>(bd) * grid;
        key.a = static_cast<std::uint64_t>(ba);
        key.d = static_cast<std::uint64_t>(bd);
      } else {
        entry.za = raw_a;
        entry.zd = raw_d;
        if (streamed) {
          dst_sink->push(entry);
          return;
        }
        key.a = std::bit_cast<std::uint64_t>(raw_a);
        key.d = std::bit_cast<std::uint64_t>(raw_d);
      }
      auto [it, inserted] =
          dst_seen->emplace(key, static_cast<std::int32_t>(dst->size()));
      if (inserted) {
        if (keys != nullptr) keys->push_back(key);
        dst->push_back(entry);
      } else if (entry.cost <
                 (*dst)[static_cast<std::size_t>(it->second)].cost) {
        (*dst)[static_cast<std::size_t>(it->second)] = entry;
      }
    };
  };
  auto emit = put_into(&sink, &seen, nullptr, &out.entries);

  // Cheapest completion of the right side, for skipping doomed left
  // candidates before the inner loops run.  The margin keeps the skip
  // strictly weaker than emit's own budget test despite the different
  // association of the eventual sums.
  double right_floor = 0.0;
  double right_pat_floor = 0.0;
  if (frontier_only && budget_cap >= 0.0 && right != nullptr) {
    double entry_floor = std::numeric_limits<double>::infinity();
    for (const DpEntry& e : right->table->entries)
      entry_floor = std::min(entry_floor, e.cost);
    right_pat_floor = std::numeric_limits<double>::infinity();
    for (const PolicyParamAction& p : *right->pp)
      right_pat_floor = std::min(right_pat_floor, p.cost);
    right_floor = entry_floor + right_pat_floor;
  }
  const double skip_cap =
      budget_cap + 2e-9 * std::max(1.0, std::abs(budget_cap));
  auto doomed = [&](double lower_bound) {
    return frontier_only && budget_cap >= 0.0 && lower_bound > skip_cap;
  };

  if (left == nullptr) {
    emit(reward, reward, 0.0, -1, -1, -1, -1);
    if (streamed) sink.finish(out);
    return out;
  }
  // A classified right child under a positive grid admits a shortcut that
  // changes only the iteration, not the result: inside one cost class the
  // entries form a value staircase, so the rounded bins of the combined
  // values are monotone along it and each run of same-bin entries
  // collapses to its first member (the rest share bin and cost exactly).
  // Bin boundaries are found by binary search with the same expressions
  // emit evaluates, keeping the arithmetic bit-identical.
  const bool walk =
      grid > 0.0 && right != nullptr && !right->table->classes.empty();

  const auto& lt = left->table->entries;
  const auto& lpp = *left->pp;

  auto process = [&](std::int32_t el_begin, std::int32_t el_end, auto&& put) {
  for (std::int32_t el = el_begin; el < el_end; ++el) {
    const DpEntry& ev = lt[static_cast<std::size_t>(el)];
    for (std::int32_t pl = 0; pl < static_cast<std::int32_t>(lpp.size()); ++pl) {
      const PolicyParamAction& ppl = lpp[static_cast<std::size_t>(pl)];
      const double qa_l =
          ppl.prob[static_cast<std::size_t>(ppl.adversary_action)];
      const double qd_l = ppl.prob[left->decision_prob_index];
      const double base_a = qa_l * ev.za;
      const double base_d = qd_l * ev.zd;
      const double base_c = ppl.cost + ev.cost;
      if (right == nullptr) {
        put(reward + base_a, reward + base_d, base_c, pl, el, -1, -1);
        continue;
      }
      if (doomed(base_c + right_floor)) continue;
      const auto& rt = right->table->entries;
      const auto& rpp = *right->pp;
      if (walk) {
        for (std::int32_t pr = 0; pr < static_cast<std::int32_t>(rpp.size());
             ++pr) {
          const PolicyParamAction& ppr = rpp[static_cast<std::size_t>(pr)];
          const double qa_r =
              ppr.prob[static_cast<std::size_t>(ppr.adversary_action)];
          const double qd_r = ppr.prob[right->decision_prob_index];
          auto bin_a = [&](const DpEntry& e) {
            const double raw = reward + base_a + qa_r * e.za;
            return floor_a ? static_cast<std::int64_t>(std::floor(raw / grid))
                           : static_cast<std::int64_t>(std::ceil(raw / grid));
          };
          auto bin_d = [&](const DpEntry& e) {
            const double raw = reward + base_d + qd_r * e.zd;
            return floor_a ? static_cast<std::int64_t>(std::ceil(raw / grid))
                           : static_cast<std::int64_t>(std::floor(raw / grid));
          };
          for (const CostClass& cc : right->table->classes) {
            if (doomed(base_c + ppr.cost + cc.cost)) break;
            std::int32_t i = cc.begin;
            while (i < cc.end) {
              const std::int64_t ba = bin_a(rt[static_cast<std::size_t>(i)]);
              const std::int32_t run = static_cast<std::int32_t>(
                  std::partition_point(
                      rt.begin() + i, rt.begin() + cc.end,
                      [&](const DpEntry& e) { return bin_a(e) == ba; }) -
                  rt.begin());
              std::int32_t j = i;
              while (j < run) {
                const DpEntry& ew = rt[static_cast<std::size_t>(j)];
                const std::int64_t bd = bin_d(ew);
                put(reward + base_a + qa_r * ew.za,
                    reward + base_d + qd_r * ew.zd,
                    base_c + ppr.cost + ew.cost, pl, el, pr, j);
                j = static_cast<std::int32_t>(
                    std::partition_point(
                        rt.begin() + j, rt.begin() + run,
                        [&](const DpEntry& e) { return bin_d(e) == bd; }) -
                    rt.begin());
              }
              i = run;
            }
          }
        }
        continue;
      }
      for (std::int32_t er = 0; er < static_cast<std::int32_t>(rt.size());
           ++er) {
        const DpEntry& ew = rt[static_cast<std::size_t>(er)];
        if (doomed(base_c + ew.cost + right_pat_floor)) {
          if (!right->table->classes.empty()) break;
          continue;
        }
        for (std::int32_t pr = 0; pr < static_cast<std::int32_t>(rpp.size());
             ++pr) {
          const PolicyParamAction& ppr = rpp[static_cast<std::size_t>(pr)];
          const double qa_r =
              ppr.prob[static_cast<std::size_t>(ppr.adversary_action)];
          put(reward + base_a + qa_r * ew.za,
              reward + base_d + ppr.prob[right->decision_prob_index] * ew.zd,
              base_c + ppr.cost + ew.cost, pl, el, pr, er);
        }
      }
    }
  }
  };

  // Frontier combines at wide nodes dominate the whole solve, and the spec
  // of the merge (min cost per key, first writer wins ties) is associative,
  // so large products fan out over contiguous left-entry shards.  Each
  // worker fills a private buffer; replaying the buffers in shard order
  // afterwards reproduces the sequential winner for every key.
  const double product = static_cast<double>(lt.size()) * lpp.size() *
                         (right != nullptr
                              ? static_cast<double>(right->table->entries.size()) *
                                    right->pp->size()
                              : 1.0);
  constexpr double kParallelGrain = 16.0 * 1024 * 1024;
  int shards = 1;
  if ((walk || streamed) && product >= 2 * kParallelGrain) {
    shards = std::min({detail::combine_threads(),
                       static_cast<int>(product / kParallelGrain),
                       static_cast<int>(lt.size())});
  }
  if (shards <= 1) {
    process(0, static_cast<std::int32_t>(lt.size()), emit);
  } else {
    std::vector<detail::ShardBuf> bufs;
    bufs.reserve(static_cast<std::size_t>(shards));
    for (int w = 0; w < shards; ++w) bufs.emplace_back(cost_floor);
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(shards));
    std::vector<std::thread> workers;
    workers.reserve(static_cast<std::size_t>(shards));
    const std::int64_t nl = static_cast<std::int64_t>(lt.size());
    for (int w = 0; w < shards; ++w) {
      workers.emplace_back([&, w] {
        try {
          detail::ShardBuf& sb = bufs[static_cast<std::size_t>(w)];
          process(static_cast<std::int32_t>(nl * w / shards),
                  static_cast<std::int32_t>(nl * (w + 1) / shards),
                  put_into(&sb.sink, &sb.seen, &sb.keys, &sb.entries));
        } catch (...) {
          errors[static_cast<std::size_t>(w)] = std::current_exception();
        }
      });
    }
    for (std::thread& t : workers) t.join();
    for (const std::exception_ptr& e : errors) {
      if (e) std::rethrow_exception(e);
    }
    for (detail::ShardBuf& sb : bufs) {
      if (streamed) {
        DpTable local;
        sb.sink.finish(local);
        for (const DpEntry& entry : local.entries) sink.push(entry);
        continue;
      }
      for (std::size_t i = 0; i < sb.entries.size(); ++i) {
        const detail::TableKey& key = sb.keys[i];
        const DpEntry& entry = sb.entries[i];
        auto [it, inserted] = seen.emplace(
            key, static_cast<std::int32_t>(out.entries.size()));
        if (inserted) {
          out.entries.push_back(entry);
        } else if (entry.cost <
                   out.entries[static_cast<std::size_t>(it->second)].cost) {
          out.entries[static_cast<std::size_t>(it->second)] = entry;
        }
      }
    }
  }
  if (streamed) sink.finish(out);
  return out;
}

namespace detail {

/// Removes entries that another entry beats or matches on all of
/// (za high, zd low, cost low).  Costs compare after clamping from below
/// to `cost_floor`: an entry cheap enough to survive every completion of
/// the budget gains nothing from being cheaper still, so such entries
/// collapse to a single value frontier.  Ties across all three clamped
/// coordinates keep the cheapest entry, then the earliest.  Prefix maxima
/// of za over zd-rank make this O(T log T).
inline void dominance_filter(DpTable& table, double cost_floor) {
  const std::size_t n = table.entries.size();
  if (n < 2) return;
  std::vector<double> zs;
  zs.reserve(n);
  for (const DpEntry& e : table.entries) zs.push_back(e.zd);
  std::sort(zs.begin(), zs.end());
  zs.erase(std::unique(zs.begin(), zs.end()), zs.end());
  auto rank = [&](double zd) {
    return static_cast<std::size_t>(
               std::lower_bound(zs.begin(), zs.end(), zd) - zs.begin()) + 1;
  };

  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) {
    const DpEntry& a = table.entries[x];
    const DpEntry& b = table.entries[y];
    const double ca = std::max(a.cost, cost_floor);
    const double cb = std::max(b.cost, cost_floor);
    if (ca != cb) return ca < cb;
    if (a.zd != b.zd) return a.zd < b.zd;
    if (a.za != b.za) return a.za > b.za;
    if (a.cost != b.cost) return a.cost < b.cost;
    return x < y;
  });

  constexpr double kNone = -std::numeric_limits<double>::infinity();
  std::vector<double> tree(zs.size() + 1, kNone);
  auto update = [&](std::size_t i, double v) {
    for (; i <= zs.size(); i += i & (~i + 1))
      tree[i] = std::max(tree[i], v);
  };
  auto query = [&](std::size_t i) {
    double best = kNone;
    for (; i > 0; i -= i & (~i + 1)) best = std::max(best, tree[i]);
    return best;
  };

  std::vector<char> dead(n, 0);
  for (std::size_t idx : order) {
    const DpEntry& e = table.entries[idx];
    const std::size_t r = rank(e.zd);
    if (query(r) >= e.za) {
      dead[idx] = 1;
      continue;
    }
    update(r, e.za);
  }
  std::vector<DpEntry> kept;
  kept.reserve(n);
  for (std::size_t i = 0; i < n; ++i)
    if (!dead[i]) kept.push_back(table.entries[i]);
  table.entries = std::move(kept);
}

/// Orders a filtered table by (cost, za) and records the equal-cost runs.
/// Filtering guarantees each run is a 2D frontier, which later combines
/// exploit: za determines the entry within a run, so (cost, za) is a total
/// order and the layout is deterministic.  Reordering is safe because
/// entries hold backpointers into the children, not the other way around;
/// parents built afterwards record the new positions.
inline void classify(DpTable& table) {
  std::sort(table.entries.begin(), table.entries.end(),
            [](const DpEntry& a, const DpEntry& b) {
              if (a.cost != b.cost) return a.cost < b.cost;
              return a.za < b.za;
            });
  table.classes.clear();
  const std::int32_t n = static_cast<std::int32_t>(table.entries.size());
  for (std::int32_t i = 0; i < n;) {
    std::int32_t j = i + 1;
    while (j < n && table.entries[static_cast<std::size_t>(j)].cost ==
                        table.entries[static_cast<std::size_t>(i)].cost)
      ++j;
    table.classes.push_back(
        CostClass{table.entries[static_cast<std::size_t>(i)].cost, i, j});
    i = j;
  }
}

}  // namespace detail

/// Per-node table statistics, mostly of interest for grid-size analyses.
struct NodeDiagnostics {
  NodeId id = 0;
  std::size_t entries = 0;
  std::size_t distinct_a = 0;  // distinct response-side values in the table
  std::size_t distinct_d = 0;
  double grid = 0.0;           // grid width at this node, 0 = exact
  std::size_t subtree_nodes = 0;
  double subtree_reward = 0.0;
  double subtree_grid_sum = 0.0;  // sum of grid widths over the subtree
};

/// Full DP state of one solve, exposed for table-level inspection.
struct DpRun {
  std::vector<double> grid;             // by node position in the instance
  std::vector<DpTable> table;           // by node position
  std::vector<std::vector<PolicyParamAction>> pp;  // incoming edge patterns
  std::vector<int> chosen_entry;        // certificate path, -1 off-path
  int root_entry = -1;
};

/// Worst-case response and its certificate.
struct AdversaryResult {
  Objective objective = Objective::ratio;
  double value = 0.0;        // true objective at (policy, params), recomputed
  double table_value = 0.0;  // objective read off the (possibly rounded) table
  double cost = 0.0;
  Policy policy;
  ParamVector params;
  std::vector<NodeDiagnostics> diagnostics;
};

/// Minimizes z(decision) / z(response) (or maximizes the difference for
/// the regret objective) over budget-feasible response policies and
/// interval probabilities, on an instance where every node has at most two
/// children.  `run`, when given, receives the complete table state.
inline AdversaryResult solve_rdp(const NetworkInstance& inst,
                                 const Policy& decision, Objective objective,
                                 const RoundingConfig& cfg,
                                 DpRun* run = nullptr) {
  using Mode = RoundingConfig::Mode;
  TreeView tv(inst);
  for (int u = 0; u < tv.size(); ++u)
    if (tv.children(u).size() > 2)
      throw std::invalid_argument(
          "node " + std::to_string(tv.node(u).id) +
          " has more than two children; binarize the instance first");
  if (cfg.mode == Mode::epsilon && !(cfg.epsilon > 0.0))
    throw std::invalid_argument("epsilon must be positive");
  if (cfg.mode == Mode::constant && !(cfg.constant > 0.0))
    throw std::invalid_argument("grid constant must be positive");

  const int n = tv.size();
  const double mu = cfg.epsilon / (2.0 + cfg.epsilon);
  std::vector<double> grid(static_cast<std::size_t>(n), 0.0);
  for (int u = 0; u < n; ++u) {
    const Node& node = tv.node(u);
    if (node.dummy) continue;
    if (cfg.mode == Mode::epsilon)
      grid[static_cast<std::size_t>(u)] = mu * node.reward;
    else if (cfg.mode == Mode::constant)
      grid[static_cast<std::size_t>(u)] = cfg.constant;
  }

  std::vector<std::vector<PolicyParamAction>> pp(
      static_cast<std::size_t>(n));
  std::vector<std::size_t> decision_ix(static_cast<std::size_t>(n), 0);
  for (int u = 0; u < n; ++u) {
    const Edge* e = tv.edge_in(u);
    if (e == nullptr) continue;
    const int j = decision.at(e->child);
    if (j < 0 || static_cast<std::size_t>(j) >= e->actions.size())
      throw std::out_of_range("decision names missing action " +
                              std::to_string(j) + " on edge " +
                              detail::edge_label(*e));
    pp[static_cast<std::size_t>(u)] = gen_pp_actions(*e, j);
    decision_ix[static_cast<std::size_t>(u)] = static_cast<std::size_t>(j);
  }

  const double cap = cfg.budget_prune ? inst.budget : -1.0;
  const auto& pre = tv.preorder();

  // Spend recorded in a node's table covers exactly the edges strictly
  // below it, so budget minus the dearest completion outside the subtree
  // bounds the cost beyond which an entry can still be priced out.  Below
  // that slack, cost never discriminates again and the filters may treat
  // it as flat.
  std::vector<double> below(static_cast<std::size_t>(n), 0.0);
  for (auto it = pre.rbegin(); it != pre.rend(); ++it) {
    const int u = *it;
    for (int c : tv.children(u)) {
      double dearest = 0.0;
      for (const Action& a : tv.edge_in(c)->actions)
        dearest = std::max(dearest, a.cost);
      below[static_cast<std::size_t>(u)] +=
          below[static_cast<std::size_t>(c)] + dearest;
    }
  }
  const double spend_total = below[static_cast<std::size_t>(tv.root())];

  std::vector<DpTable> table(static_cast<std::size_t>(n));
  for (auto it = pre.rbegin(); it != pre.rend(); ++it) {
    const int u = *it;
    const auto& ch = tv.children(u);
    ChildInput left, right;
    const ChildInput* lp = nullptr;
    const ChildInput* rp = nullptr;
    if (!ch.empty()) {
      left = ChildInput{&table[static_cast<std::size_t>(ch[0])],
                        &pp[static_cast<std::size_t>(ch[0])],
                        decision_ix[static_cast<std::size_t>(ch[0])]};
      lp = &left;
    }
    if (ch.size() == 2) {
      right = ChildInput{&table[static_cast<std::size_t>(ch[1])],
                         &pp[static_cast<std::size_t>(ch[1])],
                         decision_ix[static_cast<std::size_t>(ch[1])]};
      rp = &right;
    }
    const bool frontier = cfg.dominance_prune && u != tv.root();
    const double slack =
        inst.budget - (spend_total - below[static_cast<std::size_t>(u)]);
    table[static_cast<std::size_t>(u)] =
        combine_tables(tv.node(u).reward, objective,
                       grid[static_cast<std::size_t>(u)], cap, lp, rp,
                       frontier, slack);
    if (frontier) {
      detail::dominance_filter(table[static_cast<std::size_t>(u)], slack);
      detail::classify(table[static_cast<std::size_t>(u)]);
    }
  }

  // Root extraction: best feasible entry, first hit wins ties.  Ratios are
  // compared by cross multiplication, which stays well defined when a
  // coarse grid floors a response value to zero (such entries lose to any
  // entry with a positive response value).
  const auto& root_entries = table[static_cast<std::size_t>(tv.root())].entries;
  int best = -1;
  for (int i = 0; i < static_cast<int>(root_entries.size()); ++i) {
    const DpEntry& e = root_entries[static_cast<std::size_t>(i)];
    if (!within_budget(e.cost, inst.budget)) continue;
    if (best < 0) {
      best = i;
      continue;
    }
    const DpEntry& b = root_entries[static_cast<std::size_t>(best)];
    const bool better = objective == Objective::ratio
                            ? e.zd * b.za < b.zd * e.za
                            : e.za - e.zd > b.za - b.zd;
    if (better) best = i;
  }
  if (best < 0)
    throw std::logic_error("no feasible response; the null policy is missing");

  // Certificate recovery along the backpointers.
  std::vector<int> chosen(static_cast<std::size_t>(n), -1);
  Policy response;
  ParamVector params;
  std::vector<std::pair<int, int>> stack{{tv.root(), best}};
  while (!stack.empty()) {
    const auto [u, idx] = stack.back();
    stack.pop_back();
    chosen[static_cast<std::size_t>(u)] = idx;
    const DpEntry& e =
        table[static_cast<std::size_t>(u)].entries[static_cast<std::size_t>(idx)];
    const auto& ch = tv.children(u);
    if (e.entry_left >= 0) {
      const int v = ch[0];
      const PolicyParamAction& sel =
          pp[static_cast<std::size_t>(v)][static_cast<std::size_t>(e.pp_left)];
      response.action[tv.node(v).id] = sel.adversary_action;
      params.prob[tv.node(v).id] = sel.prob;
      stack.emplace_back(v, e.entry_left);
    }
    if (e.entry_right >= 0) {
      const int v = ch[1];
      const PolicyParamAction& sel =
          pp[static_cast<std::size_t>(v)][static_cast<std::size_t>(e.pp_right)];
      response.action[tv.node(v).id] = sel.adversary_action;
      params.prob[tv.node(v).id] = sel.prob;
      stack.emplace_back(v, e.entry_right);
    }
  }

  AdversaryResult out;
  out.objective = objective;
  out.policy = std::move(response);
  out.params = std::move(params);
  out.cost = policy_cost(inst, out.policy);
  const double zd_true = evaluate(tv, decision, out.params);
  const double za_true = evaluate(tv, out.policy, out.params);
  out.value = objective == Objective::ratio ? zd_true / za_true
                                            : za_true - zd_true;
  const DpEntry& be = root_entries[static_cast<std::size_t>(best)];
  out.table_value =
      objective == Objective::ratio
          ? (be.za > 0.0 ? be.zd / be.za
                         : std::numeric_limits<double>::infinity())
          : be.za - be.zd;

  // Subtree statistics, bottom up.
  std::vector<std::size_t> sub_n(static_cast<std::size_t>(n), 1);
  std::vector<double> sub_r(static_cast<std::size_t>(n), 0.0);
  std::vector<double> sub_g(static_cast<std::size_t>(n), 0.0);
  out.diagnostics.resize(static_cast<std::size_t>(n));
  for (auto it = pre.rbegin(); it != pre.rend(); ++it) {
    const int u = *it;
    sub_r[static_cast<std::size_t>(u)] = tv.node(u).reward;
    sub_g[static_cast<std::size_t>(u)] = grid[static_cast<std::size_t>(u)];
    for (int v : tv.children(u)) {
      sub_n[static_cast<std::size_t>(u)] += sub_n[static_cast<std::size_t>(v)];
      sub_r[static_cast<std::size_t>(u)] += sub_r[static_cast<std::size_t>(v)];
      sub_g[static_cast<std::size_t>(u)] += sub_g[static_cast<std::size_t>(v)];
    }
    NodeDiagnostics& d = out.diagnostics[static_cast<std::size_t>(u)];
    d.id = tv.node(u).id;
    d.entries = table[static_cast<std::size_t>(u)].entries.size();
    d.distinct_a = table[static_cast<std::size_t>(u)].distinct_a();
    d.distinct_d = table[static_cast<std::size_t>(u)].distinct_d();
    d.grid = grid[static_cast<std::size_t>(u)];
    d.subtree_nodes = sub_n[static_cast<std::size_t>(u)];
    d.subtree_reward = sub_r[static_cast<std::size_t>(u)];
    d.subtree_grid_sum = sub_g[static_cast<std::size_t>(u)];
  }

  if (run != nullptr) {
    run->grid = std::move(grid);
    run->table = std::move(table);
    run->pp = std::move(pp);
    run->chosen_entry = std::move(chosen);
    run->root_entry = best;
  }
  return out;
}

/// Exact worst-case response on a binary instance.
inline AdversaryResult solve_exact(const NetworkInstance& inst,
                                   const Policy& decision, Objective objective,
                                   DpRun* run = nullptr) {
  RoundingConfig cfg;
  return solve_rdp(inst, decision, objective, cfg, run);
}

/// Worst-case response on a general instance: binarizes internally, lifts
/// the decision, and projects the certificate back to the original edges.
inline AdversaryResult solve_adversary(const NetworkInstance& inst,
                                       const Policy& decision,
                                       Objective objective,
                                       const RoundingConfig& cfg) {
  const Binarized bin = binarize(inst);
  AdversaryResult res =
      solve_rdp(bin.instance, lift_policy(bin, decision), objective, cfg);
  res.policy = project_policy(bin, res.policy);
  res.params = project_params(bin, res.params);
  return res;
}

}  // namespace riverguard

