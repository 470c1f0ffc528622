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

#include <cctype>
#include <cstdio>
#include <cstdlib>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "riverguard/instance.hpp"
#include "riverguard/master.hpp"

namespace riverguard {

namespace detail {

inline std::string lp_num(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

/// Running linear expression: "c v", then " + c v" / " - c v".
class LpExpr {
 public:
  void add(double coef, const std::string& var) {
    if (first_) {
      if (coef < 0.0)
        out_ << "- " << lp_num(-coef) << ' ' << var;
      else
        out_ << lp_num(coef) << ' ' << var;
      first_ = false;
    } else {
      if (coef < 0.0)
        out_ << " - " << lp_num(-coef) << ' ' << var;
      else
        out_ << " + " << lp_num(coef) << ' ' << var;
    }
  }
  bool empty() const { return first_; }
  std::string str() const { return out_.str(); }

 private:
  std::ostringstream out_;
  bool first_ = true;
};

}  // namespace detail

/// Mixed-integer linear program for the scenario-restricted robust-ratio
/// problem, in CPLEX LP text format.  The objective M is the smallest
/// ratio over scenarios; each ratio constraint is pre-multiplied by the
/// constant rival value to stay linear.  Variables: x_{e}_{i} (binary
/// action choice), a_s{k}_{v} (accessibility of v under scenario k),
/// l_s{k}_{v}_{i} (accessibility increment if action i is taken), and
/// z_s{k} (the policy value under scenario k).
inline std::string export_milp(const NetworkInstance& inst,
                               const ScenarioSet& scenarios) {
  if (scenarios.empty())
    throw std::invalid_argument("export_milp: empty scenario set");
  for (const Scenario& sc : scenarios)
    if (!(sc.value > 0.0))
      throw std::invalid_argument(
          "export_milp: scenario value must be positive");
  TreeView tv(inst);

  const auto node_name = [](NodeId v) { return std::to_string(v); };
  std::ostringstream out;
  out << "Maximize\n obj: 1 M\nSubject To\n";

  for (std::size_t k = 0; k < scenarios.size(); ++k) {
    const Scenario& sc = scenarios[k];
    const std::string sk = "s" + std::to_string(k);

    detail::LpExpr ratio;
    ratio.add(sc.value, "M");
    ratio.add(-1.0, "z_" + sk);
    out << " ratio_" << sk << ": " << ratio.str() << " <= 0\n";

    detail::LpExpr link;
    link.add(1.0, "z_" + sk);
    for (const Node& nd : inst.nodes)
      link.add(-nd.reward, "a_" + sk + "_" + node_name(nd.id));
    out << " link_" << sk << ": " << link.str() << " = 0\n";

    out << " root_" << sk << ": 1 a_" << sk << "_" << node_name(inst.root)
        << " = 1\n";

    for (const Edge& e : inst.edges) {
      const std::string av = "a_" + sk + "_" + node_name(e.child);
      const std::string ap = "a_" + sk + "_" + node_name(e.parent);
      detail::LpExpr acc;
      acc.add(1.0, av);
      acc.add(-sc.params.at(e.child, 0), ap);
      for (std::size_t i = 0; i < e.actions.size(); ++i)
        acc.add(-1.0, "l_" + sk + "_" + node_name(e.child) + "_" +
                          std::to_string(i));
      out << " acc_" << sk << "_" << node_name(e.child) << ": " << acc.str()
          << " = 0\n";

      for (std::size_t i = 0; i < e.actions.size(); ++i) {
        const std::string lv =
            "l_" + sk + "_" + node_name(e.child) + "_" + std::to_string(i);
        const std::string xv =
            "x_" + node_name(e.child) + "_" + std::to_string(i);
        detail::LpExpr act;
        act.add(1.0, lv);
        act.add(-1.0, xv);
        out << " act_" << sk << "_" << node_name(e.child) << "_" << i << ": "
            << act.str() << " <= 0\n";

        const double gap = sc.params.at(e.child, static_cast<int>(i)) -
                           sc.params.at(e.child, 0);
        detail::LpExpr cap;
        cap.add(1.0, lv);
        if (gap != 0.0) cap.add(-gap, ap);
        out << " cap_" << sk << "_" << node_name(e.child) << "_" << i << ": "
            << cap.str() << " <= 0\n";
      }
    }
  }

  for (const Edge& e : inst.edges) {
    detail::LpExpr one;
    for (std::size_t i = 0; i < e.actions.size(); ++i)
      one.add(1.0, "x_" + node_name(e.child) + "_" + std::to_string(i));
    out << " one_" << node_name(e.child) << ": " << one.str() << " = 1\n";
  }

  detail::LpExpr budget;
  for (const Edge& e : inst.edges)
    for (std::size_t i = 0; i < e.actions.size(); ++i)
      if (e.actions[i].cost != 0.0)
        budget.add(e.actions[i].cost,
                   "x_" + node_name(e.child) + "_" + std::to_string(i));
  if (budget.empty() && !inst.edges.empty())
    budget.add(0.0, "x_" + node_name(inst.edges.front().child) + "_0");
  if (!budget.empty())
    out << " budget: " << budget.str() << " <= " << detail::lp_num(inst.budget)
        << "\n";

  out << "Bounds\n";
  for (std::size_t k = 0; k < scenarios.size(); ++k) {
    const std::string sk = "s" + std::to_string(k);
    for (const Node& nd : inst.nodes)
      out << " 0 <= a_" << sk << "_" << node_name(nd.id) << " <= 1\n";
    for (const Edge& e : inst.edges)
      for (std::size_t i = 0; i < e.actions.size(); ++i)
        out << " 0 <= l_" << sk << "_" << node_name(e.child) << "_" << i
            << " <= 1\n";
  }
  out << "Binary\n";
  for (const Edge& e : inst.edges)
    for (std::size_t i = 0; i < e.actions.size(); ++i)
      out << " x_" << node_name(e.child) << "_" << i << "\n";
  out << "End\n";
  return out.str();
}

/// Minimal reader for the LP files written above (and for hand-written
/// models of the same shape: one constraint per line, explicit
/// coefficients).  Enough to round-trip counts and coefficients in tests.
struct LpTerm {
  double coef = 0.0;
  std::string var;
};

struct LpConstraint {
  std::string name;
  std::vector<LpTerm> terms;
  std::string sense;  // "<=", ">=", "="
  double rhs = 0.0;
};

struct LpModel {
  bool maximize = true;
  std::vector<LpTerm> objective;
  std::vector<LpConstraint> constraints;
  std::map<std::string, std::pair<double, double>> bounds;
  std::vector<std::string> binaries;
  std::set<std::string> variables;

  const LpConstraint* find(const std::string& name) const {
    for (const auto& c : constraints)
      if (c.name == name) return &c;
    return nullptr;
  }
};

namespace detail {

inline std::vector<std::string> lp_tokens(const std::string& line) {
  std::vector<std::string> toks;
  std::istringstream in(line);
  std::string t;
  while (in >> t) toks.push_back(t);
  return toks;
}

inline bool lp_number(const std::string& tok, double* out) {
  char* end = nullptr;
  const double v = std::strtod(tok.c_str(), &end);
  if (end == tok.c_str() || *end != '\0') return false;
  *out = v;
  return true;
}

/// Parses "[c] v [+|- [c] v]..." from toks[begin, end).
inline std::vector<LpTerm> lp_expr(const std::vector<std::string>& toks,
                                   std::size_t begin, std::size_t end) {
  std::vector<LpTerm> terms;
  double sign = 1.0;
  double coef = 1.0;
  bool have_coef = false;
  for (std::size_t i = begin; i < end; ++i) {
    const std::string& tok = toks[i];
    double num = 0.0;
    if (tok == "+") {
      sign = 1.0;
    } else if (tok == "-") {
      sign = -1.0;
    } else if (lp_number(tok, &num)) {
      coef = num;
      have_coef = true;
    } else {
      terms.push_back(LpTerm{sign * (have_coef ? coef : 1.0), tok});
      sign = 1.0;
      coef = 1.0;
      have_coef = false;
    }
  }
  return terms;
}

}  // namespace detail

inline LpModel parse_lp(const std::string& text) {
  LpModel model;
  enum class Section { none, objective, constraints, bounds, binary, done };
  Section section = Section::none;

  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    auto toks = detail::lp_tokens(line);
    if (toks.empty() || toks.front().front() == '\\') continue;

    std::string lowered;
    for (const auto& t : toks)
      for (char c : t) lowered += static_cast<char>(std::tolower(c));
    if (lowered == "maximize" || lowered == "minimize") {
      model.maximize = lowered == "maximize";
      section = Section::objective;
      continue;
    }
    if (lowered == "subjectto" || lowered == "st" || lowered == "s.t.") {
      section = Section::constraints;
      continue;
    }
    if (lowered == "bounds") {
      section = Section::bounds;
      continue;
    }
    if (lowered == "binary" || lowered == "binaries") {
      section = Section::binary;
      continue;
    }
    if (lowered == "end") {
      section = Section::done;
      continue;
    }

    switch (section) {
      case Section::objective: {
        std::size_t begin = 0;
        if (!toks.empty() && toks[0].back() == ':') begin = 1;
        auto terms = detail::lp_expr(toks, begin, toks.size());
        for (const auto& t : terms) model.variables.insert(t.var);
        model.objective.insert(model.objective.end(), terms.begin(),
                               terms.end());
        break;
      }
      case Section::constraints: {
        LpConstraint c;
        std::size_t begin = 0;
        if (!toks.empty() && toks[0].back() == ':') {
          c.name = toks[0].substr(0, toks[0].size() - 1);
          begin = 1;
        }
        std::size_t sense_at = toks.size();
        for (std::size_t i = begin; i < toks.size(); ++i) {
          if (toks[i] == "<=" || toks[i] == ">=" || toks[i] == "=" ||
              toks[i] == "<" || toks[i] == ">") {
            sense_at = i;
            break;
          }
        }
        if (sense_at + 2 != toks.size())
          throw std::invalid_argument("parse_lp: malformed constraint: " +
                                      line);
        c.sense = toks[sense_at];
        if (c.sense == "<") c.sense = "<=";
        if (c.sense == ">") c.sense = ">=";
        if (!detail::lp_number(toks.back(), &c.rhs))
          throw std::invalid_argument("parse_lp: bad right-hand side: " +
                                      line);
        c.terms = detail::lp_expr(toks, begin, sense_at);
        for (const auto& t : c.terms) model.variables.insert(t.var);
        model.constraints.push_back(std::move(c));
        break;
      }
      case Section::bounds: {
        // "lo <= v <= hi", "v <= hi", "v free".
        if (toks.size() == 2 && toks[1] == "free") {
          model.bounds[toks[0]] = {-1e300, 1e300};
          model.variables.insert(toks[0]);
        } else if (toks.size() == 5 && toks[1] == "<=" && toks[3] == "<=") {
          double lo = 0.0, hi = 0.0;
          if (!detail::lp_number(toks[0], &lo) ||
              !detail::lp_number(toks[4], &hi))
            throw std::invalid_argument("parse_lp: bad bounds: " + line);
          model.bounds[toks[2]] = {lo, hi};
          model.variables.insert(toks[2]);
        } else if (toks.size() == 3 && toks[1] == "<=") {
          double hi = 0.0;
          if (!detail::lp_number(toks[2], &hi))
            throw std::invalid_argument("parse_lp: bad bounds: " + line);
          model.bounds[toks[0]] = {0.0, hi};
          model.variables.insert(toks[0]);
        } else {
          throw std::invalid_argument("parse_lp: unsupported bounds: " + line);
        }
        break;
      }
      case Section::binary: {
        for (const auto& t : toks) {
          model.binaries.push_back(t);
          model.variables.insert(t);
        }
        break;
      }
      case Section::none:
      case Section::done:
        throw std::invalid_argument("parse_lp: text outside any section: " +
                                    line);
    }
  }
  return model;
}

}  // namespace riverguard
