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

#include <CLI11.hpp>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <memory>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "riverguard/adversary.hpp"
#include "riverguard/baselines.hpp"
#include "riverguard/generator.hpp"
#include "riverguard/instance.hpp"
#include "riverguard/json_io.hpp"
#include "riverguard/lp_export.hpp"
#include "riverguard/rng.hpp"
#include "riverguard/robust.hpp"

namespace riverguard::cli {
namespace detail {

inline std::string fmt(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

/// Short form for echoed inputs (beta, budget fraction) where the full
/// 17-digit round trip would just restate rounding noise.
inline std::string fmt_short(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%g", x);
  return buf;
}

inline std::string fmt_ms(double ms) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.3f", ms);
  return buf;
}

inline void write_text(const std::string& path, const std::string& text) {
  if (path.empty()) {
    std::cout << text;
    return;
  }
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << text;
}

inline void emit_json(const std::string& path, const Json& j) {
  if (path.empty())
    std::cout << dump_stable(j);
  else
    save_json(path, j);
}

/// A policy file is rejected up front when it does not fit the instance;
/// the solvers would otherwise surface an unhelpful lookup failure.
inline void check_policy(const NetworkInstance& inst, const Policy& pi) {
  std::vector<std::string> violations;
  for (const auto& e : inst.edges) {
    auto it = pi.action.find(e.child);
    if (it == pi.action.end()) {
      violations.push_back("policy: no action for edge " +
                           std::to_string(e.child));
    } else if (it->second < 0 ||
               it->second >= static_cast<int>(e.actions.size())) {
      violations.push_back("policy: action " + std::to_string(it->second) +
                           " out of range for edge " +
                           std::to_string(e.child));
    }
  }
  for (const auto& [child, a] : pi.action) {
    (void)a;
    bool known = false;
    for (const auto& e : inst.edges) known = known || e.child == child;
    if (!known)
      violations.push_back("policy: unknown edge " + std::to_string(child));
  }
  if (!violations.empty()) throw ValidationError(std::move(violations));
}

/// The three adversary modes as flags, exclusive per invocation.  Each
/// subcommand owns one instance so the parsed counts stay untangled.
struct RoundingFlags {
  double epsilon = 0.1;
  double constant = 5.0;
  CLI::Option* exact_opt = nullptr;
  CLI::Option* eps_opt = nullptr;
  CLI::Option* k_opt = nullptr;

  void attach(CLI::App* cmd) {
    exact_opt = cmd->add_flag("--exact", "Exact interval DP");
    eps_opt = cmd->add_option("--epsilon", epsilon,
                              "Rounded DP with relative error at most this")
                  ->check(CLI::PositiveNumber);
    k_opt = cmd->add_option("--constant", constant,
                            "Rounded DP on a fixed grid of this width")
                ->check(CLI::PositiveNumber);
    exact_opt->excludes(eps_opt)->excludes(k_opt);
    eps_opt->excludes(exact_opt)->excludes(k_opt);
    k_opt->excludes(exact_opt)->excludes(eps_opt);
  }

  RoundingConfig resolve(const RoundingConfig& fallback) const {
    if (eps_opt->count()) return RoundingConfig::with_epsilon(epsilon);
    if (k_opt->count()) return RoundingConfig::with_constant(constant);
    if (exact_opt->count()) return RoundingConfig::exact_mode();
    return fallback;
  }
};

inline Objective parse_objective(const std::string& name) {
  return name == "regret" ? Objective::regret : Objective::ratio;
}

/// Worker cap for bench: hardware concurrency, reduced by the
/// RIVERGUARD_THREADS environment variable when set.
inline unsigned worker_count(std::size_t tasks) {
  unsigned cap = std::thread::hardware_concurrency();
  if (cap == 0) cap = 1;
  if (const char* env = std::getenv("RIVERGUARD_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v >= 1 && v < cap) {
      cap = static_cast<unsigned>(v);
    }
  }
  if (tasks < cap) cap = static_cast<unsigned>(tasks);
  return cap == 0 ? 1 : cap;
}

inline double elapsed_ms(std::chrono::steady_clock::time_point start) {
  const auto d = std::chrono::steady_clock::now() - start;
  return std::chrono::duration<double, std::milli>(d).count();
}

/// One bench cell: a generated instance and the four policy kinds
/// measured on it.  Returns finished CSV rows so the parallel sweep only
/// has to concatenate.
struct BenchCell {
  std::uint64_t seed = 0;
  double beta = 0.0;
  double budget_fraction = 0.0;
};

struct BenchSettings {
  GeneratorConfig gen;
  RoundingConfig rounding;
  RobustConfig robust;
  int random_draws = 10;
  bool no_timings = false;
};

inline std::string bench_rows(const BenchCell& cell, const BenchSettings& bs,
                              int* nonconverged) {
  GeneratorConfig g = bs.gen;
  g.seed = cell.seed;
  g.beta = cell.beta;
  g.budget_fraction = cell.budget_fraction;
  const NetworkInstance inst = generate(g);

  const std::string prefix = std::to_string(cell.seed) + "," +
                             std::to_string(g.n) + "," +
                             fmt_short(cell.beta) + "," +
                             fmt_short(cell.budget_fraction) + ",";
  auto row = [&](const std::string& kind, double ratio, double regret,
                 double ms) {
    return prefix + kind + "," + fmt(ratio) + "," + fmt(regret) + "," +
           (bs.no_timings ? std::string("0.000") : fmt_ms(ms)) + "\n";
  };
  auto measure = [&](const Policy& pi) {
    return evaluate_robustness(inst, pi, bs.rounding);
  };

  std::string rows;

  auto start = std::chrono::steady_clock::now();
  const RobustResult mrr = solve_mrr(inst, bs.robust);
  const double mrr_ms = elapsed_ms(start);
  if (!mrr.converged) ++*nonconverged;
  const RobustnessReport mrr_rep = measure(mrr.policy);
  rows += row("mrr", mrr_rep.robust_ratio, mrr_rep.regret, mrr_ms);

  start = std::chrono::steady_clock::now();
  const Policy mid = midpoint_policy(inst).policy;
  const double mid_ms = elapsed_ms(start);
  const RobustnessReport mid_rep = measure(mid);
  rows += row("midpoint", mid_rep.robust_ratio, mid_rep.regret, mid_ms);

  start = std::chrono::steady_clock::now();
  const Policy worst = worst_policy(inst).policy;
  const double worst_ms = elapsed_ms(start);
  const RobustnessReport worst_rep = measure(worst);
  rows += row("worst", worst_rep.robust_ratio, worst_rep.regret, worst_ms);

  double ratio_sum = 0.0, regret_sum = 0.0, draw_ms = 0.0;
  for (int j = 0; j < bs.random_draws; ++j) {
    start = std::chrono::steady_clock::now();
    const Policy pi = random_policy(inst, derive_seed(cell.seed, 101 + j));
    draw_ms += elapsed_ms(start);
    const RobustnessReport rep = measure(pi);
    ratio_sum += rep.robust_ratio;
    regret_sum += rep.regret;
  }
  const double draws = std::max(1, bs.random_draws);
  rows += row("random", ratio_sum / draws, regret_sum / draws,
              draw_ms / draws);
  return rows;
}

}  // namespace detail

/// Parsed flag state shared by the subcommands.  Only one subcommand runs
/// per invocation, so overlapping targets never collide.
struct RunConfig {
  std::string instance_path;
  std::string output_path;
  std::string policy_path;
  std::string scenarios_path;
  std::string accessibility_path;
  std::string objective = "ratio";
  std::string kind = "midpoint";
  double threshold = 1e-3;
  int max_iter = 200;
  std::uint64_t seed = 0;
  GeneratorConfig gen;
  int bench_count = 20;
  std::vector<double> betas{0.1, 0.3, 0.5};
  std::vector<double> budgets{0.05, 0.1};
  int random_draws = 10;
  bool no_timings = false;
};

inline int run(int argc, char** argv) {
  using namespace detail;

  CLI::App app{"Robust barrier removal planning on tree river networks"};
  app.require_subcommand(1);

  auto cfg = std::make_shared<RunConfig>();
  int code = 0;

  // gen: sample an instance and write it as JSON.
  {
    CLI::App* cmd = app.add_subcommand("gen", "Generate a random instance");
    cmd->add_option("--n", cfg->gen.n, "Number of nodes")
        ->capture_default_str()
        ->check(CLI::PositiveNumber);
    cmd->add_option("--beta", cfg->gen.beta,
                    "Relative half width of the probability intervals")
        ->capture_default_str();
    cmd->add_option("--seed", cfg->gen.seed, "Sampling seed")
        ->capture_default_str();
    cmd->add_option("--reward-min", cfg->gen.reward_min,
                    "Lower end of the node reward range")
        ->capture_default_str();
    cmd->add_option("--reward-max", cfg->gen.reward_max,
                    "Upper end of the node reward range")
        ->capture_default_str();
    cmd->add_option("--culvert-fraction", cfg->gen.culvert_fraction,
                    "Probability that a barrier is a culvert, not a dam")
        ->capture_default_str();
    cmd->add_option("--budget-fraction", cfg->gen.budget_fraction,
                    "Budget as a fraction of the total action cost")
        ->capture_default_str();
    cmd->add_option("--max-children", cfg->gen.max_children,
                    "Cap on children per node, 0 for unbounded")
        ->capture_default_str();
    cmd->add_option("-o,--output", cfg->output_path,
                    "Instance file (stdout when omitted)");
    cmd->callback(
        [cfg] { emit_json(cfg->output_path, to_json(generate(cfg->gen))); });
  }

  // solve-mrr / solve-mr: constraint generation over the scenario set.
  auto add_solve = [&](const char* name, const char* desc, Objective obj) {
    CLI::App* cmd = app.add_subcommand(name, desc);
    cmd->add_option("instance", cfg->instance_path, "Instance JSON file")
        ->required();
    auto rf = std::make_shared<RoundingFlags>();
    rf->attach(cmd);
    cmd->add_option("--threshold", cfg->threshold,
                    "Stop once upper minus lower is at most this")
        ->capture_default_str();
    cmd->add_option("--max-iter", cfg->max_iter,
                    "Cap on generated scenarios")
        ->capture_default_str();
    cmd->add_option("-o,--output", cfg->output_path,
                    "Result file (stdout when omitted)");
    cmd->callback([cfg, rf, obj, &code] {
      const NetworkInstance inst = load_instance(cfg->instance_path);
      RobustConfig rc;
      rc.rounding = rf->resolve(RoundingConfig::exact_mode());
      rc.threshold = cfg->threshold;
      rc.max_iter = cfg->max_iter;
      const RobustResult res =
          obj == Objective::ratio ? solve_mrr(inst, rc) : solve_mr(inst, rc);
      emit_json(cfg->output_path, to_json(res));
      if (!res.converged) {
        std::cerr << "riverguard: stopped after " << res.iterations
                  << " iterations with gap " << res.upper - res.lower << "\n";
        code = 2;
      }
    });
  };
  add_solve("solve-mrr", "Maximize the robust benefit ratio",
            Objective::ratio);
  add_solve("solve-mr", "Minimize the worst-case regret", Objective::regret);

  // adversary: worst-case response to a fixed policy.
  {
    CLI::App* cmd =
        app.add_subcommand("adversary", "Worst case against a fixed policy");
    cmd->add_option("instance", cfg->instance_path, "Instance JSON file")
        ->required();
    cmd->add_option("--policy", cfg->policy_path, "Policy JSON file")
        ->required();
    cmd->add_option("--objective", cfg->objective, "ratio or regret")
        ->check(CLI::IsMember({"ratio", "regret"}))
        ->capture_default_str();
    auto rf = std::make_shared<RoundingFlags>();
    rf->attach(cmd);
    cmd->add_option("-o,--output", cfg->output_path,
                    "Result file (stdout when omitted)");
    cmd->callback([cfg, rf] {
      const NetworkInstance inst = load_instance(cfg->instance_path);
      const Policy pi = policy_from_json(load_json(cfg->policy_path));
      check_policy(inst, pi);
      const AdversaryResult res =
          solve_adversary(inst, pi, parse_objective(cfg->objective),
                          rf->resolve(RoundingConfig::exact_mode()));
      emit_json(cfg->output_path, to_json(res));
    });
  }

  // baseline: reference policies the sweeps compare against.
  {
    CLI::App* cmd =
        app.add_subcommand("baseline", "Midpoint, worst, or random policy");
    cmd->add_option("instance", cfg->instance_path, "Instance JSON file")
        ->required();
    cmd->add_option("--kind", cfg->kind, "midpoint, worst, or random")
        ->check(CLI::IsMember({"midpoint", "worst", "random"}))
        ->capture_default_str();
    cmd->add_option("--seed", cfg->seed, "Draw seed for the random kind")
        ->capture_default_str();
    cmd->add_option("-o,--output", cfg->output_path,
                    "Policy file (stdout when omitted)");
    cmd->callback([cfg] {
      const NetworkInstance inst = load_instance(cfg->instance_path);
      Policy pi;
      if (cfg->kind == "midpoint")
        pi = midpoint_policy(inst).policy;
      else if (cfg->kind == "worst")
        pi = worst_policy(inst).policy;
      else
        pi = random_policy(inst, cfg->seed);
      emit_json(cfg->output_path, to_json(pi));
    });
  }

  // eval: robustness metrics for a policy file.
  {
    CLI::App* cmd =
        app.add_subcommand("eval", "Robustness metrics for a policy");
    cmd->add_option("instance", cfg->instance_path, "Instance JSON file")
        ->required();
    cmd->add_option("--policy", cfg->policy_path, "Policy JSON file")
        ->required();
    auto rf = std::make_shared<RoundingFlags>();
    rf->attach(cmd);
    cmd->add_option("-o,--output", cfg->output_path,
                    "Metrics CSV (stdout when omitted)");
    cmd->add_option("--accessibility-out", cfg->accessibility_path,
                    "Also write per-edge accessibilities at the ratio "
                    "certificate to this CSV");
    cmd->callback([cfg, rf] {
      const NetworkInstance inst = load_instance(cfg->instance_path);
      const Policy pi = policy_from_json(load_json(cfg->policy_path));
      check_policy(inst, pi);
      const RobustnessReport rep = evaluate_robustness(
          inst, pi, rf->resolve(RoundingConfig::exact_mode()));
      write_text(cfg->output_path, "robust_ratio,regret\n" +
                                       fmt(rep.robust_ratio) + "," +
                                       fmt(rep.regret) + "\n");
      if (!cfg->accessibility_path.empty()) {
        const TreeView tv(inst);
        const auto mine = accessibilities(tv, pi, rep.ratio_case.params);
        const auto theirs =
            accessibilities(tv, rep.ratio_case.policy, rep.ratio_case.params);
        std::vector<NodeId> children;
        for (const auto& e : inst.edges) children.push_back(e.child);
        std::sort(children.begin(), children.end());
        std::string csv =
            "edge,decision_accessibility,adversary_accessibility\n";
        for (NodeId v : children) {
          csv += std::to_string(v) + "," + fmt(mine.at(v)) + "," +
                 fmt(theirs.at(v)) + "\n";
        }
        write_text(cfg->accessibility_path, csv);
      }
    });
  }

  // export-milp: scenario-restricted master as an LP file.
  {
    CLI::App* cmd = app.add_subcommand(
        "export-milp", "Write the scenario master model as an LP file");
    cmd->add_option("instance", cfg->instance_path, "Instance JSON file")
        ->required();
    cmd->add_option("--scenarios", cfg->scenarios_path,
                    "Scenario set JSON (default: null policy at midpoints)");
    cmd->add_option("-o,--output", cfg->output_path,
                    "LP file (stdout when omitted)");
    cmd->callback([cfg] {
      const NetworkInstance inst = load_instance(cfg->instance_path);
      ScenarioSet set;
      if (!cfg->scenarios_path.empty()) {
        set = scenarios_from_json(load_json(cfg->scenarios_path), inst);
      } else {
        Scenario sc;
        sc.policy = null_policy(inst);
        sc.params = midpoint_params(inst);
        sc.value = evaluate(TreeView(inst), sc.policy, sc.params);
        set.push_back(sc);
      }
      write_text(cfg->output_path, export_milp(inst, set));
    });
  }

  // bench: the beta x budget sweep behind the comparison tables.
  {
    CLI::App* cmd = app.add_subcommand(
        "bench", "Sweep generated instances over beta and budget grids");
    cmd->add_option("--n", cfg->gen.n, "Nodes per generated instance")
        ->capture_default_str()
        ->check(CLI::PositiveNumber);
    cmd->add_option("--count", cfg->bench_count, "Instances per grid cell")
        ->capture_default_str()
        ->check(CLI::PositiveNumber);
    cmd->add_option("--betas", cfg->betas, "Interval half widths to sweep")
        ->capture_default_str();
    cmd->add_option("--budgets", cfg->budgets,
                    "Budget fractions to sweep")
        ->capture_default_str();
    cmd->add_option("--seed", cfg->seed, "Base seed, one increment per instance")
        ->capture_default_str();
    cmd->add_option("--random-draws", cfg->random_draws,
                    "Random policies averaged per instance")
        ->capture_default_str()
        ->check(CLI::PositiveNumber);
    auto rf = std::make_shared<RoundingFlags>();
    rf->attach(cmd);
    cmd->add_option("--threshold", cfg->threshold,
                    "Solver stopping gap")
        ->capture_default_str();
    cmd->add_option("--max-iter", cfg->max_iter, "Solver scenario cap")
        ->capture_default_str();
    cmd->add_flag("--no-timings", cfg->no_timings,
                  "Report wall_ms as zero for reproducible output");
    cmd->add_option("-o,--output", cfg->output_path,
                    "CSV file (stdout when omitted)");
    cmd->callback([cfg, rf] {
      BenchSettings bs;
      bs.gen = cfg->gen;
      bs.rounding = rf->resolve(RoundingConfig::with_epsilon(0.1));
      bs.robust.rounding = bs.rounding;
      bs.robust.threshold = cfg->threshold;
      bs.robust.max_iter = cfg->max_iter;
      bs.random_draws = cfg->random_draws;
      bs.no_timings = cfg->no_timings;

      std::vector<BenchCell> cells;
      for (int s = 0; s < cfg->bench_count; ++s)
        for (double beta : cfg->betas)
          for (double budget : cfg->budgets)
            cells.push_back({cfg->seed + s, beta, budget});

      std::vector<std::string> blocks(cells.size());
      std::vector<std::string> errors(cells.size());
      std::vector<int> nonconverged(cells.size(), 0);
      std::atomic<std::size_t> cursor{0};
      auto work = [&] {
        for (;;) {
          const std::size_t i = cursor.fetch_add(1);
          if (i >= cells.size()) return;
          try {
            blocks[i] = bench_rows(cells[i], bs, &nonconverged[i]);
          } catch (const std::exception& e) {
            errors[i] = e.what();
          }
        }
      };
      const unsigned workers = worker_count(cells.size());
      if (workers <= 1) {
        work();
      } else {
        std::vector<std::thread> pool;
        for (unsigned w = 0; w < workers; ++w) pool.emplace_back(work);
        for (auto& t : pool) t.join();
      }
      for (const auto& err : errors)
        if (!err.empty()) throw std::runtime_error(err);

      std::string csv =
          "seed,n,beta,budget_fraction,policy_kind,robust_ratio,regret,"
          "wall_ms\n";
      int stalled = 0;
      for (std::size_t i = 0; i < blocks.size(); ++i) {
        csv += blocks[i];
        stalled += nonconverged[i];
      }
      write_text(cfg->output_path, csv);
      if (stalled > 0) {
        std::cerr << "riverguard: " << stalled
                  << " solver runs hit the iteration cap\n";
      }
    });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  } catch (const ValidationError& e) {
    for (const auto& v : e.violations()) std::cerr << v << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "riverguard: " << e.what() << "\n";
    return 1;
  }
  return code;
}

}  // namespace riverguard::cli
