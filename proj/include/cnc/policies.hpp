#pragma once

// Candidate-based orchestration baselines: random selection,
// balanced-resource, and greedy profit.

#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "cnc/random.hpp"
#include "cnc/routing.hpp"
#include "cnc/simulation.hpp"

namespace cnc {

// decide() only reads the environment; the engine applies the decision.
class Policy {
 public:
  virtual ~Policy() = default;
  virtual Decision decide(const Environment& env, const Task& task) = 0;
  virtual std::string_view name() const = 0;
};

class RandomPolicy final : public Policy {
 public:
  explicit RandomPolicy(std::uint64_t seed) : rng_(seed) {}

  Decision decide(const Environment& env, const Task& task) override {
    auto candidates = candidate_paths(env.graph(), env.ledger(), task);
    if (candidates.empty()) return Decision::reject(task.id);
    return Decision::to(task.id, candidates[rng_.below(candidates.size())]);
  }
  std::string_view name() const override { return "random"; }

 private:
  Rng rng_;
};

// Least-loaded compute node first, then the widest and fastest path to it.
class BalancedPolicy final : public Policy {
 public:
  Decision decide(const Environment& env, const Task& task) override {
    const auto& g = env.graph();
    const auto& ledger = env.ledger();
    auto candidates = candidate_paths(g, ledger, task);
    if (candidates.empty()) return Decision::reject(task.id);

    NodeId target = g.path(candidates.front()).compute;
    double lowest = node_utilization(g, ledger, target);
    for (auto p : candidates) {
      const NodeId c = g.path(p).compute;
      const double u = node_utilization(g, ledger, c);
      if (u < lowest || (u == lowest && c < target)) {
        target = c;
        lowest = u;
      }
    }

    std::optional<PathId> best;
    PathMetrics best_m;
    for (auto p : candidates) {
      if (g.path(p).compute != target) continue;
      const auto m = path_metrics(g, ledger, p, task);
      if (!best || m.bottleneck_bandwidth > best_m.bottleneck_bandwidth ||
          (m.bottleneck_bandwidth == best_m.bottleneck_bandwidth && m.total_latency < best_m.total_latency)) {
        best = p;
        best_m = m;
      }
    }
    return Decision::to(task.id, *best);
  }
  std::string_view name() const override { return "balanced"; }
};

// Highest single-task profit; rejects when every candidate loses money.
class GreedyPolicy final : public Policy {
 public:
  Decision decide(const Environment& env, const Task& task) override {
    const auto& g = env.graph();
    std::optional<PathId> best;
    double best_profit = 0.0;
    for (auto p : candidate_paths(g, env.ledger(), task)) {
      const double profit = task_profit(task, path_metrics(g, env.ledger(), p, task)).profit;
      if (!best || profit > best_profit) {
        best = p;
        best_profit = profit;
      }
    }
    if (!best || best_profit < 0.0) return Decision::reject(task.id);
    return Decision::to(task.id, *best);
  }
  std::string_view name() const override { return "greedy"; }
};

class RejectAllPolicy final : public Policy {
 public:
  Decision decide(const Environment&, const Task& task) override { return Decision::reject(task.id); }
  std::string_view name() const override { return "reject"; }
};

}  // namespace cnc
