#pragma once

// Time-slot engine: applies decisions to the ledger, scores them, and
// advances slots.

#include <memory>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "cnc/config.hpp"
#include "cnc/ledger.hpp"
#include "cnc/routing.hpp"
#include "cnc/tasks.hpp"
#include "cnc/topology.hpp"

namespace cnc {

struct Decision {
  std::int64_t task_id = 0;
  std::optional<PathId> route;  // nullopt: reject

  static Decision reject(std::int64_t task_id) { return {task_id, std::nullopt}; }
  static Decision to(std::int64_t task_id, PathId p) { return {task_id, p}; }
  bool is_reject() const { return !route.has_value(); }
  friend bool operator==(const Decision&, const Decision&) = default;
};

struct Outcome {
  std::int64_t task_id = 0;
  bool accepted = false;
  std::optional<PathId> path;
  std::optional<double> latency;  // actual latency, ms
  double cost = 0.0;
  double revenue = 0.0;
  double profit = 0.0;
  bool breach = false;

  friend bool operator==(const Outcome&, const Outcome&) = default;
};

// profit = revenue - cost - max(actual latency - bound, 0); a rejection earns
// and costs nothing.
inline Outcome task_profit(const Task& task, const std::optional<PathMetrics>& metrics,
                           std::optional<PathId> path = std::nullopt) {
  Outcome o;
  o.task_id = task.id;
  if (!metrics) return o;
  o.accepted = true;
  o.path = path;
  o.latency = metrics->total_latency;
  o.revenue = task.revenue;
  o.cost = metrics->total_cost;
  o.profit = o.revenue - o.cost - std::max(metrics->total_latency - task.latency_bound, 0.0);
  return o;
}

struct RewardConfig {
  double breach_penalty = 100.0;  // delta
  double discount = 0.95;        // gamma, training only

  // Above this multiple of the largest revenue, agents tend to learn to reject everything.
  static constexpr double kPenaltyWarnFactor = 10.0;

  void validate() const {
    if (!(breach_penalty >= 0.0)) throw ConfigError("reward.delta must be >= 0");
    if (!(discount > 0.0 && discount <= 1.0)) throw ConfigError("reward.gamma must be in (0, 1]");
  }

  std::optional<std::string> warning(double max_revenue) const {
    if (breach_penalty > kPenaltyWarnFactor * max_revenue)
      return "reward.delta=" + format_double(breach_penalty) + " exceeds " + format_double(kPenaltyWarnFactor) +
             "x the largest task revenue; the agent may learn to reject every task";
    return std::nullopt;
  }

  // delta defaults to twice the largest revenue.
  static RewardConfig from_document(const ConfigDocument& doc, double max_revenue) {
    RewardConfig r;
    r.breach_penalty = doc.get_double("reward.delta", 2.0 * max_revenue);
    r.discount = doc.get_double("reward.gamma", r.discount);
    r.validate();
    return r;
  }
};

inline double episode_reward(std::span<const Outcome> outcomes, std::size_t breaches, double delta) {
  double total = 0.0;
  for (const auto& o : outcomes) total += o.profit;
  return total - delta * static_cast<double>(breaches);
}

inline double episode_reward(std::span<const Outcome> outcomes, double delta) {
  std::size_t breaches = 0;
  for (const auto& o : outcomes) breaches += o.breach ? 1 : 0;
  return episode_reward(outcomes, breaches, delta);
}

// Spec maxima used to scale task features into [0, 1].
struct TaskScale {
  double compute_demand = 1.0;
  double bandwidth_demand = 1.0;
  double latency_bound = 1.0;
  double revenue = 1.0;
  double duration_slots = 1.0;

  static TaskScale from_spec(const TaskGenSpec& s) {
    return {s.compute_demand.max, s.bandwidth_demand.max, s.latency_bound.max, s.revenue.max,
            static_cast<double>(s.duration_slots.max)};
  }
};

struct StepRecord {
  Outcome outcome;
  double reward = 0.0;
};

struct StepResult {
  std::vector<Outcome> outcomes;
  std::vector<double> rewards;
  std::vector<bool> break_down;
};

using EnvState = std::vector<double>;

// compute utilizations | link free fractions | 5 task features | access one-hot
// | task fits on node (0/1) | task fits on link (0/1) | compute x duration
inline std::size_t state_dim(const NetworkGraph& g) {
  return 2 * (g.compute_nodes().size() + g.links().size()) + 6 + g.access_nodes().size();
}

class Environment {
 public:
  Environment(std::shared_ptr<const NetworkGraph> graph, RewardConfig reward, TaskScale scale)
      : graph_(std::move(graph)), reward_(reward), scale_(scale), ledger_(*graph_) {
    reward_.validate();
  }

  const NetworkGraph& graph() const { return *graph_; }
  std::shared_ptr<const NetworkGraph> shared_graph() const { return graph_; }
  const ResourceLedger& ledger() const { return ledger_; }
  const RewardConfig& reward_config() const { return reward_; }
  const TaskScale& task_scale() const { return scale_; }
  Slot current_slot() const { return ledger_.current_slot(); }

  void reset() { ledger_ = ResourceLedger(*graph_); }

  std::size_t state_dim() const { return cnc::state_dim(*graph_); }

  template <typename T>
  void observe_into(const Task& task, std::span<T> out) const {
    if (out.size() != state_dim()) throw ShapeError("observe_into: buffer has wrong size");
    const auto& g = *graph_;
    std::size_t i = 0;
    for (auto c : g.compute_nodes())
      out[i++] = static_cast<T>(clamp01(ledger_.node_allocated(c) / g.node(c).compute_capacity));
    for (const auto& l : g.links())
      out[i++] = static_cast<T>(clamp01(1.0 - ledger_.link_allocated(l.id) / l.bandwidth_capacity));
    out[i++] = static_cast<T>(clamp01(task.compute_demand / scale_.compute_demand));
    out[i++] = static_cast<T>(clamp01(task.bandwidth_demand / scale_.bandwidth_demand));
    out[i++] = static_cast<T>(clamp01(task.latency_bound / scale_.latency_bound));
    out[i++] = static_cast<T>(clamp01(task.revenue / scale_.revenue));
    out[i++] = static_cast<T>(clamp01(static_cast<double>(task.duration_slots) / scale_.duration_slots));
    const std::size_t hot = g.access_index(task.access_node);
    for (std::size_t a = 0; a < g.access_nodes().size(); ++a) out[i++] = static_cast<T>(a == hot ? 1.0 : 0.0);
    for (auto c : g.compute_nodes())
      out[i++] = static_cast<T>(ledger_.node_allocated(c) + task.compute_demand <= g.node(c).compute_capacity);
    for (const auto& l : g.links())
      out[i++] = static_cast<T>(ledger_.link_allocated(l.id) + task.bandwidth_demand <= l.bandwidth_capacity);
    // Cost is linear in this product, which a rectifier net fits poorly from the two factors.
    out[i++] = static_cast<T>(clamp01(task.compute_demand * static_cast<double>(task.duration_slots) /
                                      (scale_.compute_demand * scale_.duration_slots)));
  }

  EnvState observe(const Task& task) const {
    EnvState s(state_dim());
    observe_into(task, std::span<double>(s));
    return s;
  }

  // Scores and applies one decision; a route that no longer fits is charged
  // delta and turned into a rejection.
  StepRecord apply(const Task& task, const Decision& decision) {
    if (decision.task_id != task.id)
      throw ProtocolError("decision for task " + std::to_string(decision.task_id) + " applied to task " +
                          std::to_string(task.id));
    if (task.arrival_slot != ledger_.current_slot())
      throw ProtocolError("task " + std::to_string(task.id) + " does not arrive in slot " +
                          std::to_string(ledger_.current_slot()));
    StepRecord rec;
    if (decision.is_reject()) {
      rec.outcome = task_profit(task, std::nullopt);
      return rec;
    }
    const PathId p = *decision.route;
    if (graph_->path(p).access != task.access_node)
      throw ProtocolError("path " + std::to_string(p.value) + " does not start at task " + std::to_string(task.id) +
                          "'s access node");
    const PathMetrics metrics = path_metrics(*graph_, ledger_, p, task);
    if (allocate(ledger_, *graph_, p, task) == AllocationResult::Breach) {
      rec.outcome = task_profit(task, std::nullopt);
      rec.outcome.breach = true;
      rec.reward = -reward_.breach_penalty;
      return rec;
    }
    rec.outcome = task_profit(task, metrics, p);
    rec.reward = rec.outcome.profit;
    return rec;
  }

  FreedSummary advance_slot() { return release_expired(ledger_, ledger_.current_slot() + 1); }

  void advance_to(Slot slot) {
    if (slot < ledger_.current_slot())
      throw ProtocolError("cannot rewind from slot " + std::to_string(ledger_.current_slot()) + " to " +
                          std::to_string(slot));
    while (ledger_.current_slot() < slot) advance_slot();
  }

  // One slot: decisions in task order, then the slot advances.
  StepResult step(std::span<const Task> tasks, std::span<const Decision> decisions) {
    if (tasks.size() != decisions.size()) throw ProtocolError("step: one decision per arriving task required");
    StepResult result;
    for (std::size_t i = 0; i < tasks.size(); ++i) {
      if (decisions[i].task_id != tasks[i].id)
        throw ProtocolError("step: decision " + std::to_string(i) + " names task " +
                            std::to_string(decisions[i].task_id) + ", expected " + std::to_string(tasks[i].id));
      auto rec = apply(tasks[i], decisions[i]);
      result.break_down.push_back(rec.outcome.breach);
      result.rewards.push_back(rec.reward);
      result.outcomes.push_back(std::move(rec.outcome));
    }
    advance_slot();
    return result;
  }

 private:
  static double clamp01(double v) { return v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v); }

  std::shared_ptr<const NetworkGraph> graph_;
  RewardConfig reward_;
  TaskScale scale_;
  ResourceLedger ledger_;
};

inline constexpr const char* kTraceCsvHeader =
    "id,arrival_slot,access_node,compute_demand,bandwidth_demand,latency_bound,revenue,duration_slots,"
    "choice,path_id,latency,cost,task_revenue,profit,breach,reward";

struct TraceRow {
  Task task;
  Decision decision;
  Outcome outcome;
  double reward = 0.0;
};

inline std::string trace_to_csv(std::span<const TraceRow> rows) {
  std::string out = std::string(kTraceCsvHeader) + "\n";
  for (const auto& r : rows) {
    out += task_csv_row(r.task) + ',';
    out += r.decision.is_reject() ? "reject," : "route,";
    out += r.outcome.path ? std::to_string(r.outcome.path->value) : std::string();
    out += ',';
    out += r.outcome.latency ? format_double(*r.outcome.latency) : std::string();
    out += ',' + format_double(r.outcome.cost) + ',' + format_double(r.outcome.revenue) + ',' +
           format_double(r.outcome.profit) + ',' + (r.outcome.breach ? "1" : "0") + ',' + format_double(r.reward) + "\n";
  }
  return out;
}

}  // namespace cnc
