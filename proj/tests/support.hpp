#pragma once

// Small fixtures and independent oracles shared by the unit and acceptance tests.

#include <algorithm>
#include <cmath>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

#include "cnc/cnc.hpp"

namespace cnc::testing {

inline std::string default_config_path() { return std::string(CNC_SOURCE_DIR) + "/configs/default.cfg"; }

struct TopologyBuilder {
  TopologyConfig cfg;

  TopologyBuilder& network(const std::string& name, double x, double y, bool access = false, double delay = 0.0) {
    NodeSpec n;
    n.name = name;
    n.kind = NodeKind::Network;
    n.position = {x, y};
    n.is_access = access;
    n.base_processing_delay = delay;
    cfg.nodes.push_back(n);
    return *this;
  }
  TopologyBuilder& compute(const std::string& name, ComputeTier tier, double capacity, double cost, double x, double y,
                           double delay = 0.0) {
    NodeSpec n;
    n.name = name;
    n.kind = NodeKind::Compute;
    n.tier = tier;
    n.compute_capacity = capacity;
    n.cost_per_unit_slot = cost;
    n.position = {x, y};
    n.base_processing_delay = delay;
    cfg.nodes.push_back(n);
    return *this;
  }
  TopologyBuilder& link(const std::string& a, const std::string& b, double bandwidth) {
    cfg.links.push_back({a, b, bandwidth});
    return *this;
  }
  TopologyBuilder& k(int k_paths) {
    cfg.k_paths = k_paths;
    return *this;
  }
  NetworkGraph build() const { return build_topology(cfg); }
  std::shared_ptr<const NetworkGraph> shared() const { return std::make_shared<const NetworkGraph>(build()); }
};

inline NodeId id_of(const NetworkGraph& g, const std::string& name) { return *g.find_node(name); }

inline std::vector<NodeId> ids(const NetworkGraph& g, std::initializer_list<const char*> names) {
  std::vector<NodeId> out;
  for (auto n : names) out.push_back(id_of(g, n));
  return out;
}

inline Task make_task(std::int64_t id, NodeId access, double compute, double bandwidth, double bound, double revenue,
                      std::int64_t duration, Slot arrival = 0) {
  Task t;
  t.id = id;
  t.access_node = access;
  t.compute_demand = compute;
  t.bandwidth_demand = bandwidth;
  t.latency_bound = bound;
  t.revenue = revenue;
  t.duration_slots = duration;
  t.arrival_slot = arrival;
  return t;
}

inline Environment make_env(std::shared_ptr<const NetworkGraph> g, double delta = 10.0) {
  RewardConfig r;
  r.breach_penalty = delta;
  return Environment(std::move(g), r, TaskScale{});
}

// ---- oracles ---------------------------------------------------------------

struct SimplePath {
  double delay = 0.0;
  std::vector<NodeId> nodes;
};

// Every simple path by depth-first search, delays summed front to back,
// sorted by (delay, node sequence).
inline std::vector<SimplePath> all_simple_paths(const NetworkGraph& g, NodeId src, NodeId dst) {
  std::vector<SimplePath> out;
  std::vector<bool> on_path(g.nodes().size(), false);
  std::vector<NodeId> nodes{src};
  on_path[src.index()] = true;
  std::function<void(NodeId, double)> dfs = [&](NodeId u, double d) {
    if (u == dst) {
      out.push_back({d, nodes});
      return;
    }
    for (const auto& l : g.links()) {
      if (l.a != u && l.b != u) continue;
      const NodeId v = l.other(u);
      if (on_path[v.index()]) continue;
      on_path[v.index()] = true;
      nodes.push_back(v);
      dfs(v, d + l.propagation_delay);
      nodes.pop_back();
      on_path[v.index()] = false;
    }
  };
  dfs(src, 0.0);
  std::sort(out.begin(), out.end(), [](const SimplePath& a, const SimplePath& b) {
    if (a.delay != b.delay) return a.delay < b.delay;
    return a.nodes < b.nodes;
  });
  return out;
}

// Feasibility re-derived from capacities and the live allocation records.
inline bool oracle_fits(const NetworkGraph& g, const ResourceLedger& ledger, const Path& p, const Task& t) {
  double node_used = 0.0;
  std::vector<double> link_used(g.links().size(), 0.0);
  for (const auto& a : ledger.allocations()) {
    if (a.node == p.compute) node_used += a.compute;
    for (auto l : a.links) link_used[l.index()] += a.bandwidth;
  }
  if (node_used + t.compute_demand > g.node(p.compute).compute_capacity) return false;
  for (auto l : p.links)
    if (link_used[l.index()] + t.bandwidth_demand > g.link(l).bandwidth_capacity) return false;
  return true;
}

// Fills a ledger at slot 0 with random allocations that fit.
inline void load_randomly(Environment& env, Rng& rng, int attempts, double max_compute, double max_bandwidth) {
  const auto& g = env.graph();
  for (int i = 0; i < attempts; ++i) {
    const NodeId access = g.access_nodes()[rng.below(g.access_nodes().size())];
    const auto range = g.paths_from(access);
    const PathId p(range.begin + static_cast<std::uint32_t>(rng.below(range.size())));
    Task t = make_task(100000 + i, access, rng.uniform(0.5, max_compute), rng.uniform(0.5, max_bandwidth), 1000.0,
                       1.0, 1 + static_cast<std::int64_t>(rng.below(20)), env.current_slot());
    env.apply(t, Decision::to(t.id, p));
  }
}

// Best achievable single-task profit over independently feasible paths;
// rejecting is worth 0.
inline double oracle_greedy_profit(const Environment& env, const Task& t) {
  const auto& g = env.graph();
  double best = 0.0;
  for (const auto& p : g.paths())
    if (p.access == t.access_node && oracle_fits(g, env.ledger(), p, t))
      best = std::max(best, task_profit(t, path_metrics(g, env.ledger(), p.id, t)).profit);
  return best;
}

// Lexicographic minimum of (compute utilization, node id, -bottleneck, latency,
// path id) over independently feasible paths.
inline std::optional<PathId> oracle_balanced_choice(const Environment& env, const Task& t) {
  const auto& g = env.graph();
  std::optional<PathId> best;
  std::tuple<double, std::uint32_t, double, double, std::uint32_t> best_key;
  for (const auto& p : g.paths()) {
    if (p.access != t.access_node || !oracle_fits(g, env.ledger(), p, t)) continue;
    double used = 0.0;
    std::vector<double> link_used(g.links().size(), 0.0);
    for (const auto& a : env.ledger().allocations()) {
      if (a.node == p.compute) used += a.compute;
      for (auto l : a.links) link_used[l.index()] += a.bandwidth;
    }
    double bottleneck = 1e300;
    for (auto l : p.links) bottleneck = std::min(bottleneck, g.link(l).bandwidth_capacity - link_used[l.index()]);
    const auto key = std::make_tuple(used / g.node(p.compute).compute_capacity, p.compute.value, -bottleneck,
                                     path_metrics(g, env.ledger(), p.id, t).total_latency, p.id.value);
    if (!best || key < best_key) {
      best = p.id;
      best_key = key;
    }
  }
  return best;
}

// A random ledger state on the default topology plus a task arriving now.
struct Instance {
  Environment env;
  Task task;
};

inline Instance random_instance(const Experiment& exp, Rng& rng) {
  Environment env = exp.make_env();
  load_randomly(env, rng, static_cast<int>(rng.below(120)), exp.tasks.compute_demand.max * 2,
                exp.tasks.bandwidth_demand.max * 6);
  auto spec = exp.tasks;
  spec.total_tasks = 1;
  Task t = generate_tasks(spec, rng.next())[0];
  t.arrival_slot = env.current_slot();
  return {std::move(env), t};
}

struct GradientCheck {
  std::size_t nets = 0;
  std::size_t compared = 0;
  std::size_t failures = 0;
  double worst = 0.0;  // largest relative error seen
};

// Analytic TD-loss gradients of random 4-8-8-3 nets against central
// differences. Pairs where both values sit at round-off level are skipped.
inline GradientCheck check_gradients(std::size_t nets, std::uint64_t seed, double tolerance = 1e-4) {
  Rng rng(seed);
  auto random_net = [&] {
    auto net = Mlp<double>::glorot({4, 8, 8, 3}, rng);
    for (auto& l : net.layers())
      for (auto& b : l.bias) b = rng.uniform(-0.5, 0.5);
    return net;
  };
  auto random_vector = [&] {
    std::vector<double> v(4);
    for (auto& x : v) x = rng.uniform(-1, 1);
    return v;
  };
  GradientCheck out;
  for (std::size_t trial = 0; trial < nets; ++trial) {
    auto net = random_net();
    const auto target = random_net();
    std::vector<Transition<double>> batch(1 + rng.below(6));
    for (auto& t : batch) {
      t.state = random_vector();
      t.next_state = random_vector();
      t.action = static_cast<std::uint32_t>(rng.below(3));
      t.reward = rng.uniform(-3, 3);
      t.terminal = rng.uniform01() < 0.3;
      t.next_mask = {PathRange{0, static_cast<std::uint32_t>(rng.below(3))}, 2};
    }
    std::vector<const Transition<double>*> ptrs;
    for (auto& t : batch) ptrs.push_back(&t);
    const std::span<const Transition<double>* const> view(ptrs);
    MlpGradients<double> grads(net), scratch(net);
    td_loss_and_gradient(net, target, view, 0.9, grads);

    const double h = 1e-6;
    auto compare = [&](std::vector<double>& params, const std::vector<double>& analytic) {
      for (std::size_t i = 0; i < params.size(); ++i) {
        const double saved = params[i];
        params[i] = saved + h;
        const double up = td_loss_and_gradient(net, target, view, 0.9, scratch);
        params[i] = saved - h;
        const double down = td_loss_and_gradient(net, target, view, 0.9, scratch);
        params[i] = saved;
        const double numeric = (up - down) / (2 * h);
        const double scale = std::max(std::abs(numeric), std::abs(analytic[i]));
        if (scale < 1e-7) continue;
        const double rel = std::abs(numeric - analytic[i]) / scale;
        ++out.compared;
        out.worst = std::max(out.worst, rel);
        if (rel > tolerance) ++out.failures;
      }
    };
    for (std::size_t l = 0; l < net.layers().size(); ++l) {
      compare(net.layers()[l].weights, grads.weights[l]);
      compare(net.layers()[l].bias, grads.bias[l]);
    }
    ++out.nets;
  }
  return out;
}

}  // namespace cnc::testing
