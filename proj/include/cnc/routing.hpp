#pragma once

// Path feasibility and per-path latency/cost against a live ledger.

#include <algorithm>
#include <vector>

#include "cnc/ledger.hpp"
#include "cnc/tasks.hpp"
#include "cnc/topology.hpp"

namespace cnc {

inline constexpr double kUtilizationCap = 0.99;

// Processing delay grows as 1/(1-u), capped so a full node stays finite.
inline double node_delay(double base_delay, double utilization) {
  return base_delay / (1.0 - std::min(utilization, kUtilizationCap));
}

inline double link_utilization(const NetworkGraph& g, const ResourceLedger& ledger, LinkId l) {
  return ledger.link_allocated(l) / g.link(l).bandwidth_capacity;
}

inline double link_free_bandwidth(const NetworkGraph& g, const ResourceLedger& ledger, LinkId l) {
  return g.link(l).bandwidth_capacity - ledger.link_allocated(l);
}

// Compute nodes: allocated compute fraction. Network nodes: load of the
// busiest incident link.
inline double node_utilization(const NetworkGraph& g, const ResourceLedger& ledger, NodeId n) {
  const auto& node = g.node(n);
  if (node.is_compute()) return ledger.node_allocated(n) / node.compute_capacity;
  double u = 0.0;
  for (const auto& adj : g.neighbors(n)) u = std::max(u, link_utilization(g, ledger, adj.link));
  return u;
}

inline std::vector<PathId> candidate_paths(const NetworkGraph& g, const ResourceLedger& ledger, const Task& task) {
  std::vector<PathId> out;
  const auto range = g.paths_from(task.access_node);
  for (auto p = range.begin; p < range.end; ++p)
    if (fits(g, ledger, g.paths()[p], task)) out.push_back(PathId(p));
  return out;
}

// Metrics as if the task were placed on the path: transit nodes see the
// task's bandwidth on the two path links they forward over, the compute
// node sees the task's compute demand.
inline PathMetrics path_metrics(const NetworkGraph& g, const ResourceLedger& ledger, PathId path_id,
                                const Task& task) {
  const Path& path = g.path(path_id);
  PathMetrics m;
  m.total_latency = 0.0;
  for (auto l : path.links) m.total_latency += g.link(l).propagation_delay;

  const auto transit = path.intermediate_nodes();
  for (std::size_t i = 0; i < transit.size(); ++i) {
    const NodeId n = transit[i];
    const LinkId in = path.links[i];
    const LinkId out = path.links[i + 1];
    double u = 0.0;
    for (const auto& adj : g.neighbors(n)) {
      double load = ledger.link_allocated(adj.link);
      if (adj.link == in || adj.link == out) load += task.bandwidth_demand;
      u = std::max(u, load / g.link(adj.link).bandwidth_capacity);
    }
    m.total_latency += node_delay(g.node(n).base_processing_delay, u);
  }

  const auto& c = g.node(path.compute);
  const double u_compute = (ledger.node_allocated(c.id) + task.compute_demand) / c.compute_capacity;
  m.total_latency += node_delay(c.base_processing_delay, u_compute);

  m.total_cost = task.compute_demand * c.cost_per_unit_slot * static_cast<double>(task.duration_slots);

  m.bottleneck_bandwidth = std::numeric_limits<double>::infinity();
  for (auto l : path.links) m.bottleneck_bandwidth = std::min(m.bottleneck_bandwidth, link_free_bandwidth(g, ledger, l));
  m.bottleneck_bandwidth = std::max(m.bottleneck_bandwidth, 0.0);
  return m;
}

}  // namespace cnc
