#pragma once

// Live resource allocations with expiry slots.

#include <algorithm>
#include <vector>

#include "cnc/common.hpp"
#include "cnc/tasks.hpp"
#include "cnc/topology.hpp"

namespace cnc {

struct Allocation {
  std::int64_t task_id = 0;
  PathId path;
  NodeId node;
  std::vector<LinkId> links;
  double compute = 0.0;
  double bandwidth = 0.0;
  Slot created = 0;
  Slot expiry = 0;

  friend bool operator==(const Allocation&, const Allocation&) = default;
};

enum class AllocationResult { Ok, Breach };

struct FreedSummary {
  std::size_t allocations = 0;
  double compute = 0.0;
  double bandwidth = 0.0;  // summed over links
};

class ResourceLedger {
 public:
  ResourceLedger() = default;
  explicit ResourceLedger(const NetworkGraph& g)
      : node_alloc_(g.nodes().size(), 0.0), link_alloc_(g.links().size(), 0.0) {}

  Slot current_slot() const { return current_slot_; }
  double node_allocated(NodeId n) const { return node_alloc_.at(n.index()); }
  double link_allocated(LinkId l) const { return link_alloc_.at(l.index()); }
  const std::vector<Allocation>& allocations() const { return live_; }
  bool idle() const { return live_.empty(); }

  friend bool operator==(const ResourceLedger&, const ResourceLedger&) = default;

 private:
  friend AllocationResult allocate(ResourceLedger&, const NetworkGraph&, PathId, const Task&);
  friend FreedSummary release_expired(ResourceLedger&, Slot);

  std::vector<double> node_alloc_;
  std::vector<double> link_alloc_;
  std::vector<Allocation> live_;  // creation order
  Slot current_slot_ = 0;
};

// Shared by allocate and candidate search so both agree on every path.
inline bool fits(const NetworkGraph& g, const ResourceLedger& ledger, const Path& path, const Task& task) {
  const auto& c = g.node(path.compute);
  if (!(ledger.node_allocated(c.id) + task.compute_demand <= c.compute_capacity)) return false;
  for (auto l : path.links)
    if (!(ledger.link_allocated(l) + task.bandwidth_demand <= g.link(l).bandwidth_capacity)) return false;
  return true;
}

// Either the whole path is reserved or nothing changes.
inline AllocationResult allocate(ResourceLedger& ledger, const NetworkGraph& g, PathId path_id, const Task& task) {
  const Path& path = g.path(path_id);
  if (task.arrival_slot != ledger.current_slot_)
    throw ProtocolError("allocate: task " + std::to_string(task.id) + " arrives at slot " +
                        std::to_string(task.arrival_slot) + " but ledger is at slot " +
                        std::to_string(ledger.current_slot_));
  if (!fits(g, ledger, path, task)) return AllocationResult::Breach;

  ledger.node_alloc_[path.compute.index()] += task.compute_demand;
  for (auto l : path.links) ledger.link_alloc_[l.index()] += task.bandwidth_demand;
  ledger.live_.push_back({task.id, path_id, path.compute, path.links, task.compute_demand, task.bandwidth_demand,
                          task.arrival_slot, task.arrival_slot + task.duration_slots});
  return AllocationResult::Ok;
}

inline FreedSummary release_expired(ResourceLedger& ledger, Slot slot) {
  if (slot != ledger.current_slot_ + 1)
    throw ProtocolError("release_expired: slot " + std::to_string(slot) + " does not follow " +
                        std::to_string(ledger.current_slot_));
  ledger.current_slot_ = slot;

  FreedSummary freed;
  std::vector<Allocation> kept;
  kept.reserve(ledger.live_.size());
  for (auto& a : ledger.live_) {
    if (a.expiry <= slot) {
      ++freed.allocations;
      freed.compute += a.compute;
      freed.bandwidth += a.bandwidth;
    } else {
      kept.push_back(a);
    }
  }
  if (freed.allocations == 0) return freed;
  ledger.live_ = std::move(kept);

  // Totals are rebuilt from the surviving records so an idle ledger is exactly zero.
  std::fill(ledger.node_alloc_.begin(), ledger.node_alloc_.end(), 0.0);
  std::fill(ledger.link_alloc_.begin(), ledger.link_alloc_.end(), 0.0);
  for (const auto& a : ledger.live_) {
    ledger.node_alloc_[a.node.index()] += a.compute;
    for (auto l : a.links) ledger.link_alloc_[l.index()] += a.bandwidth;
  }
  return freed;
}

}  // namespace cnc
