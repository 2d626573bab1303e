#pragma once

// Task model and the seeded per-slot task generator.

#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "cnc/common.hpp"
#include "cnc/config.hpp"
#include "cnc/random.hpp"
#include "cnc/topology.hpp"

namespace cnc {

struct Task {
  std::int64_t id = 0;
  NodeId access_node;
  double compute_demand = 0.0;
  double bandwidth_demand = 0.0;
  double latency_bound = 0.0;  // ms
  double revenue = 0.0;
  std::int64_t duration_slots = 1;
  Slot arrival_slot = 0;

  friend bool operator==(const Task&, const Task&) = default;
};

template <typename T>
struct Range {
  T min{};
  T max{};

  bool contains(T v) const { return v >= min && v <= max; }
  bool valid() const { return min <= max; }
  T width() const { return max - min; }
};

struct TaskGenSpec {
  Range<double> compute_demand{1.0, 8.0};
  Range<double> bandwidth_demand{1.0, 10.0};
  Range<double> latency_bound{10.0, 100.0};
  Range<double> revenue{1.0, 50.0};
  Range<std::int64_t> duration_slots{5, 30};
  std::int64_t tasks_per_slot = 10;
  std::int64_t total_tasks = 1000;
  std::vector<NodeId> access_nodes;
  std::vector<double> access_weights;  // empty: uniform

  void validate() const {
    auto check = [](bool ok, const char* what) {
      if (!ok) throw ConfigError(std::string("task spec: ") + what);
    };
    check(compute_demand.valid() && compute_demand.min > 0.0, "compute_demand range must be 0 < min <= max");
    check(bandwidth_demand.valid() && bandwidth_demand.min > 0.0, "bandwidth_demand range must be 0 < min <= max");
    check(latency_bound.valid() && latency_bound.min > 0.0, "latency_bound range must be 0 < min <= max");
    check(revenue.valid() && revenue.min > 0.0, "revenue range must be 0 < min <= max");
    check(duration_slots.valid() && duration_slots.min >= 1, "duration_slots range must be 1 <= min <= max");
    check(tasks_per_slot >= 1, "tasks_per_slot must be >= 1");
    check(total_tasks >= 0, "total_tasks must be >= 0");
    check(!access_nodes.empty(), "no access nodes to sample from");
    check(access_weights.empty() || access_weights.size() == access_nodes.size(),
          "access weights must match the number of access nodes");
    double sum = 0.0;
    for (double w : access_weights) {
      check(w >= 0.0, "access weights must be non-negative");
      sum += w;
    }
    check(access_weights.empty() || sum > 0.0, "access weights must not all be zero");
  }

  // Reads "<prefix>.compute_demand = lo hi" style keys; access nodes come from the graph.
  static TaskGenSpec from_document(const ConfigDocument& doc, const NetworkGraph& graph,
                                   const std::string& prefix = "tasks") {
    TaskGenSpec s;
    auto range = [&](const char* key, Range<double> fallback) {
      auto [lo, hi] = doc.get_range(prefix + "." + key, {fallback.min, fallback.max});
      return Range<double>{lo, hi};
    };
    s.compute_demand = range("compute_demand", s.compute_demand);
    s.bandwidth_demand = range("bandwidth_demand", s.bandwidth_demand);
    s.latency_bound = range("latency_bound", s.latency_bound);
    s.revenue = range("revenue", s.revenue);
    auto [dlo, dhi] = doc.get_range(prefix + ".duration_slots", {static_cast<double>(s.duration_slots.min),
                                                                 static_cast<double>(s.duration_slots.max)});
    if (dlo != static_cast<double>(static_cast<std::int64_t>(dlo)) ||
        dhi != static_cast<double>(static_cast<std::int64_t>(dhi)))
      throw ConfigError(prefix + ".duration_slots must be integral");
    s.duration_slots = {static_cast<std::int64_t>(dlo), static_cast<std::int64_t>(dhi)};
    s.tasks_per_slot = doc.get_int(prefix + ".tasks_per_slot", s.tasks_per_slot);
    s.total_tasks = doc.get_int(prefix + ".total_tasks", s.total_tasks);
    s.access_nodes = graph.access_nodes();
    s.access_weights = doc.get_list(prefix + ".access_weights");
    s.validate();
    return s;
  }
};

inline std::vector<Task> generate_tasks(const TaskGenSpec& spec, std::uint64_t seed) {
  spec.validate();
  Rng rng(seed);
  std::vector<Task> out;
  out.reserve(static_cast<std::size_t>(spec.total_tasks));
  for (std::int64_t i = 0; i < spec.total_tasks; ++i) {
    Task t;
    t.id = i;
    t.arrival_slot = i / spec.tasks_per_slot;
    const std::size_t a = spec.access_weights.empty()
                              ? static_cast<std::size_t>(rng.below(spec.access_nodes.size()))
                              : rng.weighted(spec.access_weights);
    t.access_node = spec.access_nodes[a];
    t.compute_demand = rng.uniform(spec.compute_demand.min, spec.compute_demand.max);
    t.bandwidth_demand = rng.uniform(spec.bandwidth_demand.min, spec.bandwidth_demand.max);
    t.latency_bound = rng.uniform(spec.latency_bound.min, spec.latency_bound.max);
    t.revenue = rng.uniform(spec.revenue.min, spec.revenue.max);
    t.duration_slots = rng.uniform_int(spec.duration_slots.min, spec.duration_slots.max);
    out.push_back(t);
  }
  return out;
}

inline bool validate_task_against_spec(const Task& t, const TaskGenSpec& spec) {
  return spec.compute_demand.contains(t.compute_demand) && spec.bandwidth_demand.contains(t.bandwidth_demand) &&
         spec.latency_bound.contains(t.latency_bound) && spec.revenue.contains(t.revenue) &&
         spec.duration_slots.contains(t.duration_slots);
}

inline constexpr const char* kTaskCsvHeader =
    "id,arrival_slot,access_node,compute_demand,bandwidth_demand,latency_bound,revenue,duration_slots";

inline std::string task_csv_row(const Task& t) {
  std::string row;
  row += std::to_string(t.id) + ',' + std::to_string(t.arrival_slot) + ',' + std::to_string(t.access_node.value) + ',';
  row += format_double(t.compute_demand) + ',' + format_double(t.bandwidth_demand) + ',';
  row += format_double(t.latency_bound) + ',' + format_double(t.revenue) + ',' + std::to_string(t.duration_slots);
  return row;
}

inline std::string tasks_to_csv(const std::vector<Task>& tasks) {
  std::string out = std::string(kTaskCsvHeader) + "\n";
  for (const auto& t : tasks) out += task_csv_row(t) + "\n";
  return out;
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

inline std::vector<Task> tasks_from_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != kTaskCsvHeader) throw ConfigError("task CSV: unexpected header");
  std::vector<Task> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto c = split_csv_line(line);
    if (c.size() != 8) throw ConfigError("task CSV: expected 8 columns in '" + line + "'");
    Task t;
    t.id = parse_int(c[0], "id");
    t.arrival_slot = parse_int(c[1], "arrival_slot");
    t.access_node = NodeId(static_cast<std::uint32_t>(parse_int(c[2], "access_node")));
    t.compute_demand = parse_double(c[3], "compute_demand");
    t.bandwidth_demand = parse_double(c[4], "bandwidth_demand");
    t.latency_bound = parse_double(c[5], "latency_bound");
    t.revenue = parse_double(c[6], "revenue");
    t.duration_slots = parse_int(c[7], "duration_slots");
    out.push_back(t);
  }
  return out;
}

inline std::vector<Task> load_tasks_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open task CSV '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return tasks_from_csv(ss.str());
}

inline std::string stream_fingerprint(const std::vector<Task>& tasks) {
  Fingerprint fp;
  for (const auto& t : tasks) fp.add(task_csv_row(t));
  return fp.hex();
}

}  // namespace cnc
