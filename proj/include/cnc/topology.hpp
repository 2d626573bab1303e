#pragma once

// CNC fabric: network and tiered compute nodes, undirected links, and the
// fixed k-shortest path table every policy chooses from.

#include <algorithm>
#include <cmath>
#include <optional>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "cnc/common.hpp"
#include "cnc/config.hpp"

namespace cnc {

enum class ComputeTier { MEC, EdgeCloud, CloudCenter };
enum class NodeKind { Network, Compute };

inline std::string_view to_string(ComputeTier t) {
  switch (t) {
    case ComputeTier::MEC: return "mec";
    case ComputeTier::EdgeCloud: return "edge";
    case ComputeTier::CloudCenter: return "cloud";
  }
  return "?";
}

inline ComputeTier parse_tier(std::string_view s) {
  if (s == "mec") return ComputeTier::MEC;
  if (s == "edge") return ComputeTier::EdgeCloud;
  if (s == "cloud") return ComputeTier::CloudCenter;
  throw ConfigError("unknown compute tier '" + std::string(s) + "' (mec|edge|cloud)");
}

struct Point {
  double x = 0.0;
  double y = 0.0;
};

inline double distance(Point a, Point b) { return std::hypot(a.x - b.x, a.y - b.y); }

struct Node {
  NodeId id;
  std::string name;
  NodeKind kind = NodeKind::Network;
  ComputeTier tier = ComputeTier::MEC;  // meaningful for Compute only
  double compute_capacity = 0.0;
  double base_processing_delay = 0.0;  // ms
  double cost_per_unit_slot = 0.0;
  Point position;
  bool is_access = false;

  bool is_compute() const { return kind == NodeKind::Compute; }
};

struct Link {
  LinkId id;
  NodeId a;
  NodeId b;
  double bandwidth_capacity = 0.0;
  double propagation_delay = 0.0;  // ms

  NodeId other(NodeId n) const { return n == a ? b : a; }
};

struct Path {
  PathId id;
  NodeId access;
  NodeId compute;
  std::vector<NodeId> nodes;  // access ... compute
  std::vector<LinkId> links;
  double propagation_delay = 0.0;

  std::span<const NodeId> intermediate_nodes() const {
    if (nodes.size() < 2) return {};
    return std::span<const NodeId>(nodes).subspan(1, nodes.size() - 2);
  }
};

struct PathMetrics {
  double total_latency = 0.0;  // ms
  double total_cost = 0.0;
  double bottleneck_bandwidth = 0.0;
};

struct NodeSpec {
  std::string name;
  NodeKind kind = NodeKind::Network;
  ComputeTier tier = ComputeTier::MEC;
  double compute_capacity = 0.0;
  double base_processing_delay = 0.0;
  double cost_per_unit_slot = 0.0;
  Point position;
  bool is_access = false;
};

struct LinkSpec {
  std::string a;
  std::string b;
  double bandwidth = 0.0;
};

struct TopologyConfig {
  std::vector<NodeSpec> nodes;
  std::vector<LinkSpec> links;
  int k_paths = 4;
  double delay_per_distance = 1.0;  // ms per distance unit

  static TopologyConfig from_document(const ConfigDocument& doc) {
    TopologyConfig cfg;
    cfg.k_paths = static_cast<int>(doc.get_int("topology.k_paths", 4));
    cfg.delay_per_distance = doc.get_double("topology.delay_per_distance", 1.0);
    for (const auto* r : doc.records("node")) {
      NodeSpec n;
      n.name = r->get("name");
      const auto& kind = r->get("kind");
      if (kind == "network") {
        n.kind = NodeKind::Network;
      } else if (kind == "compute") {
        n.kind = NodeKind::Compute;
        n.tier = parse_tier(r->get("tier"));
      } else {
        throw ConfigError("line " + std::to_string(r->line) + ": node kind must be network|compute");
      }
      n.compute_capacity = r->get_double("capacity", 0.0);
      n.base_processing_delay = r->get_double("delay", 0.0);
      n.cost_per_unit_slot = r->get_double("cost", 0.0);
      n.position = {r->get_double("x"), r->get_double("y")};
      n.is_access = r->get_bool("access", false);
      cfg.nodes.push_back(std::move(n));
    }
    for (const auto* r : doc.records("link"))
      cfg.links.push_back({r->get("a"), r->get("b"), r->get_double("bandwidth")});
    return cfg;
  }

  std::string to_text() const {
    std::ostringstream out;
    out << "topology.k_paths = " << k_paths << "\n";
    out << "topology.delay_per_distance = " << format_double(delay_per_distance) << "\n";
    for (const auto& n : nodes) {
      out << "node name=" << n.name << " kind=" << (n.kind == NodeKind::Compute ? "compute" : "network");
      if (n.kind == NodeKind::Compute)
        out << " tier=" << to_string(n.tier) << " capacity=" << format_double(n.compute_capacity)
            << " cost=" << format_double(n.cost_per_unit_slot);
      out << " delay=" << format_double(n.base_processing_delay) << " x=" << format_double(n.position.x)
          << " y=" << format_double(n.position.y);
      if (n.is_access) out << " access=1";
      out << "\n";
    }
    for (const auto& l : links) out << "link a=" << l.a << " b=" << l.b << " bandwidth=" << format_double(l.bandwidth) << "\n";
    return out.str();
  }
};

struct PathRange {
  std::uint32_t begin = 0;
  std::uint32_t end = 0;
  std::uint32_t size() const { return end - begin; }
  bool contains(PathId p) const { return p.value >= begin && p.value < end; }
};

class NetworkGraph;
NetworkGraph build_topology(const TopologyConfig& config);
std::vector<Path> enumerate_k_shortest(const NetworkGraph& graph, NodeId access, NodeId compute, int k);

class NetworkGraph {
 public:
  struct Adjacent {
    NodeId node;
    LinkId link;
  };

  const std::vector<Node>& nodes() const { return nodes_; }
  const std::vector<Link>& links() const { return links_; }
  const std::vector<Path>& paths() const { return paths_; }
  const std::vector<NodeId>& access_nodes() const { return access_; }
  const std::vector<NodeId>& compute_nodes() const { return compute_; }
  int k_paths() const { return k_paths_; }

  const Node& node(NodeId id) const {
    if (id.index() >= nodes_.size()) throw LookupError("unknown node id " + std::to_string(id.value));
    return nodes_[id.index()];
  }
  const Link& link(LinkId id) const {
    if (id.index() >= links_.size()) throw LookupError("unknown link id " + std::to_string(id.value));
    return links_[id.index()];
  }
  const Path& path(PathId id) const {
    if (id.index() >= paths_.size()) throw LookupError("unknown path id " + std::to_string(id.value));
    return paths_[id.index()];
  }
  std::span<const Adjacent> neighbors(NodeId id) const { return adjacency_.at(id.index()); }

  std::optional<NodeId> find_node(std::string_view name) const {
    for (const auto& n : nodes_)
      if (n.name == name) return n.id;
    return std::nullopt;
  }

  // Paths rooted at an access node occupy one contiguous block of the table.
  PathRange paths_from(NodeId access) const { return access_ranges_.at(access_index(access)); }

  std::size_t access_index(NodeId id) const {
    auto it = std::find(access_.begin(), access_.end(), id);
    if (it == access_.end()) throw LookupError("node " + std::to_string(id.value) + " is not an access node");
    return static_cast<std::size_t>(it - access_.begin());
  }
  std::size_t compute_index(NodeId id) const {
    auto it = std::find(compute_.begin(), compute_.end(), id);
    if (it == compute_.end()) throw LookupError("node " + std::to_string(id.value) + " is not a compute node");
    return static_cast<std::size_t>(it - compute_.begin());
  }

  double total_compute_capacity() const {
    double total = 0.0;
    for (auto id : compute_) total += nodes_[id.index()].compute_capacity;
    return total;
  }

  std::string fingerprint() const {
    Fingerprint fp;
    fp.add(static_cast<std::int64_t>(k_paths_));
    for (const auto& n : nodes_) {
      fp.add(n.name);
      fp.add(static_cast<int>(n.kind));
      fp.add(static_cast<int>(n.tier));
      fp.add(n.compute_capacity);
      fp.add(n.base_processing_delay);
      fp.add(n.cost_per_unit_slot);
      fp.add(n.is_access);
    }
    for (const auto& l : links_) {
      fp.add(l.a.value);
      fp.add(l.b.value);
      fp.add(l.bandwidth_capacity);
      fp.add(l.propagation_delay);
    }
    for (const auto& p : paths_)
      for (auto n : p.nodes) fp.add(n.value);
    return fp.hex();
  }

 private:
  friend NetworkGraph build_topology(const TopologyConfig& config);

  std::vector<Node> nodes_;
  std::vector<Link> links_;
  std::vector<std::vector<Adjacent>> adjacency_;
  std::vector<NodeId> access_;
  std::vector<NodeId> compute_;
  std::vector<Path> paths_;
  std::vector<PathRange> access_ranges_;
  int k_paths_ = 1;
};

namespace detail {

struct PathCandidate {
  double delay = 0.0;
  std::vector<NodeId> nodes;
  std::vector<LinkId> links;

  friend bool operator<(const PathCandidate& l, const PathCandidate& r) {
    if (l.delay != r.delay) return l.delay < r.delay;
    return l.nodes < r.nodes;
  }
};

inline double sequential_delay(const NetworkGraph& g, std::span<const LinkId> links) {
  double d = 0.0;
  for (auto l : links) d += g.link(l).propagation_delay;
  return d;
}

// Dijkstra over (delay, node sequence) labels: returns the least-delay path
// and, among equal delays, the lexicographically smallest node sequence.
// start_delay lets spur searches continue the root's running sum so that
// delays are accumulated in the same order as a front-to-back scan.
inline std::optional<PathCandidate> lexicographic_shortest(const NetworkGraph& g, NodeId src, NodeId dst,
                                                           double start_delay,
                                                           const std::vector<bool>& banned_nodes,
                                                           const std::vector<bool>& banned_links) {
  const std::size_t n = g.nodes().size();
  constexpr double inf = std::numeric_limits<double>::infinity();
  std::vector<double> dist(n, inf);
  std::vector<std::vector<NodeId>> seq(n);
  std::vector<std::vector<LinkId>> via(n);
  std::vector<bool> settled(n, false);

  dist[src.index()] = start_delay;
  seq[src.index()] = {src};

  auto better = [&](double d1, const std::vector<NodeId>& s1, std::size_t v) {
    if (d1 != dist[v]) return d1 < dist[v];
    return s1 < seq[v];
  };

  for (;;) {
    std::size_t u = n;
    for (std::size_t v = 0; v < n; ++v) {
      if (settled[v] || dist[v] == inf) continue;
      if (u == n || dist[v] < dist[u] || (dist[v] == dist[u] && seq[v] < seq[u])) u = v;
    }
    if (u == n) return std::nullopt;
    if (u == dst.index()) break;
    settled[u] = true;
    for (const auto& adj : g.neighbors(NodeId(static_cast<std::uint32_t>(u)))) {
      const auto v = adj.node.index();
      if (settled[v] || banned_nodes[v] || banned_links[adj.link.index()]) continue;
      double nd = dist[u] + g.link(adj.link).propagation_delay;
      auto ns = seq[u];
      ns.push_back(adj.node);
      if (dist[v] == inf || better(nd, ns, v)) {
        dist[v] = nd;
        seq[v] = std::move(ns);
        via[v] = via[u];
        via[v].push_back(adj.link);
      }
    }
  }
  return PathCandidate{dist[dst.index()], seq[dst.index()], via[dst.index()]};
}

}  // namespace detail

// Yen's algorithm over the strict (delay, node sequence) order.
inline std::vector<Path> enumerate_k_shortest(const NetworkGraph& g, NodeId access, NodeId compute, int k) {
  if (!g.node(access).is_access) throw LookupError("enumerate_k_shortest: source is not an access node");
  if (!g.node(compute).is_compute()) throw LookupError("enumerate_k_shortest: target is not a compute node");
  std::vector<Path> out;
  if (k <= 0) return out;

  const std::size_t n = g.nodes().size();
  const std::vector<bool> no_nodes(n, false);
  const std::vector<bool> no_links(g.links().size(), false);

  auto first = detail::lexicographic_shortest(g, access, compute, 0.0, no_nodes, no_links);
  if (!first) return out;

  std::vector<detail::PathCandidate> found{*first};
  std::set<detail::PathCandidate> pending;

  while (static_cast<int>(found.size()) < k) {
    const auto prev = found.back();
    for (std::size_t i = 0; i + 1 < prev.nodes.size(); ++i) {
      const NodeId spur = prev.nodes[i];
      std::vector<bool> banned_nodes(n, false);
      std::vector<bool> banned_links(g.links().size(), false);
      for (std::size_t j = 0; j < i; ++j) banned_nodes[prev.nodes[j].index()] = true;
      for (const auto& p : found) {
        if (p.nodes.size() > i + 1 && std::equal(p.nodes.begin(), p.nodes.begin() + static_cast<std::ptrdiff_t>(i) + 1,
                                                 prev.nodes.begin()))
          banned_links[p.links[i].index()] = true;
      }
      std::span<const LinkId> root_links(prev.links.data(), i);
      const double root_delay = detail::sequential_delay(g, root_links);
      auto spur_path = detail::lexicographic_shortest(g, spur, compute, root_delay, banned_nodes, banned_links);
      if (!spur_path) continue;

      detail::PathCandidate total;
      total.nodes.assign(prev.nodes.begin(), prev.nodes.begin() + static_cast<std::ptrdiff_t>(i));
      total.nodes.insert(total.nodes.end(), spur_path->nodes.begin(), spur_path->nodes.end());
      total.links.assign(root_links.begin(), root_links.end());
      total.links.insert(total.links.end(), spur_path->links.begin(), spur_path->links.end());
      total.delay = detail::sequential_delay(g, total.links);

      bool known = std::any_of(found.begin(), found.end(), [&](const auto& p) { return p.nodes == total.nodes; });
      if (!known) pending.insert(std::move(total));
    }
    if (pending.empty()) break;
    found.push_back(*pending.begin());
    pending.erase(pending.begin());
  }

  for (auto& c : found) {
    Path p;
    p.access = access;
    p.compute = compute;
    p.nodes = std::move(c.nodes);
    p.links = std::move(c.links);
    p.propagation_delay = c.delay;
    out.push_back(std::move(p));
  }
  return out;
}

inline NetworkGraph build_topology(const TopologyConfig& config) {
  if (config.k_paths < 1) throw ConfigError("topology.k_paths must be >= 1");
  if (!(config.delay_per_distance >= 0.0)) throw ConfigError("topology.delay_per_distance must be >= 0");

  NetworkGraph g;
  g.k_paths_ = config.k_paths;

  std::unordered_map<std::string, NodeId> by_name;
  for (const auto& spec : config.nodes) {
    const NodeId id(static_cast<std::uint32_t>(g.nodes_.size()));
    if (spec.name.empty()) throw ConfigError("node with empty name");
    if (!by_name.emplace(spec.name, id).second) throw ConfigError("duplicate node id '" + spec.name + "'");
    const bool compute = spec.kind == NodeKind::Compute;
    if (compute && !(spec.compute_capacity > 0.0))
      throw ConfigError("compute node '" + spec.name + "' needs capacity > 0");
    if (!compute && spec.compute_capacity != 0.0)
      throw ConfigError("network node '" + spec.name + "' must not carry compute capacity");
    if (spec.is_access && compute) throw ConfigError("access node '" + spec.name + "' must be a network node");
    if (spec.base_processing_delay < 0.0 || spec.cost_per_unit_slot < 0.0)
      throw ConfigError("node '" + spec.name + "' has a negative delay or cost");

    Node n;
    n.id = id;
    n.name = spec.name;
    n.kind = spec.kind;
    n.tier = spec.tier;
    n.compute_capacity = compute ? spec.compute_capacity : 0.0;
    n.base_processing_delay = spec.base_processing_delay;
    n.cost_per_unit_slot = compute ? spec.cost_per_unit_slot : 0.0;
    n.position = spec.position;
    n.is_access = spec.is_access;
    g.nodes_.push_back(std::move(n));
    if (spec.is_access) g.access_.push_back(id);
    if (compute) g.compute_.push_back(id);
  }
  if (g.access_.empty()) throw ConfigError("topology needs at least one access node");

  if (g.compute_.empty()) throw ConfigError("topology needs at least one compute node");
  // Per-unit cost must fall strictly from MEC through edge cloud to cloud center.
  for (auto a : g.compute_)
    for (auto b : g.compute_) {
      const auto& na = g.nodes_[a.index()];
      const auto& nb = g.nodes_[b.index()];
      if (static_cast<int>(na.tier) < static_cast<int>(nb.tier) && !(na.cost_per_unit_slot > nb.cost_per_unit_slot))
        throw ConfigError("cost per unit must strictly decrease mec > edge > cloud ('" + na.name + "' vs '" +
                          nb.name + "')");
    }

  g.adjacency_.resize(g.nodes_.size());
  std::set<std::pair<std::uint32_t, std::uint32_t>> seen_links;
  for (const auto& spec : config.links) {
    auto ia = by_name.find(spec.a);
    auto ib = by_name.find(spec.b);
    if (ia == by_name.end() || ib == by_name.end())
      throw ConfigError("link references unknown node '" + (ia == by_name.end() ? spec.a : spec.b) + "'");
    if (ia->second == ib->second) throw ConfigError("self-loop link on '" + spec.a + "'");
    if (!(spec.bandwidth > 0.0)) throw ConfigError("link " + spec.a + "-" + spec.b + " needs bandwidth > 0");
    auto key = std::minmax(ia->second.value, ib->second.value);
    if (!seen_links.insert(key).second) throw ConfigError("duplicate link " + spec.a + "-" + spec.b);

    Link l;
    l.id = LinkId(static_cast<std::uint32_t>(g.links_.size()));
    l.a = ia->second;
    l.b = ib->second;
    l.bandwidth_capacity = spec.bandwidth;
    l.propagation_delay =
        distance(g.nodes_[l.a.index()].position, g.nodes_[l.b.index()].position) * config.delay_per_distance;
    g.adjacency_[l.a.index()].push_back({l.b, l.id});
    g.adjacency_[l.b.index()].push_back({l.a, l.id});
    g.links_.push_back(l);
  }
  for (auto& adj : g.adjacency_)
    std::sort(adj.begin(), adj.end(), [](const auto& x, const auto& y) { return x.node < y.node; });

  std::vector<bool> reached(g.nodes_.size(), false);
  std::vector<NodeId> stack{NodeId(0)};
  reached[0] = true;
  while (!stack.empty()) {
    auto u = stack.back();
    stack.pop_back();
    for (const auto& adj : g.adjacency_[u.index()])
      if (!reached[adj.node.index()]) {
        reached[adj.node.index()] = true;
        stack.push_back(adj.node);
      }
  }
  if (std::find(reached.begin(), reached.end(), false) != reached.end()) throw ConfigError("topology is disconnected");

  for (auto access : g.access_) {
    PathRange range;
    range.begin = static_cast<std::uint32_t>(g.paths_.size());
    for (auto compute : g.compute_) {
      for (auto& p : enumerate_k_shortest(g, access, compute, config.k_paths)) {
        p.id = PathId(static_cast<std::uint32_t>(g.paths_.size()));
        g.paths_.push_back(std::move(p));
      }
    }
    range.end = static_cast<std::uint32_t>(g.paths_.size());
    g.access_ranges_.push_back(range);
  }
  return g;
}

// Experiment topologies must offer every compute tier.
inline void require_all_tiers(const NetworkGraph& g) {
  for (auto tier : {ComputeTier::MEC, ComputeTier::EdgeCloud, ComputeTier::CloudCenter}) {
    bool present = std::any_of(g.compute_nodes().begin(), g.compute_nodes().end(),
                               [&](NodeId c) { return g.node(c).tier == tier; });
    if (!present) throw ConfigError("topology needs a compute node of tier '" + std::string(to_string(tier)) + "'");
  }
}

}  // namespace cnc
