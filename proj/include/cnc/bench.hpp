#pragma once

// Experiment harness: replays identical task streams through every policy,
// aggregates over seeds, sweeps arrival rates and times decisions.

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "cnc/config.hpp"
#include "cnc/dqn.hpp"
#include "cnc/policies.hpp"
#include "cnc/simulation.hpp"
#include "cnc/tasks.hpp"
#include "cnc/topology.hpp"

namespace cnc {

struct Experiment {
  std::shared_ptr<const NetworkGraph> graph;
  TaskGenSpec tasks;  // evaluation stream
  RewardConfig reward;
  TrainConfig train;
  std::vector<std::string> warnings;

  static Experiment from_document(const ConfigDocument& doc) {
    Experiment e;
    e.graph = std::make_shared<const NetworkGraph>(build_topology(TopologyConfig::from_document(doc)));
    require_all_tiers(*e.graph);
    e.tasks = TaskGenSpec::from_document(doc, *e.graph);
    e.reward = RewardConfig::from_document(doc, e.tasks.revenue.max);
    e.train = TrainConfig::from_document(doc, e.reward);
    if (auto w = e.reward.warning(e.tasks.revenue.max)) e.warnings.push_back(*w);
    return e;
  }

  static Experiment load(const std::string& path) { return from_document(ConfigDocument::load(path)); }

  Environment make_env() const { return Environment(graph, reward, TaskScale::from_spec(tasks)); }

  std::function<Environment()> env_factory() const {
    return [this] { return make_env(); };
  }

  TaskGenSpec spec_at(std::int64_t tasks_per_slot) const {
    TaskGenSpec s = tasks;
    s.tasks_per_slot = tasks_per_slot;
    return s;
  }

  // Evaluation stream for a seed. The rate only regroups the same tasks into slots.
  std::vector<Task> test_stream(std::uint64_t seed, std::int64_t tasks_per_slot) const {
    return generate_tasks(spec_at(tasks_per_slot), derive_seed(seed, kSeedTestStream));
  }
  std::vector<Task> test_stream(std::uint64_t seed) const { return test_stream(seed, tasks.tasks_per_slot); }

  TrainConfig train_config_for(std::uint64_t seed) const {
    TrainConfig c = train;
    c.seed = seed;
    return c;
  }
};

struct RunMetrics {
  std::string policy;
  std::uint64_t seed = 0;
  std::int64_t tasks_per_slot = 0;
  std::size_t tasks = 0;
  std::vector<double> cumulative_reward;  // prefix sums of per-task rewards
  double accumulated_reward = 0.0;
  double acceptance_rate = 0.0;
  std::size_t breach_count = 0;
  double mean_latency_ms = std::nan("");  // accepted tasks only
  double mean_decision_s = 0.0;
  double total_decision_s = 0.0;
  std::string stream_fingerprint;
};

struct EvalRun {
  RunMetrics metrics;
  std::vector<TraceRow> trace;
  bool drained_idle = false;  // every allocation released once the last task expired
};

// Replays the stream under the policy. Only decide() is timed.
inline EvalRun run_eval(const Experiment& exp, Policy& policy, const std::vector<Task>& stream,
                        std::uint64_t seed = 0) {
  Environment env = exp.make_env();
  EvalRun run;
  auto& m = run.metrics;
  m.policy = std::string(policy.name());
  m.seed = seed;
  m.tasks = stream.size();
  m.stream_fingerprint = stream_fingerprint(stream);
  if (!stream.empty()) {
    const auto first_slot = stream.front().arrival_slot;
    std::size_t in_first = 0;
    for (const auto& t : stream) in_first += t.arrival_slot == first_slot ? 1 : 0;
    m.tasks_per_slot = static_cast<std::int64_t>(in_first);
  }

  std::size_t accepted = 0;
  double latency_sum = 0.0;
  double reward = 0.0;
  using clock = std::chrono::steady_clock;
  for (const auto& task : stream) {
    env.advance_to(task.arrival_slot);
    const auto t0 = clock::now();
    const Decision d = policy.decide(env, task);
    const auto t1 = clock::now();
    m.total_decision_s += std::chrono::duration<double>(t1 - t0).count();

    const auto rec = env.apply(task, d);
    reward += rec.reward;
    m.cumulative_reward.push_back(reward);
    if (rec.outcome.accepted) {
      ++accepted;
      latency_sum += *rec.outcome.latency;
    }
    if (rec.outcome.breach) ++m.breach_count;
    run.trace.push_back({task, d, rec.outcome, rec.reward});
  }
  m.accumulated_reward = reward;
  m.acceptance_rate = stream.empty() ? 0.0 : static_cast<double>(accepted) / static_cast<double>(stream.size());
  if (accepted) m.mean_latency_ms = latency_sum / static_cast<double>(accepted);
  m.mean_decision_s = stream.empty() ? 0.0 : m.total_decision_s / static_cast<double>(stream.size());

  Slot horizon = env.current_slot();
  for (const auto& a : env.ledger().allocations()) horizon = std::max(horizon, a.expiry);
  env.advance_to(horizon);
  run.drained_idle = env.ledger().idle() &&
                     std::all_of(env.graph().compute_nodes().begin(), env.graph().compute_nodes().end(),
                                 [&](NodeId c) { return env.ledger().node_allocated(c) == 0.0; }) &&
                     std::all_of(env.graph().links().begin(), env.graph().links().end(),
                                 [&](const Link& l) { return env.ledger().link_allocated(l.id) == 0.0; });
  return run;
}

inline const std::vector<std::string>& all_policy_names() {
  static const std::vector<std::string> names{"random", "balanced", "greedy", "rl"};
  return names;
}

// Trains on demand and remembers one model per seed.
class ModelCache {
 public:
  explicit ModelCache(const Experiment& exp, std::function<void(std::uint64_t, const TrainLogRow&)> on_log = {})
      : exp_(exp), on_log_(std::move(on_log)) {}

  void put(std::uint64_t seed, QNetwork net) { models_[seed] = std::move(net); }

  const QNetwork& get(std::uint64_t seed) {
    auto it = models_.find(seed);
    if (it != models_.end()) return it->second;
    std::function<void(const TrainLogRow&)> log;
    if (on_log_) log = [this, seed](const TrainLogRow& r) { on_log_(seed, r); };
    auto result = train(exp_.env_factory(), exp_.tasks, exp_.train_config_for(seed), log);
    return models_.emplace(seed, std::move(result.net)).first->second;
  }

 private:
  const Experiment& exp_;
  std::function<void(std::uint64_t, const TrainLogRow&)> on_log_;
  std::map<std::uint64_t, QNetwork> models_;
};

inline std::unique_ptr<Policy> make_policy(const std::string& name, const Experiment& exp, std::uint64_t seed,
                                           ModelCache* models) {
  if (name == "random") return std::make_unique<RandomPolicy>(derive_seed(seed, kSeedRandomPolicy));
  if (name == "balanced") return std::make_unique<BalancedPolicy>();
  if (name == "greedy") return std::make_unique<GreedyPolicy>();
  if (name == "reject") return std::make_unique<RejectAllPolicy>();
  if (name == "rl") {
    if (!models) throw ConfigError("policy 'rl' needs a trained model");
    return rl_policy(models->get(seed), *exp.graph);
  }
  throw ConfigError("unknown policy '" + name + "' (random|balanced|greedy|rl)");
}

struct Summary {
  double mean = 0.0;
  double stddev = 0.0;
  std::size_t n = 0;
};

// Sample standard deviation; NaN entries are skipped.
inline Summary summarize(const std::vector<double>& xs) {
  Summary s;
  double sum = 0.0;
  for (double x : xs)
    if (!std::isnan(x)) {
      sum += x;
      ++s.n;
    }
  if (s.n == 0) {
    s.mean = std::nan("");
    return s;
  }
  s.mean = sum / static_cast<double>(s.n);
  if (s.n > 1) {
    double ss = 0.0;
    for (double x : xs)
      if (!std::isnan(x)) ss += (x - s.mean) * (x - s.mean);
    s.stddev = std::sqrt(ss / static_cast<double>(s.n - 1));
  }
  return s;
}

struct CompareTable {
  std::vector<std::string> policies;
  std::vector<std::uint64_t> seeds;
  std::map<std::string, std::vector<RunMetrics>> runs;  // policy -> one per seed, seed order

  Summary reward(const std::string& p) const { return over(p, [](const RunMetrics& m) { return m.accumulated_reward; }); }
  Summary latency(const std::string& p) const { return over(p, [](const RunMetrics& m) { return m.mean_latency_ms; }); }
  Summary acceptance(const std::string& p) const {
    return over(p, [](const RunMetrics& m) { return m.acceptance_rate; });
  }
  Summary decision_time(const std::string& p) const {
    return over(p, [](const RunMetrics& m) { return m.mean_decision_s; });
  }

  std::vector<RunMetrics> all() const {
    std::vector<RunMetrics> out;
    for (const auto& p : policies)
      for (const auto& m : runs.at(p)) out.push_back(m);
    return out;
  }

 private:
  Summary over(const std::string& p, double (*f)(const RunMetrics&)) const {
    std::vector<double> xs;
    for (const auto& m : runs.at(p)) xs.push_back(f(m));
    return summarize(xs);
  }
};

// Every policy sees the same stream for a given seed.
inline CompareTable compare(const Experiment& exp, const std::vector<std::string>& policies,
                            const std::vector<std::uint64_t>& seeds, ModelCache* models,
                            std::int64_t tasks_per_slot = 0) {
  if (tasks_per_slot <= 0) tasks_per_slot = exp.tasks.tasks_per_slot;
  CompareTable table;
  table.policies = policies;
  table.seeds = seeds;
  for (auto seed : seeds) {
    const auto stream = exp.test_stream(seed, tasks_per_slot);
    for (const auto& name : policies) {
      auto policy = make_policy(name, exp, seed, models);
      auto run = run_eval(exp, *policy, stream, seed);
      run.metrics.tasks_per_slot = tasks_per_slot;
      table.runs[name].push_back(std::move(run.metrics));
    }
  }
  return table;
}

struct SweepResult {
  std::vector<std::int64_t> tasks_per_slot;
  std::vector<std::string> policies;
  std::vector<std::uint64_t> seeds;
  std::vector<CompareTable> points;  // one per tasks_per_slot value
};

// The RL model of each seed is trained once (at the configured training
// rate) and evaluated at every point.
inline SweepResult sweep(const Experiment& exp, const std::vector<std::int64_t>& rates,
                         const std::vector<std::string>& policies, const std::vector<std::uint64_t>& seeds,
                         ModelCache* models) {
  if (rates.empty()) throw ConfigError("sweep needs at least one tasks-per-slot value");
  SweepResult r;
  r.tasks_per_slot = rates;
  r.policies = policies;
  r.seeds = seeds;
  for (auto rate : rates) r.points.push_back(compare(exp, policies, seeds, models, rate));
  return r;
}

struct DecisionTiming {
  std::string policy;
  double mean_s = 0.0;
  double total_s = 0.0;
  std::size_t decisions = 0;
};

// One untimed warm-up replay, then a timed replay on a fresh environment.
inline std::vector<DecisionTiming> measure_decision_time(const Experiment& exp,
                                                         const std::vector<Policy*>& policies,
                                                         const std::vector<Task>& stream) {
  std::vector<DecisionTiming> out;
  for (auto* p : policies) {
    run_eval(exp, *p, stream);
    const auto run = run_eval(exp, *p, stream);
    out.push_back({std::string(p->name()), run.metrics.mean_decision_s, run.metrics.total_decision_s, stream.size()});
  }
  return out;
}

// ---- CSV output --------------------------------------------------------

inline constexpr const char* kMetricsCsvHeader =
    "policy,seed,tasks_per_slot,tasks,accumulated_reward,acceptance_rate,breach_count,mean_latency_ms,"
    "mean_decision_s,total_decision_s,stream_fingerprint";

inline std::string metrics_to_csv(const std::vector<RunMetrics>& rows) {
  std::string out = std::string(kMetricsCsvHeader) + "\n";
  for (const auto& m : rows) {
    out += m.policy + ',' + std::to_string(m.seed) + ',' + std::to_string(m.tasks_per_slot) + ',' +
           std::to_string(m.tasks) + ',' + format_double(m.accumulated_reward) + ',' + format_double(m.acceptance_rate) +
           ',' + std::to_string(m.breach_count) + ',' + format_double(m.mean_latency_ms) + ',' +
           format_double(m.mean_decision_s) + ',' + format_double(m.total_decision_s) + ',' + m.stream_fingerprint +
           "\n";
  }
  return out;
}

// Inverse of metrics_to_csv (the cumulative series is not part of this file).
inline std::vector<RunMetrics> metrics_from_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != kMetricsCsvHeader) throw ConfigError("metrics CSV: unexpected header");
  std::vector<RunMetrics> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto c = split_csv_line(line);
    if (c.size() != 11) throw ConfigError("metrics CSV: expected 11 columns");
    RunMetrics m;
    m.policy = c[0];
    m.seed = static_cast<std::uint64_t>(parse_int(c[1], "seed"));
    m.tasks_per_slot = parse_int(c[2], "tasks_per_slot");
    m.tasks = static_cast<std::size_t>(parse_int(c[3], "tasks"));
    m.accumulated_reward = parse_double(c[4], "accumulated_reward");
    m.acceptance_rate = parse_double(c[5], "acceptance_rate");
    m.breach_count = static_cast<std::size_t>(parse_int(c[6], "breach_count"));
    m.mean_latency_ms = parse_double(c[7], "mean_latency_ms");
    m.mean_decision_s = parse_double(c[8], "mean_decision_s");
    m.total_decision_s = parse_double(c[9], "total_decision_s");
    m.stream_fingerprint = c[10];
    out.push_back(m);
  }
  return out;
}

// Plot data: (x, y, series) triples. Cumulative reward has one row per task
// per run, series "<policy>/seed<N>".
inline std::string cumulative_plot_data(const std::vector<RunMetrics>& rows) {
  std::string out = "x,y,series\n";
  for (const auto& m : rows)
    for (std::size_t i = 0; i < m.cumulative_reward.size(); ++i)
      out += std::to_string(i + 1) + ',' + format_double(m.cumulative_reward[i]) + ',' + m.policy + "/seed" +
             std::to_string(m.seed) + "\n";
  return out;
}

// Mean accepted-task latency per policy (bar chart).
inline std::string latency_plot_data(const CompareTable& t) {
  std::string out = "x,y,series\n";
  for (const auto& p : t.policies) out += p + ',' + format_double(t.latency(p).mean) + ",mean_latency_ms\n";
  return out;
}

// Seed-mean accumulated reward vs tasks per slot, one series per policy.
inline std::string sweep_plot_data(const SweepResult& s) {
  std::string out = "x,y,series\n";
  for (std::size_t i = 0; i < s.tasks_per_slot.size(); ++i)
    for (const auto& p : s.policies)
      out += std::to_string(s.tasks_per_slot[i]) + ',' + format_double(s.points[i].reward(p).mean) + ',' + p + "\n";
  return out;
}

inline std::string sweep_to_csv(const SweepResult& s) {
  std::vector<RunMetrics> rows;
  for (const auto& point : s.points)
    for (auto& m : point.all()) rows.push_back(m);
  return metrics_to_csv(rows);
}

inline constexpr const char* kTimingCsvHeader = "policy,decisions,mean_decision_s,total_decision_s";

inline std::string timing_to_csv(const std::vector<DecisionTiming>& rows) {
  std::string out = std::string(kTimingCsvHeader) + "\n";
  for (const auto& r : rows)
    out += r.policy + ',' + std::to_string(r.decisions) + ',' + format_double(r.mean_s) + ',' + format_double(r.total_s) +
           "\n";
  return out;
}

inline void write_text_file(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
    if (ec) throw std::runtime_error("cannot create directory '" + path.parent_path().string() + "': " + ec.message());
  }
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
  out << text;
  if (!out) throw std::runtime_error("failed writing '" + path.string() + "'");
}

inline void write_csv(const std::vector<RunMetrics>& metrics, const std::filesystem::path& path) {
  write_text_file(path, metrics_to_csv(metrics));
}

inline void write_plot_data(const std::vector<RunMetrics>& metrics, const std::filesystem::path& path) {
  write_text_file(path, cumulative_plot_data(metrics));
}

}  // namespace cnc
