#pragma once

// Deep Q-learning orchestration agent. One action per path-table entry plus
// a final Reject action; actions are masked to the task's access node only,
// never by feasibility.

#include <cmath>
#include <fstream>
#include <functional>
#include <memory>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "cnc/config.hpp"
#include "cnc/mlp.hpp"
#include "cnc/policies.hpp"
#include "cnc/random.hpp"
#include "cnc/simulation.hpp"
#include "cnc/tasks.hpp"

namespace cnc {

using QNetwork = Mlp<float>;

// Index i < N routes on PathId(i); index N rejects.
struct ActionSpace {
  std::uint32_t path_count = 0;

  explicit ActionSpace(const NetworkGraph& g) : path_count(static_cast<std::uint32_t>(g.paths().size())) {}
  std::uint32_t size() const { return path_count + 1; }
  std::uint32_t reject() const { return path_count; }

  Decision to_decision(std::int64_t task_id, std::uint32_t action) const {
    if (action == reject()) return Decision::reject(task_id);
    return Decision::to(task_id, PathId(action));
  }
};

// Contiguous block of the task's access-node paths, plus Reject.
struct ActionMask {
  PathRange paths;
  std::uint32_t reject = 0;

  bool allows(std::uint32_t a) const { return a == reject || (a >= paths.begin && a < paths.end); }
  std::uint32_t count() const { return paths.size() + 1; }
  std::uint32_t nth(std::uint32_t i) const { return i < paths.size() ? paths.begin + i : reject; }

  static ActionMask for_task(const NetworkGraph& g, const Task& t) {
    return {g.paths_from(t.access_node), static_cast<std::uint32_t>(g.paths().size())};
  }
};

inline std::vector<bool> structural_mask(const NetworkGraph& g, const Task& task) {
  std::vector<bool> mask(g.paths().size() + 1, false);
  for (const auto& p : g.paths()) mask[p.id.index()] = p.access == task.access_node;
  mask.back() = true;
  return mask;
}

inline std::vector<float> encode_state(const Environment& env, const Task& task) {
  std::vector<float> s(env.state_dim());
  env.observe_into(task, std::span<float>(s));
  return s;
}

// Epsilon-greedy over unmasked actions; masked argmax ties go to the lowest index.
template <typename T>
std::uint32_t select_action(const Mlp<T>& net, std::span<const T> state, const std::vector<bool>& mask, double epsilon,
                            Rng& rng) {
  if (mask.size() != net.output_dim()) throw ShapeError("select_action: mask size differs from action count");
  std::vector<std::uint32_t> allowed;
  for (std::uint32_t i = 0; i < mask.size(); ++i)
    if (mask[i]) allowed.push_back(i);
  if (allowed.empty()) throw ShapeError("select_action: every action is masked");
  if (rng.uniform01() < epsilon) return allowed[rng.below(allowed.size())];
  const auto q = net.forward(state);
  std::uint32_t best = allowed.front();
  for (auto a : allowed)
    if (q[a] > q[best]) best = a;
  return best;
}

// Same rule on a contiguous mask, evaluating only the allowed output units.
template <typename T>
std::uint32_t select_action(const Mlp<T>& net, typename Mlp<T>::Workspace& ws, std::span<const T> state,
                            const ActionMask& mask, double epsilon, Rng& rng) {
  if (rng.uniform01() < epsilon) return mask.nth(static_cast<std::uint32_t>(rng.below(mask.count())));
  net.forward_hidden(state, ws);
  std::uint32_t best = mask.paths.size() > 0 ? mask.paths.begin : mask.reject;
  T best_q = net.output_row(ws, best);
  for (std::uint32_t a = mask.paths.begin + 1; a < mask.paths.end; ++a) {
    const T q = net.output_row(ws, a);
    if (q > best_q) {
      best = a;
      best_q = q;
    }
  }
  if (mask.paths.size() > 0 && net.output_row(ws, mask.reject) > best_q) best = mask.reject;
  return best;
}

template <typename T>
struct Transition {
  std::vector<T> state;
  std::uint32_t action = 0;
  double reward = 0.0;
  std::vector<T> next_state;
  bool terminal = false;
  ActionMask next_mask;  // actions available at next_state
};

template <typename T>
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
    if (capacity == 0) throw ConfigError("replay buffer capacity must be >= 1");
    items_.reserve(std::min<std::size_t>(capacity, 1 << 16));
  }

  void push(Transition<T> t) {
    if (items_.size() < capacity_) {
      items_.push_back(std::move(t));
    } else {
      items_[next_] = std::move(t);
    }
    next_ = (next_ + 1) % capacity_;
  }

  std::size_t size() const { return items_.size(); }
  std::size_t capacity() const { return capacity_; }
  const Transition<T>& operator[](std::size_t i) const { return items_.at(i); }

  // Distinct indices, uniform over the buffer (Floyd's algorithm).
  std::vector<std::size_t> sample_indices(std::size_t batch, Rng& rng) const {
    const std::size_t n = items_.size();
    if (batch > n) batch = n;
    std::vector<std::size_t> picked;
    picked.reserve(batch);
    for (std::size_t j = n - batch; j < n; ++j) {
      const std::size_t t = static_cast<std::size_t>(rng.below(j + 1));
      if (std::find(picked.begin(), picked.end(), t) == picked.end())
        picked.push_back(t);
      else
        picked.push_back(j);
    }
    return picked;
  }

  std::vector<const Transition<T>*> sample(std::size_t batch, Rng& rng) const {
    std::vector<const Transition<T>*> out;
    for (auto i : sample_indices(batch, rng)) out.push_back(&items_[i]);
    return out;
  }

 private:
  std::size_t capacity_;
  std::size_t next_ = 0;
  std::vector<Transition<T>> items_;
};

// Mean squared TD error over the batch and its gradient w.r.t. the online
// network. Targets: r + gamma * max over next_mask of target Q, or r when terminal.
template <typename T>
double td_loss_and_gradient(const Mlp<T>& net, const Mlp<T>& target, std::span<const Transition<T>* const> batch,
                            double gamma, MlpGradients<T>& grads) {
  if (batch.empty()) throw ShapeError("train_step: empty batch");
  grads.zero();
  typename Mlp<T>::Workspace ws, tws;
  std::vector<T> delta, next_delta;
  const double inv_n = 1.0 / static_cast<double>(batch.size());
  double loss = 0.0;
  for (const auto* tr : batch) {
    if (tr->action >= net.output_dim()) throw ShapeError("transition action out of range");
    double y = tr->reward;
    if (!tr->terminal) {
      target.forward_hidden(tr->next_state, tws);
      const auto& m = tr->next_mask;
      double best = static_cast<double>(target.output_row(tws, m.reject));
      for (std::uint32_t a = m.paths.begin; a < m.paths.end; ++a)
        best = std::max(best, static_cast<double>(target.output_row(tws, a)));
      y += gamma * best;
    }
    net.forward_hidden(tr->state, ws);
    const double q = static_cast<double>(net.output_row(ws, tr->action));
    const double err = q - y;
    loss += err * err * inv_n;
    backprop_single_output(net, ws, tr->action, static_cast<T>(2.0 * err * inv_n), grads, delta, next_delta);
  }
  return loss;
}

// Online network, frozen target copy and optimizer state.
template <typename T>
class DqnLearner {
 public:
  DqnLearner(Mlp<T> net, double learning_rate, double gradient_clip)
      : net_(std::move(net)), target_(net_), grads_(net_), adam_(net_), lr_(learning_rate), clip_(gradient_clip) {}

  const Mlp<T>& net() const { return net_; }
  Mlp<T>& net() { return net_; }
  const Mlp<T>& target() const { return target_; }
  void sync_target() { target_ = net_; }

  // One Adam step on the batch; returns the pre-update loss.
  double train_step(std::span<const Transition<T>* const> batch, double gamma) {
    const double loss = td_loss_and_gradient(net_, target_, batch, gamma, grads_);
    const double norm2 = static_cast<double>(grads_.squared_norm());
    if (!std::isfinite(loss) || !std::isfinite(norm2))
      throw TrainingDivergence("non-finite TD loss or gradient (loss=" + format_double(loss) + ")");
    if (clip_ > 0.0 && norm2 > clip_ * clip_) grads_.scale(static_cast<T>(clip_ / std::sqrt(norm2)));
    adam_.step(net_, grads_, lr_);
    if (!net_.all_finite()) throw TrainingDivergence("non-finite network parameters after update");
    return loss;
  }

 private:
  Mlp<T> net_;
  Mlp<T> target_;
  MlpGradients<T> grads_;
  AdamOptimizer<T> adam_;
  double lr_;
  double clip_;
};

struct TrainConfig {
  double learning_rate = 1e-3;
  std::size_t batch_size = 64;
  std::size_t buffer_capacity = 50000;
  double gamma = 0.95;
  double epsilon_start = 1.0;
  double epsilon_end = 0.05;
  double epsilon_decay_fraction = 0.5;  // of all training steps
  std::int64_t target_sync_steps = 500;
  std::vector<std::size_t> hidden{128, 128};
  std::int64_t train_tasks = 20000;
  std::int64_t tasks_per_slot = 10;
  std::int64_t epochs = 1;     // passes over the training stream
  std::int64_t train_every = 1;
  double reward_scale = 1.0;   // rewards are multiplied by this before storage
  double gradient_clip = 10.0;
  std::int64_t log_interval = 500;
  std::uint64_t seed = 1;

  void validate() const {
    auto check = [](bool ok, const char* what) {
      if (!ok) throw ConfigError(std::string("train config: ") + what);
    };
    check(learning_rate > 0.0, "learning_rate must be > 0");
    check(batch_size >= 1 && buffer_capacity >= 1, "batch and buffer sizes must be >= 1");
    check(gamma > 0.0 && gamma <= 1.0, "gamma must be in (0, 1]");
    check(epsilon_start >= 0.0 && epsilon_start <= 1.0 && epsilon_end >= 0.0 && epsilon_end <= 1.0,
          "epsilon must be in [0, 1]");
    check(epsilon_decay_fraction > 0.0, "epsilon_decay_fraction must be > 0");
    check(target_sync_steps >= 1 && train_every >= 1 && log_interval >= 1 && epochs >= 1, "counts must be >= 1");
    check(train_tasks >= 0 && tasks_per_slot >= 1, "task counts invalid");
    check(reward_scale > 0.0, "reward_scale must be > 0");
    for (auto h : hidden) check(h >= 1, "hidden sizes must be >= 1");
  }

  static TrainConfig from_document(const ConfigDocument& doc, const RewardConfig& reward) {
    TrainConfig c;
    c.gamma = reward.discount;
    c.learning_rate = doc.get_double("train.learning_rate", c.learning_rate);
    c.batch_size = static_cast<std::size_t>(doc.get_int("train.batch_size", static_cast<std::int64_t>(c.batch_size)));
    c.buffer_capacity =
        static_cast<std::size_t>(doc.get_int("train.buffer_capacity", static_cast<std::int64_t>(c.buffer_capacity)));
    c.epsilon_start = doc.get_double("train.epsilon_start", c.epsilon_start);
    c.epsilon_end = doc.get_double("train.epsilon_end", c.epsilon_end);
    c.epsilon_decay_fraction = doc.get_double("train.epsilon_decay_fraction", c.epsilon_decay_fraction);
    c.target_sync_steps = doc.get_int("train.target_sync_steps", c.target_sync_steps);
    if (doc.has("train.hidden")) {
      c.hidden.clear();
      for (double h : doc.get_list("train.hidden")) c.hidden.push_back(static_cast<std::size_t>(h));
    }
    c.train_tasks = doc.get_int("train.total_tasks", c.train_tasks);
    c.tasks_per_slot = doc.get_int("train.tasks_per_slot", c.tasks_per_slot);
    c.epochs = doc.get_int("train.epochs", c.epochs);
    c.train_every = doc.get_int("train.train_every", c.train_every);
    c.reward_scale = doc.get_double("train.reward_scale", c.reward_scale);
    c.gradient_clip = doc.get_double("train.gradient_clip", c.gradient_clip);
    c.log_interval = doc.get_int("train.log_interval", c.log_interval);
    c.seed = static_cast<std::uint64_t>(doc.get_int("train.seed", static_cast<std::int64_t>(c.seed)));
    c.validate();
    return c;
  }

  double epsilon_at(std::int64_t step, std::int64_t total_steps) const {
    const double horizon = epsilon_decay_fraction * static_cast<double>(total_steps);
    if (horizon <= 0.0 || static_cast<double>(step) >= horizon) return epsilon_end;
    return epsilon_start + (epsilon_end - epsilon_start) * (static_cast<double>(step) / horizon);
  }
};

struct TrainLogRow {
  std::int64_t tasks_seen = 0;
  double epsilon = 0.0;
  double mean_loss = 0.0;  // over train steps in this interval (0 if none)
  std::int64_t train_steps = 0;
  double episode_reward = 0.0;  // running, undiscounted

  friend bool operator==(const TrainLogRow&, const TrainLogRow&) = default;
};

struct EpisodeSummary {
  double transition_reward = 0.0;  // sum of unscaled transition rewards
  double engine_reward = 0.0;      // episode_reward over the engine's outcomes
  std::size_t breaches = 0;
};

struct TrainResult {
  QNetwork net;
  std::vector<TrainLogRow> log;
  std::vector<EpisodeSummary> episodes;
};

// Seed purposes, shared with the bench so every run derives the same streams.
inline constexpr std::uint64_t kSeedTrainStream = 1;
inline constexpr std::uint64_t kSeedTestStream = 2;
inline constexpr std::uint64_t kSeedNetInit = 3;
inline constexpr std::uint64_t kSeedExploration = 4;
inline constexpr std::uint64_t kSeedReplay = 5;
inline constexpr std::uint64_t kSeedRandomPolicy = 6;

inline QNetwork initial_network(std::size_t state_size, std::size_t actions, const TrainConfig& cfg) {
  std::vector<std::size_t> sizes{state_size};
  sizes.insert(sizes.end(), cfg.hidden.begin(), cfg.hidden.end());
  sizes.push_back(actions);
  Rng rng(derive_seed(cfg.seed, kSeedNetInit));
  return QNetwork::glorot(sizes, rng);
}

// Runs the training stream `epochs` times as episodes. A transition's
// next_state is the observation at the next arriving task; the last
// transition of an episode is terminal.
inline TrainResult train(const std::function<Environment()>& make_env, const TaskGenSpec& task_spec,
                         const TrainConfig& cfg, const std::function<void(const TrainLogRow&)>& on_log = {}) {
  cfg.validate();
  Environment env = make_env();
  const ActionSpace actions(env.graph());
  TrainResult result;
  QNetwork init = initial_network(env.state_dim(), actions.size(), cfg);
  if (cfg.train_tasks == 0) {
    result.net = std::move(init);
    return result;
  }

  TaskGenSpec spec = task_spec;
  spec.total_tasks = cfg.train_tasks;
  spec.tasks_per_slot = cfg.tasks_per_slot;
  const auto tasks = generate_tasks(spec, derive_seed(cfg.seed, kSeedTrainStream));

  DqnLearner<float> learner(std::move(init), cfg.learning_rate, cfg.gradient_clip);
  ReplayBuffer<float> buffer(cfg.buffer_capacity);
  Rng explore(derive_seed(cfg.seed, kSeedExploration));
  Rng replay(derive_seed(cfg.seed, kSeedReplay));
  QNetwork::Workspace ws;

  const std::int64_t total_steps = cfg.train_tasks * cfg.epochs;
  std::int64_t step = 0;
  std::int64_t train_steps = 0;
  double interval_loss = 0.0;
  std::int64_t interval_steps = 0;

  for (std::int64_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    env = make_env();
    double episode_reward = 0.0;
    std::vector<Outcome> outcomes;
    outcomes.reserve(tasks.size());
    std::optional<Transition<float>> pending;

    for (const auto& task : tasks) {
      env.advance_to(task.arrival_slot);
      auto state = encode_state(env, task);
      const auto mask = ActionMask::for_task(env.graph(), task);
      if (pending) {
        pending->next_state = state;
        pending->next_mask = mask;
        buffer.push(std::move(*pending));
        pending.reset();
      }

      const double eps = cfg.epsilon_at(step, total_steps);
      const auto action = select_action(learner.net(), ws, std::span<const float>(state), mask, eps, explore);
      const auto rec = env.apply(task, actions.to_decision(task.id, action));
      episode_reward += rec.reward;
      outcomes.push_back(rec.outcome);

      Transition<float> tr;
      tr.state = std::move(state);
      tr.action = action;
      tr.reward = rec.reward * cfg.reward_scale;
      pending = std::move(tr);
      ++step;

      if (buffer.size() >= cfg.batch_size && step % cfg.train_every == 0) {
        const auto batch = buffer.sample(cfg.batch_size, replay);
        interval_loss += learner.train_step(batch, cfg.gamma);
        ++interval_steps;
        if (++train_steps % cfg.target_sync_steps == 0) learner.sync_target();
      }

      if (step % cfg.log_interval == 0) {
        TrainLogRow row{step, eps, interval_steps ? interval_loss / static_cast<double>(interval_steps) : 0.0,
                        interval_steps, episode_reward};
        result.log.push_back(row);
        if (on_log) on_log(row);
        interval_loss = 0.0;
        interval_steps = 0;
      }
    }
    if (pending) {
      pending->terminal = true;
      pending->next_state = pending->state;
      pending->next_mask = ActionMask{};
      buffer.push(std::move(*pending));
    }
    EpisodeSummary summary{episode_reward, cnc::episode_reward(outcomes, env.reward_config().breach_penalty), 0};
    for (const auto& o : outcomes) summary.breaches += o.breach ? 1 : 0;
    result.episodes.push_back(summary);
  }
  result.net = learner.net();
  return result;
}

inline constexpr const char* kTrainLogCsvHeader = "tasks_seen,epsilon,mean_loss,train_steps,episode_reward";

inline std::string train_log_to_csv(const std::vector<TrainLogRow>& log) {
  std::string out = std::string(kTrainLogCsvHeader) + "\n";
  for (const auto& r : log)
    out += std::to_string(r.tasks_seen) + ',' + format_double(r.epsilon) + ',' + format_double(r.mean_loss) + ',' +
           std::to_string(r.train_steps) + ',' + format_double(r.episode_reward) + "\n";
  return out;
}

// Greedy masked argmax over the task's own access-node paths and Reject.
// Never enumerates candidates or checks feasibility.
class RlPolicy final : public Policy {
 public:
  RlPolicy(QNetwork net, const NetworkGraph& graph) : net_(std::move(net)), actions_(graph) {
    if (net_.output_dim() != actions_.size())
      throw CompatError("model has " + std::to_string(net_.output_dim()) + " actions, topology needs " +
                        std::to_string(actions_.size()));
    if (net_.input_dim() != state_dim(graph))
      throw CompatError("model expects state size " + std::to_string(net_.input_dim()) + ", topology gives " +
                        std::to_string(state_dim(graph)));
    state_.resize(net_.input_dim());
  }

  Decision decide(const Environment& env, const Task& task) override {
    env.observe_into(task, std::span<float>(state_));
    const auto mask = ActionMask::for_task(env.graph(), task);
    const auto a = select_action(net_, ws_, std::span<const float>(state_), mask, 0.0, no_explore_);
    return actions_.to_decision(task.id, a);
  }
  std::string_view name() const override { return "rl"; }
  const QNetwork& net() const { return net_; }

 private:
  QNetwork net_;
  ActionSpace actions_;
  std::vector<float> state_;
  QNetwork::Workspace ws_;
  Rng no_explore_{0};
};

inline std::unique_ptr<Policy> rl_policy(QNetwork net, const NetworkGraph& graph) {
  return std::make_unique<RlPolicy>(std::move(net), graph);
}

// Model file (text):
//   cnc-qnet 1
//   fingerprint <topology fingerprint>
//   state_dim <n>
//   actions <n>
//   layers <input> <hidden...> <output>
//   then per layer: `out` lines of `in` weights (row-major), one bias line.
struct SavedModel {
  QNetwork net;
  std::string fingerprint;
};

inline std::string model_to_text(const QNetwork& net, const std::string& fingerprint) {
  std::ostringstream out;
  out << "cnc-qnet 1\nfingerprint " << fingerprint << "\nstate_dim " << net.input_dim() << "\nactions "
      << net.output_dim() << "\nlayers";
  for (auto s : net.sizes()) out << ' ' << s;
  out << '\n';
  char buf[32];
  auto put = [&](float v) {
    auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
    out.write(buf, end - buf);
  };
  for (const auto& layer : net.layers()) {
    for (std::size_t r = 0; r < layer.out; ++r) {
      for (std::size_t j = 0; j < layer.in; ++j) {
        if (j) out << ' ';
        put(layer.row(r)[j]);
      }
      out << '\n';
    }
    for (std::size_t r = 0; r < layer.out; ++r) {
      if (r) out << ' ';
      put(layer.bias[r]);
    }
    out << '\n';
  }
  return out.str();
}

inline SavedModel model_from_text(const std::string& text) {
  std::istringstream in(text);
  auto expect = [&](const char* word) {
    std::string w;
    if (!(in >> w) || w != word) throw CompatError(std::string("model file: expected '") + word + "'");
  };
  expect("cnc-qnet");
  int version = 0;
  if (!(in >> version) || version != 1) throw CompatError("model file: unsupported version");
  SavedModel m;
  expect("fingerprint");
  in >> m.fingerprint;
  std::size_t state = 0, acts = 0;
  expect("state_dim");
  in >> state;
  expect("actions");
  in >> acts;
  expect("layers");
  std::string line;
  std::getline(in, line);
  std::vector<std::size_t> sizes;
  for (const auto& tok : ConfigDocument::split_ws(line)) sizes.push_back(static_cast<std::size_t>(parse_int(tok, "layers")));
  if (sizes.size() < 2 || sizes.front() != state || sizes.back() != acts)
    throw CompatError("model file: layer sizes disagree with header");
  m.net = QNetwork(sizes);
  std::string tok;
  auto read = [&]() {
    if (!(in >> tok)) throw CompatError("model file: truncated parameters");
    float v = 0.0f;
    auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (ec != std::errc{} || ptr != tok.data() + tok.size()) throw CompatError("model file: bad number '" + tok + "'");
    return v;
  };
  for (auto& layer : m.net.layers()) {
    for (auto& w : layer.weights) w = read();
    for (auto& b : layer.bias) b = read();
  }
  if (in >> tok) throw CompatError("model file: trailing data");
  return m;
}

inline void save_model(const std::string& path, const QNetwork& net, const std::string& fingerprint) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write model file '" + path + "'");
  out << model_to_text(net, fingerprint);
  if (!out) throw std::runtime_error("failed writing model file '" + path + "'");
}

inline SavedModel load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw CompatError("cannot open model file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return model_from_text(ss.str());
}

// Loads a model and checks it was trained on this topology.
inline std::unique_ptr<Policy> load_rl_policy(const std::string& path, const NetworkGraph& graph) {
  auto m = load_model(path);
  if (m.fingerprint != graph.fingerprint())
    throw CompatError("model was trained on topology " + m.fingerprint + ", current topology is " +
                      graph.fingerprint());
  return rl_policy(std::move(m.net), graph);
}

}  // namespace cnc
