#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "hetsched/model.hpp"
#include "hetsched/nn.hpp"
#include "hetsched/rng.hpp"
#include "hetsched/sim.hpp"

namespace hetsched {

// ---------------------------------------------------------------------------
// State encoding
//
// Fixed layout for a given (N tasks, P PEs), all entries in [0,1]:
//   [0, 4N)            per-task status one-hot {outstanding, ready, running,
//                      completed}; queued-but-not-started tasks read as ready
//                      with their assignment bit set
//   [4N, 4N+(P+1)N)    per-task assigned-PE one-hot {none, PE0..PE(P-1)};
//                      stays set once a task has been placed
//   [.., ..+N*N)       predecessor adjacency, entry (i,j)=1 iff j precedes i
//   [.., ..+N*P)       execution times scaled by the matrix maximum
//
// The focus task carries the distinguished ready-and-unassigned pattern:
// it is the unique task whose status reads ready while its assignment block
// stays `none`. Ready tasks that are not yet up for decision keep the
// outstanding bit until their own turn (decisions run in ready-list order),
// so the net always knows exactly which task it is placing.
// ---------------------------------------------------------------------------

struct EncodingLayout {
  int num_tasks = 0;
  int num_pes = 0;

  int status_offset() const { return 0; }
  int status_size() const { return 4 * num_tasks; }
  int assignment_offset() const { return status_size(); }
  int assignment_size() const { return (num_pes + 1) * num_tasks; }
  int adjacency_offset() const { return assignment_offset() + assignment_size(); }
  int adjacency_size() const { return num_tasks * num_tasks; }
  int exec_offset() const { return adjacency_offset() + adjacency_size(); }
  int exec_size() const { return num_tasks * num_pes; }
  int dim() const { return exec_offset() + exec_size(); }

  static constexpr const char* block_labels[4] = {"status", "assignment", "adjacency",
                                                  "exec-time"};

  friend bool operator==(const EncodingLayout&, const EncodingLayout&) = default;
};

inline nn::Vector encode_state(const SimState& state, const JobSpec& job,
                               const ResourceMatrix& rm, TaskId focus_task) {
  const EncodingLayout layout{static_cast<int>(job.tasks.size()), rm.num_pes()};
  if (std::find(state.ready.begin(), state.ready.end(), focus_task) == state.ready.end())
    throw std::invalid_argument("encode_state: focus task " + std::to_string(focus_task) +
                                " is not in the ready list");

  nn::Vector v(static_cast<std::size_t>(layout.dim()), 0.0);
  const double max_exec = static_cast<double>(std::max<Tick>(rm.max_exec_time(), 1));

  for (const auto& t : job.tasks) {
    const auto i = static_cast<std::size_t>(t.id);
    int status;  // 0 outstanding, 1 ready, 2 running, 3 completed
    if (state.completed.count(t.id))
      status = 3;
    else if (state.running.count(t.id))
      status = 2;
    else if (state.assigned_pe[i] >= 0 ||
#ifdef HETSCHED_FOCUS_ONLY_READY
             t.id == focus_task)
#else
             std::find(state.ready.begin(), state.ready.end(), t.id) != state.ready.end())
#endif
      status = 1;
    else
      status = 0;
    v[i * 4 + static_cast<std::size_t>(status)] = 1.0;

    const std::size_t assign_base =
        static_cast<std::size_t>(layout.assignment_offset()) +
        i * static_cast<std::size_t>(layout.num_pes + 1);
    const PeId pe = state.assigned_pe[i];
    v[assign_base + static_cast<std::size_t>(pe < 0 ? 0 : 1 + pe)] = 1.0;

    for (TaskId p : t.predecessors)
      v[static_cast<std::size_t>(layout.adjacency_offset()) +
        i * static_cast<std::size_t>(layout.num_tasks) + static_cast<std::size_t>(p)] = 1.0;

    for (PeId p = 0; p < layout.num_pes; ++p)
      v[static_cast<std::size_t>(layout.exec_offset()) +
        i * static_cast<std::size_t>(layout.num_pes) + static_cast<std::size_t>(p)] =
          static_cast<double>(rm.exec_time(t.name, p)) / max_exec;
  }
  return v;
}

// ---------------------------------------------------------------------------
// Trajectories and returns

struct TrajectoryStep {
  nn::Vector state;
  int action = 0;
  Tick decision_tick = 0;
  double log_prob = 0.0;
};

struct Trajectory {
  std::vector<TrajectoryStep> steps;
  Tick episode_length = 0;  // elapsed ticks T of the finished episode
  double tau = 1.0;         // temperature the actions were sampled with
};

struct DrmConfig {
  double gamma = 0.99;  // discount per ms tick
  double tau0 = 5.0;
  double tau_min = 0.5;
  double tau_decay = 0.995;
  double lr_actor = 1e-3;
  double lr_critic = 1e-3;
  std::uint64_t seed = 0;
  bool standardize_advantage = false;
  std::vector<int> hidden = {128, 64};
  std::string optimizer = "adam";  // "adam" or "sgd"

  void validate() const {
    if (gamma < 0.0 || gamma > 1.0) throw std::invalid_argument("gamma must lie in [0,1]");
    if (!(tau_min > 0.0) || tau0 < tau_min)
      throw std::invalid_argument("temperatures must satisfy tau0 >= tau_min > 0");
    if (!(tau_decay > 0.0) || tau_decay > 1.0)
      throw std::invalid_argument("tau_decay must lie in (0,1]");
    if (optimizer != "adam" && optimizer != "sgd")
      throw std::invalid_argument("optimizer must be 'adam' or 'sgd'");
  }
};

/// tau_e = max(tau_min, tau0 * tau_decay^episode)
inline double temperature(int episode, const DrmConfig& cfg) {
  return std::max(cfg.tau_min, cfg.tau0 * std::pow(cfg.tau_decay, episode));
}

/// Discounted return per decision with a reward of -1 per ms tick from the
/// decision tick to episode end: G_t = -sum_{k<T-t} gamma^k, accumulated
/// backwards (g_k = -1 + gamma * g_{k-1}).
inline std::vector<double> compute_returns(const Trajectory& traj, double gamma) {
  Tick max_rem = 0;
  for (const auto& s : traj.steps)
    max_rem = std::max(max_rem, traj.episode_length - s.decision_tick);
  std::vector<double> by_remaining(static_cast<std::size_t>(max_rem) + 1, 0.0);
  for (Tick k = 1; k <= max_rem; ++k)
    by_remaining[static_cast<std::size_t>(k)] =
        -1.0 + gamma * by_remaining[static_cast<std::size_t>(k - 1)];
  std::vector<double> out;
  out.reserve(traj.steps.size());
  for (const auto& s : traj.steps)
    out.push_back(by_remaining[static_cast<std::size_t>(traj.episode_length - s.decision_tick)]);
  return out;
}

// ---------------------------------------------------------------------------
// Action selection

inline std::pair<int, double> select_action(const nn::DenseNet& actor,
                                            std::span<const double> state, double tau,
                                            Rng& rng) {
  const auto cache = nn::forward(actor, state);
  const auto probs = nn::softmax_temperature(cache.output, tau);
  const auto logp = nn::log_softmax_temperature(cache.output, tau);
  const double u = rng.uniform01();
  double cum = 0.0;
  int action = static_cast<int>(probs.size()) - 1;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    cum += probs[i];
    if (u < cum) {
      action = static_cast<int>(i);
      break;
    }
  }
  return {action, logp[static_cast<std::size_t>(action)]};
}

inline int greedy_action(const nn::DenseNet& actor, std::span<const double> state) {
  const auto cache = nn::forward(actor, state);
  return static_cast<int>(std::max_element(cache.output.begin(), cache.output.end()) -
                          cache.output.begin());
}

// ---------------------------------------------------------------------------
// Actor-critic update

struct TrainState {
  nn::AdamState actor;
  nn::AdamState critic;
};

struct UpdateResult {
  double loss_actor = 0.0;
  double loss_critic = 0.0;
};

struct UpdateGradients {
  double loss_actor = 0.0;
  double loss_critic = 0.0;
  nn::Gradients actor;
  nn::Gradients critic;
};

/// Losses and exact gradients of one on-policy episode.
///
/// A_t = G_t - V(s_t), with V constant in the actor loss:
///   loss_actor  = -(1/M) sum_t log pi(a_t|s_t) * A_t
///   loss_critic =  (1/M) sum_t (G_t - V(s_t))^2
inline UpdateGradients compute_update_gradients(const nn::DenseNet& actor,
                                                const nn::DenseNet& critic,
                                                const Trajectory& traj,
                                                std::span<const double> returns,
                                                const DrmConfig& cfg) {
  if (returns.size() != traj.steps.size())
    throw std::invalid_argument("update: one return per decision required");
  UpdateGradients out;
  out.actor = nn::zero_gradients(actor);
  out.critic = nn::zero_gradients(critic);
  const auto m = traj.steps.size();
  if (m == 0) return out;
  const double inv_m = 1.0 / static_cast<double>(m);

  std::vector<double> advantage(m);
  std::vector<nn::ForwardCache> critic_caches(m);
  for (std::size_t t = 0; t < m; ++t) {
    critic_caches[t] = nn::forward(critic, traj.steps[t].state);
    advantage[t] = returns[t] - critic_caches[t].output[0];
    out.loss_critic += advantage[t] * advantage[t] * inv_m;
  }

  std::vector<double> actor_weight = advantage;
  if (cfg.standardize_advantage && m > 1) {
    double mean = 0.0;
    for (double a : actor_weight) mean += a * inv_m;
    double var = 0.0;
    for (double a : actor_weight) var += (a - mean) * (a - mean) * inv_m;
    const double sd = std::sqrt(var) + 1e-8;
    for (double& a : actor_weight) a = (a - mean) / sd;
  }

  for (std::size_t t = 0; t < m; ++t) {
    const auto& step = traj.steps[t];
    const auto cache = nn::forward(actor, step.state);
    const auto probs = nn::softmax_temperature(cache.output, traj.tau);
    const auto logp = nn::log_softmax_temperature(cache.output, traj.tau);
    out.loss_actor -= logp[static_cast<std::size_t>(step.action)] * actor_weight[t] * inv_m;

    // d loss_actor / d logit_k = -(A/M) (1{k=a} - p_k) / tau
    nn::Vector d_logits(probs.size());
    for (std::size_t k = 0; k < probs.size(); ++k) {
      const double indicator = (static_cast<int>(k) == step.action) ? 1.0 : 0.0;
      d_logits[k] = -actor_weight[t] * inv_m * (indicator - probs[k]) / traj.tau;
    }
    out.actor.add_scaled(nn::backward(actor, cache, d_logits), 1.0);

    // d loss_critic / d V_t = -2 (G_t - V_t) / M
    nn::Vector d_value{-2.0 * advantage[t] * inv_m};
    out.critic.add_scaled(nn::backward(critic, critic_caches[t], d_value), 1.0);
  }
  return out;
}

/// One optimizer step per net from a finished episode.
/// Throws on a non-finite loss or gradient, leaving both nets untouched.
inline UpdateResult update(nn::DenseNet& actor, nn::DenseNet& critic, const Trajectory& traj,
                           std::span<const double> returns, const DrmConfig& cfg,
                           TrainState& opt) {
  const auto g = compute_update_gradients(actor, critic, traj, returns, cfg);
  if (!std::isfinite(g.loss_actor) || !std::isfinite(g.loss_critic) || !g.actor.finite() ||
      !g.critic.finite())
    throw std::runtime_error("update: non-finite loss or gradient, nets left untouched");

  if (cfg.optimizer == "adam") {
    nn::adam_step(actor, g.actor, opt.actor, cfg.lr_actor);
    nn::adam_step(critic, g.critic, opt.critic, cfg.lr_critic);
  } else {
    nn::sgd_step(actor, g.actor, cfg.lr_actor);
    nn::sgd_step(critic, g.critic, cfg.lr_critic);
  }
  return {g.loss_actor, g.loss_critic};
}

/// |d log pi(action|state) / d state_i| at the given temperature.
inline nn::Vector input_saliency(const nn::DenseNet& actor, std::span<const double> state,
                                 int action, double tau = 1.0) {
  const auto cache = nn::forward(actor, state);
  const auto probs = nn::softmax_temperature(cache.output, tau);
  nn::Vector d_logits(probs.size());
  for (std::size_t k = 0; k < probs.size(); ++k) {
    const double indicator = (static_cast<int>(k) == action) ? 1.0 : 0.0;
    d_logits[k] = (indicator - probs[k]) / tau;
  }
  auto grads = nn::backward(actor, cache, d_logits);
  for (double& v : grads.d_input) v = std::abs(v);
  return std::move(grads.d_input);
}

// ---------------------------------------------------------------------------
// The Deep Resource Manager as a pluggable scheduler

class DrmAgent : public Scheduler {
 public:
  enum class Mode { train, greedy };

  DrmAgent(int num_tasks, int num_pes, DrmConfig cfg)
      : cfg_(std::move(cfg)), layout_{num_tasks, num_pes}, rng_(mix_seed(cfg_.seed, 2)) {
    cfg_.validate();
    std::vector<int> actor_widths{layout_.dim()};
    actor_widths.insert(actor_widths.end(), cfg_.hidden.begin(), cfg_.hidden.end());
    actor_widths.push_back(num_pes);
    std::vector<int> critic_widths{layout_.dim()};
    critic_widths.insert(critic_widths.end(), cfg_.hidden.begin(), cfg_.hidden.end());
    critic_widths.push_back(1);
    actor_ = nn::make_dense_net(actor_widths, cfg_.seed);
    critic_ = nn::make_dense_net(critic_widths, mix_seed(cfg_.seed, 1));
    opt_.actor = nn::AdamState::like(actor_);
    opt_.critic = nn::AdamState::like(critic_);
  }

  std::string name() const override { return "drm"; }

  void set_mode(Mode mode) { mode_ = mode; }
  Mode mode() const { return mode_; }

  void begin_episode(const JobSpec& job, const ResourceMatrix& rm) override {
    if (static_cast<int>(job.tasks.size()) != layout_.num_tasks ||
        rm.num_pes() != layout_.num_pes)
      throw std::invalid_argument("DrmAgent: job/resource shape differs from the agent's");
    traj_ = Trajectory{};
    traj_.tau = temperature(episode_, cfg_);
  }

  SchedulerDecision decide(const SimState& state, const JobSpec& job,
                           const ResourceMatrix& rm) override {
    const TaskId focus = state.ready.front();
    auto enc = encode_state(state, job, rm, focus);
    if (mode_ == Mode::greedy) return {focus, static_cast<PeId>(greedy_action(actor_, enc))};
    auto [action, log_prob] = select_action(actor_, enc, traj_.tau, rng_);
    traj_.steps.push_back(TrajectoryStep{std::move(enc), action, state.now, log_prob});
    return {focus, static_cast<PeId>(action)};
  }

  void end_episode(const EpisodeResult& result) override {
    if (mode_ == Mode::greedy) return;
    traj_.episode_length = elapsed_ticks(result);
    const auto returns = compute_returns(traj_, cfg_.gamma);
    last_update_ = update(actor_, critic_, traj_, returns, cfg_, opt_);
    ++episode_;
  }

  double current_temperature() const { return temperature(episode_, cfg_); }
  int episode_index() const { return episode_; }
  UpdateResult last_update() const { return last_update_; }
  const DrmConfig& config() const { return cfg_; }
  const EncodingLayout& layout() const { return layout_; }
  const nn::DenseNet& actor() const { return actor_; }
  const nn::DenseNet& critic() const { return critic_; }

  nlohmann::json checkpoint() const {
    return nlohmann::json{{"format", "hetsched-drm-checkpoint"},
                          {"version", 1},
                          {"num_tasks", layout_.num_tasks},
                          {"num_pes", layout_.num_pes},
                          {"episode", episode_},
                          {"config",
                           {{"gamma", cfg_.gamma},
                            {"tau0", cfg_.tau0},
                            {"tau_min", cfg_.tau_min},
                            {"tau_decay", cfg_.tau_decay},
                            {"lr_actor", cfg_.lr_actor},
                            {"lr_critic", cfg_.lr_critic},
                            {"seed", cfg_.seed},
                            {"standardize_advantage", cfg_.standardize_advantage},
                            {"hidden", cfg_.hidden},
                            {"optimizer", cfg_.optimizer}}},
                          {"actor", nn::save_net(actor_)},
                          {"critic", nn::save_net(critic_)}};
  }

  static DrmAgent from_checkpoint(const nlohmann::json& j) {
    if (j.value("format", "") != "hetsched-drm-checkpoint" || j.value("version", 0) != 1)
      throw std::invalid_argument("not a version-1 hetsched-drm-checkpoint");
    const auto& cj = j.at("config");
    DrmConfig cfg;
    cfg.gamma = cj.at("gamma").get<double>();
    cfg.tau0 = cj.at("tau0").get<double>();
    cfg.tau_min = cj.at("tau_min").get<double>();
    cfg.tau_decay = cj.at("tau_decay").get<double>();
    cfg.lr_actor = cj.at("lr_actor").get<double>();
    cfg.lr_critic = cj.at("lr_critic").get<double>();
    cfg.seed = cj.at("seed").get<std::uint64_t>();
    cfg.standardize_advantage = cj.at("standardize_advantage").get<bool>();
    cfg.hidden = cj.at("hidden").get<std::vector<int>>();
    cfg.optimizer = cj.at("optimizer").get<std::string>();
    DrmAgent agent(j.at("num_tasks").get<int>(), j.at("num_pes").get<int>(), cfg);
    agent.actor_ = nn::load_net(j.at("actor"));
    agent.critic_ = nn::load_net(j.at("critic"));
    agent.episode_ = j.at("episode").get<int>();
    return agent;
  }

 private:
  DrmConfig cfg_;
  EncodingLayout layout_;
  Rng rng_;
  nn::DenseNet actor_;
  nn::DenseNet critic_;
  TrainState opt_;
  Trajectory traj_;
  int episode_ = 0;
  Mode mode_ = Mode::train;
  UpdateResult last_update_;
};

}  // namespace hetsched
