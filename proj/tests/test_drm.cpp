#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "hetsched/drm.hpp"
#include "hetsched/harness.hpp"
#include "helpers.hpp"

using namespace hetsched;
using nn::Vector;
using test_helpers::fork_job;
using test_helpers::fork_matrix;

namespace {

SimState blank_state(int num_tasks, int num_pes) {
  SimState st;
  st.pe_queues.resize(static_cast<std::size_t>(num_pes));
  st.pe_busy_until.assign(static_cast<std::size_t>(num_pes), 0);
  st.pe_current.assign(static_cast<std::size_t>(num_pes), -1);
  st.assigned_pe.assign(static_cast<std::size_t>(num_tasks), -1);
  st.assign_tick.assign(static_cast<std::size_t>(num_tasks), 0);
  return st;
}

double rel_error(double a, double b) {
  return std::abs(a - b) / std::max(1e-6, std::abs(a) + std::abs(b));
}

Trajectory toy_trajectory(const nn::DenseNet& actor, int decisions, Rng& rng, double tau) {
  Trajectory traj;
  traj.tau = tau;
  for (int i = 0; i < decisions; ++i) {
    TrajectoryStep step;
    step.state.resize(static_cast<std::size_t>(actor.input_dim()));
    for (double& v : step.state) v = rng.uniform(0.0, 1.0);
    step.decision_tick = i * 3;
    auto [action, logp] = select_action(actor, step.state, tau, rng);
    step.action = action;
    step.log_prob = logp;
    traj.steps.push_back(std::move(step));
  }
  traj.episode_length = decisions * 3 + 10;
  return traj;
}

}  // namespace

TEST_CASE("initial state encodes one ready bit and all-none assignments") {
  const auto job = fork_job();
  const auto rm = fork_matrix();
  auto st = blank_state(3, 2);
  st.ready = {0};
  st.outstanding = {1, 2};
  const auto v = encode_state(st, job, rm, 0);
  const EncodingLayout layout{3, 2};
  REQUIRE(static_cast<int>(v.size()) == layout.dim());
  REQUIRE(layout.dim() == 36);

  CHECK(v[0 * 4 + 1] == 1.0);  // T0 ready
  CHECK(v[1 * 4 + 0] == 1.0);  // T1 outstanding
  CHECK(v[2 * 4 + 0] == 1.0);  // T2 outstanding
  for (int t = 0; t < 3; ++t)
    CHECK(v[static_cast<std::size_t>(layout.assignment_offset() + t * 3)] == 1.0);  // none

  // adjacency: T1 and T2 both depend on T0
  CHECK(v[static_cast<std::size_t>(layout.adjacency_offset() + 1 * 3 + 0)] == 1.0);
  CHECK(v[static_cast<std::size_t>(layout.adjacency_offset() + 2 * 3 + 0)] == 1.0);
  CHECK(v[static_cast<std::size_t>(layout.adjacency_offset() + 0 * 3 + 1)] == 0.0);

  // exec block scaled by the max (4): T0 on PE0 is 2 -> 0.5
  CHECK(v[static_cast<std::size_t>(layout.exec_offset() + 0)] == 0.5);
}

TEST_CASE("mid-episode statuses and assignments are encoded") {
  const auto job = fork_job();
  const auto rm = fork_matrix();
  auto st = blank_state(3, 2);
  st.now = 2;
  st.completed = {0};
  st.running = {1};
  st.ready = {2};
  st.assigned_pe[0] = 0;
  st.assigned_pe[1] = 1;
  const auto v = encode_state(st, job, rm, 2);
  const EncodingLayout layout{3, 2};

  CHECK(v[0 * 4 + 3] == 1.0);  // T0 completed
  CHECK(v[1 * 4 + 2] == 1.0);  // T1 running
  CHECK(v[2 * 4 + 1] == 1.0);  // T2 ready
  CHECK(v[static_cast<std::size_t>(layout.assignment_offset() + 0 * 3 + 1)] == 1.0);  // T0 on PE0
  CHECK(v[static_cast<std::size_t>(layout.assignment_offset() + 1 * 3 + 2)] == 1.0);  // T1 on PE1
  CHECK(v[static_cast<std::size_t>(layout.assignment_offset() + 2 * 3 + 0)] == 1.0);  // T2 none
}

TEST_CASE("exec scaling uses the matrix maximum") {
  JobSpec job;
  job.tasks.push_back(test_helpers::task(0, {}, true, false));
  job.tasks.push_back(test_helpers::task(1, {0}, false, true));
  const auto rm = test_helpers::matrix(job, {{5, 10}});
  auto st = blank_state(2, 1);
  st.ready = {0};
  st.outstanding = {1};
  const auto v = encode_state(st, job, rm, 0);
  const EncodingLayout layout{2, 1};
  CHECK(v[static_cast<std::size_t>(layout.exec_offset() + 0)] == 0.5);
  CHECK(v[static_cast<std::size_t>(layout.exec_offset() + 1)] == 1.0);
}

namespace {

// Checks the encoding contract at every decision the inner scheduler makes.
struct EncodingProbe : Scheduler {
  Scheduler* inner;
  EncodingLayout layout;
  int checked = 0;

  EncodingProbe(Scheduler* s, EncodingLayout l) : inner(s), layout(l) {}
  std::string name() const override { return inner->name(); }
  void begin_episode(const JobSpec& job, const ResourceMatrix& rm) override {
    inner->begin_episode(job, rm);
  }
  void end_episode(const EpisodeResult& r) override { inner->end_episode(r); }
  SchedulerDecision decide(const SimState& st, const JobSpec& job,
                           const ResourceMatrix& rm) override {
    const auto v = encode_state(st, job, rm, st.ready.front());
    for (double x : v) {
      REQUIRE(x >= 0.0);
      REQUIRE(x <= 1.0);
    }
    for (int t = 0; t < layout.num_tasks; ++t) {
      double status_sum = 0.0, assign_sum = 0.0;
      for (int s = 0; s < 4; ++s) status_sum += v[static_cast<std::size_t>(t * 4 + s)];
      for (int a = 0; a <= layout.num_pes; ++a)
        assign_sum += v[static_cast<std::size_t>(layout.assignment_offset() +
                                                 t * (layout.num_pes + 1) + a)];
      REQUIRE(status_sum == 1.0);
      REQUIRE(assign_sum == 1.0);
    }
    ++checked;
    return inner->decide(st, job, rm);
  }
};

}  // namespace

TEST_CASE("every entry lies in [0,1] with one-hot status and assignment") {
  Rng rng(12);
  const auto [job, rm] = generate_sample_specs(8, 3, rng);
  DrmConfig cfg;
  cfg.hidden = {16};
  cfg.seed = 4;
  DrmAgent agent(8, 3, cfg);
  EncodingProbe probe(&agent, EncodingLayout{8, 3});
  run_episode(job, rm, probe);
  CHECK(probe.checked == 8);
}

TEST_CASE("all-lists observability: equal ready lists, different encodings") {
  const auto job = fork_job();
  const auto rm = fork_matrix();
  auto a = blank_state(3, 2);
  a.ready = {2};
  a.completed = {0};
  a.running = {1};
  a.assigned_pe[0] = 0;
  a.assigned_pe[1] = 1;
  auto b = a;
  b.completed = {0, 1};
  b.running = {};
  CHECK(encode_state(a, job, rm, 2) != encode_state(b, job, rm, 2));
}

TEST_CASE("encode_state requires the focus task to be ready") {
  const auto job = fork_job();
  auto st = blank_state(3, 2);
  st.ready = {0};
  st.outstanding = {1, 2};
  CHECK_THROWS_AS(encode_state(st, job, fork_matrix(), 1), std::invalid_argument);
}

TEST_CASE("uniform logits sample uniformly") {
  nn::DenseNet actor = nn::make_dense_net({4, 3}, 0);
  for (auto& l : actor.layers)
    for (double& w : l.weights.a) w = 0.0;
  const Vector state{0.2, 0.4, 0.6, 0.8};
  const auto cache = nn::forward(actor, state);
  const auto probs = nn::softmax_temperature(cache.output, 2.0);
  for (double p : probs) CHECK(p == Catch::Approx(1.0 / 3).margin(1e-12));

  Rng rng(6);
  std::array<int, 3> counts{};
  for (int i = 0; i < 9000; ++i) {
    auto [action, logp] = select_action(actor, state, 2.0, rng);
    ++counts[static_cast<std::size_t>(action)];
    CHECK(logp == Catch::Approx(std::log(1.0 / 3)).margin(1e-12));
  }
  for (int c : counts) CHECK(std::abs(c - 3000) < 300);
}

TEST_CASE("a decayed temperature concentrates on the argmax") {
  nn::DenseNet actor = nn::make_dense_net({1, 3}, 0);
  auto& l = actor.layers[0];
  l.weights.at(0, 0) = 5.0;  // logits for x=[1]: [5,0,0]
  l.weights.at(1, 0) = 0.0;
  l.weights.at(2, 0) = 0.0;
  const auto cache = nn::forward(actor, Vector{1.0});
  const auto probs = nn::softmax_temperature(cache.output, 0.5);
  CHECK(probs[0] > 0.99);
}

TEST_CASE("sampling is reproducible for a fixed seed") {
  nn::DenseNet actor = nn::make_dense_net({3, 4}, 9);
  const Vector state{0.1, 0.9, 0.5};
  Rng a(123), b(123);
  for (int i = 0; i < 50; ++i) {
    CHECK(select_action(actor, state, 1.3, a).first ==
          select_action(actor, state, 1.3, b).first);
  }
}

TEST_CASE("temperature schedule") {
  DrmConfig cfg;
  CHECK(temperature(0, cfg) == cfg.tau0);
  // tau0=5, decay=0.995: 5 * 0.995^720 ~ 0.135, clamped to tau_min=0.5
  CHECK(temperature(720, cfg) == cfg.tau_min);
  DrmConfig constant;
  constant.tau_decay = 1.0;
  CHECK(temperature(31, constant) == constant.tau0);
  // monotone non-increasing and eventually at tau_min
  double prev = temperature(0, cfg);
  for (int e = 1; e < 2000; ++e) {
    const double t = temperature(e, cfg);
    REQUIRE(t <= prev);
    prev = t;
  }
  CHECK(prev == cfg.tau_min);
}

TEST_CASE("returns match the closed form") {
  Trajectory traj;
  traj.episode_length = 94;
  traj.steps.push_back(TrajectoryStep{{}, 0, 0, 0.0});    // T - t = 94
  traj.steps.push_back(TrajectoryStep{{}, 0, 84, 0.0});   // T - t = 10
  traj.steps.push_back(TrajectoryStep{{}, 0, 94, 0.0});   // T - t = 0

  const auto flat = compute_returns(traj, 1.0);
  CHECK(flat[0] == -94.0);
  CHECK(flat[2] == 0.0);

  const auto discounted = compute_returns(traj, 0.99);
  CHECK(discounted[1] == Catch::Approx(-9.5618).margin(1e-4));
  CHECK(discounted[2] == 0.0);

  Rng rng(44);
  for (int trial = 0; trial < 200; ++trial) {
    const double gamma = trial % 7 == 0 ? 1.0 : rng.uniform(0.0, 0.995);
    Trajectory t2;
    t2.episode_length = rng.uniform_int(1, 800);
    t2.steps.push_back(
        TrajectoryStep{{}, 0, rng.uniform_int(0, t2.episode_length), 0.0});
    const double got = compute_returns(t2, gamma)[0];
    const auto rem = static_cast<double>(t2.episode_length - t2.steps[0].decision_tick);
    const double want =
        gamma == 1.0 ? -rem : -(1.0 - std::pow(gamma, rem)) / (1.0 - gamma);
    CHECK(std::abs(got - want) < 1e-10);
  }
}

TEST_CASE("returns are monotone in the decision tick") {
  Rng rng(45);
  for (int trial = 0; trial < 50; ++trial) {
    Trajectory traj;
    traj.episode_length = 200;
    Tick tick = 0;
    for (int i = 0; i < 8; ++i) {
      tick += rng.uniform_int(0, 30);
      traj.steps.push_back(TrajectoryStep{{}, 0, std::min<Tick>(tick, 200), 0.0});
    }
    const double gamma = rng.uniform(0.05, 1.0);
    const auto g = compute_returns(traj, gamma);
    for (std::size_t i = 1; i < g.size(); ++i) REQUIRE(g[i] >= g[i - 1]);
  }
}

TEST_CASE("zero advantage produces exactly zero actor gradients") {
  Rng rng(50);
  nn::DenseNet actor = nn::make_dense_net({5, 6, 2}, 1);
  nn::DenseNet critic = nn::make_dense_net({5, 6, 1}, 2);
  for (auto& l : critic.layers)
    for (double& w : l.weights.a) w = 0.0;  // V = 0 everywhere
  auto traj = toy_trajectory(actor, 3, rng, 1.0);
  const std::vector<double> returns(3, 0.0);  // G = V = 0
  DrmConfig cfg;
  const auto g = compute_update_gradients(actor, critic, traj, returns, cfg);
  CHECK(g.loss_actor == 0.0);
  for (const auto& m : g.actor.d_weights)
    for (double v : m.a) CHECK(v == 0.0);
}

TEST_CASE("critic loss is the mean squared advantage") {
  Rng rng(51);
  nn::DenseNet actor = nn::make_dense_net({4, 3, 2}, 3);
  nn::DenseNet critic = nn::make_dense_net({4, 3, 1}, 4);
  for (auto& l : critic.layers)
    for (double& w : l.weights.a) w = 0.0;
  auto traj = toy_trajectory(actor, 1, rng, 1.0);
  const std::vector<double> returns{-10.0};
  const auto g = compute_update_gradients(actor, critic, traj, returns, DrmConfig{});
  CHECK(g.loss_critic == Catch::Approx(100.0).margin(1e-12));
}

TEST_CASE("actor and critic gradients agree with finite differences") {
  Rng rng(52);
  DrmConfig cfg;
  for (int trial = 0; trial < 5; ++trial) {
    nn::DenseNet actor = nn::make_dense_net({4, 5, 3}, rng.next_u64());
    nn::DenseNet critic = nn::make_dense_net({4, 5, 1}, rng.next_u64());
    auto traj = toy_trajectory(actor, 2, rng, 1.7);
    std::vector<double> returns{rng.uniform(-20.0, 0.0), rng.uniform(-20.0, 0.0)};

    const auto g = compute_update_gradients(actor, critic, traj, returns, cfg);

    const double h = 1e-5;
    double worst = 0.0;
    auto actor_loss = [&] {
      return compute_update_gradients(actor, critic, traj, returns, cfg).loss_actor;
    };
    for (std::size_t l = 0; l < actor.layers.size(); ++l)
      for (std::size_t i = 0; i < actor.layers[l].weights.a.size(); ++i) {
        double& w = actor.layers[l].weights.a[i];
        const double saved = w;
        w = saved + h;
        const double up = actor_loss();
        w = saved - h;
        const double down = actor_loss();
        w = saved;
        worst = std::max(worst, rel_error(g.actor.d_weights[l].a[i], (up - down) / (2 * h)));
      }
    CHECK(worst < 1e-4);

    double worst_critic = 0.0;
    auto critic_loss = [&] {
      return compute_update_gradients(actor, critic, traj, returns, cfg).loss_critic;
    };
    for (std::size_t l = 0; l < critic.layers.size(); ++l)
      for (std::size_t i = 0; i < critic.layers[l].weights.a.size(); ++i) {
        double& w = critic.layers[l].weights.a[i];
        const double saved = w;
        w = saved + h;
        const double up = critic_loss();
        w = saved - h;
        const double down = critic_loss();
        w = saved;
        worst_critic =
            std::max(worst_critic, rel_error(g.critic.d_weights[l].a[i], (up - down) / (2 * h)));
      }
    CHECK(worst_critic < 1e-4);
  }
}

TEST_CASE("one update on a positive advantage raises the action probability") {
  Rng rng(53);
  nn::DenseNet actor = nn::make_dense_net({3, 4, 2}, 7);
  nn::DenseNet critic = nn::make_dense_net({3, 4, 1}, 8);
  for (auto& l : critic.layers)
    for (double& w : l.weights.a) w = 0.0;

  Trajectory traj;
  traj.tau = 1.0;
  TrajectoryStep step;
  step.state = {0.3, 0.7, 0.1};
  step.decision_tick = 0;
  auto [action, logp] = select_action(actor, step.state, traj.tau, rng);
  step.action = action;
  step.log_prob = logp;
  traj.steps.push_back(step);
  traj.episode_length = 5;

  const auto before =
      nn::softmax_temperature(nn::forward(actor, step.state).output, traj.tau);

  DrmConfig cfg;
  cfg.optimizer = "sgd";
  cfg.lr_actor = 1e-3;
  cfg.lr_critic = 1e-3;
  TrainState opt{nn::AdamState::like(actor), nn::AdamState::like(critic)};
  const std::vector<double> returns{2.5};  // V=0, so the advantage is +2.5
  update(actor, critic, traj, returns, cfg, opt);

  const auto after =
      nn::softmax_temperature(nn::forward(actor, step.state).output, traj.tau);
  CHECK(after[static_cast<std::size_t>(action)] > before[static_cast<std::size_t>(action)]);
}

TEST_CASE("a non-finite loss leaves the nets untouched") {
  Rng rng(54);
  nn::DenseNet actor = nn::make_dense_net({3, 2}, 11);
  nn::DenseNet critic = nn::make_dense_net({3, 1}, 12);
  auto traj = toy_trajectory(actor, 1, rng, 1.0);
  const std::vector<double> returns{std::numeric_limits<double>::infinity()};
  const auto actor_before = actor.layers[0].weights.a;
  const auto critic_before = critic.layers[0].weights.a;
  TrainState opt{nn::AdamState::like(actor), nn::AdamState::like(critic)};
  CHECK_THROWS_AS(update(actor, critic, traj, returns, DrmConfig{}, opt), std::runtime_error);
  CHECK(actor.layers[0].weights.a == actor_before);
  CHECK(critic.layers[0].weights.a == critic_before);
}

TEST_CASE("saliency of an all-zero-weight network is zero") {
  nn::DenseNet actor = nn::make_dense_net({5, 4, 2}, 13);
  for (auto& l : actor.layers)
    for (double& w : l.weights.a) w = 0.0;
  const auto s = input_saliency(actor, Vector{0.1, 0.2, 0.3, 0.4, 0.5}, 1);
  for (double v : s) CHECK(v == 0.0);
}

TEST_CASE("saliency is symmetric across duplicated inputs") {
  nn::DenseNet actor = nn::make_dense_net({2, 3, 2}, 14);
  auto& l0 = actor.layers[0];
  for (int r = 0; r < 3; ++r) l0.weights.at(r, 1) = l0.weights.at(r, 0);
  const auto s = input_saliency(actor, Vector{0.4, 0.4}, 0);
  CHECK(s[0] == Catch::Approx(s[1]).margin(1e-12));
}

TEST_CASE("saliency matches finite differences on the input") {
  Rng rng(55);
  nn::DenseNet actor = nn::make_dense_net({6, 5, 3}, 15);
  Vector state(6);
  for (double& v : state) v = rng.uniform(0.0, 1.0);
  const int action = 2;
  const double tau = 1.0;
  const auto s = input_saliency(actor, state, action, tau);

  auto log_pi = [&](const Vector& x) {
    return nn::log_softmax_temperature(nn::forward(actor, x).output,
                                       tau)[static_cast<std::size_t>(action)];
  };
  const double h = 1e-5;
  for (std::size_t i = 0; i < state.size(); ++i) {
    Vector up = state, down = state;
    up[i] += h;
    down[i] -= h;
    const double fd = std::abs((log_pi(up) - log_pi(down)) / (2 * h));
    CHECK(rel_error(s[i], fd) < 1e-4);
  }
}

TEST_CASE("greedy evaluation is deterministic") {
  Rng rng(56);
  const auto [job, rm] = generate_sample_specs(6, 2, rng);
  DrmConfig cfg;
  cfg.hidden = {12};
  cfg.seed = 21;
  DrmAgent agent(6, 2, cfg);
  for (int e = 0; e < 5; ++e) run_episode(job, rm, agent);  // a little training
  agent.set_mode(DrmAgent::Mode::greedy);
  const auto a = run_episode(job, rm, agent);
  const auto b = run_episode(job, rm, agent);
  CHECK(episode_record(a, 0, "drm", 0).dump() == episode_record(b, 0, "drm", 0).dump());
}

TEST_CASE("training updates losses and advances the episode index") {
  Rng rng(57);
  const auto [job, rm] = generate_sample_specs(5, 2, rng);
  DrmConfig cfg;
  cfg.hidden = {10};
  cfg.seed = 3;
  DrmAgent agent(5, 2, cfg);
  CHECK(agent.episode_index() == 0);
  const auto result = run_episode(job, rm, agent);
  CHECK_FALSE(result.terminated_by_timeout);
  CHECK(agent.episode_index() == 1);
  CHECK(std::isfinite(agent.last_update().loss_actor));
  CHECK(agent.last_update().loss_critic > 0.0);
}

TEST_CASE("agent checkpoints restore behaviour and serialize identically") {
  Rng rng(58);
  const auto [job, rm] = generate_sample_specs(5, 2, rng);
  DrmConfig cfg;
  cfg.hidden = {10};
  cfg.seed = 5;
  DrmAgent agent(5, 2, cfg);
  for (int e = 0; e < 3; ++e) run_episode(job, rm, agent);

  const auto ckpt = agent.checkpoint();
  auto restored = DrmAgent::from_checkpoint(nlohmann::json::parse(ckpt.dump()));
  CHECK(restored.checkpoint().dump() == ckpt.dump());

  agent.set_mode(DrmAgent::Mode::greedy);
  restored.set_mode(DrmAgent::Mode::greedy);
  const auto a = run_episode(job, rm, agent);
  const auto b = run_episode(job, rm, restored);
  CHECK(a == b);
}

TEST_CASE("agent rejects mismatched instance shapes") {
  DrmConfig cfg;
  cfg.hidden = {8};
  DrmAgent agent(4, 2, cfg);
  MetScheduler unused;
  (void)unused;
  CHECK_THROWS_AS(run_episode(fork_job(), fork_matrix(), agent), std::invalid_argument);
}
