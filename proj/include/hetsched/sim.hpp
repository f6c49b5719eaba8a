#pragma once

#include <deque>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "hetsched/model.hpp"

namespace hetsched {

/// Execution times indexed by (task id, pe id). Built once per episode.
class ExecTable {
 public:
  ExecTable() = default;
  ExecTable(const JobSpec& job, const ResourceMatrix& rm)
      : num_pes_(rm.num_pes()), exec_(job.tasks.size() * rm.resources.size()) {
    for (const auto& t : job.tasks)
      for (PeId p = 0; p < num_pes_; ++p)
        exec_[static_cast<std::size_t>(t.id) * static_cast<std::size_t>(num_pes_) +
              static_cast<std::size_t>(p)] = rm.exec_time(t.name, p);
  }

  Tick operator()(TaskId task, PeId pe) const {
    return exec_[static_cast<std::size_t>(task) * static_cast<std::size_t>(num_pes_) +
                 static_cast<std::size_t>(pe)];
  }

  int num_pes() const { return num_pes_; }
  int num_tasks() const { return num_pes_ ? static_cast<int>(exec_.size()) / num_pes_ : 0; }

 private:
  int num_pes_ = 0;
  std::vector<Tick> exec_;
};

/// Full simulator state, visible to schedulers at every decision.
/// {outstanding, ready, running, completed, queued} partition the task ids.
struct SimState {
  Tick now = 0;
  std::set<TaskId> outstanding;
  std::vector<TaskId> ready;  // ascending id within each promotion batch
  std::set<TaskId> running;
  std::set<TaskId> completed;
  std::vector<std::deque<TaskId>> pe_queues;  // assigned but not started
  std::vector<Tick> pe_busy_until;
  std::vector<Assignment> schedule;

  // bookkeeping beyond the list machine
  std::vector<PeId> assigned_pe;   // -1 until a decision is made
  std::vector<Tick> assign_tick;   // valid once assigned
  std::vector<TaskId> pe_current;  // running task per PE, -1 when idle

  int num_pes() const { return static_cast<int>(pe_queues.size()); }
};

struct SchedulerDecision {
  TaskId task_id = -1;
  PeId pe_id = -1;
};

struct SimError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Decision-point policy. The engine calls decide() once per ready task;
/// the chosen task must currently be in state.ready.
class Scheduler {
 public:
  virtual ~Scheduler() = default;
  virtual std::string name() const = 0;
  virtual void begin_episode(const JobSpec&, const ResourceMatrix&) {}
  virtual SchedulerDecision decide(const SimState& state, const JobSpec& job,
                                   const ResourceMatrix& rm) = 0;
  virtual void end_episode(const EpisodeResult&) {}
};

constexpr Tick kDefaultMaxSimulationLength = 5000;

using SimObserver = std::function<void(const SimState&)>;

/// Runs one scheduling episode to completion or to the simulation horizon.
///
/// Event loop per tick: finished tasks move to completed; eligible
/// outstanding tasks (all predecessors completed, earliest start reached)
/// move to ready in ascending id order; the scheduler assigns every ready
/// task to a PE queue; idle PEs start their front task; time jumps to the
/// next finish or pending earliest-start tick. Fully deterministic for a
/// deterministic scheduler.
inline EpisodeResult run_episode(const JobSpec& job, const ResourceMatrix& rm,
                                 Scheduler& scheduler,
                                 Tick max_simulation_length = kDefaultMaxSimulationLength,
                                 const SimObserver& observer = {}) {
  const auto n = static_cast<TaskId>(job.tasks.size());
  if (n == 0) return EpisodeResult{};

  if (auto violations = validate_job(job); !violations.empty())
    throw std::invalid_argument("run_episode: invalid job: " + violations.front().message);
  const int num_pes = rm.num_pes();
  if (num_pes == 0) throw std::invalid_argument("run_episode: resource matrix has no PEs");
  const ExecTable exec(job, rm);

  std::vector<Tick> earliest(static_cast<std::size_t>(n));
  std::vector<std::set<TaskId>> preds(static_cast<std::size_t>(n));
  for (const auto& t : job.tasks) {
    earliest[static_cast<std::size_t>(t.id)] = t.earliest_start;
    preds[static_cast<std::size_t>(t.id)] = t.predecessors;
  }

  SimState st;
  st.pe_queues.resize(static_cast<std::size_t>(num_pes));
  st.pe_busy_until.assign(static_cast<std::size_t>(num_pes), 0);
  st.pe_current.assign(static_cast<std::size_t>(num_pes), -1);
  st.assigned_pe.assign(static_cast<std::size_t>(n), -1);
  st.assign_tick.assign(static_cast<std::size_t>(n), 0);
  for (TaskId i = 0; i < n; ++i) st.outstanding.insert(i);

  scheduler.begin_episode(job, rm);
  int decisions = 0;

  auto finish = [&](bool timeout) {
    EpisodeResult r;
    r.terminated_by_timeout = timeout;
    r.schedule = st.schedule;
    r.decision_count = decisions;
    if (timeout) {
      r.makespan = max_simulation_length;
    } else {
      for (const auto& a : st.schedule) r.makespan = std::max(r.makespan, a.finish_tick);
    }
    scheduler.end_episode(r);
    return r;
  };

  for (;;) {
    // completions at the current tick
    for (PeId p = 0; p < num_pes; ++p) {
      if (st.pe_current[static_cast<std::size_t>(p)] >= 0 &&
          st.pe_busy_until[static_cast<std::size_t>(p)] == st.now) {
        TaskId done = st.pe_current[static_cast<std::size_t>(p)];
        st.running.erase(done);
        st.completed.insert(done);
        st.pe_current[static_cast<std::size_t>(p)] = -1;
      }
    }
    if (static_cast<TaskId>(st.completed.size()) == n) return finish(false);
    if (st.now >= max_simulation_length) return finish(true);

    // promote eligible tasks; std::set iteration gives ascending id order
    for (auto it = st.outstanding.begin(); it != st.outstanding.end();) {
      TaskId id = *it;
      const auto& pre = preds[static_cast<std::size_t>(id)];
      bool deps_done = std::all_of(pre.begin(), pre.end(),
                                   [&](TaskId p) { return st.completed.count(p) > 0; });
      if (deps_done && st.now >= earliest[static_cast<std::size_t>(id)]) {
        st.ready.push_back(id);
        it = st.outstanding.erase(it);
      } else {
        ++it;
      }
    }

    // decision phase: one decision per ready task
    while (!st.ready.empty()) {
      SchedulerDecision d = scheduler.decide(st, job, rm);
      auto pos = std::find(st.ready.begin(), st.ready.end(), d.task_id);
      if (pos == st.ready.end())
        throw SimError("scheduler chose task " + std::to_string(d.task_id) +
                       " which is not in the ready list at tick " + std::to_string(st.now));
      if (d.pe_id < 0 || d.pe_id >= num_pes)
        throw SimError("scheduler assigned task " + std::to_string(d.task_id) +
                       " to out-of-range PE " + std::to_string(d.pe_id) + " at tick " +
                       std::to_string(st.now));
      st.ready.erase(pos);
      st.pe_queues[static_cast<std::size_t>(d.pe_id)].push_back(d.task_id);
      st.assigned_pe[static_cast<std::size_t>(d.task_id)] = d.pe_id;
      st.assign_tick[static_cast<std::size_t>(d.task_id)] = st.now;
      ++decisions;
    }

    // start phase: idle PEs pull their front task
    for (PeId p = 0; p < num_pes; ++p) {
      auto& queue = st.pe_queues[static_cast<std::size_t>(p)];
      if (st.pe_current[static_cast<std::size_t>(p)] < 0 && !queue.empty()) {
        TaskId t = queue.front();
        queue.pop_front();
        const Tick start = st.now;
        const Tick end = start + exec(t, p);
        st.running.insert(t);
        st.pe_current[static_cast<std::size_t>(p)] = t;
        st.pe_busy_until[static_cast<std::size_t>(p)] = end;
        st.schedule.push_back(
            Assignment{t, p, st.assign_tick[static_cast<std::size_t>(t)], start, end});
      }
    }

    if (observer) observer(st);

    // advance to the next finish or pending earliest-start tick
    Tick next = std::numeric_limits<Tick>::max();
    for (PeId p = 0; p < num_pes; ++p)
      if (st.pe_current[static_cast<std::size_t>(p)] >= 0)
        next = std::min(next, st.pe_busy_until[static_cast<std::size_t>(p)]);
    for (TaskId id : st.outstanding) {
      const auto& pre = preds[static_cast<std::size_t>(id)];
      bool deps_done = std::all_of(pre.begin(), pre.end(),
                                   [&](TaskId p) { return st.completed.count(p) > 0; });
      if (deps_done) next = std::min(next, earliest[static_cast<std::size_t>(id)]);
    }
    if (next == std::numeric_limits<Tick>::max())
      throw SimError("simulation stalled at tick " + std::to_string(st.now) +
                     " with incomplete tasks");
    st.now = std::min(next, max_simulation_length);
  }
}

/// The execution-time metric: completion tick, or the horizon on timeout.
inline Tick elapsed_ticks(const EpisodeResult& result) { return result.makespan; }

// ---------------------------------------------------------------------------
// JSON-lines record, one per episode

inline nlohmann::json episode_record(const EpisodeResult& result, int episode,
                                     const std::string& scheduler, std::uint64_t seed) {
  nlohmann::json schedule = nlohmann::json::array();
  for (const auto& a : result.schedule)
    schedule.push_back({{"task", a.task_id},
                        {"pe", a.pe_id},
                        {"assign", a.assign_tick},
                        {"start", a.start_tick},
                        {"finish", a.finish_tick}});
  return nlohmann::json{{"episode", episode},
                        {"scheduler", scheduler},
                        {"seed", seed},
                        {"makespan", result.makespan},
                        {"timeout", result.terminated_by_timeout},
                        {"decisions", result.decision_count},
                        {"schedule", schedule}};
}

inline EpisodeResult episode_result_from_record(const nlohmann::json& record) {
  EpisodeResult r;
  r.makespan = record.at("makespan").get<Tick>();
  r.terminated_by_timeout = record.at("timeout").get<bool>();
  r.decision_count = record.at("decisions").get<int>();
  for (const auto& a : record.at("schedule")) {
    r.schedule.push_back(Assignment{a.at("task").get<TaskId>(), a.at("pe").get<PeId>(),
                                    a.at("assign").get<Tick>(), a.at("start").get<Tick>(),
                                    a.at("finish").get<Tick>()});
  }
  return r;
}

}  // namespace hetsched
