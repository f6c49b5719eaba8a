#pragma once

#include <span>
#include <string>
#include <vector>

#include "hetsched/model.hpp"
#include "hetsched/sim.hpp"

namespace hetsched {

/// Per-PE load snapshot at a decision point. busy_until is clamped to `now`;
/// queued_work sums the execution times of tasks already queued on the PE.
struct PeView {
  std::vector<Tick> busy_until;
  std::vector<Tick> queued_work;

  int num_pes() const { return static_cast<int>(busy_until.size()); }
};

inline PeView make_pe_view(const SimState& state, const ExecTable& exec) {
  PeView view;
  const int pes = state.num_pes();
  view.busy_until.resize(static_cast<std::size_t>(pes));
  view.queued_work.assign(static_cast<std::size_t>(pes), 0);
  for (PeId p = 0; p < pes; ++p) {
    view.busy_until[static_cast<std::size_t>(p)] =
        std::max(state.now, state.pe_busy_until[static_cast<std::size_t>(p)]);
    for (TaskId t : state.pe_queues[static_cast<std::size_t>(p)])
      view.queued_work[static_cast<std::size_t>(p)] += exec(t, p);
  }
  return view;
}

inline Tick estimated_finish(const PeView& view, Tick now, PeId pe, Tick exec_time) {
  const auto i = static_cast<std::size_t>(pe);
  return std::max(now, view.busy_until[i]) + view.queued_work[i] + exec_time;
}

/// Minimum Execution Time: argmin of the task's execution times, load-blind.
/// Ties break to the lowest PE id.
inline PeId met_decide(std::span<const Tick> exec_row) {
  PeId best = 0;
  for (PeId p = 1; p < static_cast<PeId>(exec_row.size()); ++p)
    if (exec_row[static_cast<std::size_t>(p)] < exec_row[static_cast<std::size_t>(best)])
      best = p;
  return best;
}

inline PeId met_decide(TaskId task, const ExecTable& exec) {
  std::vector<Tick> row(static_cast<std::size_t>(exec.num_pes()));
  for (PeId p = 0; p < exec.num_pes(); ++p) row[static_cast<std::size_t>(p)] = exec(task, p);
  return met_decide(row);
}

/// Earliest Finish Time, first come first served: argmin over PEs of
/// max(now, busy_until) + queued_work + exec. Ties break to the lowest PE id.
inline PeId eft_decide(std::span<const Tick> exec_row, const PeView& view, Tick now) {
  PeId best = 0;
  Tick best_finish = estimated_finish(view, now, 0, exec_row[0]);
  for (PeId p = 1; p < static_cast<PeId>(exec_row.size()); ++p) {
    const Tick f = estimated_finish(view, now, p, exec_row[static_cast<std::size_t>(p)]);
    if (f < best_finish) {
      best = p;
      best_finish = f;
    }
  }
  return best;
}

inline PeId eft_decide(TaskId task, const PeView& view, const ExecTable& exec, Tick now) {
  std::vector<Tick> row(static_cast<std::size_t>(exec.num_pes()));
  for (PeId p = 0; p < exec.num_pes(); ++p) row[static_cast<std::size_t>(p)] = exec(task, p);
  return eft_decide(row, view, now);
}

/// Earliest Task First: repeatedly pick the (task, pe) pair with minimal
/// estimated finish over all remaining ready tasks, updating the view after
/// each pick. Ties break to the lower task id, then the lower PE id.
inline std::vector<SchedulerDecision> etf_decide_batch(std::span<const TaskId> ready,
                                                       PeView view, const ExecTable& exec,
                                                       Tick now) {
  std::vector<TaskId> remaining(ready.begin(), ready.end());
  std::vector<SchedulerDecision> out;
  out.reserve(remaining.size());
  while (!remaining.empty()) {
    TaskId best_task = remaining.front();
    PeId best_pe = 0;
    Tick best_finish = std::numeric_limits<Tick>::max();
    for (TaskId t : remaining) {
      for (PeId p = 0; p < static_cast<PeId>(view.num_pes()); ++p) {
        const Tick f = estimated_finish(view, now, p, exec(t, p));
        if (f < best_finish || (f == best_finish && (t < best_task ||
                                                     (t == best_task && p < best_pe)))) {
          best_task = t;
          best_pe = p;
          best_finish = f;
        }
      }
    }
    out.push_back(SchedulerDecision{best_task, best_pe});
    view.queued_work[static_cast<std::size_t>(best_pe)] += exec(best_task, best_pe);
    remaining.erase(std::find(remaining.begin(), remaining.end(), best_task));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Scheduler adapters

class MetScheduler : public Scheduler {
 public:
  std::string name() const override { return "met"; }
  void begin_episode(const JobSpec& job, const ResourceMatrix& rm) override {
    exec_ = ExecTable(job, rm);
  }
  SchedulerDecision decide(const SimState& state, const JobSpec&,
                           const ResourceMatrix&) override {
    const TaskId task = state.ready.front();
    return {task, met_decide(task, exec_)};
  }

 private:
  ExecTable exec_;
};

class EftScheduler : public Scheduler {
 public:
  std::string name() const override { return "eft"; }
  void begin_episode(const JobSpec& job, const ResourceMatrix& rm) override {
    exec_ = ExecTable(job, rm);
  }
  SchedulerDecision decide(const SimState& state, const JobSpec&,
                           const ResourceMatrix&) override {
    const TaskId task = state.ready.front();
    return {task, eft_decide(task, make_pe_view(state, exec_), exec_, state.now)};
  }

 private:
  ExecTable exec_;
};

class EtfScheduler : public Scheduler {
 public:
  std::string name() const override { return "etf"; }
  void begin_episode(const JobSpec& job, const ResourceMatrix& rm) override {
    exec_ = ExecTable(job, rm);
  }
  // The engine applies each decision before asking again, so the queue-aware
  // view already reflects earlier picks at the same tick; emitting the first
  // element of the batch each time reproduces the iterative pair selection.
  SchedulerDecision decide(const SimState& state, const JobSpec&,
                           const ResourceMatrix&) override {
    return etf_decide_batch(state.ready, make_pe_view(state, exec_), exec_, state.now).front();
  }

 private:
  ExecTable exec_;
};

/// Replays a fixed task -> PE map. Used by the brute-force harness.
class ForcedAssignmentScheduler : public Scheduler {
 public:
  explicit ForcedAssignmentScheduler(std::vector<PeId> assignment)
      : assignment_(std::move(assignment)) {}
  std::string name() const override { return "forced"; }
  SchedulerDecision decide(const SimState& state, const JobSpec&,
                           const ResourceMatrix&) override {
    const TaskId task = state.ready.front();
    return {task, assignment_.at(static_cast<std::size_t>(task))};
  }

 private:
  std::vector<PeId> assignment_;
};

}  // namespace hetsched
