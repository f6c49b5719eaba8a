#pragma once

// Straight-line reference evaluator for forced task->PE assignments.
//
// Deliberately written as a 1 ms time-stepping list simulation with no event
// queue, so it shares no structure with the engine it cross-checks: per tick
// it retires finished tasks, queues newly eligible ones onto their forced PE
// in ascending id order, and starts the front of every idle PE's queue.

#include <vector>

#include "hetsched/model.hpp"

namespace test_oracle {

using namespace hetsched;

struct OracleRun {
  Tick makespan = 0;
  bool finished = false;
  std::vector<Tick> start;   // -1 when never started
  std::vector<Tick> finish;  // -1 when never finished
};

inline OracleRun evaluate_assignment(const JobSpec& job, const ResourceMatrix& rm,
                                     const std::vector<PeId>& assignment, Tick horizon) {
  const int n = static_cast<int>(job.tasks.size());
  const int pes = rm.num_pes();
  OracleRun run;
  run.start.assign(static_cast<std::size_t>(n), -1);
  run.finish.assign(static_cast<std::size_t>(n), -1);
  if (n == 0) {
    run.finished = true;
    return run;
  }

  std::vector<const TaskSpec*> task(static_cast<std::size_t>(n));
  for (const auto& t : job.tasks) task[static_cast<std::size_t>(t.id)] = &t;

  std::vector<bool> done(static_cast<std::size_t>(n), false);
  std::vector<bool> queued(static_cast<std::size_t>(n), false);
  std::vector<std::vector<TaskId>> queue(static_cast<std::size_t>(pes));
  std::vector<std::size_t> head(static_cast<std::size_t>(pes), 0);
  std::vector<TaskId> busy(static_cast<std::size_t>(pes), -1);
  std::vector<Tick> free_at(static_cast<std::size_t>(pes), 0);
  int remaining = n;

  for (Tick now = 0; now <= horizon; ++now) {
    for (int p = 0; p < pes; ++p) {
      if (busy[static_cast<std::size_t>(p)] >= 0 && free_at[static_cast<std::size_t>(p)] == now) {
        done[static_cast<std::size_t>(busy[static_cast<std::size_t>(p)])] = true;
        busy[static_cast<std::size_t>(p)] = -1;
        --remaining;
      }
    }
    if (remaining == 0) {
      run.finished = true;
      for (Tick f : run.finish) run.makespan = std::max(run.makespan, f);
      return run;
    }
    if (now == horizon) break;

    for (TaskId t = 0; t < n; ++t) {
      if (queued[static_cast<std::size_t>(t)]) continue;
      if (task[static_cast<std::size_t>(t)]->earliest_start > now) continue;
      bool eligible = true;
      for (TaskId p : task[static_cast<std::size_t>(t)]->predecessors)
        if (!done[static_cast<std::size_t>(p)]) eligible = false;
      if (eligible) {
        queue[static_cast<std::size_t>(assignment[static_cast<std::size_t>(t)])].push_back(t);
        queued[static_cast<std::size_t>(t)] = true;
      }
    }

    for (int p = 0; p < pes; ++p) {
      auto& h = head[static_cast<std::size_t>(p)];
      if (busy[static_cast<std::size_t>(p)] < 0 && h < queue[static_cast<std::size_t>(p)].size()) {
        const TaskId t = queue[static_cast<std::size_t>(p)][h++];
        busy[static_cast<std::size_t>(p)] = t;
        const Tick exec = rm.exec_time(task[static_cast<std::size_t>(t)]->name, p);
        run.start[static_cast<std::size_t>(t)] = now;
        run.finish[static_cast<std::size_t>(t)] = now + exec;
        free_at[static_cast<std::size_t>(p)] = now + exec;
      }
    }
  }
  run.makespan = horizon;
  return run;
}

/// Minimum makespan over every forced assignment vector (pes^n of them).
inline Tick brute_force_optimum(const JobSpec& job, const ResourceMatrix& rm, Tick horizon) {
  const int n = static_cast<int>(job.tasks.size());
  const int pes = rm.num_pes();
  std::vector<PeId> assignment(static_cast<std::size_t>(n), 0);
  Tick best = horizon;
  for (;;) {
    const auto run = evaluate_assignment(job, rm, assignment, horizon);
    if (run.finished) best = std::min(best, run.makespan);
    int i = 0;
    while (i < n) {
      if (++assignment[static_cast<std::size_t>(i)] < pes) break;
      assignment[static_cast<std::size_t>(i)] = 0;
      ++i;
    }
    if (i == n) break;
  }
  return best;
}

}  // namespace test_oracle
