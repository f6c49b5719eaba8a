#pragma once

#include <initializer_list>
#include <set>
#include <string>
#include <vector>

#include "hetsched/model.hpp"

namespace test_helpers {

using namespace hetsched;

inline TaskSpec task(TaskId id, std::set<TaskId> preds, bool head, bool tail, Tick es = 0,
                     Tick dl = 10000) {
  TaskSpec t;
  t.name = "T" + std::to_string(id);
  t.id = id;
  t.predecessors = std::move(preds);
  t.is_head = head;
  t.is_tail = tail;
  t.earliest_start = es;
  t.deadline = dl;
  return t;
}

inline JobSpec chain_job(int n) {
  JobSpec job;
  job.name = "chain";
  for (TaskId i = 0; i < n; ++i)
    job.tasks.push_back(task(i, i == 0 ? std::set<TaskId>{} : std::set<TaskId>{i - 1}, i == 0,
                             i == n - 1));
  return job;
}

inline ResourceMatrix matrix(const JobSpec& job, std::vector<std::vector<Tick>> exec_by_pe) {
  ResourceMatrix rm;
  for (std::size_t p = 0; p < exec_by_pe.size(); ++p) {
    ResourceMatrix::Resource res;
    res.id = static_cast<PeId>(p);
    for (std::size_t t = 0; t < job.tasks.size(); ++t)
      res.perf[job.tasks[t].name] = exec_by_pe[p][t];
    rm.resources.push_back(std::move(res));
  }
  return rm;
}

// The worked instance used across the simulator and heuristic tests:
// A(0) -> {B(1), C(2)}, exec PE0 {A:2,B:3,C:4}, PE1 {A:3,B:2,C:2}.
inline JobSpec fork_job() {
  JobSpec job;
  job.name = "fork";
  job.tasks.push_back(task(0, {}, true, false));
  job.tasks.push_back(task(1, {0}, false, true));
  job.tasks.push_back(task(2, {0}, false, true));
  return job;
}

inline ResourceMatrix fork_matrix() { return matrix(fork_job(), {{2, 3, 4}, {3, 2, 2}}); }

}  // namespace test_helpers
