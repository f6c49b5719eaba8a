#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <queue>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

namespace hetsched {

using TaskId = std::int32_t;
using PeId = std::int32_t;
using Tick = std::int64_t;  // all times are integer milliseconds

/// One task of a job: identity, dependency edges and timing metadata.
struct TaskSpec {
  std::string name;
  TaskId id = 0;
  std::set<TaskId> predecessors;
  bool is_head = false;
  bool is_tail = false;
  Tick earliest_start = 0;
  Tick deadline = 0;  // parsed and reported, never used for scheduling

  friend bool operator==(const TaskSpec&, const TaskSpec&) = default;
};

/// A DAG of tasks. Task ids are 0-based and unique; list order is free.
struct JobSpec {
  std::string name;
  std::vector<TaskSpec> tasks;

  friend bool operator==(const JobSpec&, const JobSpec&) = default;

  const TaskSpec* find(TaskId id) const {
    for (const auto& t : tasks)
      if (t.id == id) return &t;
    return nullptr;
  }
};

/// Per-PE execution times, keyed by task name. Total over the companion job.
struct ResourceMatrix {
  struct Resource {
    PeId id = 0;
    std::map<std::string, Tick> perf;  // task name -> execution time (ms)
    friend bool operator==(const Resource&, const Resource&) = default;
  };
  std::vector<Resource> resources;

  friend bool operator==(const ResourceMatrix&, const ResourceMatrix&) = default;

  int num_pes() const { return static_cast<int>(resources.size()); }

  /// Execution time of `task_name` on `pe`. Throws if unknown.
  Tick exec_time(const std::string& task_name, PeId pe) const {
    const auto& perf = resources.at(static_cast<std::size_t>(pe)).perf;
    auto it = perf.find(task_name);
    if (it == perf.end())
      throw std::out_of_range("resource matrix has no entry for task '" + task_name + "'");
    return it->second;
  }

  Tick max_exec_time() const {
    Tick m = 0;
    for (const auto& r : resources)
      for (const auto& [_, e] : r.perf) m = std::max(m, e);
    return m;
  }
};

/// One task's placement on a PE within an episode.
struct Assignment {
  TaskId task_id = 0;
  PeId pe_id = 0;
  Tick assign_tick = 0;  // scheduler decision
  Tick start_tick = 0;   // execution begins
  Tick finish_tick = 0;  // execution ends

  friend bool operator==(const Assignment&, const Assignment&) = default;
};

struct EpisodeResult {
  Tick makespan = 0;  // completion tick, or max_simulation_length on timeout
  std::vector<Assignment> schedule;
  int decision_count = 0;
  bool terminated_by_timeout = false;

  friend bool operator==(const EpisodeResult&, const EpisodeResult&) = default;
};

// ---------------------------------------------------------------------------
// Job validation

enum class ViolationKind {
  empty_job,
  duplicate_id,
  duplicate_name,
  bad_id,
  dangling_predecessor,
  self_predecessor,
  head_flag,
  tail_flag,
  missing_tail,
  bad_timing,
  cycle,
};

struct Violation {
  ViolationKind kind;
  TaskId task = -1;   // offending task id (or -1)
  TaskId other = -1;  // second party, e.g. the dangling predecessor id
  std::string message;
};

struct CycleError : std::runtime_error {
  explicit CycleError(TaskId member)
      : std::runtime_error("dependency cycle through task " + std::to_string(member)),
        cycle_member(member) {}
  TaskId cycle_member;
};

namespace detail {

inline Violation make_violation(ViolationKind kind, TaskId task, TaskId other, std::string msg) {
  return Violation{kind, task, other, std::move(msg)};
}

}  // namespace detail

/// Checks every JobSpec invariant and returns the violations found.
/// An empty result means the job is well-formed.
inline std::vector<Violation> validate_job(const JobSpec& job) {
  using detail::make_violation;
  std::vector<Violation> out;
  const auto n = static_cast<TaskId>(job.tasks.size());

  if (n == 0) {
    out.push_back(make_violation(ViolationKind::empty_job, -1, -1, "job has no tasks"));
    return out;
  }

  std::set<TaskId> ids;
  std::set<std::string> names;
  bool graph_ok = true;
  for (const auto& t : job.tasks) {
    if (t.id < 0 || t.id >= n) {
      out.push_back(make_violation(ViolationKind::bad_id, t.id, -1,
                                   "task id " + std::to_string(t.id) + " outside [0," +
                                       std::to_string(n) + ")"));
      graph_ok = false;
    } else if (!ids.insert(t.id).second) {
      out.push_back(make_violation(ViolationKind::duplicate_id, t.id, -1,
                                   "duplicate task id " + std::to_string(t.id)));
      graph_ok = false;
    }
    if (!names.insert(t.name).second)
      out.push_back(make_violation(ViolationKind::duplicate_name, t.id, -1,
                                   "duplicate task name '" + t.name + "'"));
    if (t.earliest_start < 0 || t.deadline < 0 || t.earliest_start > t.deadline)
      out.push_back(make_violation(ViolationKind::bad_timing, t.id, -1,
                                   "task " + std::to_string(t.id) +
                                       ": earliest start must lie in [0, deadline]"));
  }

  for (const auto& t : job.tasks) {
    for (TaskId p : t.predecessors) {
      if (p == t.id) {
        out.push_back(make_violation(ViolationKind::self_predecessor, t.id, p,
                                     "task " + std::to_string(t.id) + " depends on itself"));
        graph_ok = false;
      } else if (!ids.count(p)) {
        out.push_back(make_violation(ViolationKind::dangling_predecessor, t.id, p,
                                     "task " + std::to_string(t.id) +
                                         " names unknown predecessor " + std::to_string(p)));
        graph_ok = false;
      }
    }
    if (t.is_head != t.predecessors.empty())
      out.push_back(make_violation(ViolationKind::head_flag, t.id, -1,
                                   "task " + std::to_string(t.id) +
                                       ": HEAD flag must match an empty predecessor list"));
  }

  if (graph_ok) {
    std::set<TaskId> with_successors;
    for (const auto& t : job.tasks)
      for (TaskId p : t.predecessors) with_successors.insert(p);

    bool have_tail = false;
    for (const auto& t : job.tasks) {
      const bool sink = !with_successors.count(t.id);
      if (t.is_tail && !sink)
        out.push_back(make_violation(ViolationKind::tail_flag, t.id, -1,
                                     "task " + std::to_string(t.id) +
                                         " is flagged TAIL but has successors"));
      // A head that is also a sink counts as a tail: a one-task job carries
      // a single flag token, so its lone task is flagged HEAD.
      if (sink && (t.is_tail || t.is_head)) have_tail = true;
    }
    if (!have_tail)
      out.push_back(
          make_violation(ViolationKind::missing_tail, -1, -1, "no task is flagged TAIL"));

    // Kahn's algorithm; any node never released sits on a cycle.
    std::map<TaskId, int> indegree;
    std::map<TaskId, std::vector<TaskId>> successors;
    for (const auto& t : job.tasks) indegree[t.id] = static_cast<int>(t.predecessors.size());
    for (const auto& t : job.tasks)
      for (TaskId p : t.predecessors) successors[p].push_back(t.id);
    std::priority_queue<TaskId, std::vector<TaskId>, std::greater<>> ready;
    for (const auto& [id, deg] : indegree)
      if (deg == 0) ready.push(id);
    TaskId released = 0;
    while (!ready.empty()) {
      TaskId cur = ready.top();
      ready.pop();
      ++released;
      for (TaskId s : successors[cur])
        if (--indegree[s] == 0) ready.push(s);
    }
    if (released < n) {
      TaskId member = -1;
      for (const auto& [id, deg] : indegree)
        if (deg > 0) {
          member = id;
          break;
        }
      out.push_back(make_violation(ViolationKind::cycle, member, -1,
                                   "dependency cycle through task " + std::to_string(member)));
    }
  }

  return out;
}

/// Topological order of a valid job; ties broken by ascending task id.
/// Throws CycleError on a cycle, std::invalid_argument on a broken id space.
inline std::vector<TaskId> topological_order(const JobSpec& job) {
  const auto n = static_cast<TaskId>(job.tasks.size());
  std::set<TaskId> ids;
  for (const auto& t : job.tasks) {
    if (t.id < 0 || t.id >= n || !ids.insert(t.id).second)
      throw std::invalid_argument("topological_order: task ids must be unique in [0,N)");
  }
  std::vector<int> indegree(static_cast<std::size_t>(n), 0);
  std::vector<std::vector<TaskId>> successors(static_cast<std::size_t>(n));
  for (const auto& t : job.tasks) {
    for (TaskId p : t.predecessors) {
      if (p < 0 || p >= n || p == t.id)
        throw std::invalid_argument("topological_order: predecessor ids must name other tasks");
      successors[static_cast<std::size_t>(p)].push_back(t.id);
      ++indegree[static_cast<std::size_t>(t.id)];
    }
  }
  std::priority_queue<TaskId, std::vector<TaskId>, std::greater<>> ready;
  for (TaskId i = 0; i < n; ++i)
    if (indegree[static_cast<std::size_t>(i)] == 0) ready.push(i);
  std::vector<TaskId> order;
  order.reserve(static_cast<std::size_t>(n));
  while (!ready.empty()) {
    TaskId cur = ready.top();
    ready.pop();
    order.push_back(cur);
    for (TaskId s : successors[static_cast<std::size_t>(cur)])
      if (--indegree[static_cast<std::size_t>(s)] == 0) ready.push(s);
  }
  if (static_cast<TaskId>(order.size()) < n) {
    for (TaskId i = 0; i < n; ++i)
      if (indegree[static_cast<std::size_t>(i)] > 0) throw CycleError(i);
  }
  return order;
}

}  // namespace hetsched
