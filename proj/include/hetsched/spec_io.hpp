#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "hetsched/model.hpp"

namespace hetsched {

// ---------------------------------------------------------------------------
// `job` file grammar (one directive per line, '#' comments, blank lines
// ignored, CRLF accepted):
//
//   job_name <name>
//   add_new_tasks <N>
//   <task_name> <task_id> <pred_id>* <HEAD|TAIL|BODY>     (N lines)
//   <task_name> <earliest_start_ms> <deadline_ms>          (N lines)
//
// `resource_matrix` file grammar:
//
//   add_new_resource <resource_id> <M>
//   <task_name> <performance_ms>                           (M lines)
//   ... repeated per resource
//
// Writers emit the canonical form: single-space separators, LF endings,
// tasks and resources in ascending id order, predecessors ascending.
// ---------------------------------------------------------------------------

enum class ParseErrorKind { syntax, duplicate, missing_field, range, inconsistent_count };

struct ParseError : std::runtime_error {
  ParseError(int line_, ParseErrorKind kind_, const std::string& msg)
      : std::runtime_error("line " + std::to_string(line_) + ": " + msg),
        line(line_),
        kind(kind_),
        message(msg) {}
  int line;
  ParseErrorKind kind;
  std::string message;
};

namespace io_detail {

struct Line {
  int number = 0;  // 1-based line number in the original text
  std::vector<std::string> tokens;
};

// Strips comments and blank lines; splits on whitespace.
inline std::vector<Line> tokenize(const std::string& text) {
  std::vector<Line> out;
  std::istringstream in(text);
  std::string raw;
  int number = 0;
  while (std::getline(in, raw)) {
    ++number;
    if (!raw.empty() && raw.back() == '\r') raw.pop_back();
    if (auto hash = raw.find('#'); hash != std::string::npos) raw.erase(hash);
    Line line{number, {}};
    std::istringstream ls(raw);
    std::string tok;
    while (ls >> tok) line.tokens.push_back(tok);
    if (!line.tokens.empty()) out.push_back(std::move(line));
  }
  return out;
}

inline std::int64_t parse_number(const Line& line, const std::string& tok, const char* what) {
  if (tok.empty() || tok.find_first_not_of("0123456789") != std::string::npos)
    throw ParseError(line.number, ParseErrorKind::syntax,
                     std::string("expected non-negative integer for ") + what + ", got '" + tok +
                         "'");
  try {
    return std::stoll(tok);
  } catch (const std::out_of_range&) {
    throw ParseError(line.number, ParseErrorKind::range,
                     std::string(what) + " value out of range: '" + tok + "'");
  }
}

inline ParseErrorKind kind_for(ViolationKind v) {
  switch (v) {
    case ViolationKind::duplicate_id:
    case ViolationKind::duplicate_name:
      return ParseErrorKind::duplicate;
    case ViolationKind::missing_tail:
    case ViolationKind::empty_job:
      return ParseErrorKind::missing_field;
    case ViolationKind::head_flag:
    case ViolationKind::tail_flag:
      return ParseErrorKind::syntax;
    default:
      return ParseErrorKind::range;  // dangling/self preds, bad ids, timing, cycles
  }
}

}  // namespace io_detail

/// Parses and validates a `job` file. Throws ParseError on any defect;
/// the parser rejects exactly what validate_job rejects.
inline JobSpec parse_job(const std::string& text) {
  using io_detail::parse_number;
  const auto lines = io_detail::tokenize(text);
  std::size_t at = 0;
  auto next_line = [&](const char* what) -> const io_detail::Line& {
    if (at >= lines.size())
      throw ParseError(lines.empty() ? 1 : lines.back().number, ParseErrorKind::missing_field,
                       std::string("unexpected end of file, expected ") + what);
    return lines[at++];
  };

  JobSpec job;
  {
    const auto& l = next_line("job_name directive");
    if (l.tokens[0] != "job_name" || l.tokens.size() != 2)
      throw ParseError(l.number, ParseErrorKind::syntax, "expected 'job_name <name>'");
    job.name = l.tokens[1];
  }
  std::int64_t n = 0;
  {
    const auto& l = next_line("add_new_tasks directive");
    if (l.tokens[0] != "add_new_tasks" || l.tokens.size() != 2)
      throw ParseError(l.number, ParseErrorKind::syntax, "expected 'add_new_tasks <N>'");
    n = parse_number(l, l.tokens[1], "task count");
    if (n < 1)
      throw ParseError(l.number, ParseErrorKind::range, "task count must be at least 1");
  }

  std::map<std::string, std::size_t> by_name;
  std::map<std::string, int> structure_line;
  for (std::int64_t i = 0; i < n; ++i) {
    if (at >= lines.size())
      throw ParseError(lines.back().number, ParseErrorKind::inconsistent_count,
                       "add_new_tasks promised " + std::to_string(n) +
                           " structure lines, found " + std::to_string(i));
    const auto& l = lines[at++];
    if (l.tokens.size() < 3)
      throw ParseError(l.number, ParseErrorKind::syntax,
                       "expected '<name> <id> <pred>* <HEAD|TAIL|BODY>'");
    TaskSpec t;
    t.name = l.tokens[0];
    t.id = static_cast<TaskId>(parse_number(l, l.tokens[1], "task id"));
    const std::string& flag = l.tokens.back();
    if (flag == "HEAD")
      t.is_head = true;
    else if (flag == "TAIL")
      t.is_tail = true;
    else if (flag != "BODY")
      throw ParseError(l.number, ParseErrorKind::syntax,
                       "structure line must end with HEAD, TAIL or BODY, got '" + flag + "'");
    for (std::size_t k = 2; k + 1 < l.tokens.size(); ++k)
      t.predecessors.insert(static_cast<TaskId>(parse_number(l, l.tokens[k], "predecessor id")));
    if (by_name.count(t.name))
      throw ParseError(l.number, ParseErrorKind::duplicate,
                       "duplicate task name '" + t.name + "'");
    by_name[t.name] = job.tasks.size();
    structure_line[t.name] = l.number;
    job.tasks.push_back(std::move(t));
  }

  std::set<std::string> timed;
  for (std::int64_t i = 0; i < n; ++i) {
    if (at >= lines.size())
      throw ParseError(lines.back().number, ParseErrorKind::inconsistent_count,
                       "expected " + std::to_string(n) + " timing lines, found " +
                           std::to_string(i));
    const auto& l = lines[at++];
    if (l.tokens.size() != 3)
      throw ParseError(l.number, ParseErrorKind::syntax,
                       "expected '<name> <earliest_start_ms> <deadline_ms>'");
    auto it = by_name.find(l.tokens[0]);
    if (it == by_name.end())
      throw ParseError(l.number, ParseErrorKind::range,
                       "timing line names unknown task '" + l.tokens[0] + "'");
    if (!timed.insert(l.tokens[0]).second)
      throw ParseError(l.number, ParseErrorKind::duplicate,
                       "duplicate timing line for task '" + l.tokens[0] + "'");
    auto& t = job.tasks[it->second];
    t.earliest_start = parse_number(l, l.tokens[1], "earliest start");
    t.deadline = parse_number(l, l.tokens[2], "deadline");
  }
  if (at != lines.size())
    throw ParseError(lines[at].number, ParseErrorKind::inconsistent_count,
                     "trailing content after " + std::to_string(n) + " timing lines");

  for (const auto& v : validate_job(job)) {
    int where = 1;
    if (v.task >= 0)
      if (const TaskSpec* t = job.find(v.task)) where = structure_line[t->name];
    throw ParseError(where, io_detail::kind_for(v.kind), v.message);
  }
  return job;
}

/// Parses a `resource_matrix` file against its companion job.
/// Every job task must be covered by every resource block.
inline ResourceMatrix parse_resource_matrix(const std::string& text, const JobSpec& job) {
  using io_detail::parse_number;
  std::set<std::string> job_names;
  for (const auto& t : job.tasks) job_names.insert(t.name);

  const auto lines = io_detail::tokenize(text);
  ResourceMatrix rm;
  std::set<PeId> seen_ids;
  std::size_t at = 0;
  while (at < lines.size()) {
    const auto& header = lines[at++];
    if (header.tokens[0] != "add_new_resource" || header.tokens.size() != 3)
      throw ParseError(header.number, ParseErrorKind::syntax,
                       "expected 'add_new_resource <resource_id> <task count>'");
    ResourceMatrix::Resource res;
    res.id = static_cast<PeId>(parse_number(header, header.tokens[1], "resource id"));
    if (!seen_ids.insert(res.id).second)
      throw ParseError(header.number, ParseErrorKind::duplicate,
                       "duplicate resource id " + std::to_string(res.id));
    const std::int64_t m = parse_number(header, header.tokens[2], "task count");
    for (std::int64_t i = 0; i < m; ++i) {
      if (at >= lines.size())
        throw ParseError(lines.back().number, ParseErrorKind::inconsistent_count,
                         "resource " + std::to_string(res.id) + " promised " +
                             std::to_string(m) + " task lines, found " + std::to_string(i));
      const auto& l = lines[at++];
      if (l.tokens.size() != 2 || l.tokens[0] == "add_new_resource")
        throw ParseError(l.number, ParseErrorKind::syntax,
                         "expected '<task_name> <performance_ms>'");
      if (!job_names.count(l.tokens[0]))
        throw ParseError(l.number, ParseErrorKind::range,
                         "unknown task '" + l.tokens[0] + "' for this job");
      if (res.perf.count(l.tokens[0]))
        throw ParseError(l.number, ParseErrorKind::duplicate,
                         "duplicate performance entry for task '" + l.tokens[0] + "'");
      const Tick exec = parse_number(l, l.tokens[1], "performance");
      if (exec < 1)
        throw ParseError(l.number, ParseErrorKind::range,
                         "execution time must be at least 1 ms");
      res.perf[l.tokens[0]] = exec;
    }
    for (const auto& name : job_names)
      if (!res.perf.count(name))
        throw ParseError(header.number, ParseErrorKind::missing_field,
                         "resource " + std::to_string(res.id) + " has no entry for task '" +
                             name + "'");
    rm.resources.push_back(std::move(res));
  }
  if (rm.resources.empty())
    throw ParseError(1, ParseErrorKind::missing_field, "no add_new_resource block found");

  std::sort(rm.resources.begin(), rm.resources.end(),
            [](const auto& a, const auto& b) { return a.id < b.id; });
  for (std::size_t i = 0; i < rm.resources.size(); ++i)
    if (rm.resources[i].id != static_cast<PeId>(i))
      throw ParseError(1, ParseErrorKind::range,
                       "resource ids must be 0-based and contiguous");
  return rm;
}

/// Canonical serialization; parse_job(write_job(j)) == j for valid jobs.
inline std::string write_job(const JobSpec& job) {
  std::vector<const TaskSpec*> by_id(job.tasks.size());
  for (const auto& t : job.tasks) by_id[static_cast<std::size_t>(t.id)] = &t;

  std::ostringstream out;
  out << "job_name " << job.name << "\n";
  out << "add_new_tasks " << job.tasks.size() << "\n";
  for (const TaskSpec* t : by_id) {
    out << t->name << " " << t->id;
    for (TaskId p : t->predecessors) out << " " << p;
    out << " " << (t->is_head ? "HEAD" : t->is_tail ? "TAIL" : "BODY") << "\n";
  }
  for (const TaskSpec* t : by_id)
    out << t->name << " " << t->earliest_start << " " << t->deadline << "\n";
  return out.str();
}

inline std::string write_resource_matrix(const ResourceMatrix& rm) {
  std::ostringstream out;
  for (const auto& res : rm.resources) {
    out << "add_new_resource " << res.id << " " << res.perf.size() << "\n";
    for (const auto& [name, exec] : res.perf) out << name << " " << exec << "\n";
  }
  return out.str();
}

}  // namespace hetsched
