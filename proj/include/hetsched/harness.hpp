#pragma once

#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <future>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "hetsched/charts.hpp"
#include "hetsched/drm.hpp"
#include "hetsched/heuristics.hpp"
#include "hetsched/model.hpp"
#include "hetsched/rng.hpp"
#include "hetsched/sim.hpp"
#include "hetsched/spec_io.hpp"

namespace hetsched {

// ---------------------------------------------------------------------------
// Spec generation and randomization

/// Random layered DAG with a single head task and TAIL-flagged sinks, plus a
/// total resource matrix with execution times uniform in [2,20] ms.
/// Byte-identical output for a fixed rng seed.
inline std::pair<JobSpec, ResourceMatrix> generate_sample_specs(int n_tasks, int n_pes,
                                                                Rng& rng) {
  if (n_tasks < 1 || n_pes < 1)
    throw std::invalid_argument("generate_sample_specs: need at least one task and one PE");

  JobSpec job;
  job.name = "job_gen";
  std::vector<int> layer_of(static_cast<std::size_t>(n_tasks), 0);
  int layers = 1;
  if (n_tasks > 1) {
    layers = std::min<int>(n_tasks, 2 + static_cast<int>(rng.uniform_int(0, 3)));
    for (int t = 1; t < layers; ++t) layer_of[static_cast<std::size_t>(t)] = t;
    for (int t = layers; t < n_tasks; ++t)
      layer_of[static_cast<std::size_t>(t)] = static_cast<int>(rng.uniform_int(1, layers - 1));
    std::sort(layer_of.begin(), layer_of.end());
  }

  std::vector<std::vector<TaskId>> by_layer(static_cast<std::size_t>(layers));
  for (TaskId t = 0; t < n_tasks; ++t)
    by_layer[static_cast<std::size_t>(layer_of[static_cast<std::size_t>(t)])].push_back(t);

  for (TaskId t = 0; t < n_tasks; ++t) {
    TaskSpec task;
    task.name = "T" + std::to_string(t);
    task.id = t;
    task.earliest_start = 0;
    task.deadline = 20 * n_tasks;
    const int layer = layer_of[static_cast<std::size_t>(t)];
    if (layer > 0) {
      const auto& prev = by_layer[static_cast<std::size_t>(layer - 1)];
      task.predecessors.insert(
          prev[static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(prev.size()) - 1))]);
      const int extra = static_cast<int>(rng.uniform_int(0, std::min(2, t - 1)));
      for (int k = 0; k < extra; ++k)
        task.predecessors.insert(static_cast<TaskId>(rng.uniform_int(0, t - 1)));
    }
    task.is_head = layer == 0;
    job.tasks.push_back(std::move(task));
  }
  std::set<TaskId> with_successors;
  for (const auto& t : job.tasks)
    for (TaskId p : t.predecessors) with_successors.insert(p);
  for (auto& t : job.tasks)
    if (!t.is_head && !with_successors.count(t.id)) t.is_tail = true;

  ResourceMatrix rm;
  for (PeId p = 0; p < n_pes; ++p) {
    ResourceMatrix::Resource res;
    res.id = p;
    for (const auto& t : job.tasks) res.perf[t.name] = rng.uniform_int(2, 20);
    rm.resources.push_back(std::move(res));
  }
  return {std::move(job), std::move(rm)};
}

/// Multiplicative jitter: every execution time e is redrawn uniformly from
/// [max(1, round(e*(1-fraction))), round(e*(1+fraction))].
inline ResourceMatrix randomize_resource_matrix(const ResourceMatrix& rm, double fraction,
                                                Rng& rng) {
  if (fraction < 0.0 || fraction >= 1.0)
    throw std::invalid_argument("randomize fraction must lie in [0,1)");
  ResourceMatrix out = rm;
  for (auto& res : out.resources) {
    for (auto& [name, exec] : res.perf) {
      const auto lo =
          std::max<Tick>(1, std::llround(static_cast<double>(exec) * (1.0 - fraction)));
      const auto hi = std::llround(static_cast<double>(exec) * (1.0 + fraction));
      exec = rng.uniform_int(lo, std::max<Tick>(lo, hi));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Experiment configuration (flat key=value text)

struct ExperimentConfig {
  std::vector<std::string> job_files;
  std::vector<std::string> rm_files;
  std::vector<std::string> schedulers;
  int episodes = 1;
  bool randomize = false;
  double randomize_fraction = 0.3;
  std::vector<std::uint64_t> seeds = {0};
  Tick max_simulation_length = kDefaultMaxSimulationLength;
  DrmConfig drm;
  std::string out_dir;
  int curve_window = 20;
  int threads = 0;  // 0 = one thread per (seed, scheduler) cell up to hardware

  void validate() const {
    if (episodes < 1) throw std::invalid_argument("episodes must be at least 1");
    if (seeds.empty()) throw std::invalid_argument("at least one seed is required");
    if (schedulers.empty()) throw std::invalid_argument("at least one scheduler is required");
    if (randomize_fraction < 0.0 || randomize_fraction >= 1.0)
      throw std::invalid_argument("randomize_fraction must lie in [0,1)");
    for (const auto& s : schedulers)
      if (s != "met" && s != "eft" && s != "etf" && s != "drm")
        throw std::invalid_argument("unknown scheduler '" + s + "'");
    drm.validate();
  }
};

namespace harness_detail {

inline std::vector<std::string> split_list(const std::string& value) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(value);
  while (std::getline(in, item, ',')) {
    const auto a = item.find_first_not_of(" \t");
    const auto b = item.find_last_not_of(" \t");
    if (a != std::string::npos) out.push_back(item.substr(a, b - a + 1));
  }
  return out;
}

inline bool parse_bool(const std::string& v, int line) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ParseError(line, ParseErrorKind::syntax, "expected true/false, got '" + v + "'");
}

}  // namespace harness_detail

/// Parses the `hetsched run` config: one `key = value` per line, `#`
/// comments, lists comma-separated, drm.* keys nested into DrmConfig.
inline ExperimentConfig parse_experiment_config(const std::string& text) {
  using harness_detail::parse_bool;
  using harness_detail::split_list;
  ExperimentConfig cfg;
  std::istringstream in(text);
  std::string raw;
  int line = 0;
  while (std::getline(in, raw)) {
    ++line;
    if (!raw.empty() && raw.back() == '\r') raw.pop_back();
    if (auto hash = raw.find('#'); hash != std::string::npos) raw.erase(hash);
    const auto eq = raw.find('=');
    if (raw.find_first_not_of(" \t") == std::string::npos) continue;
    if (eq == std::string::npos)
      throw ParseError(line, ParseErrorKind::syntax, "expected 'key = value'");
    auto trim = [](std::string s) {
      const auto a = s.find_first_not_of(" \t");
      const auto b = s.find_last_not_of(" \t");
      return a == std::string::npos ? std::string{} : s.substr(a, b - a + 1);
    };
    const std::string key = trim(raw.substr(0, eq));
    const std::string value = trim(raw.substr(eq + 1));
    try {
      if (key == "job_files")
        cfg.job_files = split_list(value);
      else if (key == "rm_files")
        cfg.rm_files = split_list(value);
      else if (key == "schedulers")
        cfg.schedulers = split_list(value);
      else if (key == "episodes")
        cfg.episodes = std::stoi(value);
      else if (key == "randomize")
        cfg.randomize = parse_bool(value, line);
      else if (key == "randomize_fraction")
        cfg.randomize_fraction = std::stod(value);
      else if (key == "seeds") {
        cfg.seeds.clear();
        for (const auto& s : split_list(value)) cfg.seeds.push_back(std::stoull(s));
      } else if (key == "max_simulation_length")
        cfg.max_simulation_length = std::stoll(value);
      else if (key == "out_dir")
        cfg.out_dir = value;
      else if (key == "curve_window")
        cfg.curve_window = std::stoi(value);
      else if (key == "threads")
        cfg.threads = std::stoi(value);
      else if (key == "drm.gamma")
        cfg.drm.gamma = std::stod(value);
      else if (key == "drm.tau0")
        cfg.drm.tau0 = std::stod(value);
      else if (key == "drm.tau_min")
        cfg.drm.tau_min = std::stod(value);
      else if (key == "drm.tau_decay")
        cfg.drm.tau_decay = std::stod(value);
      else if (key == "drm.lr_actor")
        cfg.drm.lr_actor = std::stod(value);
      else if (key == "drm.lr_critic")
        cfg.drm.lr_critic = std::stod(value);
      else if (key == "drm.standardize_advantage")
        cfg.drm.standardize_advantage = parse_bool(value, line);
      else if (key == "drm.optimizer")
        cfg.drm.optimizer = value;
      else if (key == "drm.hidden") {
        cfg.drm.hidden.clear();
        for (const auto& s : split_list(value)) cfg.drm.hidden.push_back(std::stoi(s));
      } else
        throw ParseError(line, ParseErrorKind::syntax, "unknown config key '" + key + "'");
    } catch (const std::invalid_argument&) {
      throw ParseError(line, ParseErrorKind::range, "bad value for '" + key + "': " + value);
    } catch (const std::out_of_range&) {
      throw ParseError(line, ParseErrorKind::range, "value out of range for '" + key + "'");
    }
  }
  return cfg;
}

// ---------------------------------------------------------------------------
// Experiment runner

struct MetricsRow {
  std::uint64_t seed = 0;
  std::string scheduler;
  int episode = 0;
  Tick makespan_ms = 0;
  bool timeout = false;
  // DRM-only fields
  std::optional<double> temperature;
  std::optional<double> loss_actor;
  std::optional<double> loss_critic;
};

struct CellOutcome {
  std::uint64_t seed = 0;
  std::string scheduler;
  bool failed = false;
  std::string error;
  EpisodeResult final_result;
  std::optional<Tick> greedy_makespan;  // DRM: greedy evaluation after training
  nlohmann::json drm_checkpoint;        // DRM: trained parameters
};

struct ExperimentOutcome {
  std::vector<MetricsRow> rows;  // seed-major, then scheduler, then episode
  std::vector<CellOutcome> cells;
};

inline std::unique_ptr<Scheduler> make_scheduler(const std::string& name, int num_tasks,
                                                 int num_pes, const DrmConfig& drm_cfg) {
  if (name == "met") return std::make_unique<MetScheduler>();
  if (name == "eft") return std::make_unique<EftScheduler>();
  if (name == "etf") return std::make_unique<EtfScheduler>();
  if (name == "drm") return std::make_unique<DrmAgent>(num_tasks, num_pes, drm_cfg);
  throw std::invalid_argument("unknown scheduler '" + name + "'");
}

/// Runs every (seed, scheduler) cell of the experiment over in-memory specs.
/// Cells are independent; a failing cell is reported and the rest proceed.
/// Episode e uses job e % |jobs|, its paired (or broadcast) matrix, and,
/// when randomization is on, jitter drawn from a per-(seed, episode) stream
/// so every scheduler sees identical inputs.
inline ExperimentOutcome run_experiment(const ExperimentConfig& cfg,
                                        const std::vector<JobSpec>& jobs,
                                        const std::vector<ResourceMatrix>& rms) {
  cfg.validate();
  if (jobs.empty() || rms.empty())
    throw std::invalid_argument("run_experiment: at least one job and matrix required");
  if (rms.size() != jobs.size() && rms.size() != 1)
    throw std::invalid_argument(
        "run_experiment: matrix list must match the job list or have length 1");

  auto run_cell = [&cfg, &jobs, &rms](std::uint64_t seed,
                                      const std::string& sched_name) -> std::pair<std::vector<MetricsRow>, CellOutcome> {
    std::vector<MetricsRow> rows;
    CellOutcome cell;
    cell.seed = seed;
    cell.scheduler = sched_name;
    try {
      DrmConfig drm_cfg = cfg.drm;
      drm_cfg.seed = seed;
      const auto& first_job = jobs.front();
      auto scheduler = make_scheduler(sched_name, static_cast<int>(first_job.tasks.size()),
                                      rms.front().num_pes(), drm_cfg);
      auto* drm = dynamic_cast<DrmAgent*>(scheduler.get());

      for (int e = 0; e < cfg.episodes; ++e) {
        const auto& job = jobs[static_cast<std::size_t>(e) % jobs.size()];
        const auto& base_rm =
            rms.size() == 1 ? rms.front() : rms[static_cast<std::size_t>(e) % rms.size()];
        ResourceMatrix rm = base_rm;
        if (cfg.randomize) {
          Rng jitter(mix_seed(seed, static_cast<std::uint64_t>(e)));
          rm = randomize_resource_matrix(base_rm, cfg.randomize_fraction, jitter);
        }
        const EpisodeResult result =
            run_episode(job, rm, *scheduler, cfg.max_simulation_length);

        MetricsRow row;
        row.seed = seed;
        row.scheduler = sched_name;
        row.episode = e;
        row.makespan_ms = elapsed_ticks(result);
        row.timeout = result.terminated_by_timeout;
        if (drm) {
          row.temperature = temperature(e, drm_cfg);
          row.loss_actor = drm->last_update().loss_actor;
          row.loss_critic = drm->last_update().loss_critic;
        }
        rows.push_back(std::move(row));
        if (e + 1 == cfg.episodes) cell.final_result = result;
      }

      if (drm) {
        cell.drm_checkpoint = drm->checkpoint();
        drm->set_mode(DrmAgent::Mode::greedy);
        cell.greedy_makespan = elapsed_ticks(
            run_episode(jobs.front(), rms.front(), *drm, cfg.max_simulation_length));
      }
    } catch (const std::exception& ex) {
      cell.failed = true;
      cell.error = ex.what();
    }
    return {std::move(rows), std::move(cell)};
  };

  std::vector<std::pair<std::uint64_t, std::string>> cells;
  for (std::uint64_t seed : cfg.seeds)
    for (const auto& sched : cfg.schedulers) cells.emplace_back(seed, sched);

  ExperimentOutcome outcome;
  const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  const unsigned workers =
      cfg.threads > 0 ? static_cast<unsigned>(cfg.threads) : std::min<unsigned>(hw, 16);
  if (workers <= 1 || cells.size() <= 1) {
    for (const auto& [seed, sched] : cells) {
      auto [rows, cell] = run_cell(seed, sched);
      outcome.rows.insert(outcome.rows.end(), rows.begin(), rows.end());
      outcome.cells.push_back(std::move(cell));
    }
  } else {
    std::vector<std::future<std::pair<std::vector<MetricsRow>, CellOutcome>>> futures;
    futures.reserve(cells.size());
    for (const auto& [seed, sched] : cells)
      futures.push_back(std::async(std::launch::async, run_cell, seed, sched));
    for (auto& f : futures) {
      auto [rows, cell] = f.get();
      outcome.rows.insert(outcome.rows.end(), rows.begin(), rows.end());
      outcome.cells.push_back(std::move(cell));
    }
  }
  return outcome;
}

/// File-based entry point: parses the configured job/matrix files first.
inline ExperimentOutcome run_experiment(const ExperimentConfig& cfg) {
  auto slurp = [](const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
  };
  if (cfg.job_files.empty() || cfg.rm_files.empty())
    throw std::invalid_argument("config must name job_files and rm_files");
  std::vector<JobSpec> jobs;
  for (const auto& f : cfg.job_files) jobs.push_back(parse_job(slurp(f)));
  std::vector<ResourceMatrix> rms;
  for (std::size_t i = 0; i < cfg.rm_files.size(); ++i)
    rms.push_back(parse_resource_matrix(slurp(cfg.rm_files[i]),
                                        jobs[std::min(i, jobs.size() - 1)]));
  return run_experiment(cfg, jobs, rms);
}

// ---------------------------------------------------------------------------
// Metrics and artifact files

inline nlohmann::json metrics_row_json(const MetricsRow& r) {
  nlohmann::json j{{"seed", r.seed},
                   {"scheduler", r.scheduler},
                   {"episode", r.episode},
                   {"makespan_ms", r.makespan_ms},
                   {"timeout", r.timeout}};
  if (r.temperature) j["temperature"] = *r.temperature;
  if (r.loss_actor) j["loss_actor"] = *r.loss_actor;
  if (r.loss_critic) j["loss_critic"] = *r.loss_critic;
  return j;
}

inline MetricsRow metrics_row_from_json(const nlohmann::json& j) {
  MetricsRow r;
  r.seed = j.at("seed").get<std::uint64_t>();
  r.scheduler = j.at("scheduler").get<std::string>();
  r.episode = j.at("episode").get<int>();
  r.makespan_ms = j.at("makespan_ms").get<Tick>();
  r.timeout = j.at("timeout").get<bool>();
  if (j.contains("temperature")) r.temperature = j["temperature"].get<double>();
  if (j.contains("loss_actor")) r.loss_actor = j["loss_actor"].get<double>();
  if (j.contains("loss_critic")) r.loss_critic = j["loss_critic"].get<double>();
  return r;
}

inline std::string metrics_to_jsonl(const std::vector<MetricsRow>& rows) {
  std::string out;
  for (const auto& r : rows) out += metrics_row_json(r).dump() + "\n";
  return out;
}

inline std::string metrics_to_csv(const std::vector<MetricsRow>& rows) {
  std::ostringstream out;
  out << "seed,scheduler,episode,makespan_ms,timeout,temperature,loss_actor,loss_critic\n";
  for (const auto& r : rows) {
    out << r.seed << "," << r.scheduler << "," << r.episode << "," << r.makespan_ms << ","
        << (r.timeout ? 1 : 0) << ",";
    if (r.temperature) out << chart_detail::fmt(*r.temperature);
    out << ",";
    if (r.loss_actor) out << chart_detail::fmt(*r.loss_actor);
    out << ",";
    if (r.loss_critic) out << chart_detail::fmt(*r.loss_critic);
    out << "\n";
  }
  return out.str();
}

inline double mean_of(const std::vector<Tick>& xs, std::size_t from = 0) {
  if (from >= xs.size()) return 0.0;
  double acc = 0.0;
  for (std::size_t i = from; i < xs.size(); ++i) acc += static_cast<double>(xs[i]);
  return acc / static_cast<double>(xs.size() - from);
}

/// Per-cell summary: mean, min, and mean over the final `window` episodes.
inline nlohmann::json summarize(const ExperimentOutcome& outcome, int window = 50) {
  nlohmann::json cells = nlohmann::json::array();
  for (const auto& cell : outcome.cells) {
    std::vector<Tick> series;
    for (const auto& r : outcome.rows)
      if (r.seed == cell.seed && r.scheduler == cell.scheduler)
        series.push_back(r.makespan_ms);
    nlohmann::json j{{"seed", cell.seed},
                     {"scheduler", cell.scheduler},
                     {"episodes", series.size()},
                     {"failed", cell.failed}};
    if (cell.failed) {
      j["error"] = cell.error;
    } else if (!series.empty()) {
      j["mean_makespan_ms"] = mean_of(series);
      j["min_makespan_ms"] = *std::min_element(series.begin(), series.end());
      const std::size_t from =
          series.size() > static_cast<std::size_t>(window) ? series.size() - window : 0;
      j["last_" + std::to_string(window) + "_mean_ms"] = mean_of(series, from);
      if (cell.greedy_makespan) j["greedy_makespan_ms"] = *cell.greedy_makespan;
    }
    cells.push_back(std::move(j));
  }
  return nlohmann::json{{"cells", cells}};
}

/// Writes metrics.jsonl/.csv, summary.json, curve.svg, per-cell final
/// episode records and DRM checkpoints under cfg.out_dir.
inline void write_experiment_artifacts(const ExperimentConfig& cfg,
                                       const ExperimentOutcome& outcome) {
  namespace fs = std::filesystem;
  if (cfg.out_dir.empty()) return;
  const fs::path out(cfg.out_dir);
  fs::create_directories(out / "results");
  fs::create_directories(out / "checkpoints");

  auto spit = [](const fs::path& p, const std::string& content) {
    std::ofstream f(p, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write '" + p.string() + "'");
    f << content;
  };

  spit(out / "metrics.jsonl", metrics_to_jsonl(outcome.rows));
  spit(out / "metrics.csv", metrics_to_csv(outcome.rows));
  spit(out / "summary.json", summarize(outcome).dump(2) + "\n");

  std::map<std::string, std::map<int, std::pair<double, int>>> acc;
  for (const auto& r : outcome.rows) {
    auto& [sum, count] = acc[r.scheduler][r.episode];
    sum += static_cast<double>(r.makespan_ms);
    ++count;
  }
  std::map<std::string, std::vector<double>> series;
  for (const auto& [sched, by_ep] : acc)
    for (const auto& [_, sc] : by_ep) series[sched].push_back(sc.first / sc.second);
  spit(out / "curve.svg", curve_svg(series, cfg.curve_window));

  for (const auto& cell : outcome.cells) {
    if (cell.failed) continue;
    const std::string stem = cell.scheduler + "_seed" + std::to_string(cell.seed);
    int episode = cfg.episodes - 1;
    spit(out / "results" / (stem + ".json"),
         episode_record(cell.final_result, episode, cell.scheduler, cell.seed).dump() + "\n");
    if (!cell.drm_checkpoint.is_null())
      spit(out / "checkpoints" / (stem + ".json"), cell.drm_checkpoint.dump() + "\n");
  }
}

}  // namespace hetsched
