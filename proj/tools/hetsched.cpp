// hetsched: generate scheduling specs, run experiments, and render charts.
//
// Exit codes: 0 on success, 1 on configuration/usage errors, 2 on runtime
// failures.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "hetsched/hetsched.hpp"

namespace fs = std::filesystem;
using namespace hetsched;

namespace {

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void spit(const std::string& path, const std::string& content) {
  if (const fs::path parent = fs::path(path).parent_path(); !parent.empty())
    fs::create_directories(parent);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out << content;
}

int cmd_gen(int tasks, int pes, std::uint64_t seed, const std::string& out_dir) {
  Rng rng(seed);
  const auto [job, rm] = generate_sample_specs(tasks, pes, rng);
  fs::create_directories(out_dir);
  const auto job_path = (fs::path(out_dir) / "job.txt").string();
  const auto rm_path = (fs::path(out_dir) / "resource_matrix.txt").string();
  spit(job_path, write_job(job));
  spit(rm_path, write_resource_matrix(rm));
  std::cout << "wrote " << job_path << " (" << tasks << " tasks)\n";
  std::cout << "wrote " << rm_path << " (" << pes << " PEs)\n";
  return 0;
}

int cmd_run(const std::string& config_path) {
  ExperimentConfig cfg;
  try {
    cfg = parse_experiment_config(slurp(config_path));
    cfg.validate();
    if (cfg.job_files.empty() || cfg.rm_files.empty())
      throw std::invalid_argument("config must set job_files and rm_files");
  } catch (const std::exception& ex) {
    std::cerr << "config error: " << ex.what() << "\n";
    return 1;
  }

  const auto outcome = run_experiment(cfg);
  if (!cfg.out_dir.empty()) write_experiment_artifacts(cfg, outcome);

  const auto summary = summarize(outcome);
  for (const auto& cell : summary.at("cells")) {
    std::cout << cell.at("scheduler").get<std::string>() << " seed "
              << cell.at("seed").get<std::uint64_t>();
    if (cell.at("failed").get<bool>()) {
      std::cout << "  FAILED: " << cell.at("error").get<std::string>() << "\n";
      continue;
    }
    std::cout << "  mean " << cell.at("mean_makespan_ms").get<double>() << " ms, min "
              << cell.at("min_makespan_ms").get<Tick>() << " ms, last-50 mean "
              << cell.at("last_50_mean_ms").get<double>() << " ms";
    if (cell.contains("greedy_makespan_ms"))
      std::cout << ", greedy " << cell.at("greedy_makespan_ms").get<Tick>() << " ms";
    std::cout << "\n";
  }
  if (!cfg.out_dir.empty()) std::cout << "artifacts in " << cfg.out_dir << "\n";

  const bool all_failed = std::all_of(outcome.cells.begin(), outcome.cells.end(),
                                      [](const CellOutcome& c) { return c.failed; });
  return all_failed && !outcome.cells.empty() ? 2 : 0;
}

int cmd_compare(const std::string& metrics_path, const std::string& out_path, int window) {
  std::istringstream in(slurp(metrics_path));
  std::map<std::string, std::map<int, std::pair<double, int>>> acc;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto row = metrics_row_from_json(nlohmann::json::parse(line));
    auto& [sum, count] = acc[row.scheduler][row.episode];
    sum += static_cast<double>(row.makespan_ms);
    ++count;
  }
  if (acc.empty()) throw std::runtime_error("no metrics rows in '" + metrics_path + "'");
  std::map<std::string, std::vector<double>> series;
  for (const auto& [sched, by_ep] : acc)
    for (const auto& [_, sc] : by_ep) series[sched].push_back(sc.first / sc.second);
  spit(out_path, curve_svg(series, window));
  std::cout << "wrote " << out_path << "\n";
  return 0;
}

int cmd_gantt(const std::string& result_path, const std::string& format,
              const std::string& out_path) {
  std::istringstream in(slurp(result_path));
  std::string line;
  if (!std::getline(in, line) || line.empty())
    throw std::runtime_error("no episode record in '" + result_path + "'");
  const auto result = episode_result_from_record(nlohmann::json::parse(line));
  const std::string doc = format == "svg" ? gantt_svg(result) : gantt_text(result);
  if (out_path.empty()) {
    std::cout << doc;
  } else {
    spit(out_path, doc);
    std::cout << "wrote " << out_path << "\n";
  }
  return 0;
}

int cmd_saliency(const std::string& ckpt_path, const std::string& job_path,
                 const std::string& rm_path, const std::string& out_svg,
                 const std::string& out_csv) {
  auto agent = DrmAgent::from_checkpoint(nlohmann::json::parse(slurp(ckpt_path)));
  const auto job = parse_job(slurp(job_path));
  const auto rm = parse_resource_matrix(slurp(rm_path), job);
  if (static_cast<int>(job.tasks.size()) != agent.layout().num_tasks ||
      rm.num_pes() != agent.layout().num_pes)
    throw std::runtime_error("checkpoint shape does not match the job/resource files");

  // saliency of the greedy action in the initial decision state
  SimState st;
  const int n = static_cast<int>(job.tasks.size());
  st.pe_queues.resize(static_cast<std::size_t>(rm.num_pes()));
  st.pe_busy_until.assign(static_cast<std::size_t>(rm.num_pes()), 0);
  st.pe_current.assign(static_cast<std::size_t>(rm.num_pes()), -1);
  st.assigned_pe.assign(static_cast<std::size_t>(n), -1);
  st.assign_tick.assign(static_cast<std::size_t>(n), 0);
  for (const auto& t : job.tasks) {
    if (t.predecessors.empty() && t.earliest_start == 0)
      st.ready.push_back(t.id);
    else
      st.outstanding.insert(t.id);
  }
  if (st.ready.empty()) throw std::runtime_error("no task is ready at tick 0");

  const auto state = encode_state(st, job, rm, st.ready.front());
  const int action = greedy_action(agent.actor(), state);
  const auto saliency = input_saliency(agent.actor(), state, action);

  std::cout << "focus task T" << st.ready.front() << ", greedy action PE" << action << "\n";
  if (!out_svg.empty()) {
    spit(out_svg, saliency_svg(saliency, agent.layout()));
    std::cout << "wrote " << out_svg << "\n";
  }
  if (!out_csv.empty()) {
    spit(out_csv, saliency_csv(saliency, agent.layout()));
    std::cout << "wrote " << out_csv << "\n";
  }
  if (out_svg.empty() && out_csv.empty()) std::cout << saliency_csv(saliency, agent.layout());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"heterogeneous SoC scheduling workbench"};
  app.require_subcommand(1);

  int tasks = 10, pes = 3;
  std::uint64_t seed = 0;
  std::string out_dir = ".";
  auto* gen = app.add_subcommand("gen", "generate a sample job and resource matrix");
  gen->add_option("--tasks", tasks, "number of tasks")->check(CLI::PositiveNumber);
  gen->add_option("--pes", pes, "number of processing elements")->check(CLI::PositiveNumber);
  gen->add_option("--seed", seed, "generator seed");
  gen->add_option("--out", out_dir, "output directory");

  std::string config_path;
  auto* run = app.add_subcommand("run", "run a scheduling experiment from a config file");
  run->add_option("--config", config_path, "key=value experiment config")->required();

  std::string metrics_path, chart_out = "chart.svg";
  int window = 20;
  auto* compare = app.add_subcommand("compare", "plot makespan curves from metrics.jsonl");
  compare->add_option("--metrics", metrics_path, "metrics.jsonl path")->required();
  compare->add_option("--out", chart_out, "output SVG path");
  compare->add_option("--window", window, "rolling mean window");

  std::string result_path, gantt_format = "text", gantt_out;
  auto* gantt = app.add_subcommand("gantt", "render an episode record as a GANTT chart");
  gantt->add_option("--result", result_path, "episode record JSON path")->required();
  gantt->add_option("--format", gantt_format, "text or svg")
      ->check(CLI::IsMember({"text", "svg"}));
  gantt->add_option("--out", gantt_out, "output path (stdout when omitted)");

  std::string ckpt_path, job_path, rm_path, sal_svg, sal_csv;
  auto* saliency = app.add_subcommand("saliency", "input-gradient saliency of a checkpoint");
  saliency->add_option("--checkpoint", ckpt_path, "DRM checkpoint JSON")->required();
  saliency->add_option("--job", job_path, "job file")->required();
  saliency->add_option("--rm", rm_path, "resource matrix file")->required();
  saliency->add_option("--out", sal_svg, "output SVG path");
  saliency->add_option("--csv", sal_csv, "output CSV path");

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) return cmd_gen(tasks, pes, seed, out_dir);
    if (run->parsed()) return cmd_run(config_path);
    if (compare->parsed()) return cmd_compare(metrics_path, chart_out, window);
    if (gantt->parsed()) return cmd_gantt(result_path, gantt_format, gantt_out);
    if (saliency->parsed()) return cmd_saliency(ckpt_path, job_path, rm_path, sal_svg, sal_csv);
  } catch (const ParseError& ex) {
    std::cerr << "error: " << ex.what() << "\n";
    return 1;
  } catch (const std::exception& ex) {
    std::cerr << "error: " << ex.what() << "\n";
    return 2;
  }
  return 1;
}
