// uavsim: scenario runner, metrics calculator, mission server and latency probe.

#include <csignal>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include "CLI11.hpp"

#include "interceptor/http.hpp"
#include "interceptor/metrics.hpp"
#include "interceptor/runner.hpp"
#include "interceptor/scenario.hpp"
#include "interceptor/server.hpp"

namespace {

using namespace interceptor;

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out << text;
}

HttpMissionServer* g_server = nullptr;

extern "C" void on_signal(int) {
  if (g_server) g_server->stop();
}

int cmd_run(const std::string& scenario_path, std::optional<std::uint64_t> seed, const std::string& out_path,
            const std::string& log_path) {
  Scenario scenario = load_scenario(scenario_path);
  if (seed) scenario.seed = *seed;
  const RunResult result = run(scenario);

  json out{{"scenario", to_json(scenario)},
           {"terminated_by", to_string(result.terminated_by)},
           {"report", to_json(result.report)}};
  if (result.abort_reason) out["error"] = *result.abort_reason;
  if (!log_path.empty()) write_file(log_path, to_jsonl(result.log));
  if (!out_path.empty()) {
    write_file(out_path, out.dump(2) + "\n");
  } else {
    std::cout << json{{"terminated_by", out["terminated_by"]}, {"report", out["report"]}}.dump(2) << "\n";
  }
  return result.terminated_by == Termination::Aborted ? 3 : 0;
}

int cmd_metrics(std::optional<std::int64_t> tp, std::optional<std::int64_t> fp, std::optional<std::int64_t> fn,
                const std::string& log_path) {
  if (!log_path.empty()) {
    const RunReport report = summarize_run(parse_jsonl(read_file(log_path)));
    std::cout << to_json(report).dump(2) << "\n";
    return 0;
  }
  if (!tp || !fp || !fn) throw std::runtime_error("metrics needs --tp, --fp and --fn, or --log");
  std::cout << to_json(confusion_metrics({*tp, *fp, *fn})).dump() << "\n";
  return 0;
}

int cmd_serve(int port, const std::string& targets_path) {
  std::vector<TargetAssignment> targets;
  if (!targets_path.empty()) targets = MissionServer::decode_targets(read_file(targets_path));
  MissionServer core(std::move(targets));
  HttpMissionServer server(core);
  const int bound = server.start(port);
  g_server = &server;
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  std::cerr << "mission server listening on 127.0.0.1:" << bound << "\n";
  server.wait();
  g_server = nullptr;
  return 0;
}

int cmd_latency(int port, std::size_t bytes, std::size_t count, const std::string& out_path) {
  const LatencyReport report = latency_harness(bytes, count, port);
  const std::string text = to_json(report).dump(2) + "\n";
  if (!out_path.empty()) write_file(out_path, text);
  std::cout << text;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Interceptor UAV mission simulator"};
  app.require_subcommand(1);

  auto* run_cmd = app.add_subcommand("run", "Run a scenario and report per-target outcomes");
  std::string scenario_path, out_path, log_path;
  std::optional<std::uint64_t> seed;
  run_cmd->add_option("--scenario", scenario_path, "Scenario JSON file")->required();
  run_cmd->add_option("--seed", seed, "Override the scenario seed");
  run_cmd->add_option("--out", out_path, "Write the result JSON here");
  run_cmd->add_option("--log", log_path, "Write the JSONL event log here");

  auto* metrics_cmd = app.add_subcommand("metrics", "Detection metrics from counts, or a run report from a log");
  std::optional<std::int64_t> tp, fp, fn;
  std::string metrics_log;
  metrics_cmd->add_option("--tp", tp, "True positives")->check(CLI::NonNegativeNumber);
  metrics_cmd->add_option("--fp", fp, "False positives")->check(CLI::NonNegativeNumber);
  metrics_cmd->add_option("--fn", fn, "False negatives")->check(CLI::NonNegativeNumber);
  metrics_cmd->add_option("--log", metrics_log, "JSONL event log to summarize");

  auto* serve_cmd = app.add_subcommand("serve", "Run the mission server on loopback HTTP");
  int serve_port = 8080;
  std::string targets_path;
  serve_cmd->add_option("--port", serve_port, "Port to listen on (0 picks one)");
  serve_cmd->add_option("--targets", targets_path, "JSON file {\"targets\": [...]} to seed the queue");

  auto* latency_cmd = app.add_subcommand("latency", "Measure telemetry round-trip latency against a server");
  int latency_port = 8080;
  std::size_t bytes = 500, count = 1000;
  std::string latency_out;
  latency_cmd->add_option("--port", latency_port, "Server port")->required();
  latency_cmd->add_option("--bytes", bytes, "Request body size in bytes");
  latency_cmd->add_option("--count", count, "Number of requests");
  latency_cmd->add_option("--out", latency_out, "Write the JSON report here");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run_cmd) return cmd_run(scenario_path, seed, out_path, log_path);
    if (*metrics_cmd) return cmd_metrics(tp, fp, fn, metrics_log);
    if (*serve_cmd) return cmd_serve(serve_port, targets_path);
    if (*latency_cmd) return cmd_latency(latency_port, bytes, count, latency_out);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
