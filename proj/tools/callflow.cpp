// callflow — plan checker, graph inspector, runner, sweeper, and trace replayer.
//
// Exit codes: 0 success, 1 run/recovery failure, 2 usage or compile error.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "callflow/callseq.hpp"
#include "callflow/corpus.hpp"
#include "callflow/manifest.hpp"
#include "callflow/planner.hpp"
#include "callflow/recovery.hpp"
#include "callflow/relation.hpp"
#include "callflow/simlab.hpp"
#include "callflow/trace.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

namespace {

// Input problems (bad flags, unreadable files, compile errors) exit with 2;
// failures of a well-formed run exit with 1.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct RunFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UsageError("cannot open '" + path + "' for reading.");
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void emit(const std::string& text, const std::string& out_path) {
  if (out_path.empty()) {
    std::cout << text;
    return;
  }
  std::ofstream out(out_path, std::ios::binary);
  if (!out) throw UsageError("cannot open '" + out_path + "' for writing.");
  out << text;
}

std::string render_error(const std::string& path, const callflow::CompileError& e) {
  std::ostringstream os;
  os << path << ":" << e.line << ":" << e.col << ": " << e.message;
  return os.str();
}

// Loads a plan plus its manifest. The manifest comes from --manifest when
// given, otherwise from a sibling `<stem>.manifest.json` if one exists,
// otherwise it is empty (then only `self` calls validate).
struct LoadedPlan {
  callflow::CallSequence seq;
  callflow::ToolManifest manifest;
  callflow::RelationGraph graph;
};

LoadedPlan load_plan(const std::string& plan_path, std::string manifest_path) {
  const std::string text = read_file(plan_path);
  auto parsed = callflow::parse_sequence(text);
  if (!parsed.ok()) throw UsageError(render_error(plan_path, *parsed.error));

  callflow::ToolManifest manifest;
  if (manifest_path.empty()) {
    fs::path sibling = fs::path(plan_path);
    sibling.replace_extension(".manifest.json");
    if (fs::exists(sibling)) manifest_path = sibling.string();
  }
  if (!manifest_path.empty()) manifest = callflow::load_manifest(manifest_path);
  manifest.ensure_self();

  if (auto bad = callflow::validate_against_registry(*parsed.sequence, manifest))
    throw UsageError(render_error(plan_path, *bad));

  LoadedPlan out;
  out.seq = *parsed.sequence;
  out.manifest = std::move(manifest);
  out.graph = callflow::build_frg(out.seq, out.manifest, callflow::MutexModel::Simplified);
  return out;
}

// --- run configuration ----------------------------------------------------

struct CliOverrides {
  std::string strategy, clock, planner;
  std::optional<int> processors;
  std::optional<std::uint64_t> seed;
  bool strict_alg2 = false, spread_io = false;
};

struct LoadedConfig {
  callflow::RunConfig run;
  std::string plan_path, manifest_path;
  std::string planner_kind;  // "", "mock", or "http"
  std::string planner_book;  // entries file for the mock planner
};

std::string resolve_rel(const fs::path& base_dir, const std::string& p) {
  if (p.empty()) return p;
  fs::path q(p);
  return q.is_absolute() ? q.string() : (base_dir / q).string();
}

LoadedConfig load_config(const std::string& config_path, const CliOverrides& ov) {
  json j;
  try {
    j = json::parse(read_file(config_path));
  } catch (const json::exception& e) {
    throw UsageError("config '" + config_path + "' is not valid JSON: " + e.what());
  }
  if (!j.is_object()) throw UsageError("config '" + config_path + "' must be a JSON object.");
  const fs::path base_dir = fs::path(config_path).parent_path();

  LoadedConfig out;
  try {
    out.plan_path = resolve_rel(base_dir, j.value("plan_path", ""));
    out.manifest_path = resolve_rel(base_dir, j.value("manifest_path", ""));
    if (j.contains("strategy"))
      out.run.strategy = callflow::strategy_from_string(j.at("strategy").get<std::string>());
    out.run.processors = j.value("processors", out.run.processors);
    out.run.seed = j.value("seed", out.run.seed);
    if (j.value("clock", "virtual") == std::string("real"))
      out.run.clock = callflow::ClockMode::Real;
    out.run.strict_release = j.value("strict_release", false);
    out.run.spread_io = j.value("spread_io", false);
    out.run.io_capacity = j.value("io_capacity", out.run.io_capacity);
    out.run.sequential_step_overhead =
        j.value("sequential_step_overhead", out.run.sequential_step_overhead);
    if (j.contains("recovery")) {
      const auto& r = j.at("recovery");
      out.run.recovery.enabled = r.value("enabled", true);
      out.run.recovery.max_attempts = r.value("max_attempts", out.run.recovery.max_attempts);
    }
    if (j.contains("fault_injections")) {
      for (const auto& [id, f] : j.at("fault_injections").items()) {
        callflow::FaultDirective d;
        d.fail_times = f.value("fail_times", 1);
        d.kind = f.value("kind", d.kind);
        d.message = f.value("message", "injected failure in " + id);
        out.run.fault_injections[id] = d;
      }
    }
    out.run.query = j.value("query", "");
    if (j.contains("few_shots_path"))
      out.run.few_shots =
          read_file(resolve_rel(base_dir, j.at("few_shots_path").get<std::string>()));
    else
      out.run.few_shots = j.value("few_shots", "");
    out.planner_kind = j.value("planner", "");
    out.planner_book = resolve_rel(base_dir, j.value("planner_book", ""));
  } catch (const json::exception& e) {
    throw UsageError("config '" + config_path + "' is malformed: " + e.what());
  } catch (const std::invalid_argument& e) {
    throw UsageError("config '" + config_path + "' is malformed: " + e.what());
  }

  if (!ov.strategy.empty()) out.run.strategy = callflow::strategy_from_string(ov.strategy);
  if (ov.processors) out.run.processors = *ov.processors;
  if (ov.seed) out.run.seed = *ov.seed;
  if (!ov.clock.empty())
    out.run.clock =
        ov.clock == "real" ? callflow::ClockMode::Real : callflow::ClockMode::Virtual;
  if (ov.strict_alg2) out.run.strict_release = true;
  if (ov.spread_io) out.run.spread_io = true;
  if (!ov.planner.empty()) out.planner_kind = ov.planner;
  return out;
}

std::unique_ptr<callflow::Planner> make_planner(const LoadedConfig& cfg) {
  if (cfg.planner_kind.empty()) return nullptr;
  if (cfg.planner_kind == "mock") {
    if (cfg.planner_book.empty())
      throw UsageError("the mock planner needs a 'planner_book' path in the config.");
    return std::make_unique<callflow::MockPlanner>(
        callflow::MockPlanner::from_file(cfg.planner_book));
  }
  if (cfg.planner_kind == "http")
    return std::make_unique<callflow::HttpPlanner>(callflow::HttpPlanner::from_env());
  throw UsageError("unknown planner kind '" + cfg.planner_kind + "' (expected mock or http).");
}

// --- subcommand bodies ------------------------------------------------------

std::string plural(std::size_t n, const char* one, const char* many) {
  return std::to_string(n) + " " + (n == 1 ? one : many);
}

int cmd_check(const std::string& plan_path, const std::string& manifest_path, bool as_json,
              const std::string& out_path) {
  LoadedPlan p = load_plan(plan_path, manifest_path);
  if (as_json) {
    ordered_json j;
    j["calls"] = p.graph.nodes.size();
    j["data_edges"] = p.graph.data_edges.size();
    j["mutex_pairs"] = p.graph.mutex_pairs.size();
    j["max_rank"] = p.graph.max_rank();
    emit(j.dump(2) + "\n", out_path);
  } else {
    emit(plural(p.graph.nodes.size(), "call", "calls") + ", " +
             plural(p.graph.data_edges.size(), "data edge", "data edges") + ", " +
             plural(p.graph.mutex_pairs.size(), "mutex pair", "mutex pairs") + "\n",
         out_path);
  }
  return 0;
}

int cmd_graph(const std::string& plan_path, const std::string& manifest_path, bool as_json,
              const std::string& out_path) {
  LoadedPlan p = load_plan(plan_path, manifest_path);
  if (as_json) {
    emit(callflow::graph_to_json(p.graph), out_path);
    return 0;
  }
  std::ostringstream os;
  for (const auto& n : p.graph.nodes) {
    os << n.id << ": " << n.function << " [" << callflow::to_string(n.kind) << " "
       << callflow::to_string(n.mode) << "] rank " << n.rank;
    const auto succ = p.graph.successors(n.id);
    if (!succ.empty()) {
      os << " ->";
      for (const auto& s : succ) os << " " << s;
    }
    os << "\n";
  }
  for (const auto& m : p.graph.mutex_pairs) os << "mutex: {" << m.a << ", " << m.b << "}\n";
  emit(os.str(), out_path);
  return 0;
}

int cmd_run(const LoadedConfig& cfg, bool as_json, const std::string& out_path,
            const std::string& trace_out) {
  if (cfg.plan_path.empty()) throw UsageError("the run config needs a 'plan_path'.");
  LoadedPlan p = load_plan(cfg.plan_path, cfg.manifest_path);
  auto planner = make_planner(cfg);
  callflow::RunOutcome outcome = callflow::run_plan(p.graph, p.manifest, cfg.run, planner.get());
  if (!trace_out.empty()) emit(outcome.trace.to_ndjson(), trace_out);
  emit(as_json ? callflow::report_to_json(outcome.report)
               : callflow::report_to_text(outcome.report),
       out_path);
  if (!outcome.report.succeeded)
    throw RunFailure("run failed: " + outcome.report.failure);
  return 0;
}

std::vector<int> parse_proc_range(const std::string& text) {
  const auto dots = text.find("..");
  try {
    if (dots == std::string::npos) {
      const int only = std::stoi(text);
      if (only < 1) throw UsageError("processor counts must be >= 1.");
      return {only};
    }
    const int lo = std::stoi(text.substr(0, dots));
    const int hi = std::stoi(text.substr(dots + 2));
    if (lo < 1 || hi < lo)
      throw UsageError("processor range '" + text + "' must satisfy 1 <= a <= b.");
    std::vector<int> out;
    for (int p = lo; p <= hi; ++p) out.push_back(p);
    return out;
  } catch (const std::invalid_argument&) {
    throw UsageError("cannot parse processor range '" + text + "' (expected a..b).");
  } catch (const std::out_of_range&) {
    throw UsageError("cannot parse processor range '" + text + "' (expected a..b).");
  }
}

int cmd_sweep(const LoadedConfig& cfg, const std::string& procs, bool as_json,
              const std::string& out_path) {
  if (cfg.plan_path.empty()) throw UsageError("the sweep config needs a 'plan_path'.");
  LoadedPlan p = load_plan(cfg.plan_path, cfg.manifest_path);
  const auto counts = parse_proc_range(procs);
  auto result = callflow::scaling_sweep(p.graph, p.manifest, cfg.run, counts);
  emit(as_json ? callflow::sweep_to_json(result) : callflow::sweep_to_text(result), out_path);
  return 0;
}

int cmd_replay(const std::string& trace_path, bool as_json, const std::string& out_path) {
  std::vector<callflow::TraceEvent> events;
  try {
    events = callflow::TraceLog::parse_ndjson(read_file(trace_path));
  } catch (const callflow::TraceError& e) {
    throw UsageError(trace_path + ": " + e.what());
  }
  const callflow::RunReport report = callflow::report_from_trace(events);
  emit(as_json ? callflow::report_to_json(report) : callflow::report_to_text(report), out_path);
  return 0;
}

// Walks the whole pipeline on one config: translate (or load) a plan, repair
// compile errors through the planner, then run with runtime recovery enabled.
int cmd_recover_demo(const LoadedConfig& cfg, bool as_json, const std::string& out_path) {
  auto planner = make_planner(cfg);
  std::ostringstream story;
  ordered_json jout;

  std::string text;
  if (!cfg.plan_path.empty()) {
    text = read_file(cfg.plan_path);
    story << "plan loaded from " << cfg.plan_path << "\n";
  } else {
    if (!planner) throw UsageError("recover-demo needs either a 'plan_path' or a planner.");
    text = planner->translate(cfg.run.query, cfg.run.few_shots, 0.2).text;
    story << "plan translated from the query (" << planner->calls_made() << " planner call"
          << (planner->calls_made() == 1 ? "" : "s") << " so far)\n";
  }

  auto parsed = callflow::parse_sequence(text);
  callflow::CallSequence seq;
  if (parsed.ok()) {
    seq = *parsed.sequence;
    story << "plan compiled cleanly\n";
    jout["compile"] = {{"repaired", false}, {"planner_calls", 0}};
  } else {
    if (!planner)
      throw UsageError(render_error(cfg.plan_path.empty() ? "<translated>" : cfg.plan_path,
                                    *parsed.error));
    auto fixed = callflow::compile_time_recover(cfg.run.query, text, *parsed.error, *planner,
                                                cfg.run.few_shots);
    if (!fixed.ok()) throw RunFailure(fixed.fatal);
    seq = *fixed.sequence;
    story << "compile error (" << parsed.error->message << ") repaired after "
          << fixed.planner_calls << " planner call" << (fixed.planner_calls == 1 ? "" : "s")
          << "\n";
    jout["compile"] = {{"repaired", true}, {"planner_calls", fixed.planner_calls}};
  }

  callflow::ToolManifest manifest;
  if (!cfg.manifest_path.empty()) manifest = callflow::load_manifest(cfg.manifest_path);
  manifest.ensure_self();
  if (auto bad = callflow::validate_against_registry(seq, manifest))
    throw UsageError(render_error("<plan>", *bad));

  auto graph = callflow::build_frg(seq, manifest, callflow::MutexModel::Simplified);
  callflow::RunConfig run_cfg = cfg.run;
  run_cfg.strategy = callflow::Strategy::Coordinated;
  run_cfg.recovery.enabled = true;
  auto outcome = callflow::run_plan(graph, manifest, run_cfg, planner.get());

  story << outcome.report.recovery.errors_fixed << "/" << outcome.report.recovery.errors_raised
        << " runtime faults repaired in " << outcome.report.recovery.attempts << " attempt"
        << (outcome.report.recovery.attempts == 1 ? "" : "s") << "\n";
  if (planner)
    story << "planner usage: " << planner->calls_made() << " calls, tokens in="
          << planner->total_tokens().input << " out=" << planner->total_tokens().output << "\n";

  if (as_json) {
    jout["report"] = json::parse(callflow::report_to_json(outcome.report));
    if (planner) {
      jout["planner"] = {{"calls", planner->calls_made()},
                         {"tokens",
                          {{"input", planner->total_tokens().input},
                           {"output", planner->total_tokens().output}}}};
    }
    emit(jout.dump(2) + "\n", out_path);
  } else {
    emit(story.str() + callflow::report_to_text(outcome.report), out_path);
  }
  if (!outcome.report.succeeded)
    throw RunFailure("run failed: " + outcome.report.failure);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Parallel function-call orchestration: compile plans, map their relations, and "
               "run them over a processor pool"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "callflow 0.1.0");

  std::string plan_path, manifest_path, config_path, trace_path;
  std::string out_path, trace_out, procs_range = "1..8";
  bool as_json = false;
  CliOverrides ov;

  auto add_output_flags = [&](CLI::App* cmd) {
    cmd->add_flag("--json", as_json, "emit machine-readable JSON instead of text");
    cmd->add_option("--out", out_path, "write output to this path instead of stdout");
  };
  auto add_run_flags = [&](CLI::App* cmd) {
    cmd->add_option("--strategy", ov.strategy, "sequential | direct | coordinated")
        ->check(CLI::IsMember({"sequential", "seq", "direct", "direct_parallel", "coordinated",
                               "coord"}));
    cmd->add_option("--seed", ov.seed, "PRNG seed for durations, results, and dispatch");
    cmd->add_option("--clock", ov.clock, "virtual (deterministic) or real (wall time)")
        ->check(CLI::IsMember({"virtual", "real"}));
    cmd->add_flag("--strict-alg2", ov.strict_alg2,
                  "release dependents on rank adjacency instead of full in-degree");
    cmd->add_flag("--spread-io", ov.spread_io,
                  "scatter a batch's inout calls across spare processors");
    cmd->add_option("--planner", ov.planner, "mock | http")
        ->check(CLI::IsMember({"mock", "http"}));
  };

  auto* check = app.add_subcommand("check", "compile a plan and print its relation summary");
  check->add_option("plan", plan_path, "plan file")->required();
  check->add_option("--manifest", manifest_path, "tool manifest (default: sibling file)");
  add_output_flags(check);

  auto* graph = app.add_subcommand("graph", "print the function-call relation graph");
  graph->add_option("plan", plan_path, "plan file")->required();
  graph->add_option("--manifest", manifest_path, "tool manifest (default: sibling file)");
  add_output_flags(graph);

  auto* run = app.add_subcommand("run", "execute a plan per a run config");
  run->add_option("config", config_path, "run config JSON")->required();
  run->add_option("--procs", ov.processors, "processor pool size");
  run->add_option("--trace-out", trace_out, "also write the NDJSON trace to this path");
  add_run_flags(run);
  add_output_flags(run);

  auto* sweep = app.add_subcommand("sweep", "run all strategies across processor counts");
  sweep->add_option("config", config_path, "run config JSON")->required();
  sweep->add_option("--procs", procs_range, "processor range a..b (default 1..8)");
  add_run_flags(sweep);
  add_output_flags(sweep);

  auto* demo = app.add_subcommand(
      "recover-demo", "translate, repair, and run one config with recovery enabled");
  demo->add_option("config", config_path, "run config JSON")->required();
  demo->add_option("--procs", ov.processors, "processor pool size");
  add_run_flags(demo);
  add_output_flags(demo);

  auto* replay = app.add_subcommand("replay", "rebuild the run report from a trace file");
  replay->add_option("trace", trace_path, "NDJSON trace file")->required();
  add_output_flags(replay);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (*check) return cmd_check(plan_path, manifest_path, as_json, out_path);
    if (*graph) return cmd_graph(plan_path, manifest_path, as_json, out_path);
    if (*run) return cmd_run(load_config(config_path, ov), as_json, out_path, trace_out);
    if (*sweep) return cmd_sweep(load_config(config_path, ov), procs_range, as_json, out_path);
    if (*demo) return cmd_recover_demo(load_config(config_path, ov), as_json, out_path);
    if (*replay) return cmd_replay(trace_path, as_json, out_path);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const callflow::ManifestError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const callflow::PlannerError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const RunFailure& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const callflow::EngineError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
