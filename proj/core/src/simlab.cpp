#include "callflow/simlab.hpp"

#include <algorithm>
#include <cstdlib>
#include <iomanip>
#include <random>
#include <sstream>

#include "callflow/coordinator.hpp"
#include "callflow/executor.hpp"
#include "callflow/recovery.hpp"
#include "callflow/scheduler.hpp"
#include "json.hpp"

namespace callflow {

using ordered = nlohmann::ordered_json;

const char* to_string(Strategy s) {
  switch (s) {
    case Strategy::Sequential: return "sequential";
    case Strategy::DirectParallel: return "direct";
    case Strategy::Coordinated: return "coordinated";
  }
  return "?";
}

Strategy strategy_from_string(std::string_view s) {
  if (s == "sequential" || s == "seq") return Strategy::Sequential;
  if (s == "direct" || s == "direct_parallel") return Strategy::DirectParallel;
  if (s == "coordinated" || s == "coord") return Strategy::Coordinated;
  throw std::invalid_argument("unknown strategy: " + std::string(s) +
                              " (expected sequential, direct, or coordinated)");
}

namespace {

// One call at a time, plan order, everything on p1.
void run_sequential(EngineContext& ctx, Phase& phase, Tick step_overhead) {
  auto lk = ctx.ex.lock();
  bool past_first_step = false;
  for (const auto& node : ctx.graph.nodes) {
    const std::string& id = node.id;
    if (!phase.member.count(id) || ctx.state.terminal(id)) continue;
    // The planner-turnaround overhead sits between steps: it delays every call
    // after the first, and the run ends when the last result lands.
    if (past_first_step && step_overhead > 0 && !sleep_for(ctx.ex, lk, step_overhead)) return;
    past_first_step = true;
    ctx.trace.append(ctx.ex.now(), TraceEventKind::Scheduled, id, "",
                     "rank=" + std::to_string(node.rank));
    CallRecord& rec = ctx.state.record(id);
    rec.status = CallStatus::Dispatched;
    rec.processor = "p1";
    std::string kind_detail = node.kind == FunctionKind::Compute
                                  ? "kind=compute"
                                  : std::string("kind=inout mode=") +
                                        (node.mode == ModeFlag::Block ? "block" : "nonblock");
    ctx.trace.append(ctx.ex.now(), TraceEventKind::Dispatched, id, "p1", kind_detail);

    const FunctionCall* call = ctx.graph.seq.find(id);
    ResolveOutcome resolved = resolve_arguments(*call, ctx.state.results);
    if (!resolved.ok()) {
      rec.finished = ctx.ex.now();
      mark_failed(ctx, phase, id, resolved.fault);
      continue;
    }
    rec.resolved = std::move(*resolved.args);
    rec.resolved_valid = true;
    rec.status = CallStatus::Running;
    rec.started = ctx.ex.now();
    ctx.trace.append(ctx.ex.now(), TraceEventKind::Started, id, "p1");
    ExecOutcome outcome = ctx.executor.execute(*call, rec.resolved);
    if (!sleep_for(ctx.ex, lk, ctx.executor.duration_for(id, call->function))) return;
    rec.finished = ctx.ex.now();
    if (outcome.ok())
      mark_completed(ctx, phase, id, *outcome.result);
    else
      mark_failed(ctx, phase, id, outcome.fault);
  }
}

// Takes batches straight from the scheduler: all compute calls time-share
// one single-threaded executor, so a batch's computes run as one slice of
// summed duration and finish together, and slices from different batches
// queue up behind each other. Inout calls overlap freely. Processor counts,
// mutex pairs, and the io pool are ignored.
void run_direct(EngineContext& ctx, Phase& phase, Channel<Completions>& to_sched) {
  auto lk = ctx.ex.lock();
  Tick thread_free = 0;  // when the single compute thread next comes free
  for (;;) {
    bool alive = ctx.ex.wait(lk, [&] {
      return phase.done() || !phase.unreported.empty() || !phase.pending.empty();
    });
    if (!alive) throw EngineError("engine drained before the phase settled");

    if (!phase.unreported.empty()) {
      Completions report;
      report.swap(phase.unreported);
      std::sort(report.begin(), report.end(), [&](const std::string& a, const std::string& b) {
        Tick fa = ctx.state.record(a).finished, fb = ctx.state.record(b).finished;
        if (fa != fb) return fa < fb;
        return call_id_number(a) < call_id_number(b);
      });
      to_sched.send(ctx.ex, lk, std::move(report));
      continue;
    }
    if (phase.done()) break;

    Batch batch = std::move(phase.pending.front());
    phase.pending.pop_front();
    batch.erase(std::remove_if(batch.begin(), batch.end(),
                               [&](const std::string& id) { return ctx.state.terminal(id); }),
                batch.end());
    if (batch.empty()) continue;

    struct Started {
      std::string id;
      ExecOutcome outcome;
    };
    std::vector<Started> computes;
    Tick total = 0;
    Tick slice_start = std::max(ctx.ex.now(), thread_free);
    for (const auto& id : batch) {
      const FrgNode* node = ctx.graph.node(id);
      CallRecord& rec = ctx.state.record(id);
      rec.status = CallStatus::Dispatched;
      rec.processor = "p1";
      std::string kind_detail = node->kind == FunctionKind::Compute
                                    ? "kind=compute"
                                    : std::string("kind=inout mode=") +
                                          (node->mode == ModeFlag::Block ? "block" : "nonblock");
      ctx.trace.append(ctx.ex.now(), TraceEventKind::Dispatched, id, "p1", kind_detail);

      const FunctionCall* call = ctx.graph.seq.find(id);
      ResolveOutcome resolved = resolve_arguments(*call, ctx.state.results);
      if (!resolved.ok()) {
        rec.finished = ctx.ex.now();
        mark_failed(ctx, phase, id, resolved.fault);
        continue;
      }
      rec.resolved = std::move(*resolved.args);
      rec.resolved_valid = true;
      ExecOutcome outcome = ctx.executor.execute(*call, rec.resolved);
      Tick dur = ctx.executor.duration_for(id, call->function);
      if (node->kind == FunctionKind::Compute) {
        // The slice may have to wait for the thread; the call starts then.
        if (slice_start == ctx.ex.now()) {
          rec.status = CallStatus::Running;
          rec.started = ctx.ex.now();
          ctx.trace.append(ctx.ex.now(), TraceEventKind::Started, id, "p1");
        } else {
          ctx.ex.post_at(slice_start, [&ctx, id] {
            CallRecord& r = ctx.state.record(id);
            r.status = CallStatus::Running;
            r.started = ctx.ex.now();
            ctx.trace.append(ctx.ex.now(), TraceEventKind::Started, id, "p1");
          });
        }
        computes.push_back({id, std::move(outcome)});
        total += dur;
      } else {
        rec.status = CallStatus::Running;
        rec.started = ctx.ex.now();
        ctx.trace.append(ctx.ex.now(), TraceEventKind::Started, id, "p1");
        ctx.ex.post_at(ctx.ex.now() + dur, [&ctx, &phase, id, outcome] {
          CallRecord& r = ctx.state.record(id);
          r.finished = ctx.ex.now();
          if (outcome.ok())
            mark_completed(ctx, phase, id, *outcome.result);
          else
            mark_failed(ctx, phase, id, outcome.fault);
        });
      }
    }
    if (!computes.empty()) {
      thread_free = slice_start + total;
      ctx.ex.post_at(thread_free, [&ctx, &phase, computes] {
        for (const auto& c : computes) {
          CallRecord& r = ctx.state.record(c.id);
          r.finished = ctx.ex.now();
          if (c.outcome.ok())
            mark_completed(ctx, phase, c.id, *c.outcome.result);
          else
            mark_failed(ctx, phase, c.id, c.outcome.fault);
        }
      });
    }
  }
  to_sched.close(ctx.ex, lk);
}

struct DetailFields {
  int attempts = 0;
  TokenCounts tokens;
};

DetailFields parse_recovery_detail(const std::string& detail) {
  DetailFields out;
  auto grab = [&](const char* key) -> std::int64_t {
    auto pos = detail.find(key);
    if (pos == std::string::npos) return 0;
    return std::atoll(detail.c_str() + pos + std::string(key).size());
  };
  out.attempts = static_cast<int>(grab("attempts="));
  out.tokens.input = grab("tokens_in=");
  out.tokens.output = grab("tokens_out=");
  return out;
}

}  // namespace

RunReport report_from_trace(const std::vector<TraceEvent>& events) {
  RunReport r;
  std::map<std::string, bool> is_compute;
  std::map<std::string, std::pair<Tick, std::string>> open;  // call -> (start, processor)
  std::map<std::string, Tick> busy;
  std::map<std::string, bool> raised, fixed;

  for (const auto& e : events) {
    r.makespan = std::max(r.makespan, e.t);
    auto& call = r.calls[e.call];
    switch (e.event) {
      case TraceEventKind::Scheduled:
        if (call.status.empty()) call.status = "scheduled";
        break;
      case TraceEventKind::Dispatched:
        call.processor = e.processor;
        call.status = "dispatched";
        is_compute[e.call] = e.detail.rfind("kind=compute", 0) == 0;
        break;
      case TraceEventKind::Started:
        call.start = e.t;
        call.status = "running";
        if (is_compute[e.call]) open[e.call] = {e.t, e.processor};
        break;
      case TraceEventKind::Finished: {
        call.finish = e.t;
        call.status = "completed";
        call.result = e.detail;
        auto it = open.find(e.call);
        if (it != open.end()) {
          busy[it->second.second] += e.t - it->second.first;
          open.erase(it);
        }
        break;
      }
      case TraceEventKind::Failed: {
        call.finish = e.t;
        bool skip = e.detail.rfind("skipped:", 0) == 0;
        call.status = skip ? "skipped" : "failed";
        if (!skip) {
          raised[e.call] = true;
          if (r.failure.empty()) r.failure = e.call + ": " + e.detail;
        }
        auto it = open.find(e.call);
        if (it != open.end()) {
          busy[it->second.second] += e.t - it->second.first;
          open.erase(it);
        }
        break;
      }
      case TraceEventKind::Recovered: {
        call.status = "recovered";
        fixed[e.call] = true;
        DetailFields f = parse_recovery_detail(e.detail);
        r.recovery.attempts = std::max(r.recovery.attempts, f.attempts);
        r.tokens.input = std::max(r.tokens.input, f.tokens.input);
        r.tokens.output = std::max(r.tokens.output, f.tokens.output);
        break;
      }
    }
    if (e.event == TraceEventKind::Failed) {
      DetailFields f = parse_recovery_detail(e.detail);
      r.recovery.attempts = std::max(r.recovery.attempts, f.attempts);
      r.tokens.input = std::max(r.tokens.input, f.tokens.input);
      r.tokens.output = std::max(r.tokens.output, f.tokens.output);
    }
  }

  r.recovery.errors_raised = static_cast<int>(raised.size());
  r.recovery.errors_fixed = static_cast<int>(fixed.size());
  r.succeeded = true;
  for (const auto& [id, call] : r.calls)
    if (call.status != "completed" && call.status != "recovered") r.succeeded = false;
  if (r.succeeded) r.failure.clear();
  if (r.makespan > 0)
    for (const auto& [proc, t] : busy)
      r.utilization[proc] = static_cast<double>(t) / static_cast<double>(r.makespan);
  return r;
}

RunOutcome run_plan(RelationGraph graph, const ToolManifest& manifest, const RunConfig& cfg,
                    Planner* planner) {
  ToolManifest effective = manifest;
  for (const auto& [id, f] : cfg.fault_injections) effective.fault_injections[id] = f;

  auto ex = make_exec(cfg.clock);
  TraceLog trace;
  RunState state;
  SyntheticExecutor executor(effective, cfg.seed);
  ProcessorPool pool(std::max(1, cfg.processors));
  AsyncIoPool io_pool;
  io_pool.capacity = std::max(1, cfg.io_capacity);
  std::mt19937_64 rng(cfg.seed);
  EngineContext ctx{*ex,   graph, state, executor,           trace,
                    pool,  io_pool, rng, cfg.strict_release};

  std::vector<std::string> all_ids;
  for (const auto& n : graph.nodes) all_ids.push_back(n.id);
  Phase phase(all_ids);
  std::string phase_error;

  if (cfg.strategy == Strategy::Sequential) {
    ex->spawn("sequential", [&] { run_sequential(ctx, phase, cfg.sequential_step_overhead); });
    ex->run();
  } else {
    Channel<Batch> to_coord;
    Channel<Completions> to_sched;
    SchedulerOptions sched_opts;
    sched_opts.strict_release = cfg.strict_release;
    ex->spawn("scheduler", [&] {
      run_scheduler(*ex, graph, phase.subset, to_coord, to_sched, trace, sched_opts);
    });
    ex->spawn("listener", [&] { run_batch_listener(ctx, phase, to_coord); });
    if (cfg.strategy == Strategy::DirectParallel) {
      ex->spawn("direct", [&] {
        try {
          run_direct(ctx, phase, to_sched);
        } catch (const EngineError& e) {
          phase_error = e.what();
        }
      });
    } else {
      ex->spawn("coordinator", [&] {
        try {
          CoordinatorOptions opts;
          opts.spread_io = cfg.spread_io;
          run_coordinator(ctx, phase, to_sched, opts);
        } catch (const EngineError& e) {
          phase_error = e.what();
        }
      });
    }
    ex->run();
  }
  if (!phase_error.empty()) throw EngineError(phase_error);

  if (cfg.strategy == Strategy::Coordinated && cfg.recovery.enabled) {
    std::vector<std::string> failed = state.failed_calls();
    if (!failed.empty()) {
      std::vector<Fault> faults;
      for (const auto& id : failed) {
        Fault f;
        f.call = id;
        const CallRecord& rec = state.record(id);
        f.message = rec.fault_message;
        if (rec.resolved_valid) f.args_at_failure = rec.resolved;
        faults.push_back(std::move(f));
      }
      runtime_recover(ctx, graph, effective, std::move(faults), planner,
                      cfg.recovery.max_attempts, cfg.query);
    }
  }

  RunOutcome out;
  out.report = report_from_trace(trace.events());
  out.trace = std::move(trace);
  return out;
}

std::string report_to_json(const RunReport& r) {
  ordered root;
  root["schema_version"] = 1;
  root["makespan"] = r.makespan;
  root["succeeded"] = r.succeeded;
  if (!r.succeeded) root["failure"] = r.failure;
  ordered calls;
  for (const auto& [id, c] : r.calls) {
    ordered jc;
    jc["start"] = c.start;
    jc["finish"] = c.finish;
    jc["processor"] = c.processor;
    jc["status"] = c.status;
    jc["result"] = c.result;
    calls[id] = std::move(jc);
  }
  root["calls"] = std::move(calls);
  ordered util;
  for (const auto& [proc, u] : r.utilization) util[proc] = u;
  root["utilization"] = std::move(util);
  root["tokens"] = {{"input", r.tokens.input}, {"output", r.tokens.output}};
  root["recovery"] = {{"errors_raised", r.recovery.errors_raised},
                      {"errors_fixed", r.recovery.errors_fixed},
                      {"attempts", r.recovery.attempts}};
  return root.dump(2) + "\n";
}

std::string report_to_text(const RunReport& r) {
  std::ostringstream os;
  os << "makespan: " << r.makespan << "\n";
  os << "status: " << (r.succeeded ? "succeeded" : "failed (" + r.failure + ")") << "\n";
  std::vector<std::pair<std::string, const RunReport::CallSummary*>> rows;
  for (const auto& [id, c] : r.calls) rows.emplace_back(id, &c);
  std::sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) {
    return call_id_number(a.first) < call_id_number(b.first);
  });
  for (const auto& [id, c] : rows) {
    os << "  " << id << ": " << c->status;
    if (c->start >= 0) os << "  [" << c->start << ", " << c->finish << "]";
    if (!c->processor.empty()) os << " on " << c->processor;
    if (!c->result.empty()) os << "  -> " << c->result;
    os << "\n";
  }
  if (!r.utilization.empty()) {
    os << "utilization:";
    for (const auto& [proc, u] : r.utilization)
      os << " " << proc << "=" << std::fixed << std::setprecision(2) << u;
    os << "\n";
  }
  if (r.recovery.errors_raised > 0) {
    os << "recovery: " << r.recovery.errors_fixed << "/" << r.recovery.errors_raised
       << " errors fixed in " << r.recovery.attempts << " attempt"
       << (r.recovery.attempts == 1 ? "" : "s") << ", tokens in=" << r.tokens.input
       << " out=" << r.tokens.output << "\n";
  }
  return os.str();
}

SweepResult scaling_sweep(const RelationGraph& graph, const ToolManifest& manifest, RunConfig base,
                          const std::vector<int>& processor_counts) {
  SweepResult result;
  base.recovery.enabled = false;

  RunConfig seq = base;
  seq.strategy = Strategy::Sequential;
  seq.processors = 1;
  result.sequential_baseline = run_plan(graph, manifest, seq).report.makespan;

  for (Strategy strategy :
       {Strategy::Sequential, Strategy::DirectParallel, Strategy::Coordinated}) {
    for (int p : processor_counts) {
      RunConfig cfg = base;
      cfg.strategy = strategy;
      cfg.processors = p;
      Tick makespan = run_plan(graph, manifest, cfg).report.makespan;
      SweepRow row;
      row.strategy = strategy;
      row.processors = p;
      row.makespan = makespan;
      row.speedup = makespan > 0 ? static_cast<double>(result.sequential_baseline) /
                                       static_cast<double>(makespan)
                                 : 0.0;
      result.rows.push_back(row);
    }
  }
  return result;
}

std::string sweep_to_text(const SweepResult& s) {
  std::ostringstream os;
  os << "strategy      procs  makespan  speedup\n";
  for (const auto& row : s.rows) {
    os << std::left << std::setw(14) << to_string(row.strategy) << std::setw(7) << row.processors
       << std::setw(10) << row.makespan << std::fixed << std::setprecision(2) << row.speedup
       << "\n";
  }
  os << "(speedup is sequential@p1 makespan " << s.sequential_baseline << " over each makespan)\n";
  return os.str();
}

std::string sweep_to_json(const SweepResult& s) {
  ordered root;
  root["schema_version"] = 1;
  root["sequential_baseline"] = s.sequential_baseline;
  root["rows"] = ordered::array();
  for (const auto& row : s.rows) {
    root["rows"].push_back(ordered{{"strategy", to_string(row.strategy)},
                                   {"processors", row.processors},
                                   {"makespan", row.makespan},
                                   {"speedup", row.speedup}});
  }
  return root.dump(2) + "\n";
}

std::string compare_to_text(const std::vector<std::pair<std::string, RunReport>>& rows) {
  if (rows.empty()) throw std::invalid_argument("cannot compare an empty set of reports.");
  std::size_t label_w = 8;
  for (const auto& [label, _] : rows) label_w = std::max(label_w, label.size());
  std::ostringstream os;
  os << std::left << std::setw(static_cast<int>(label_w + 2)) << "run"
     << "makespan  speedup  errors  recovered\n";
  const double base = static_cast<double>(rows.front().second.makespan);
  for (const auto& [label, rep] : rows) {
    const double speedup =
        rep.makespan > 0 ? base / static_cast<double>(rep.makespan) : 1.0;
    os << std::setw(static_cast<int>(label_w + 2)) << label << std::setw(10) << rep.makespan
       << std::fixed << std::setprecision(2) << std::setw(9) << speedup
       << std::setw(8) << rep.recovery.errors_raised << rep.recovery.errors_fixed << "\n";
    os.unsetf(std::ios::fixed);
    os << std::setprecision(6);
  }
  os << "(speedup is the first run's makespan over each run's makespan)\n";
  return os.str();
}

std::string compare_to_json(const std::vector<std::pair<std::string, RunReport>>& rows) {
  if (rows.empty()) throw std::invalid_argument("cannot compare an empty set of reports.");
  ordered root;
  root["schema_version"] = 1;
  root["rows"] = ordered::array();
  for (const auto& [label, rep] : rows) {
    ordered row;
    row["label"] = label;
    row["makespan"] = rep.makespan;
    ordered speedups;
    for (const auto& [other_label, other] : rows) {
      speedups[other_label] = rep.makespan > 0 ? static_cast<double>(other.makespan) /
                                                     static_cast<double>(rep.makespan)
                                               : 1.0;
    }
    row["speedup_vs"] = std::move(speedups);
    row["tokens"] = {{"input", rep.tokens.input}, {"output", rep.tokens.output}};
    row["recovery"] = {{"errors_raised", rep.recovery.errors_raised},
                       {"errors_fixed", rep.recovery.errors_fixed},
                       {"attempts", rep.recovery.attempts}};
    root["rows"].push_back(std::move(row));
  }
  return root.dump(2) + "\n";
}

}  // namespace callflow
