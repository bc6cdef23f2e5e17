#include "callflow/recovery.hpp"

#include <algorithm>
#include <set>

#include "callflow/scheduler.hpp"

namespace callflow {

CompileRecoveryResult compile_time_recover(const std::string& query, std::string bad_text,
                                           CompileError error, Planner& planner,
                                           const std::string& few_shots, int max_repairs,
                                           int max_retranslations, double base_temperature) {
  CompileRecoveryResult res;
  auto try_text = [&](const std::string& text) {
    ParseResult parsed = parse_sequence(text);
    if (parsed.ok()) {
      res.sequence = std::move(parsed.sequence);
      res.final_text = text;
      return true;
    }
    error = *parsed.error;
    bad_text = text;
    return false;
  };

  for (int r = 0; r < max_repairs; ++r) {
    std::string context = "Compile error: " + error.message + "\nPlan text:\n" + bad_text;
    PlannerResponse resp;
    try {
      resp = planner.repair(PlannerPurpose::RepairCompile, query, context, few_shots,
                            base_temperature);
    } catch (const PlannerError& e) {
      res.fatal = e.what();
      return res;
    }
    ++res.planner_calls;
    res.tokens += resp.tokens;
    if (try_text(resp.text)) return res;
  }

  double temperature = base_temperature;
  for (int t = 0; t < max_retranslations; ++t) {
    temperature = std::min(1.0, temperature + 0.3);
    PlannerResponse resp;
    try {
      resp = planner.translate(query, few_shots, temperature);
    } catch (const PlannerError& e) {
      res.fatal = e.what();
      return res;
    }
    ++res.planner_calls;
    res.tokens += resp.tokens;
    if (try_text(resp.text)) return res;
  }

  res.fatal = "The plan still does not compile after " + std::to_string(max_repairs) +
              " repair attempts and " + std::to_string(max_retranslations) +
              " retranslations. Last error: " + error.message;
  return res;
}

std::vector<std::string> find_recovery_points(const RelationGraph& g, const std::string& failed) {
  std::vector<std::string> preds = g.predecessors(failed);
  if (preds.empty()) return {failed};
  int best = 0;
  for (const auto& p : preds) {
    int r = g.rank_of(p);
    if (best == 0 || r < best) best = r;
  }
  std::vector<std::string> points;
  for (const auto& n : g.nodes) {
    if (g.rank_of(n.id) != best) continue;
    if (std::find(preds.begin(), preds.end(), n.id) != preds.end()) points.push_back(n.id);
  }
  return points;
}

RepairValidation validate_repair(const RelationGraph& g, const ToolManifest& manifest,
                                 const FunctionCall& original, const std::string& proposed_text) {
  RepairValidation out;
  ParseResult parsed = parse_fragment(proposed_text);
  if (!parsed.ok()) {
    out.rejection = "The proposed repair does not parse: " + parsed.error->message;
    return out;
  }
  if (parsed.sequence->calls.size() != 1) {
    out.rejection = "The proposed repair must be exactly one call, got " +
                    std::to_string(parsed.sequence->calls.size()) + ".";
    return out;
  }
  FunctionCall call = parsed.sequence->calls.front();
  if (call.id != original.id) {
    out.rejection = "The proposed repair renames '" + original.id + "' to '" + call.id + "'.";
    return out;
  }
  const ToolSpec* orig_tool = manifest.find(original.function);
  const ToolSpec* new_tool = manifest.find(call.function);
  FunctionKind orig_kind = orig_tool ? orig_tool->kind : FunctionKind::Inout;
  if (call.function != "self" && !new_tool) {
    out.rejection = "The proposed repair uses unregistered function '" + call.function + "'.";
    return out;
  }
  FunctionKind new_kind = new_tool ? new_tool->kind : FunctionKind::Inout;
  if (new_kind != orig_kind) {
    out.rejection = "The proposed repair changes '" + original.id + "' from " +
                    to_string(orig_kind) + " to " + to_string(new_kind) + ".";
    return out;
  }
  std::vector<std::string> allowed = collect_refs(original);
  for (const auto& ref : collect_refs(call)) {
    if (std::find(allowed.begin(), allowed.end(), ref) == allowed.end()) {
      out.rejection = "The proposed repair introduces a new reference to '" + ref + "'.";
      return out;
    }
  }
  (void)g;
  out.call = std::move(call);
  return out;
}

namespace {

// Re-executes one failed call with the arguments it failed with. A success
// both classifies the fault as self-contained and counts as the call's
// completion; a repeat failure classifies it as data-dependent.
void run_probe(EngineContext& ctx, Fault& fault) {
  ctx.ex.spawn("probe-" + fault.call, [&ctx, &fault] {
    auto lk = ctx.ex.lock();
    CallRecord& rec = ctx.state.record(fault.call);
    const FunctionCall* call = ctx.graph.seq.find(fault.call);

    ResolvedArgs args = fault.args_at_failure;
    bool resolvable = rec.resolved_valid;
    if (!resolvable) {
      ResolveOutcome retry = resolve_arguments(*call, ctx.state.results);
      if (retry.ok()) {
        args = *retry.args;
        resolvable = true;
      }
    }

    ctx.trace.append(ctx.ex.now(), TraceEventKind::Started, fault.call, "p1", "probe");
    ExecOutcome outcome;
    if (resolvable)
      outcome = ctx.executor.execute(*call, args);
    else
      outcome.fault = fault.message;
    if (!sleep_for(ctx.ex, lk, ctx.executor.duration_for(fault.call, call->function))) return;

    if (outcome.ok()) {
      fault.kind = Fault::Kind::SelfContained;
      rec.status = CallStatus::Completed;
      rec.finished = ctx.ex.now();
      rec.processor = "p1";
      ctx.state.results[fault.call] = *outcome.result;
      ctx.state.completion_order.push_back(fault.call);
      ctx.trace.append(ctx.ex.now(), TraceEventKind::Finished, fault.call, "p1",
                       outcome.result->render());
    } else {
      fault.kind = Fault::Kind::DataDependent;
      rec.fault_message = outcome.fault;
      ctx.trace.append(ctx.ex.now(), TraceEventKind::Failed, fault.call, "p1",
                       "probe: " + outcome.fault);
    }
  });
  ctx.ex.run();
}

std::string tokens_detail(const TokenCounts& t) {
  return "tokens_in=" + std::to_string(t.input) + ";tokens_out=" + std::to_string(t.output);
}

}  // namespace

RecoveryReport runtime_recover(EngineContext& ctx, RelationGraph& graph,
                               const ToolManifest& manifest, std::vector<Fault> faults,
                               Planner* planner, int max_attempts, const std::string& query) {
  RecoveryReport rep;
  std::set<std::string> ever_failed;
  for (const auto& f : faults) ever_failed.insert(f.call);

  for (int attempt = 1; attempt <= max_attempts && !faults.empty(); ++attempt) {
    rep.attempts = attempt;

    std::set<std::string> rerun;
    for (auto& fault : faults) {
      run_probe(ctx, fault);
      if (fault.kind == Fault::Kind::SelfContained) {
        // Fixed on the spot; only its pruned descendants still need to run.
        for (const auto& d : graph.descendants_of(fault.call)) rerun.insert(d);
        continue;
      }
      // Data-dependent: repair the closest upstream calls and replay from there.
      for (const auto& point : find_recovery_points(graph, fault.call)) {
        rerun.insert(point);
        for (const auto& d : graph.descendants_of(point)) rerun.insert(d);
        if (!planner) continue;
        FunctionCall& original = graph.seq.calls[static_cast<std::size_t>(
            graph.seq.index_of(point))];
        std::string context = "Failed call: " + fault.call + "\nFailure: " + fault.message +
                              "\nCall to repair:\n" + render_call(original);
        PlannerResponse resp;
        try {
          resp = planner->repair(PlannerPurpose::RepairRuntime, query, context, "");
        } catch (const PlannerError&) {
          continue;  // no usable repair; the replay below still counts as the attempt
        }
        rep.repair_tokens += resp.tokens;
        RepairValidation val = validate_repair(graph, manifest, original, resp.text);
        if (!val.ok()) continue;  // splice rejected; attempt still counted
        original = std::move(*val.call);
        if (graph.node(point)) {
          FrgNode* node = graph.node(point);
          node->function = original.function;
          if (const ToolSpec* t = manifest.find(original.function)) {
            node->kind = t->kind;
            node->mode = t->mode;
            node->profile = t->profile;
          }
        }
        rep.repaired_calls.push_back(point);
      }
    }

    if (rerun.empty()) break;  // nothing left to replay

    std::vector<std::string> subset;
    for (const auto& n : graph.nodes)
      if (rerun.count(n.id) && ctx.state.record(n.id).status != CallStatus::Running)
        subset.push_back(n.id);
    for (const auto& id : subset) {
      CallRecord& rec = ctx.state.record(id);
      rec.status = CallStatus::Pending;
      rec.started = rec.finished = -1;
      rec.processor.clear();
      rec.resolved.clear();
      rec.resolved_valid = false;
      ctx.state.results.erase(id);
    }

    Phase phase(subset);
    Channel<Batch> to_coord;
    Channel<Completions> to_sched;
    std::string phase_error;
    ctx.ex.spawn("scheduler", [&] {
      SchedulerOptions opts;  // replays always use the tracked release
      run_scheduler(ctx.ex, graph, phase.subset, to_coord, to_sched, ctx.trace, opts);
    });
    ctx.ex.spawn("listener", [&] { run_batch_listener(ctx, phase, to_coord); });
    ctx.ex.spawn("coordinator", [&] {
      try {
        run_coordinator(ctx, phase, to_sched, CoordinatorOptions{});
      } catch (const EngineError& e) {
        phase_error = e.what();
      }
    });
    ctx.ex.run();
    if (!phase_error.empty()) throw EngineError(phase_error);

    faults.clear();
    for (const auto& id : ctx.state.failed_calls()) {
      ever_failed.insert(id);
      Fault f;
      f.call = id;
      const CallRecord& rec = ctx.state.record(id);
      f.message = rec.fault_message;
      if (rec.resolved_valid) f.args_at_failure = rec.resolved;
      faults.push_back(std::move(f));
    }
  }

  rep.errors_raised = static_cast<int>(ever_failed.size());
  {
    auto lk = ctx.ex.lock();
    for (const auto& id : ever_failed) {
      const CallRecord& rec = ctx.state.record(id);
      if (rec.status == CallStatus::Completed) {
        ++rep.errors_fixed;
        ctx.trace.append(ctx.ex.now(), TraceEventKind::Recovered, id, rec.processor,
                         "attempts=" + std::to_string(rep.attempts) + ";" +
                             tokens_detail(rep.repair_tokens));
      } else if (rec.status == CallStatus::Failed) {
        ctx.trace.append(ctx.ex.now(), TraceEventKind::Failed, id, rec.processor,
                         "unrecovered;attempts=" + std::to_string(rep.attempts) + ";" +
                             tokens_detail(rep.repair_tokens));
      }
    }
  }
  rep.success = true;
  for (const auto& n : graph.nodes)
    if (ctx.state.record(n.id).status != CallStatus::Completed) rep.success = false;
  return rep;
}

}  // namespace callflow
