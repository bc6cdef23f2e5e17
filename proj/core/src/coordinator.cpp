#include "callflow/coordinator.hpp"

#include <algorithm>
#include <cassert>

namespace callflow {

const char* to_string(CallStatus s) {
  switch (s) {
    case CallStatus::Pending: return "pending";
    case CallStatus::Scheduled: return "scheduled";
    case CallStatus::Dispatched: return "dispatched";
    case CallStatus::Running: return "running";
    case CallStatus::Completed: return "completed";
    case CallStatus::Failed: return "failed";
    case CallStatus::Skipped: return "skipped";
  }
  return "?";
}

bool RunState::terminal(const std::string& id) const {
  auto it = records.find(id);
  if (it == records.end()) return false;
  CallStatus s = it->second.status;
  return s == CallStatus::Completed || s == CallStatus::Failed || s == CallStatus::Skipped;
}

std::vector<std::string> RunState::failed_calls() const {
  std::vector<std::string> out;
  for (const auto& [id, rec] : records)
    if (rec.status == CallStatus::Failed) out.push_back(id);
  std::sort(out.begin(), out.end(),
            [](const std::string& a, const std::string& b) {
              return call_id_number(a) < call_id_number(b);
            });
  return out;
}

bool ProcessorPool::any_idle() const {
  for (const auto& p : procs)
    if (p.running.empty()) return true;
  return false;
}

std::vector<int> ProcessorPool::idle() const {
  std::vector<int> out;
  for (std::size_t i = 0; i < procs.size(); ++i)
    if (procs[i].running.empty()) out.push_back(static_cast<int>(i));
  return out;
}

Phase::Phase(std::vector<std::string> ids) : subset(std::move(ids)) {
  member.insert(subset.begin(), subset.end());
}

namespace {

void settle(EngineContext& ctx, Phase& phase, const std::string& id) {
  if (phase.member.count(id)) ++phase.settled;
  ctx.ex.notify();
}

void start_compute(EngineContext& ctx, Phase& phase, const std::string& id, int proc_idx);
void start_inout(EngineContext& ctx, Phase& phase, const std::string& id,
                 const std::string& label, bool via_io_pool);

void finish_call(EngineContext& ctx, Phase& phase, const std::string& id,
                 const ExecOutcome& outcome) {
  CallRecord& rec = ctx.state.record(id);
  rec.finished = ctx.ex.now();
  if (outcome.ok())
    mark_completed(ctx, phase, id, *outcome.result);
  else
    mark_failed(ctx, phase, id, outcome.fault);
}

void release_processor(EngineContext& ctx, Phase& phase, int proc_idx) {
  ProcessorPool::Proc& proc = ctx.pool.procs[static_cast<std::size_t>(proc_idx)];
  proc.running.clear();
  if (!proc.backlog.empty()) {
    std::string next = std::move(proc.backlog.front());
    proc.backlog.pop_front();
    start_compute(ctx, phase, next, proc_idx);  // keeps busy_since running
    return;
  }
  proc.busy_accum += ctx.ex.now() - proc.busy_since;
  proc.busy_since = -1;
}

void start_compute(EngineContext& ctx, Phase& phase, const std::string& id, int proc_idx) {
  ProcessorPool::Proc& proc = ctx.pool.procs[static_cast<std::size_t>(proc_idx)];
  assert(proc.running.empty());
  proc.running = id;
  if (proc.busy_since < 0) proc.busy_since = ctx.ex.now();

  CallRecord& rec = ctx.state.record(id);
  rec.status = CallStatus::Running;
  rec.started = ctx.ex.now();
  ctx.trace.append(ctx.ex.now(), TraceEventKind::Started, id, rec.processor);

  const FunctionCall* call = ctx.graph.seq.find(id);
  ExecOutcome outcome = ctx.executor.execute(*call, rec.resolved);
  Tick dur = ctx.executor.duration_for(id, call->function);
  ctx.ex.post_at(ctx.ex.now() + dur, [&ctx, &phase, id, proc_idx, outcome] {
    finish_call(ctx, phase, id, outcome);
    release_processor(ctx, phase, proc_idx);
  });
}

void start_inout(EngineContext& ctx, Phase& phase, const std::string& id,
                 const std::string& label, bool via_io_pool) {
  CallRecord& rec = ctx.state.record(id);
  rec.status = CallStatus::Running;
  rec.started = ctx.ex.now();
  ctx.trace.append(ctx.ex.now(), TraceEventKind::Started, id, label);

  const FunctionCall* call = ctx.graph.seq.find(id);
  ExecOutcome outcome = ctx.executor.execute(*call, rec.resolved);
  Tick dur = ctx.executor.duration_for(id, call->function);
  ctx.ex.post_at(ctx.ex.now() + dur, [&ctx, &phase, id, via_io_pool, outcome] {
    finish_call(ctx, phase, id, outcome);
    if (via_io_pool) {
      --ctx.io_pool.in_flight;
      while (ctx.io_pool.in_flight < ctx.io_pool.capacity && !ctx.io_pool.waiting.empty()) {
        std::string next = std::move(ctx.io_pool.waiting.front());
        ctx.io_pool.waiting.pop_front();
        ++ctx.io_pool.in_flight;
        start_inout(ctx, phase, next, "io-pool", true);
      }
    }
  });
}

}  // namespace

void mark_completed(EngineContext& ctx, Phase& phase, const std::string& id,
                    const CallResult& result) {
  CallRecord& rec = ctx.state.record(id);
  assert(!ctx.state.terminal(id));
  rec.status = CallStatus::Completed;
  if (rec.finished < 0) rec.finished = ctx.ex.now();
  ctx.state.results[id] = result;
  ctx.state.completion_order.push_back(id);
  phase.unreported.push_back(id);
  ctx.trace.append(ctx.ex.now(), TraceEventKind::Finished, id, rec.processor, result.render());
  settle(ctx, phase, id);
}

void mark_failed(EngineContext& ctx, Phase& phase, const std::string& id,
                 const std::string& message) {
  CallRecord& rec = ctx.state.record(id);
  assert(!ctx.state.terminal(id));
  rec.status = CallStatus::Failed;
  rec.fault_message = message;
  if (rec.finished < 0) rec.finished = ctx.ex.now();
  ctx.trace.append(ctx.ex.now(), TraceEventKind::Failed, id, rec.processor, message);
  settle(ctx, phase, id);

  // Everything downstream of a failure is unrunnable this phase.
  for (const auto& desc : ctx.graph.descendants_of(id)) {
    if (!phase.member.count(desc) || ctx.state.terminal(desc)) continue;
    CallRecord& drec = ctx.state.record(desc);
    drec.status = CallStatus::Skipped;
    ctx.trace.append(ctx.ex.now(), TraceEventKind::Failed, desc, "",
                     "skipped: upstream failure in '" + id + "'");
    settle(ctx, phase, desc);
  }
}

void dispatch_call(EngineContext& ctx, Phase& phase, const std::string& id, int proc_idx) {
  const FrgNode* node = ctx.graph.node(id);
  const FunctionCall* call = ctx.graph.seq.find(id);
  CallRecord& rec = ctx.state.record(id);
  rec.status = CallStatus::Dispatched;

  bool io_pool_call = node->kind == FunctionKind::Inout && node->mode == ModeFlag::Nonblock;
  rec.processor = io_pool_call ? "io-pool" : ProcessorPool::label(proc_idx);

  std::string kind_detail =
      node->kind == FunctionKind::Compute
          ? "kind=compute"
          : std::string("kind=inout mode=") + (node->mode == ModeFlag::Block ? "block" : "nonblock");
  ctx.trace.append(ctx.ex.now(), TraceEventKind::Dispatched, id, rec.processor, kind_detail);

  ResultLookup effective;  // only materialized when strict release left holes
  const ResultLookup* lookup = &ctx.state.results;
  if (ctx.lenient_refs) {
    effective = ctx.state.results;
    for (const auto& ref : collect_refs(*call))
      if (!effective.count(ref)) effective[ref] = CallResult::of_text(ref);
    lookup = &effective;
  }
  ResolveOutcome resolved = resolve_arguments(*call, *lookup);
  if (!resolved.ok()) {
    rec.finished = ctx.ex.now();
    mark_failed(ctx, phase, id, resolved.fault);
    return;
  }
  rec.resolved = std::move(*resolved.args);
  rec.resolved_valid = true;

  if (node->kind == FunctionKind::Compute) {
    ProcessorPool::Proc& proc = ctx.pool.procs[static_cast<std::size_t>(proc_idx)];
    if (proc.running.empty())
      start_compute(ctx, phase, id, proc_idx);
    else
      proc.backlog.push_back(id);  // STARTED comes when the processor frees up
    return;
  }
  if (io_pool_call) {
    if (ctx.io_pool.in_flight < ctx.io_pool.capacity) {
      ++ctx.io_pool.in_flight;
      start_inout(ctx, phase, id, "io-pool", true);
    } else {
      ctx.io_pool.waiting.push_back(id);
    }
    return;
  }
  start_inout(ctx, phase, id, rec.processor, false);  // blocking inout rides the processor
}

void run_batch_listener(EngineContext& ctx, Phase& phase, Channel<Batch>& from_sched) {
  auto lk = ctx.ex.lock();
  for (;;) {
    auto batch = from_sched.recv(ctx.ex, lk);
    if (!batch) break;
    for (auto& id : *batch) {
      CallRecord& rec = ctx.state.record(id);
      if (rec.status == CallStatus::Pending) rec.status = CallStatus::Scheduled;
    }
    phase.pending.push_back(std::move(*batch));
    ctx.ex.notify();
  }
}

namespace {

// True when some pending batch still carries a live inout call.
bool pending_io(EngineContext& ctx, Phase& phase) {
  for (const auto& batch : phase.pending)
    for (const auto& id : batch)
      if (ctx.graph.node(id)->kind == FunctionKind::Inout && !ctx.state.terminal(id)) return true;
  return false;
}

}  // namespace

void run_coordinator(EngineContext& ctx, Phase& phase, Channel<Completions>& to_sched,
                     const CoordinatorOptions& opts) {
  auto lk = ctx.ex.lock();
  for (;;) {
    bool alive = ctx.ex.wait(lk, [&] {
      return phase.done() || !phase.unreported.empty() || pending_io(ctx, phase) ||
             (!phase.pending.empty() && ctx.pool.any_idle());
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

    // Inout calls never contend for a processor slot, so they start as soon
    // as they are released, wherever they sit in the queue: peel them off
    // every pending batch in release order. The processor label is pure
    // affinity; with no spare the pick falls back to the whole pool. (Under
    // the simplified model mutex pairs only ever join compute calls, so the
    // exclusive split below never applies to these.)
    for (auto it = phase.pending.begin(); it != phase.pending.end();) {
      Batch& b = *it;
      Batch ios;
      b.erase(std::remove_if(b.begin(), b.end(),
                             [&](const std::string& id) {
                               if (ctx.state.terminal(id)) return true;
                               if (ctx.graph.node(id)->kind == FunctionKind::Inout) {
                                 ios.push_back(id);
                                 return true;
                               }
                               return false;
                             }),
              b.end());
      if (!ios.empty()) {
        std::vector<int> targets = ctx.pool.idle();
        if (targets.empty())
          for (std::size_t i = 0; i < ctx.pool.procs.size(); ++i)
            targets.push_back(static_cast<int>(i));
        std::size_t base =
            static_cast<std::size_t>(ctx.rng() % static_cast<std::uint64_t>(targets.size()));
        for (std::size_t k = 0; k < ios.size(); ++k) {
          int target = opts.spread_io ? targets[(base + k) % targets.size()] : targets[base];
          dispatch_call(ctx, phase, ios[k], target);
        }
      }
      if (b.empty())
        it = phase.pending.erase(it);
      else
        ++it;
    }
    if (phase.pending.empty() || !ctx.pool.any_idle()) continue;

    // What remains of the front batch is compute-only.
    Batch batch = std::move(phase.pending.front());
    phase.pending.pop_front();

    // Split the batch: calls whose mutex partner is in the same batch need
    // distinct processors; everything else shares one spare.
    Batch exclusive, shared;
    for (const auto& id : batch) {
      bool partnered = false;
      for (const auto& other : batch)
        if (other != id && ctx.graph.is_mutex(id, other)) {
          partnered = true;
          break;
        }
      (partnered ? exclusive : shared).push_back(id);
    }

    std::vector<int> spares = ctx.pool.idle();
    if (!shared.empty()) {
      std::size_t base =
          static_cast<std::size_t>(ctx.rng() % static_cast<std::uint64_t>(spares.size()));
      for (std::size_t k = 0; k < shared.size(); ++k) {
        int target = opts.spread_io ? spares[(base + k) % spares.size()]
                                    : spares[base];
        dispatch_call(ctx, phase, shared[k], target);
      }
    }
    std::size_t n = std::min(exclusive.size(), spares.size());
    for (std::size_t k = 0; k < n; ++k) dispatch_call(ctx, phase, exclusive[k], spares[k]);
    if (n < exclusive.size()) {
      Batch rest(exclusive.begin() + static_cast<std::ptrdiff_t>(n), exclusive.end());
      phase.pending.push_front(std::move(rest));
    }
  }
  to_sched.close(ctx.ex, lk);
}

}  // namespace callflow
