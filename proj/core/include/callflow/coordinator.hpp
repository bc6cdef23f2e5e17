#pragma once

#include <deque>
#include <map>
#include <random>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "callflow/exec.hpp"
#include "callflow/executor.hpp"
#include "callflow/relation.hpp"
#include "callflow/scheduler.hpp"
#include "callflow/trace.hpp"

namespace callflow {

struct EngineError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class CallStatus { Pending, Scheduled, Dispatched, Running, Completed, Failed, Skipped };

const char* to_string(CallStatus s);

struct CallRecord {
  CallStatus status = CallStatus::Pending;
  Tick started = -1, finished = -1;
  std::string processor;      // "p1".."pN" or "io-pool"
  std::string fault_message;  // set when status == Failed
  ResolvedArgs resolved;      // arguments as resolved at dispatch time
  bool resolved_valid = false;
};

// Everything the run accumulates, shared by all activities under the engine lock.
struct RunState {
  std::map<std::string, CallRecord> records;
  ResultLookup results;                       // completed call results
  std::vector<std::string> completion_order;  // finish order, ties broken by event order

  CallRecord& record(const std::string& id) { return records[id]; }
  bool terminal(const std::string& id) const;
  std::vector<std::string> failed_calls() const;  // sequence of ids with status Failed
};

// Fixed pool of compute processors. Only compute calls occupy a processor;
// inout calls ride along and overlap freely, modeling I/O waits.
struct ProcessorPool {
  struct Proc {
    std::string running;               // compute call currently on this processor
    std::deque<std::string> backlog;   // computes assigned here while busy
    Tick busy_accum = 0, busy_since = -1;
  };
  std::vector<Proc> procs;

  explicit ProcessorPool(int n) : procs(static_cast<std::size_t>(n)) {}
  int count() const { return static_cast<int>(procs.size()); }
  bool any_idle() const;
  std::vector<int> idle() const;
  static std::string label(int idx) { return "p" + std::to_string(idx + 1); }
};

// Admission-bounded pool for nonblocking inout calls.
struct AsyncIoPool {
  int capacity = 64;
  int in_flight = 0;
  std::deque<std::string> waiting;
};

struct CoordinatorOptions {
  bool spread_io = false;  // scatter an inout batch across spares instead of one processor
};

// One engine phase: the main run, a recovery probe, or a recovery re-run.
struct Phase {
  std::vector<std::string> subset;  // ids executed this phase, sequence order
  std::set<std::string> member;
  std::deque<Batch> pending;             // coordinator's batch queue
  std::vector<std::string> unreported;   // completed, not yet reported to the scheduler
  int settled = 0;                       // terminal calls within subset

  explicit Phase(std::vector<std::string> ids);
  bool done() const { return settled >= static_cast<int>(subset.size()); }
};

// Shared references threaded through the engine activities.
struct EngineContext {
  Exec& ex;
  const RelationGraph& graph;
  RunState& state;
  Executor& executor;
  TraceLog& trace;
  ProcessorPool& pool;
  AsyncIoPool& io_pool;
  std::mt19937_64& rng;
  bool lenient_refs = false;  // strict-release runs render missing refs as text
};

// Appends batches arriving from the scheduler to phase.pending (the
// coordinator's listener activity).
void run_batch_listener(EngineContext& ctx, Phase& phase, Channel<Batch>& from_sched);

// Main coordinator loop: wait for a spare processor, report completions in
// completion order (ties by call id), pop the front batch, send its
// mutex-involved calls to distinct processors and the rest to one shared
// processor, and push any mutex remainder back to the front of the queue.
// Throws EngineError on internal deadlock (drain before the phase settled).
void run_coordinator(EngineContext& ctx, Phase& phase, Channel<Completions>& to_sched,
                     const CoordinatorOptions& opts);

// Marks a call failed and transitively skips its data-dependent descendants
// inside the phase. Exposed for the sequential/direct drivers and recovery.
void mark_failed(EngineContext& ctx, Phase& phase, const std::string& id, const std::string& message);
void mark_completed(EngineContext& ctx, Phase& phase, const std::string& id, const CallResult& result);

// Dispatches one call onto a processor (or the io pool) at the current tick:
// resolves arguments, emits trace events, occupies the processor for compute
// calls, and posts the completion event. Exposed for recovery probes.
void dispatch_call(EngineContext& ctx, Phase& phase, const std::string& id, int proc_idx);

}  // namespace callflow
