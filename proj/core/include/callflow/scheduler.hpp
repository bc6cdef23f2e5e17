#pragma once

#include <string>
#include <vector>

#include "callflow/exec.hpp"
#include "callflow/relation.hpp"
#include "callflow/trace.hpp"

namespace callflow {

using Batch = std::vector<std::string>;        // call ids, scheduler -> coordinator
using Completions = std::vector<std::string>;  // call ids, coordinator -> scheduler

struct SchedulerOptions {
  // Literal one-predecessor release: a dependent is sent as soon as any
  // predecessor one rank below it completes, without waiting for the others.
  // Unsound by design; kept for comparison against the tracked release.
  bool strict_release = false;
};

// Sends the ready batch over to_coord, then releases dependents as from_coord
// reports completions. The default release decrements a per-call in-degree
// counter and fires at zero, so a call is never sent before every data
// dependency has completed. Ends when everything in `subset` was sent, or when
// the coordinator closes the channel (faults make some calls unreleasable).
//
// `subset` restricts execution to part of the graph (recovery re-runs);
// edges from outside the subset count as already satisfied.
void run_scheduler(Exec& ex, const RelationGraph& graph, const std::vector<std::string>& subset,
                   Channel<Batch>& to_coord, Channel<Completions>& from_coord, TraceLog& trace,
                   const SchedulerOptions& opts);

}  // namespace callflow
