#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "callflow/exec.hpp"
#include "callflow/manifest.hpp"
#include "callflow/planner.hpp"
#include "callflow/relation.hpp"
#include "callflow/trace.hpp"

namespace callflow {

enum class Strategy { Sequential, DirectParallel, Coordinated };

const char* to_string(Strategy s);
Strategy strategy_from_string(std::string_view s);  // throws std::invalid_argument

struct RecoveryConfig {
  bool enabled = true;
  int max_attempts = 2;
};

struct RunConfig {
  Strategy strategy = Strategy::Coordinated;
  int processors = 4;
  std::uint64_t seed = 0;
  ClockMode clock = ClockMode::Virtual;
  bool strict_release = false;          // literal one-predecessor scheduling
  bool spread_io = false;               // scatter inout batches across spares
  int io_capacity = 64;                 // async pool admission bound
  Tick sequential_step_overhead = 0;    // extra ticks between sequential steps
  RecoveryConfig recovery;
  std::map<std::string, FaultDirective> fault_injections;  // merged over the manifest's
  std::string query;                    // original user query, for repair prompts
  std::string few_shots;
};

struct RecoveryStats {
  int errors_raised = 0, errors_fixed = 0, attempts = 0;
  friend bool operator==(const RecoveryStats&, const RecoveryStats&) = default;
};

// Pure outcome of a run; every field is reconstructible from the trace.
struct RunReport {
  Tick makespan = 0;
  struct CallSummary {
    Tick start = -1, finish = -1;
    std::string processor;
    std::string status;  // completed | failed | recovered
    std::string result;
    friend bool operator==(const CallSummary&, const CallSummary&) = default;
  };
  std::map<std::string, CallSummary> calls;
  std::map<std::string, double> utilization;  // compute busy share per processor seen
  TokenCounts tokens;                         // planner tokens spent inside the run
  RecoveryStats recovery;
  bool succeeded = true;
  std::string failure;  // first failure, when not succeeded
};

struct RunOutcome {
  RunReport report;
  TraceLog trace;
};

// Executes the graph under the configured strategy and clock. The graph is
// taken by value because runtime recovery may splice repaired calls into it.
// `planner` may be null; runtime recovery then only handles transient faults.
RunOutcome run_plan(RelationGraph graph, const ToolManifest& manifest, const RunConfig& cfg,
                    Planner* planner = nullptr);

// The report is a pure function of the trace; run_plan and the replay command
// share this.
RunReport report_from_trace(const std::vector<TraceEvent>& events);

std::string report_to_json(const RunReport& r);
std::string report_to_text(const RunReport& r);

// --- sweeps ------------------------------------------------------------------

struct SweepRow {
  Strategy strategy = Strategy::Coordinated;
  int processors = 1;
  Tick makespan = 0;
  double speedup = 1.0;  // sequential @ p=1 divided by this makespan
};

struct SweepResult {
  std::vector<SweepRow> rows;
  Tick sequential_baseline = 0;  // sequential makespan at p=1
};

// Runs every strategy at every processor count; speedups are computed against
// the sequential baseline at one processor.
SweepResult scaling_sweep(const RelationGraph& graph, const ToolManifest& manifest,
                          RunConfig base, const std::vector<int>& processor_counts);

std::string sweep_to_text(const SweepResult& s);
std::string sweep_to_json(const SweepResult& s);

// --- side-by-side comparison ---------------------------------------------------

// One labeled report per row, e.g. {"sequential", rep}, {"coordinated", rep}.
// Speedup of row A over row B is B.makespan / A.makespan (self-speedup 1).
// Throws std::invalid_argument when `rows` is empty.
std::string compare_to_text(const std::vector<std::pair<std::string, RunReport>>& rows);
std::string compare_to_json(const std::vector<std::pair<std::string, RunReport>>& rows);

}  // namespace callflow
