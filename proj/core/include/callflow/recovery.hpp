#pragma once

#include <optional>
#include <string>
#include <vector>

#include "callflow/callseq.hpp"
#include "callflow/coordinator.hpp"
#include "callflow/planner.hpp"
#include "callflow/relation.hpp"

namespace callflow {

// A call that failed at run time. Kind is unknown until the probe re-execution
// classifies it: transient failures vanish on a retry with identical
// arguments, data-dependent ones keep failing until an upstream call changes.
struct Fault {
  enum class Kind { Unknown, SelfContained, DataDependent };
  std::string call;
  std::string message;
  ResolvedArgs args_at_failure;
  Kind kind = Kind::Unknown;
};

// --- compile-time recovery -------------------------------------------------

struct CompileRecoveryResult {
  std::optional<CallSequence> sequence;
  std::string final_text;   // the text that parsed, when sequence is set
  int planner_calls = 0;    // repairs + retranslations issued here
  TokenCounts tokens;
  std::string fatal;        // non-empty when every attempt was exhausted
  bool ok() const { return sequence.has_value(); }
};

// Repair loop for plans that fail to compile: up to max_repairs repair
// requests carrying the error message and the erroneous text, then up to
// max_retranslations fresh translations with the sampling temperature raised
// by 0.3 per retry (capped at 1.0). Gives up with a fatal message after that.
CompileRecoveryResult compile_time_recover(const std::string& query, std::string bad_text,
                                           CompileError error, Planner& planner,
                                           const std::string& few_shots, int max_repairs = 3,
                                           int max_retranslations = 2,
                                           double base_temperature = 0.0);

// --- runtime recovery ------------------------------------------------------

// Closest ancestors of the failed call: its minimum-rank direct predecessors,
// or the call itself when it has none.
std::vector<std::string> find_recovery_points(const RelationGraph& g, const std::string& failed);

// Validates a proposed replacement for `original`: must parse as exactly one
// call with the same id, a function of the same kind, and no references the
// original didn't already have. Returns the parsed call or an explanation.
struct RepairValidation {
  std::optional<FunctionCall> call;
  std::string rejection;
  bool ok() const { return call.has_value(); }
};
RepairValidation validate_repair(const RelationGraph& g, const ToolManifest& manifest,
                                 const FunctionCall& original, const std::string& proposed_text);

struct RecoveryReport {
  bool success = false;
  int attempts = 0;       // outer loop iterations used
  int errors_raised = 0;  // distinct calls that ever failed
  int errors_fixed = 0;   // of those, completed by the end
  TokenCounts repair_tokens;
  std::vector<std::string> repaired_calls;  // points spliced with planner output
};

// Recovery driver: prune unexecuted work, probe each fault once with
// identical arguments (success means it was transient), repair the recovery
// points of the persistent ones through the planner, and re-run the points
// plus their data-dependent descendants through the normal scheduler and
// coordinator. Repeats up to max_attempts times. Mutates `graph` in place
// when splicing repaired calls; `ctx.graph` must alias it.
RecoveryReport runtime_recover(EngineContext& ctx, RelationGraph& graph,
                               const ToolManifest& manifest, std::vector<Fault> faults,
                               Planner* planner, int max_attempts,
                               const std::string& query = {});

}  // namespace callflow
