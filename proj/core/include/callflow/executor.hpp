#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "callflow/callseq.hpp"
#include "callflow/exec.hpp"
#include "callflow/manifest.hpp"

namespace callflow {

// What a finished call produced. Number results stay numeric so downstream
// arithmetic expressions can consume them.
struct CallResult {
  ResultKind kind = ResultKind::Text;
  std::string text;
  double number = 0;

  std::string render() const;
  static CallResult of_text(std::string t);
  static CallResult of_number(double n);
  friend bool operator==(const CallResult&, const CallResult&) = default;
};

struct ResolvedArg {
  std::string name;
  CallResult value;
};
using ResolvedArgs = std::vector<ResolvedArg>;

std::string render_resolved(const std::string& function, const ResolvedArgs& args);

// Resolution happens exactly at dispatch time: references are replaced by the
// producing call's result, string placeholders are spliced in, and arithmetic
// is evaluated over numeric operands. Non-numeric operands (and division by
// zero) are runtime type faults, not compile errors.
struct ResolveOutcome {
  std::optional<ResolvedArgs> args;
  std::string fault;  // non-empty on TypeFault
  bool ok() const { return args.has_value(); }
};

using ResultLookup = std::map<std::string, CallResult>;

ResolveOutcome resolve_arguments(const FunctionCall& call, const ResultLookup& results);

// Outcome of running one call body (timing is the engine's business).
struct ExecOutcome {
  std::optional<CallResult> result;
  std::string fault;  // non-empty when the call failed
  bool ok() const { return result.has_value(); }
};

class Executor {
 public:
  virtual ~Executor() = default;
  virtual Tick duration_for(const std::string& call_id, const std::string& function) = 0;
  virtual ExecOutcome execute(const FunctionCall& call, const ResolvedArgs& args) = 0;
};

// Deterministic stand-in tools. Results are pure functions of (call id,
// function, resolved arguments); durations come from the manifest, with
// uniform ranges sampled per call from the run seed; scripted faults fire
// for the first `fail_times` executions of their call.
class SyntheticExecutor : public Executor {
 public:
  SyntheticExecutor(const ToolManifest& manifest, std::uint64_t seed);

  Tick duration_for(const std::string& call_id, const std::string& function) override;
  ExecOutcome execute(const FunctionCall& call, const ResolvedArgs& args) override;

  int executions_of(const std::string& call_id) const;

 private:
  const ToolManifest& manifest_;
  std::uint64_t seed_;
  std::map<std::string, int> executions_;
  std::map<std::string, int> remaining_failures_;
};

}  // namespace callflow
