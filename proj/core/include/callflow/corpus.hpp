#pragma once

#include <cstdint>
#include <string>

#include "callflow/manifest.hpp"

namespace callflow {

// Knobs for the random plan generator. Everything downstream is a pure
// function of the spec, so a (seed, shape) pair names one reproducible plan.
struct RandomPlanSpec {
  std::uint64_t seed = 0;
  int n_calls = 20;
  int max_rank = 6;
  double compute_fraction = 0.5;   // share of calls using compute tools
  double nonblock_fraction = 0.25; // share of inout calls using the nonblocking tool
  bool uniform_durations = false;  // duration ranges instead of fixed values
};

struct GeneratedPlan {
  std::string plan_text;
  ToolManifest manifest;
};

// Builds a random plan whose longest dependency path is exactly min(max_rank,
// feasible) deep: every call picks at least one predecessor one rank above
// (by construction rank targets are met), plus optional extra predecessors of
// any lower rank to exercise skewed joins. Argument shapes rotate between
// bare references, arrays, string placeholders, and numeric arithmetic so the
// whole expression grammar gets coverage.
GeneratedPlan generate_random_plan(const RandomPlanSpec& spec);

}  // namespace callflow
