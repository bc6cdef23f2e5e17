#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace callflow {

enum class FunctionKind { Inout, Compute };
enum class ModeFlag { Block, Nonblock };  // meaningful for inout functions only

const char* to_string(FunctionKind k);
const char* to_string(ModeFlag m);

// Per-call resource demand. io doubles as the LOW/HIGH flag from the
// simplified model: 0 = LOW, 1 = HIGH.
struct ResourceProfile {
  double cpu = 0, mem = 0, gpu_mem = 0, io = 0;
  friend bool operator==(const ResourceProfile&, const ResourceProfile&) = default;
};

struct CapacityVector {
  double cpu = 1, mem = 1024, gpu_mem = 1024, io = 64;
};

// Virtual duration in abstract milliseconds; fixed when min == max, otherwise
// sampled uniformly per call from the run seed.
struct DurationSpec {
  std::int64_t min = 0, max = 0;
  bool fixed() const { return min == max; }
};

enum class ResultKind { Text, Number };

struct ToolSpec {
  std::string name;
  FunctionKind kind = FunctionKind::Compute;
  ModeFlag mode = ModeFlag::Block;
  ResourceProfile profile;
  DurationSpec duration;
  ResultKind result = ResultKind::Text;
};

// Scripted failure for one call id: the call fails (with `message`) on its
// first `fail_times` executions and succeeds afterwards.
struct FaultDirective {
  int fail_times = 1;
  std::string kind = "transient";  // descriptive only; classification is behavioral
  std::string message;
};

ResourceProfile default_profile(FunctionKind kind);
std::int64_t default_duration(FunctionKind kind);  // compute 100, inout 5

struct ToolManifest {
  std::vector<ToolSpec> tools;
  std::map<std::string, FaultDirective> fault_injections;  // keyed by call id

  const ToolSpec* find(std::string_view name) const;
  bool knows(std::string_view name) const { return find(name) != nullptr; }

  // Ensures a default "self" tool (inout, block) is present.
  void ensure_self();
};

struct ManifestError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// JSON (de)serialization. Throws ManifestError on malformed input.
ToolManifest parse_manifest(const std::string& json_text);
ToolManifest load_manifest(const std::string& path);
std::string manifest_to_json(const ToolManifest& m);

}  // namespace callflow
