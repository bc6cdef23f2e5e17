#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "callflow/callseq.hpp"
#include "callflow/manifest.hpp"

namespace callflow {

// Directed def-use edge: `to` consumes the result of `from`.
struct DataEdge {
  std::string from, to;
  friend bool operator==(const DataEdge&, const DataEdge&) = default;
};

// Unordered mutual-exclusion pair, stored with a < b by call-id number.
struct MutexPair {
  std::string a, b;
  friend bool operator==(const MutexPair&, const MutexPair&) = default;
};
MutexPair make_mutex_pair(std::string x, std::string y);

enum class MutexModel { Simplified, General };

struct CycleError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct FrgNode {
  std::string id;
  std::string function;
  FunctionKind kind = FunctionKind::Compute;
  ModeFlag mode = ModeFlag::Block;
  ResourceProfile profile;
  int rank = 0;
};

// Function-call relation graph: the call sequence plus its def-use edges,
// ranks, and mutual-exclusion pairs.
struct RelationGraph {
  CallSequence seq;
  std::vector<FrgNode> nodes;  // sequence order
  std::vector<DataEdge> data_edges;
  std::vector<MutexPair> mutex_pairs;

  int index_of(std::string_view id) const;
  const FrgNode* node(std::string_view id) const;
  FrgNode* node(std::string_view id);
  int rank_of(std::string_view id) const;
  int max_rank() const;
  std::vector<std::string> predecessors(std::string_view id) const;
  std::vector<std::string> successors(std::string_view id) const;
  bool is_mutex(std::string_view a, std::string_view b) const;
  // ids reachable from `id` along data edges, excluding `id`, sequence order
  std::vector<std::string> descendants_of(std::string_view id) const;
};

// Def-use edges from argument references, deduplicated, in definition order.
std::vector<DataEdge> build_data_edges(const CallSequence& seq);

// FIFO topological rank assignment: sources get rank 1, every other call gets
// 1 + the longest data-edge path from any source. Throws CycleError if the
// edge set is cyclic (cannot happen for parsed plans, which forbid forward refs).
std::vector<int> assign_ranks(const CallSequence& seq, const std::vector<DataEdge>& edges);

// General model: do the two calls overload some resource if co-located?
bool mutex_general(const ResourceProfile& a, const ResourceProfile& b, const CapacityVector& cap);

// Equal-rank pairs that must not share a processor. Simplified model pairs
// equal-rank compute calls; the general model compares resource profiles
// against the capacity vector.
std::vector<MutexPair> build_mutex_pairs(const CallSequence& seq, const std::vector<int>& ranks,
                                         const ToolManifest& manifest, MutexModel model,
                                         const CapacityVector& cap);

RelationGraph build_frg(const CallSequence& seq, const ToolManifest& manifest,
                        MutexModel model = MutexModel::Simplified,
                        const CapacityVector& cap = {});

// Stable machine-readable dump (schema_version 1).
std::string graph_to_json(const RelationGraph& g);

}  // namespace callflow
