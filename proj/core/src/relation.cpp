#include "callflow/relation.hpp"

#include <algorithm>
#include <deque>
#include <map>
#include <set>

#include "json.hpp"

namespace callflow {

using ordered = nlohmann::ordered_json;

MutexPair make_mutex_pair(std::string x, std::string y) {
  int nx = call_id_number(x), ny = call_id_number(y);
  bool swap = nx >= 0 && ny >= 0 ? nx > ny : x > y;
  if (swap) std::swap(x, y);
  return MutexPair{std::move(x), std::move(y)};
}

int RelationGraph::index_of(std::string_view id) const {
  for (std::size_t i = 0; i < nodes.size(); ++i)
    if (nodes[i].id == id) return static_cast<int>(i);
  return -1;
}

const FrgNode* RelationGraph::node(std::string_view id) const {
  int i = index_of(id);
  return i < 0 ? nullptr : &nodes[i];
}

FrgNode* RelationGraph::node(std::string_view id) {
  int i = index_of(id);
  return i < 0 ? nullptr : &nodes[i];
}

int RelationGraph::rank_of(std::string_view id) const {
  const FrgNode* n = node(id);
  return n ? n->rank : 0;
}

int RelationGraph::max_rank() const {
  int r = 0;
  for (const auto& n : nodes) r = std::max(r, n.rank);
  return r;
}

std::vector<std::string> RelationGraph::predecessors(std::string_view id) const {
  std::vector<std::string> out;
  for (const auto& e : data_edges)
    if (e.to == id) out.push_back(e.from);
  return out;
}

std::vector<std::string> RelationGraph::successors(std::string_view id) const {
  std::vector<std::string> out;
  for (const auto& e : data_edges)
    if (e.from == id) out.push_back(e.to);
  return out;
}

bool RelationGraph::is_mutex(std::string_view a, std::string_view b) const {
  for (const auto& p : mutex_pairs)
    if ((p.a == a && p.b == b) || (p.a == b && p.b == a)) return true;
  return false;
}

std::vector<std::string> RelationGraph::descendants_of(std::string_view id) const {
  std::set<std::string> seen;
  std::deque<std::string> frontier{std::string(id)};
  while (!frontier.empty()) {
    std::string cur = std::move(frontier.front());
    frontier.pop_front();
    for (const auto& e : data_edges)
      if (e.from == cur && seen.insert(e.to).second) frontier.push_back(e.to);
  }
  std::vector<std::string> out;
  for (const auto& n : nodes)
    if (seen.count(n.id)) out.push_back(n.id);
  return out;
}

std::vector<DataEdge> build_data_edges(const CallSequence& seq) {
  std::vector<DataEdge> edges;
  for (const auto& call : seq.calls)
    for (const auto& ref : collect_refs(call)) edges.push_back({ref, call.id});
  return edges;
}

std::vector<int> assign_ranks(const CallSequence& seq, const std::vector<DataEdge>& edges) {
  const std::size_t n = seq.calls.size();
  std::map<std::string, int> index;
  for (std::size_t i = 0; i < n; ++i) index[seq.calls[i].id] = static_cast<int>(i);

  std::vector<int> indeg(n, 0);
  std::vector<std::vector<int>> succ(n);
  for (const auto& e : edges) {
    auto fi = index.find(e.from), ti = index.find(e.to);
    if (fi == index.end() || ti == index.end())
      throw CycleError("edge endpoint not in sequence: " + e.from + " -> " + e.to);
    succ[fi->second].push_back(ti->second);
    ++indeg[ti->second];
  }

  std::vector<int> rank(n, 0);
  std::deque<int> queue;
  for (std::size_t i = 0; i < n; ++i)
    if (indeg[i] == 0) {
      rank[i] = 1;
      queue.push_back(static_cast<int>(i));
    }
  std::size_t visited = 0;
  while (!queue.empty()) {
    int u = queue.front();
    queue.pop_front();
    ++visited;
    for (int v : succ[u]) {
      rank[v] = std::max(rank[v], rank[u] + 1);
      if (--indeg[v] == 0) queue.push_back(v);
    }
  }
  if (visited != n) throw CycleError("call dependencies form a cycle");
  return rank;
}

bool mutex_general(const ResourceProfile& a, const ResourceProfile& b, const CapacityVector& cap) {
  return a.cpu + b.cpu > cap.cpu || a.mem + b.mem > cap.mem ||
         a.gpu_mem + b.gpu_mem > cap.gpu_mem || a.io + b.io > cap.io;
}

std::vector<MutexPair> build_mutex_pairs(const CallSequence& seq, const std::vector<int>& ranks,
                                         const ToolManifest& manifest, MutexModel model,
                                         const CapacityVector& cap) {
  const std::size_t n = seq.calls.size();
  auto kind_of = [&](std::size_t i) {
    const ToolSpec* t = manifest.find(seq.calls[i].function);
    return t ? t->kind : FunctionKind::Inout;  // unregistered "self"-style calls act as inout
  };
  auto profile_of = [&](std::size_t i) {
    const ToolSpec* t = manifest.find(seq.calls[i].function);
    return t ? t->profile : default_profile(FunctionKind::Inout);
  };

  std::vector<MutexPair> pairs;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      if (ranks[i] != ranks[j]) continue;
      bool conflict = model == MutexModel::Simplified
                          ? kind_of(i) == FunctionKind::Compute &&
                                kind_of(j) == FunctionKind::Compute
                          : mutex_general(profile_of(i), profile_of(j), cap);
      if (conflict) pairs.push_back(make_mutex_pair(seq.calls[i].id, seq.calls[j].id));
    }
  }
  return pairs;
}

RelationGraph build_frg(const CallSequence& seq, const ToolManifest& manifest, MutexModel model,
                        const CapacityVector& cap) {
  RelationGraph g;
  g.seq = seq;
  g.data_edges = build_data_edges(seq);
  std::vector<int> ranks = assign_ranks(seq, g.data_edges);
  g.mutex_pairs = build_mutex_pairs(seq, ranks, manifest, model, cap);
  for (std::size_t i = 0; i < seq.calls.size(); ++i) {
    const auto& call = seq.calls[i];
    FrgNode node;
    node.id = call.id;
    node.function = call.function;
    if (const ToolSpec* t = manifest.find(call.function)) {
      node.kind = t->kind;
      node.mode = t->mode;
      node.profile = t->profile;
    } else {
      node.kind = FunctionKind::Inout;
      node.mode = ModeFlag::Block;
      node.profile = default_profile(FunctionKind::Inout);
    }
    node.rank = ranks[i];
    g.nodes.push_back(std::move(node));
  }
  return g;
}

std::string graph_to_json(const RelationGraph& g) {
  ordered root;
  root["schema_version"] = 1;
  root["calls"] = ordered::array();
  for (const auto& n : g.nodes) {
    ordered jn;
    jn["id"] = n.id;
    jn["function"] = n.function;
    jn["kind"] = to_string(n.kind);
    jn["mode"] = to_string(n.mode);
    jn["rank"] = n.rank;
    root["calls"].push_back(std::move(jn));
  }
  root["data_edges"] = ordered::array();
  for (const auto& e : g.data_edges)
    root["data_edges"].push_back(ordered{{"from", e.from}, {"to", e.to}});
  root["mutex_pairs"] = ordered::array();
  for (const auto& p : g.mutex_pairs) root["mutex_pairs"].push_back(ordered::array({p.a, p.b}));
  return root.dump(2) + "\n";
}

}  // namespace callflow
