#include "callflow/scheduler.hpp"

#include <map>
#include <set>

namespace callflow {

void run_scheduler(Exec& ex, const RelationGraph& graph, const std::vector<std::string>& subset,
                   Channel<Batch>& to_coord, Channel<Completions>& from_coord, TraceLog& trace,
                   const SchedulerOptions& opts) {
  auto lk = ex.lock();

  std::set<std::string> member(subset.begin(), subset.end());
  std::map<std::string, int> indeg;
  for (const auto& id : subset) indeg[id] = 0;
  for (const auto& e : graph.data_edges)
    if (member.count(e.from) && member.count(e.to)) ++indeg[e.to];

  std::set<std::string> sent;
  auto send_batch = [&](const std::set<std::string>& ready) {
    Batch batch;
    for (const auto& n : graph.nodes)  // canonical plan order within a batch
      if (ready.count(n.id)) batch.push_back(n.id);
    for (const auto& id : batch) {
      sent.insert(id);
      trace.append(ex.now(), TraceEventKind::Scheduled, id, "",
                   "rank=" + std::to_string(graph.rank_of(id)));
    }
    to_coord.send(ex, lk, std::move(batch));
  };

  std::set<std::string> initial;
  for (const auto& id : subset)
    if (indeg[id] == 0) initial.insert(id);
  send_batch(initial);

  while (sent.size() < member.size()) {
    auto msg = from_coord.recv(ex, lk);
    if (!msg) break;  // coordinator finished the phase (or the engine drained)
    std::set<std::string> ready;
    for (const auto& done : *msg) {
      for (const auto& e : graph.data_edges) {
        if (e.from != done || !member.count(e.to) || sent.count(e.to) || ready.count(e.to))
          continue;
        bool release = opts.strict_release
                           ? graph.rank_of(e.to) == graph.rank_of(done) + 1
                           : --indeg[e.to] == 0;
        if (release) ready.insert(e.to);
      }
    }
    if (!ready.empty()) send_batch(ready);
  }
  to_coord.close(ex, lk);
}

}  // namespace callflow
