#include <memory>
#include <string>
#include <vector>

#include "callflow/callseq.hpp"
#include "callflow/manifest.hpp"
#include "callflow/relation.hpp"
#include "callflow/scheduler.hpp"
#include "callflow/trace.hpp"
#include "doctest.h"

using namespace callflow;

namespace {

// Diamond-plus-join shape: two sources, two mid-rank consumers of s1, one sink.
constexpr const char* kDiamondPlan =
    "s1: probe(target=\"a\")\n"
    "s2: probe(target=\"b\")\n"
    "s3: refine(input=s1)\n"
    "s4: refine(input=s1)\n"
    "s5: join(a=s2, b=s3, c=s4)\n";

struct Fixture {
  CallSequence seq;
  ToolManifest manifest;
  RelationGraph graph;
};

Fixture make_fixture(const char* plan = kDiamondPlan) {
  Fixture f;
  auto parsed = parse_sequence(plan);
  REQUIRE(parsed.ok());
  f.seq = *parsed.sequence;
  for (const auto& call : f.seq.calls)
    if (!f.manifest.knows(call.function))
      f.manifest.tools.push_back({call.function, FunctionKind::Compute, ModeFlag::Block,
                                  default_profile(FunctionKind::Compute), {10, 10},
                                  ResultKind::Text});
  f.graph = build_frg(f.seq, f.manifest);
  return f;
}

// Runs the scheduler against a scripted coordinator that reports one batch of
// completions per virtual tick, regardless of what got released in between.
// Returns the release batches in arrival order.
std::vector<Batch> drive(const RelationGraph& graph, const std::vector<std::string>& subset,
                         std::vector<Completions> script, TraceLog& trace,
                         SchedulerOptions opts = {}) {
  auto ex = make_exec(ClockMode::Virtual);
  Channel<Batch> to_coord;
  Channel<Completions> from_coord;
  std::vector<Batch> seen;
  ex->spawn("scheduler", [&] {
    run_scheduler(*ex, graph, subset, to_coord, from_coord, trace, opts);
  });
  ex->spawn("sink", [&] {
    auto lk = ex->lock();
    while (auto batch = to_coord.recv(*ex, lk)) seen.push_back(*batch);
  });
  ex->spawn("driver", [&] {
    auto lk = ex->lock();
    for (const auto& step : script) {
      if (!sleep_for(*ex, lk, 1)) return;
      from_coord.send(*ex, lk, step);
    }
    if (!sleep_for(*ex, lk, 1)) return;
    from_coord.close(*ex, lk);
  });
  ex->run();
  return seen;
}

}  // namespace

TEST_CASE("a call is only released once every data dependency completed") {
  auto f = make_fixture();
  std::vector<std::string> all = {"s1", "s2", "s3", "s4", "s5"};
  TraceLog trace;
  // Complete one predecessor of the join at a time; the join must wait for all.
  auto batches = drive(f.graph, all, {{"s1"}, {"s3"}, {"s4", "s2"}, {"s5"}}, trace);
  REQUIRE(batches.size() == 3);
  CHECK(batches[0] == Batch{"s1", "s2"});
  CHECK(batches[1] == Batch{"s3", "s4"});  // released by s1 alone
  CHECK(batches[2] == Batch{"s5"});        // not before s2, s3 AND s4 are done
}

TEST_CASE("completions that leave dependencies open release nothing") {
  auto f = make_fixture();
  std::vector<std::string> all = {"s1", "s2", "s3", "s4", "s5"};
  TraceLog trace;
  // s2 and s3 done, s4 still running: no batch may carry s5 yet.
  auto batches = drive(f.graph, all, {{"s2"}, {"s3"}, {"s1"}}, trace);
  // Initial {s1,s2}; then {s2} and {s3} release nothing; {s1} releases {s3,s4}.
  REQUIRE(batches.size() == 2);
  CHECK(batches[1] == Batch{"s3", "s4"});
  for (const auto& b : batches)
    for (const auto& id : b) CHECK(id != "s5");
}

TEST_CASE("literal one-predecessor release fires early by design") {
  auto f = make_fixture();
  std::vector<std::string> all = {"s1", "s2", "s3", "s4", "s5"};
  SchedulerOptions opts;
  opts.strict_release = true;
  TraceLog trace;
  // s3 (rank 2) completing releases s5 (rank 3) even though s2 and s4 are
  // still outstanding — the known hazard of the adjacent-rank rule.
  auto batches = drive(f.graph, all, {{"s1"}, {"s3"}}, trace, opts);
  REQUIRE(batches.size() == 3);
  CHECK(batches[2] == Batch{"s5"});
}

TEST_CASE("subset runs treat outside edges as satisfied") {
  auto f = make_fixture();
  TraceLog trace;
  // Re-run of {s3,s4,s5}: s1 and s2 are outside, so s3/s4 start immediately
  // and s5 waits only for the inside predecessors.
  auto batches = drive(f.graph, {"s3", "s4", "s5"}, {{"s3", "s4"}, {"s5"}}, trace);
  REQUIRE(batches.size() == 2);
  CHECK(batches[0] == Batch{"s3", "s4"});
  CHECK(batches[1] == Batch{"s5"});
}

TEST_CASE("scheduler unwinds cleanly when the coordinator closes early") {
  auto f = make_fixture();
  auto ex = make_exec(ClockMode::Virtual);
  Channel<Batch> to_coord;
  Channel<Completions> from_coord;
  TraceLog trace;
  bool scheduler_returned = false;
  ex->spawn("scheduler", [&] {
    run_scheduler(*ex, f.graph, {"s1", "s2", "s3", "s4", "s5"}, to_coord, from_coord, trace, {});
    scheduler_returned = true;
  });
  ex->spawn("coordinator", [&] {
    auto lk = ex->lock();
    (void)to_coord.recv(*ex, lk);
    from_coord.close(*ex, lk);  // phase aborted: nothing will complete
  });
  ex->run();
  CHECK(scheduler_returned);
  CHECK(to_coord.is_closed());
}

TEST_CASE("release announcements carry the call's rank") {
  auto f = make_fixture();
  TraceLog trace;
  drive(f.graph, {"s1", "s2", "s3", "s4", "s5"}, {{"s1", "s2"}, {"s3", "s4"}, {"s5"}}, trace);
  REQUIRE(trace.size() == 5);
  for (const auto& ev : trace.events()) {
    CHECK(ev.event == TraceEventKind::Scheduled);
    CHECK(ev.processor.empty());
    CHECK(ev.detail == "rank=" + std::to_string(f.graph.rank_of(ev.call)));
  }
  // Batches list members in plan order, so the trace does too.
  CHECK(trace.events()[0].call == "s1");
  CHECK(trace.events()[1].call == "s2");
}
