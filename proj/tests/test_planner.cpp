#include <cstdlib>
#include <string>

#include "callflow/planner.hpp"
#include "doctest.h"
#include "json.hpp"

using namespace callflow;

TEST_CASE("token counting is whitespace-word counting") {
  CHECK(count_tokens("") == 0);
  CHECK(count_tokens("one") == 1);
  CHECK(count_tokens("  a \t b\nc  ") == 3);
  CHECK(count_tokens("s1: search(query=\"x\")") == 2);
}

TEST_CASE("prompts carry the task, the examples, and the error context") {
  PlannerRequest req;
  req.purpose = PlannerPurpose::Translate;
  req.query = "summarize the news";
  req.few_shots = "s1: search(query=\"demo\")";
  std::string p = build_prompt(req);
  CHECK(p.find("sN: tool(arguments)") != std::string::npos);
  CHECK(p.find("Examples:\ns1: search(query=\"demo\")") != std::string::npos);
  CHECK(p.find("Task: summarize the news") != std::string::npos);
  CHECK(p.find("Context:") == std::string::npos);  // no error yet

  req.purpose = PlannerPurpose::RepairRuntime;
  req.error_context = "Failed call: s2";
  std::string r = build_prompt(req);
  CHECK(r.find("Return a replacement for the named call") != std::string::npos);
  CHECK(r.find("Context:\nFailed call: s2") != std::string::npos);
}

TEST_CASE("responses are token-accounted and counted per call") {
  MockPlanner mock({{"translate", "", "", {"s1: self(prompt=\"hi\")"}, 0}});
  auto resp = mock.translate("do the thing", "example text here");
  CHECK(resp.text == "s1: self(prompt=\"hi\")");
  PlannerRequest req;
  req.purpose = PlannerPurpose::Translate;
  req.query = "do the thing";
  req.few_shots = "example text here";
  CHECK(resp.tokens.input == count_tokens(build_prompt(req)));
  CHECK(resp.tokens.output == count_tokens(resp.text));
  CHECK(mock.calls_made() == 1);
  CHECK(mock.total_tokens().input == resp.tokens.input);
  CHECK(mock.total_tokens().output == resp.tokens.output);

  mock.translate("do the thing", "");
  CHECK(mock.calls_made() == 2);
  CHECK(mock.total_tokens().output == 2 * resp.tokens.output);
}

TEST_CASE("the plan book matches in order: kind, exact query, error substring") {
  MockPlanner mock({{"translate", "alpha", "", {"plan-for-alpha"}, 0},
                    {"repair", "", "division by zero", {"fixed-div"}, 0},
                    {"", "", "", {"fallback"}, 0}});
  CHECK(mock.translate("alpha", "").text == "plan-for-alpha");
  CHECK(mock.translate("beta", "").text == "fallback");
  CHECK(mock.repair(PlannerPurpose::RepairRuntime, "alpha", "fault: division by zero in s3", "")
            .text == "fixed-div");
  CHECK(mock.repair(PlannerPurpose::RepairCompile, "alpha", "some other error", "").text ==
        "fallback");
}

TEST_CASE("entries hand out their responses round-robin") {
  MockPlanner mock({{"", "", "", {"first", "second"}, 0}});
  CHECK(mock.translate("q", "").text == "first");
  CHECK(mock.translate("q", "").text == "second");
  CHECK(mock.translate("q", "").text == "first");
}

TEST_CASE("an unmatched request is an error, not a silent empty plan") {
  MockPlanner mock({{"translate", "only-this", "", {"x"}, 0}});
  CHECK_THROWS_AS(mock.translate("something else", ""), PlannerError);
  MockPlanner empty;
  CHECK_THROWS_AS(empty.translate("anything", ""), PlannerError);
}

TEST_CASE("plan books load from json, singular or plural response keys") {
  auto mock = MockPlanner::from_json(R"({
    "entries": [
      {"kind": "translate", "query": "q1", "response": "single"},
      {"kind": "repair", "error_contains": "boom", "responses": ["r1", "r2"]}
    ]
  })");
  CHECK(mock.translate("q1", "").text == "single");
  CHECK(mock.repair(PlannerPurpose::RepairRuntime, "q1", "it went boom", "").text == "r1");

  CHECK_THROWS_AS(MockPlanner::from_json("not json at all"), PlannerError);
  CHECK_THROWS_AS(MockPlanner::from_json("{\"no_entries\": 1}"), PlannerError);
}

TEST_CASE("the book's consumption state is observable") {
  MockPlanner mock({{"", "", "", {"a", "b"}, 0}});
  mock.translate("q", "");
  auto state = nlohmann::json::parse(mock.state_json());
  REQUIRE(state["entries"].size() == 1);
  CHECK(state["entries"][0]["next"] == 1);
  CHECK(state["entries"][0]["responses"].size() == 2);
}

TEST_CASE("the http planner refuses to start without an endpoint") {
  ::unsetenv("CALLFLOW_PLANNER_URL");
  CHECK_THROWS_AS(HttpPlanner::from_env(), PlannerError);

  ::setenv("CALLFLOW_PLANNER_URL", "http://localhost:9", 1);
  ::setenv("CALLFLOW_PLANNER_MODEL", "toy", 1);
  auto planner = HttpPlanner::from_env();
  CHECK(planner.config().base_url == "http://localhost:9");
  CHECK(planner.config().model == "toy");
  ::unsetenv("CALLFLOW_PLANNER_URL");
  ::unsetenv("CALLFLOW_PLANNER_MODEL");
}
