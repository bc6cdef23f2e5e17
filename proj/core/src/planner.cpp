#include "callflow/planner.hpp"

#include <cctype>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "httplib.h"
#include "json.hpp"

namespace callflow {

using ordered = nlohmann::ordered_json;

std::int64_t count_tokens(std::string_view text) {
  std::int64_t n = 0;
  bool in_word = false;
  for (char c : text) {
    bool space = std::isspace(static_cast<unsigned char>(c));
    if (!space && !in_word) ++n;
    in_word = !space;
  }
  return n;
}

std::string build_prompt(const PlannerRequest& req) {
  std::ostringstream os;
  switch (req.purpose) {
    case PlannerPurpose::Translate:
      os << "Translate the task into a plan of tool calls, one per line, each of the form "
            "'sN: tool(arguments)'. Later calls may reference earlier results by id.\n";
      break;
    case PlannerPurpose::RepairCompile:
      os << "The plan below failed to compile. Return a corrected plan, one call per line.\n";
      break;
    case PlannerPurpose::RepairRuntime:
      os << "A call in the running plan failed. Return a replacement for the named call as a "
            "single line in the same form.\n";
      break;
  }
  if (!req.few_shots.empty()) os << "\nExamples:\n" << req.few_shots << '\n';
  if (!req.error_context.empty()) os << "\nContext:\n" << req.error_context << '\n';
  os << "\nTask: " << req.query << '\n';
  return os.str();
}

PlannerResponse Planner::respond(const PlannerRequest& req) {
  PlannerResponse resp = respond_impl(req);
  resp.tokens.input = count_tokens(build_prompt(req));
  resp.tokens.output = count_tokens(resp.text);
  ++calls_made_;
  total_ += resp.tokens;
  return resp;
}

PlannerResponse Planner::translate(const std::string& query, const std::string& few_shots,
                                   double temperature) {
  PlannerRequest req;
  req.purpose = PlannerPurpose::Translate;
  req.query = query;
  req.few_shots = few_shots;
  req.temperature = temperature;
  return respond(req);
}

PlannerResponse Planner::repair(PlannerPurpose purpose, const std::string& query,
                                const std::string& error_context, const std::string& few_shots,
                                double temperature) {
  PlannerRequest req;
  req.purpose = purpose;
  req.query = query;
  req.error_context = error_context;
  req.few_shots = few_shots;
  req.temperature = temperature;
  return respond(req);
}

namespace {

bool kind_matches(const std::string& kind, PlannerPurpose purpose) {
  if (kind.empty()) return true;
  if (kind == "translate") return purpose == PlannerPurpose::Translate;
  if (kind == "repair")
    return purpose == PlannerPurpose::RepairCompile || purpose == PlannerPurpose::RepairRuntime;
  return false;
}

}  // namespace

PlannerResponse MockPlanner::respond_impl(const PlannerRequest& req) {
  for (auto& e : entries_) {
    if (!kind_matches(e.kind, req.purpose)) continue;
    if (!e.query.empty() && e.query != req.query) continue;
    if (!e.error_contains.empty() && req.error_context.find(e.error_contains) == std::string::npos)
      continue;
    if (e.responses.empty()) continue;
    PlannerResponse resp;
    resp.text = e.responses[static_cast<std::size_t>(e.next) % e.responses.size()];
    ++e.next;
    return resp;
  }
  throw PlannerError("the plan book has no entry matching this request");
}

MockPlanner MockPlanner::from_json(const std::string& json_text) {
  ordered root = ordered::parse(json_text, nullptr, false);
  if (root.is_discarded() || !root.is_object() || !root.contains("entries"))
    throw PlannerError("plan book must be a JSON object with an 'entries' array");
  std::vector<Entry> entries;
  for (const auto& je : root["entries"]) {
    Entry e;
    e.kind = je.value("kind", std::string());
    e.query = je.value("query", std::string());
    e.error_contains = je.value("error_contains", std::string());
    if (je.contains("responses"))
      for (const auto& r : je["responses"]) e.responses.push_back(r.get<std::string>());
    if (je.contains("response")) e.responses.push_back(je["response"].get<std::string>());
    entries.push_back(std::move(e));
  }
  return MockPlanner(std::move(entries));
}

MockPlanner MockPlanner::from_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw PlannerError("cannot open plan book: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return from_json(buf.str());
}

std::string MockPlanner::state_json() const {
  ordered root;
  root["entries"] = ordered::array();
  for (const auto& e : entries_) {
    ordered je;
    je["kind"] = e.kind;
    je["query"] = e.query;
    je["error_contains"] = e.error_contains;
    je["responses"] = e.responses;
    je["next"] = e.next;
    root["entries"].push_back(std::move(je));
  }
  return root.dump(2) + "\n";
}

HttpPlanner HttpPlanner::from_env() {
  const char* url = std::getenv("CALLFLOW_PLANNER_URL");
  if (!url || !*url)
    throw PlannerError("CALLFLOW_PLANNER_URL is not set; the http planner needs an endpoint");
  Config cfg;
  cfg.base_url = url;
  if (const char* m = std::getenv("CALLFLOW_PLANNER_MODEL"); m && *m) cfg.model = m;
  if (const char* k = std::getenv("CALLFLOW_PLANNER_KEY"); k && *k) cfg.api_key = k;
  if (const char* t = std::getenv("CALLFLOW_PLANNER_TIMEOUT_MS"); t && *t) cfg.timeout_ms = std::atoi(t);
  return HttpPlanner(std::move(cfg));
}

PlannerResponse HttpPlanner::respond_impl(const PlannerRequest& req) {
  httplib::Client client(cfg_.base_url);
  client.set_connection_timeout(0, cfg_.timeout_ms * 1000);
  client.set_read_timeout(cfg_.timeout_ms / 1000, (cfg_.timeout_ms % 1000) * 1000);

  ordered body;
  body["model"] = cfg_.model;
  body["temperature"] = req.temperature;
  body["messages"] = ordered::array(
      {ordered{{"role", "system"},
               {"content", "You translate tasks into tool-call plans and repair broken ones."}},
       ordered{{"role", "user"}, {"content", build_prompt(req)}}});

  httplib::Headers headers;
  if (!cfg_.api_key.empty()) headers.emplace("Authorization", "Bearer " + cfg_.api_key);

  auto res = client.Post(cfg_.path, headers, body.dump(), "application/json");
  if (!res)
    throw PlannerError("planner endpoint unreachable: " + cfg_.base_url +
                       " (" + httplib::to_string(res.error()) + ")");
  if (res->status != 200)
    throw PlannerError("planner endpoint returned status " + std::to_string(res->status));

  ordered parsed = ordered::parse(res->body, nullptr, false);
  if (parsed.is_discarded())
    throw PlannerError("planner endpoint returned a body that is not JSON");
  try {
    PlannerResponse out;
    out.text = parsed.at("choices").at(0).at("message").at("content").get<std::string>();
    return out;
  } catch (const ordered::exception&) {
    throw PlannerError("planner endpoint response lacks choices[0].message.content");
  }
}

}  // namespace callflow
