#include "callflow/trace.hpp"

#include <sstream>

#include "json.hpp"

namespace callflow {

using ordered = nlohmann::ordered_json;

const char* to_string(TraceEventKind k) {
  switch (k) {
    case TraceEventKind::Scheduled: return "SCHEDULED";
    case TraceEventKind::Dispatched: return "DISPATCHED";
    case TraceEventKind::Started: return "STARTED";
    case TraceEventKind::Finished: return "FINISHED";
    case TraceEventKind::Failed: return "FAILED";
    case TraceEventKind::Recovered: return "RECOVERED";
  }
  return "?";
}

namespace {

TraceEventKind kind_from_string(const std::string& s) {
  if (s == "SCHEDULED") return TraceEventKind::Scheduled;
  if (s == "DISPATCHED") return TraceEventKind::Dispatched;
  if (s == "STARTED") return TraceEventKind::Started;
  if (s == "FINISHED") return TraceEventKind::Finished;
  if (s == "FAILED") return TraceEventKind::Failed;
  if (s == "RECOVERED") return TraceEventKind::Recovered;
  throw TraceError("unknown trace event kind: " + s);
}

}  // namespace

void TraceLog::append(Tick t, TraceEventKind ev, std::string call, std::string processor,
                      std::string detail) {
  events_.push_back({t, ev, std::move(call), std::move(processor), std::move(detail)});
}

std::string TraceLog::to_ndjson() const {
  std::ostringstream os;
  for (const auto& e : events_) {
    ordered j;
    j["t"] = e.t;
    j["event"] = to_string(e.event);
    j["call"] = e.call;
    if (e.processor.empty())
      j["processor"] = nullptr;
    else
      j["processor"] = e.processor;
    j["detail"] = e.detail;
    os << j.dump() << '\n';
  }
  return os.str();
}

std::vector<TraceEvent> TraceLog::parse_ndjson(const std::string& text) {
  std::vector<TraceEvent> out;
  std::istringstream is(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    ordered j = ordered::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object())
      throw TraceError("trace line " + std::to_string(lineno) + " is not a JSON object");
    TraceEvent e;
    try {
      e.t = j.at("t").get<Tick>();
      e.event = kind_from_string(j.at("event").get<std::string>());
      e.call = j.at("call").get<std::string>();
      const auto& p = j.at("processor");
      e.processor = p.is_null() ? std::string() : p.get<std::string>();
      e.detail = j.value("detail", std::string());
    } catch (const ordered::exception& ex) {
      throw TraceError("trace line " + std::to_string(lineno) + ": " + ex.what());
    }
    out.push_back(std::move(e));
  }
  return out;
}

}  // namespace callflow
