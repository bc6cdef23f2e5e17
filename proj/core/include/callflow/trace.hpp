#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "callflow/exec.hpp"

namespace callflow {

enum class TraceEventKind { Scheduled, Dispatched, Started, Finished, Failed, Recovered };

const char* to_string(TraceEventKind k);

// One line of the run trace. `processor` is "p1".."pN", "io-pool", or empty
// (serialized as null) for events without a processor.
struct TraceEvent {
  Tick t = 0;
  TraceEventKind event = TraceEventKind::Scheduled;
  std::string call;
  std::string processor;
  std::string detail;

  friend bool operator==(const TraceEvent&, const TraceEvent&) = default;
};

struct TraceError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Append-only event log, totally ordered by (time, append sequence).
// Appends happen under the engine lock, so the order is deterministic
// whenever the run itself is.
class TraceLog {
 public:
  void append(Tick t, TraceEventKind ev, std::string call, std::string processor,
              std::string detail = {});
  const std::vector<TraceEvent>& events() const { return events_; }
  std::size_t size() const { return events_.size(); }

  // Newline-delimited JSON records {"t": .., "event": .., "call": ..,
  // "processor": .., "detail": ..}, one per event, in append order.
  std::string to_ndjson() const;

  static std::vector<TraceEvent> parse_ndjson(const std::string& text);  // throws TraceError

 private:
  std::vector<TraceEvent> events_;
};

}  // namespace callflow
