#pragma once

#include <cstdint>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

namespace callflow {

enum class PlannerPurpose { Translate, RepairCompile, RepairRuntime };

struct TokenCounts {
  std::int64_t input = 0, output = 0;
  TokenCounts& operator+=(const TokenCounts& o) {
    input += o.input;
    output += o.output;
    return *this;
  }
};

struct PlannerRequest {
  PlannerPurpose purpose = PlannerPurpose::Translate;
  std::string query;
  std::string error_context;  // compile error or runtime failure context
  std::string few_shots;      // example plans pasted into the prompt
  double temperature = 0.0;
};

struct PlannerResponse {
  std::string text;  // plan text (translate) or replacement call text (repair)
  TokenCounts tokens;
};

struct PlannerError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Whitespace-delimited token count, the mock's stand-in for a tokenizer.
std::int64_t count_tokens(std::string_view text);

// Builds the user-facing prompt for a request (shared by mock token
// accounting and the HTTP client).
std::string build_prompt(const PlannerRequest& req);

class Planner {
 public:
  virtual ~Planner() = default;

  PlannerResponse respond(const PlannerRequest& req);

  PlannerResponse translate(const std::string& query, const std::string& few_shots,
                            double temperature = 0.0);
  PlannerResponse repair(PlannerPurpose purpose, const std::string& query,
                         const std::string& error_context, const std::string& few_shots,
                         double temperature = 0.0);

  int calls_made() const { return calls_made_; }
  const TokenCounts& total_tokens() const { return total_; }

 private:
  virtual PlannerResponse respond_impl(const PlannerRequest& req) = 0;
  int calls_made_ = 0;
  TokenCounts total_;
};

// Scripted planner: a plan book of entries matched by purpose, query, and an
// optional error-context substring; each entry's responses are consumed
// round-robin. Fully deterministic, serializable counters included.
class MockPlanner : public Planner {
 public:
  struct Entry {
    std::string kind;            // "translate", "repair", or "" (any)
    std::string query;           // exact match; "" matches any query
    std::string error_contains;  // substring of error_context; "" matches any
    std::vector<std::string> responses;
    int next = 0;
  };

  MockPlanner() = default;
  explicit MockPlanner(std::vector<Entry> entries) : entries_(std::move(entries)) {}

  static MockPlanner from_json(const std::string& json_text);
  static MockPlanner from_file(const std::string& path);
  std::string state_json() const;

  void add(Entry e) { entries_.push_back(std::move(e)); }

 private:
  PlannerResponse respond_impl(const PlannerRequest& req) override;
  std::vector<Entry> entries_;
};

// Minimal chat-completions client. Configuration comes from the constructor
// or the CALLFLOW_PLANNER_URL / _MODEL / _KEY / _TIMEOUT_MS environment.
class HttpPlanner : public Planner {
 public:
  struct Config {
    std::string base_url;  // e.g. "http://localhost:8080"
    std::string path = "/v1/chat/completions";
    std::string model = "default";
    std::string api_key;
    int timeout_ms = 30000;
  };

  explicit HttpPlanner(Config cfg) : cfg_(std::move(cfg)) {}
  static HttpPlanner from_env();  // throws PlannerError if unconfigured

  const Config& config() const { return cfg_; }

 private:
  PlannerResponse respond_impl(const PlannerRequest& req) override;
  Config cfg_;
};

}  // namespace callflow
