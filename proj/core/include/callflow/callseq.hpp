#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace callflow {

struct ToolManifest;

// Hard input limits enforced by the parser.
inline constexpr std::size_t kMaxPlanBytes = 1024 * 1024;
inline constexpr std::size_t kMaxPlanCalls = 10000;

// Call ids look like "s1", "s2", ... Returns -1 if the id is not of that form.
int call_id_number(std::string_view id);
bool is_call_id(std::string_view id);

// One piece of a string literal: either literal text or an embedded {sN} reference.
struct TextSegment {
  bool is_ref = false;
  std::string value;  // literal text, or the referenced call id
  friend bool operator==(const TextSegment&, const TextSegment&) = default;
};

// Argument expression. A tagged struct rather than a closed variant so the
// recursive cases (arrays, arithmetic) can share the child vector.
struct Expr {
  enum class Kind { Ref, Number, Text, Array, Binary };
  Kind kind = Kind::Number;

  std::string ref;                 // Kind::Ref: referenced call id
  std::string lexeme;              // Kind::Number: literal as written
  double number = 0.0;             // Kind::Number: parsed value
  std::vector<TextSegment> text;   // Kind::Text
  std::vector<Expr> children;      // Kind::Array elements, Kind::Binary [lhs, rhs]
  char op = 0;                     // Kind::Binary: one of + - * /

  int line = 0, col = 0;  // source position, ignored by equality

  bool operator==(const Expr& o) const;

  static Expr make_ref(std::string id);
  static Expr make_number(std::string lexeme);
  static Expr make_text(std::string literal);  // single literal segment
};

struct Argument {
  std::string name;       // synthesized "argN" for positional arguments
  bool synthetic = false; // true when the name was synthesized from position
  Expr value;
  bool operator==(const Argument& o) const { return name == o.name && value == o.value; }
};

struct FunctionCall {
  std::string id;
  std::string function;  // "self" or a user function name
  std::vector<Argument> args;
  int line = 0, col = 0;

  bool operator==(const FunctionCall& o) const {
    return id == o.id && function == o.function && args == o.args;
  }
};

struct CallSequence {
  std::vector<FunctionCall> calls;

  const FunctionCall* find(std::string_view id) const;
  int index_of(std::string_view id) const;  // -1 if absent
  bool operator==(const CallSequence&) const = default;
};

struct CompileError {
  enum class Kind {
    SyntaxError,
    UndefinedId,
    DuplicateId,
    UseBeforeDef,
    UnknownFunction,
    MalformedPlaceholder,
  };
  Kind kind = Kind::SyntaxError;
  std::string message;  // complete sentence, safe to embed in a repair prompt
  int line = 1, col = 1;
};

const char* to_string(CompileError::Kind k);

struct ParseResult {
  std::optional<CallSequence> sequence;
  std::optional<CompileError> error;
  bool ok() const { return sequence.has_value(); }
};

// Parses plan text into a call sequence. Total: never throws on bad input,
// reports the leftmost-earliest violation instead.
ParseResult parse_sequence(std::string_view text);

// Parses call statements without the cross-reference pass, so a fragment may
// point at calls defined elsewhere. Used to check proposed repair calls.
ParseResult parse_fragment(std::string_view text);

// Canonical rendering; parse(render(s)) is structurally equal to s.
std::string render_call(const FunctionCall& call);
std::string render_sequence(const CallSequence& seq);

// Checks every function name against the manifest ("self" is always known).
std::optional<CompileError> validate_against_registry(const CallSequence& seq,
                                                      const ToolManifest& manifest);

// All call ids referenced by the expression / call, in first-use order, deduplicated.
void collect_refs(const Expr& e, std::vector<std::string>& out);
std::vector<std::string> collect_refs(const FunctionCall& call);

}  // namespace callflow
