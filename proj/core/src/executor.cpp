#include "callflow/executor.hpp"

#include <cmath>
#include <iomanip>
#include <sstream>

namespace callflow {

namespace {

std::string render_number(double v) {
  if (std::isfinite(v) && v == static_cast<double>(static_cast<long long>(v)) &&
      std::fabs(v) < 9e15)
    return std::to_string(static_cast<long long>(v));
  std::ostringstream os;
  os << std::setprecision(12) << v;
  return os.str();
}

constexpr std::uint64_t kFnvOffset = 14695981039346656037ull;
constexpr std::uint64_t kFnvPrime = 1099511628211ull;

std::uint64_t fnv_mix(std::uint64_t h, std::string_view s) {
  for (unsigned char c : s) {
    h ^= c;
    h *= kFnvPrime;
  }
  h ^= 0xff;
  h *= kFnvPrime;
  return h;
}

std::uint64_t stable_hash(std::uint64_t seed, std::initializer_list<std::string_view> parts) {
  std::uint64_t h = kFnvOffset ^ (seed * kFnvPrime);
  for (auto p : parts) h = fnv_mix(h, p);
  return h;
}

std::string hex8(std::uint64_t h) {
  std::ostringstream os;
  os << std::hex << std::setw(8) << std::setfill('0') << (h & 0xffffffffull);
  return os.str();
}

}  // namespace

std::string CallResult::render() const {
  return kind == ResultKind::Number ? render_number(number) : text;
}

CallResult CallResult::of_text(std::string t) {
  CallResult r;
  r.kind = ResultKind::Text;
  r.text = std::move(t);
  return r;
}

CallResult CallResult::of_number(double n) {
  CallResult r;
  r.kind = ResultKind::Number;
  r.number = n;
  return r;
}

std::string render_resolved(const std::string& function, const ResolvedArgs& args) {
  std::ostringstream os;
  os << function << '(';
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (i) os << ", ";
    os << args[i].name << '=';
    if (args[i].value.kind == ResultKind::Number)
      os << args[i].value.render();
    else
      os << '"' << args[i].value.text << '"';
  }
  os << ')';
  return os.str();
}

namespace {

struct Eval {
  const FunctionCall& call;
  const ResultLookup& results;
  std::string fault;

  std::optional<CallResult> eval(const Expr& e) {
    switch (e.kind) {
      case Expr::Kind::Number:
        return CallResult::of_number(e.number);
      case Expr::Kind::Ref: {
        auto it = results.find(e.ref);
        if (it == results.end()) {
          fault = "Call '" + call.id + "' needs the result of '" + e.ref +
                  "', which is not available.";
          return std::nullopt;
        }
        return it->second;
      }
      case Expr::Kind::Text: {
        std::string out;
        for (const auto& seg : e.text) {
          if (!seg.is_ref) {
            out += seg.value;
            continue;
          }
          auto it = results.find(seg.value);
          if (it == results.end()) {
            fault = "Call '" + call.id + "' needs the result of '" + seg.value +
                    "', which is not available.";
            return std::nullopt;
          }
          out += it->second.render();
        }
        return CallResult::of_text(std::move(out));
      }
      case Expr::Kind::Array: {
        std::string out = "[";
        for (std::size_t i = 0; i < e.children.size(); ++i) {
          auto v = eval(e.children[i]);
          if (!v) return std::nullopt;
          if (i) out += ", ";
          out += v->render();
        }
        out += "]";
        return CallResult::of_text(std::move(out));
      }
      case Expr::Kind::Binary: {
        auto l = eval(e.children[0]);
        if (!l) return std::nullopt;
        auto r = eval(e.children[1]);
        if (!r) return std::nullopt;
        if (l->kind != ResultKind::Number || r->kind != ResultKind::Number) {
          fault = "Type fault in call '" + call.id + "': operand of '" + std::string(1, e.op) +
                  "' is not a number.";
          return std::nullopt;
        }
        double a = l->number, b = r->number;
        switch (e.op) {
          case '+': return CallResult::of_number(a + b);
          case '-': return CallResult::of_number(a - b);
          case '*': return CallResult::of_number(a * b);
          case '/':
            if (b == 0) {
              fault = "Type fault in call '" + call.id + "': division by zero.";
              return std::nullopt;
            }
            return CallResult::of_number(a / b);
        }
        fault = "Type fault in call '" + call.id + "': unknown operator.";
        return std::nullopt;
      }
    }
    fault = "Type fault in call '" + call.id + "': unknown expression.";
    return std::nullopt;
  }
};

}  // namespace

ResolveOutcome resolve_arguments(const FunctionCall& call, const ResultLookup& results) {
  ResolveOutcome out;
  ResolvedArgs args;
  Eval ev{call, results, {}};
  for (const auto& arg : call.args) {
    auto v = ev.eval(arg.value);
    if (!v) {
      out.fault = ev.fault;
      return out;
    }
    args.push_back({arg.name, std::move(*v)});
  }
  out.args = std::move(args);
  return out;
}

SyntheticExecutor::SyntheticExecutor(const ToolManifest& manifest, std::uint64_t seed)
    : manifest_(manifest), seed_(seed) {}

Tick SyntheticExecutor::duration_for(const std::string& call_id, const std::string& function) {
  const ToolSpec* tool = manifest_.find(function);
  DurationSpec spec = tool ? tool->duration
                           : DurationSpec{default_duration(FunctionKind::Inout),
                                          default_duration(FunctionKind::Inout)};
  if (spec.fixed()) return spec.min;
  std::uint64_t h = stable_hash(seed_, {call_id, function, "duration"});
  return spec.min + static_cast<Tick>(h % static_cast<std::uint64_t>(spec.max - spec.min + 1));
}

ExecOutcome SyntheticExecutor::execute(const FunctionCall& call, const ResolvedArgs& args) {
  ++executions_[call.id];
  ExecOutcome out;

  auto fi = manifest_.fault_injections.find(call.id);
  if (fi != manifest_.fault_injections.end()) {
    if (!remaining_failures_.count(call.id)) remaining_failures_[call.id] = fi->second.fail_times;
    int& remaining = remaining_failures_[call.id];
    if (remaining > 0) {
      --remaining;
      out.fault = fi->second.message;
      return out;
    }
  }

  const ToolSpec* tool = manifest_.find(call.function);
  ResultKind kind = tool ? tool->result : ResultKind::Text;
  std::string canon = render_resolved(call.function, args);
  std::uint64_t h = stable_hash(seed_, {call.id, canon});
  if (kind == ResultKind::Number) {
    out.result = CallResult::of_number(static_cast<double>(h % 1000));
  } else {
    out.result = CallResult::of_text(call.function + "-result-" + hex8(h));
  }
  return out;
}

int SyntheticExecutor::executions_of(const std::string& call_id) const {
  auto it = executions_.find(call_id);
  return it == executions_.end() ? 0 : it->second;
}

}  // namespace callflow
