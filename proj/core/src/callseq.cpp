#include "callflow/callseq.hpp"

#include <cctype>
#include <sstream>

#include "callflow/manifest.hpp"

namespace callflow {

int call_id_number(std::string_view id) {
  if (id.size() < 2 || id[0] != 's') return -1;
  int n = 0;
  for (std::size_t i = 1; i < id.size(); ++i) {
    if (!std::isdigit(static_cast<unsigned char>(id[i]))) return -1;
    if (n > 100000000) return -1;
    n = n * 10 + (id[i] - '0');
  }
  return n;
}

bool is_call_id(std::string_view id) { return call_id_number(id) >= 0; }

const char* to_string(CompileError::Kind k) {
  switch (k) {
    case CompileError::Kind::SyntaxError: return "SyntaxError";
    case CompileError::Kind::UndefinedId: return "UndefinedId";
    case CompileError::Kind::DuplicateId: return "DuplicateId";
    case CompileError::Kind::UseBeforeDef: return "UseBeforeDef";
    case CompileError::Kind::UnknownFunction: return "UnknownFunction";
    case CompileError::Kind::MalformedPlaceholder: return "MalformedPlaceholder";
  }
  return "?";
}

bool Expr::operator==(const Expr& o) const {
  if (kind != o.kind) return false;
  switch (kind) {
    case Kind::Ref: return ref == o.ref;
    case Kind::Number: return lexeme == o.lexeme;
    case Kind::Text: return text == o.text;
    case Kind::Array: return children == o.children;
    case Kind::Binary: return op == o.op && children == o.children;
  }
  return false;
}

Expr Expr::make_ref(std::string id) {
  Expr e;
  e.kind = Kind::Ref;
  e.ref = std::move(id);
  return e;
}

Expr Expr::make_number(std::string lexeme) {
  Expr e;
  e.kind = Kind::Number;
  e.number = std::stod(lexeme);
  e.lexeme = std::move(lexeme);
  return e;
}

Expr Expr::make_text(std::string literal) {
  Expr e;
  e.kind = Kind::Text;
  e.text.push_back({false, std::move(literal)});
  return e;
}

const FunctionCall* CallSequence::find(std::string_view id) const {
  for (const auto& c : calls)
    if (c.id == id) return &c;
  return nullptr;
}

int CallSequence::index_of(std::string_view id) const {
  for (std::size_t i = 0; i < calls.size(); ++i)
    if (calls[i].id == id) return static_cast<int>(i);
  return -1;
}

namespace {

enum class Tok {
  CallId, Ident, Number, String,
  LParen, RParen, LBracket, RBracket,
  Comma, Colon, Equals, Plus, Minus, Star, Slash,
  End,
};

struct Token {
  Tok kind = Tok::End;
  std::string text;
  std::vector<TextSegment> segments;  // Tok::String
  int line = 1, col = 1;
};

struct LexResult {
  std::vector<Token> tokens;
  std::optional<CompileError> error;
};

CompileError err(CompileError::Kind k, std::string msg, int line, int col) {
  return CompileError{k, std::move(msg), line, col};
}

CompileError syntax(std::string what, int line, int col) {
  std::ostringstream os;
  os << "Syntax error at line " << line << ", column " << col << ": " << what << ".";
  return err(CompileError::Kind::SyntaxError, os.str(), line, col);
}

LexResult lex(std::string_view text) {
  LexResult out;
  std::size_t i = 0;
  int line = 1, col = 1;
  auto advance = [&](char c) {
    if (c == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
    ++i;
  };

  while (i < text.size()) {
    char c = text[i];
    if (c == ' ' || c == '\t' || c == '\r' || c == '\n') {
      advance(c);
      continue;
    }
    int tl = line, tc = col;
    auto push = [&](Tok k, std::string t) { out.tokens.push_back({k, std::move(t), {}, tl, tc}); };

    if (c == '"' || c == '\'') {
      char quote = c;
      advance(c);
      Token tok;
      tok.kind = Tok::String;
      tok.line = tl;
      tok.col = tc;
      std::string literal;
      bool closed = false;
      while (i < text.size()) {
        char d = text[i];
        if (d == quote) {
          advance(d);
          closed = true;
          break;
        }
        if (d == '{') {
          int pl = line, pc = col;
          advance(d);
          std::string id;
          while (i < text.size() && text[i] != '}' && text[i] != quote && text[i] != '\n')
            { id.push_back(text[i]); advance(text[i]); }
          bool ok = i < text.size() && text[i] == '}' && is_call_id(id);
          if (!ok) {
            out.error = err(CompileError::Kind::MalformedPlaceholder,
                            "Malformed placeholder at line " + std::to_string(pl) + ", column " +
                                std::to_string(pc) + ": expected '{s<number>}' inside the string.",
                            pl, pc);
            return out;
          }
          advance('}');
          if (!literal.empty()) tok.segments.push_back({false, literal});
          literal.clear();
          tok.segments.push_back({true, id});
          continue;
        }
        literal.push_back(d);
        advance(d);
      }
      if (!closed) {
        out.error = syntax("unterminated string literal", tl, tc);
        return out;
      }
      if (!literal.empty() || tok.segments.empty()) tok.segments.push_back({false, literal});
      out.tokens.push_back(std::move(tok));
      continue;
    }

    if (std::isdigit(static_cast<unsigned char>(c))) {
      std::string num;
      while (i < text.size() && std::isdigit(static_cast<unsigned char>(text[i])))
        { num.push_back(text[i]); advance(text[i]); }
      if (i < text.size() && text[i] == '.') {
        num.push_back('.');
        advance('.');
        if (i >= text.size() || !std::isdigit(static_cast<unsigned char>(text[i]))) {
          out.error = syntax("expected digits after the decimal point", line, col);
          return out;
        }
        while (i < text.size() && std::isdigit(static_cast<unsigned char>(text[i])))
          { num.push_back(text[i]); advance(text[i]); }
      }
      push(Tok::Number, std::move(num));
      continue;
    }

    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      std::string word;
      while (i < text.size() &&
             (std::isalnum(static_cast<unsigned char>(text[i])) || text[i] == '_'))
        { word.push_back(text[i]); advance(text[i]); }
      Tok kind = is_call_id(word) ? Tok::CallId : Tok::Ident;
      push(kind, std::move(word));
      continue;
    }

    switch (c) {
      case '(': push(Tok::LParen, "("); break;
      case ')': push(Tok::RParen, ")"); break;
      case '[': push(Tok::LBracket, "["); break;
      case ']': push(Tok::RBracket, "]"); break;
      case ',': push(Tok::Comma, ","); break;
      case ':': push(Tok::Colon, ":"); break;
      case '=': push(Tok::Equals, "="); break;
      case '+': push(Tok::Plus, "+"); break;
      case '-': push(Tok::Minus, "-"); break;
      case '*': push(Tok::Star, "*"); break;
      case '/': push(Tok::Slash, "/"); break;
      default:
        out.error = syntax(std::string("unexpected character '") + c + "'", tl, tc);
        return out;
    }
    advance(c);
  }
  out.tokens.push_back({Tok::End, "", {}, line, col});
  return out;
}

const char* describe(const Token& t) {
  switch (t.kind) {
    case Tok::End: return "end of input";
    case Tok::String: return "a string";
    default: return nullptr;  // use the text itself
  }
}

std::string found(const Token& t) {
  if (const char* d = describe(t)) return d;
  return "'" + t.text + "'";
}

struct Parser {
  const std::vector<Token>& toks;
  std::size_t pos = 0;
  std::optional<CompileError> error;

  const Token& cur() const { return toks[pos]; }
  const Token& next() { return toks[pos++]; }
  bool at(Tok k) const { return cur().kind == k; }

  bool expect(Tok k, const char* what) {
    if (at(k)) return true;
    error = syntax(std::string("expected ") + what + ", found " + found(cur()), cur().line,
                   cur().col);
    return false;
  }

  std::optional<Expr> parse_expr() {
    auto lhs = parse_term();
    if (!lhs) return std::nullopt;
    while (at(Tok::Plus) || at(Tok::Minus)) {
      char op = at(Tok::Plus) ? '+' : '-';
      next();
      auto rhs = parse_term();
      if (!rhs) return std::nullopt;
      Expr bin;
      bin.kind = Expr::Kind::Binary;
      bin.op = op;
      bin.line = lhs->line;
      bin.col = lhs->col;
      bin.children = {std::move(*lhs), std::move(*rhs)};
      lhs = std::move(bin);
    }
    return lhs;
  }

  std::optional<Expr> parse_term() {
    auto lhs = parse_factor();
    if (!lhs) return std::nullopt;
    while (at(Tok::Star) || at(Tok::Slash)) {
      char op = at(Tok::Star) ? '*' : '/';
      next();
      auto rhs = parse_factor();
      if (!rhs) return std::nullopt;
      Expr bin;
      bin.kind = Expr::Kind::Binary;
      bin.op = op;
      bin.line = lhs->line;
      bin.col = lhs->col;
      bin.children = {std::move(*lhs), std::move(*rhs)};
      lhs = std::move(bin);
    }
    return lhs;
  }

  std::optional<Expr> parse_factor() {
    const Token& t = cur();
    switch (t.kind) {
      case Tok::Number: {
        next();
        Expr e = Expr::make_number(t.text);
        e.line = t.line;
        e.col = t.col;
        return e;
      }
      case Tok::Minus: {
        next();
        if (!expect(Tok::Number, "a number after unary '-'")) return std::nullopt;
        const Token& n = next();
        Expr e = Expr::make_number("-" + n.text);
        e.line = t.line;
        e.col = t.col;
        return e;
      }
      case Tok::String: {
        next();
        Expr e;
        e.kind = Expr::Kind::Text;
        e.text = t.segments;
        e.line = t.line;
        e.col = t.col;
        return e;
      }
      case Tok::CallId: {
        next();
        Expr e = Expr::make_ref(t.text);
        e.line = t.line;
        e.col = t.col;
        return e;
      }
      case Tok::LBracket: {
        next();
        Expr e;
        e.kind = Expr::Kind::Array;
        e.line = t.line;
        e.col = t.col;
        if (!at(Tok::RBracket)) {
          for (;;) {
            auto el = parse_expr();
            if (!el) return std::nullopt;
            e.children.push_back(std::move(*el));
            if (at(Tok::Comma)) {
              next();
              continue;
            }
            break;
          }
        }
        if (!expect(Tok::RBracket, "']'")) return std::nullopt;
        next();
        return e;
      }
      default:
        error = syntax("expected an expression, found " + found(t), t.line, t.col);
        return std::nullopt;
    }
  }

  std::optional<FunctionCall> parse_call() {
    if (!expect(Tok::CallId, "a call id like 's1'")) return std::nullopt;
    const Token& id = next();
    FunctionCall call;
    call.id = id.text;
    call.line = id.line;
    call.col = id.col;
    if (!expect(Tok::Colon, "':' after the call id")) return std::nullopt;
    next();
    if (!expect(Tok::Ident, "a function name")) return std::nullopt;
    call.function = next().text;
    if (!expect(Tok::LParen, "'('")) return std::nullopt;
    next();
    if (!at(Tok::RParen)) {
      for (;;) {
        Argument arg;
        if (at(Tok::Ident) && toks[pos + 1].kind == Tok::Equals) {
          arg.name = next().text;
          next();  // '='
        } else {
          arg.name = "arg" + std::to_string(call.args.size());
          arg.synthetic = true;
        }
        auto value = parse_expr();
        if (!value) return std::nullopt;
        arg.value = std::move(*value);
        call.args.push_back(std::move(arg));
        if (at(Tok::Comma)) {
          next();
          continue;
        }
        break;
      }
    }
    if (!expect(Tok::RParen, "')' or ','")) return std::nullopt;
    next();
    return call;
  }
};

void collect_refs_at(const Expr& e, std::vector<const Expr*>& refs,
                     std::vector<std::string>& placeholder_ids) {
  switch (e.kind) {
    case Expr::Kind::Ref:
      refs.push_back(&e);
      break;
    case Expr::Kind::Text:
      for (const auto& seg : e.text)
        if (seg.is_ref) {
          refs.push_back(&e);
          placeholder_ids.push_back(seg.value);
        }
      break;
    case Expr::Kind::Array:
    case Expr::Kind::Binary:
      for (const auto& c : e.children) collect_refs_at(c, refs, placeholder_ids);
      break;
    case Expr::Kind::Number:
      break;
  }
}

}  // namespace

namespace {

ParseResult parse_impl(std::string_view text, bool check_refs);

}  // namespace

ParseResult parse_sequence(std::string_view text) { return parse_impl(text, true); }

ParseResult parse_fragment(std::string_view text) { return parse_impl(text, false); }

namespace {

ParseResult parse_impl(std::string_view text, bool check_refs) {
  ParseResult result;
  if (text.size() > kMaxPlanBytes) {
    result.error = err(CompileError::Kind::SyntaxError,
                       "Plan text is " + std::to_string(text.size()) + " bytes; the limit is " +
                           std::to_string(kMaxPlanBytes) + ".",
                       1, 1);
    return result;
  }
  LexResult lexed = lex(text);
  if (lexed.error) {
    result.error = lexed.error;
    return result;
  }

  Parser p{lexed.tokens, 0, std::nullopt};
  CallSequence seq;
  if (p.at(Tok::End)) {
    result.error = syntax("expected at least one call", p.cur().line, p.cur().col);
    return result;
  }
  while (!p.at(Tok::End)) {
    auto call = p.parse_call();
    if (!call) {
      result.error = p.error;
      return result;
    }
    if (seq.find(call->id)) {
      result.error = err(CompileError::Kind::DuplicateId,
                         "Call id '" + call->id + "' is defined more than once.", call->line,
                         call->col);
      return result;
    }
    seq.calls.push_back(std::move(*call));
    if (seq.calls.size() > kMaxPlanCalls) {
      const auto& last = seq.calls.back();
      result.error = err(CompileError::Kind::SyntaxError,
                         "Plan defines more than " + std::to_string(kMaxPlanCalls) + " calls.",
                         last.line, last.col);
      return result;
    }
  }

  // Reference pass: arguments may only point at earlier calls.
  for (std::size_t ci = 0; check_refs && ci < seq.calls.size(); ++ci) {
    const auto& call = seq.calls[ci];
    for (const auto& arg : call.args) {
      std::vector<const Expr*> refs;
      std::vector<std::string> placeholder_ids;
      collect_refs_at(arg.value, refs, placeholder_ids);
      std::size_t pi = 0;
      for (const Expr* re : refs) {
        std::string id = re->kind == Expr::Kind::Ref ? re->ref : placeholder_ids[pi++];
        int def = seq.index_of(id);
        if (def < 0) {
          result.error = err(CompileError::Kind::UndefinedId,
                             "Call '" + call.id + "' references '" + id +
                                 "', which is never defined.",
                             re->line, re->col);
          return result;
        }
        if (static_cast<std::size_t>(def) >= ci) {
          result.error = err(CompileError::Kind::UseBeforeDef,
                             "Call '" + call.id + "' references '" + id +
                                 "', which is not defined yet; arguments may only reference "
                                 "earlier calls.",
                             re->line, re->col);
          return result;
        }
      }
    }
  }

  result.sequence = std::move(seq);
  return result;
}

}  // namespace

namespace {

void render_expr(const Expr& e, std::ostream& os) {
  switch (e.kind) {
    case Expr::Kind::Ref:
      os << e.ref;
      break;
    case Expr::Kind::Number:
      os << e.lexeme;
      break;
    case Expr::Kind::Text:
      os << '"';
      for (const auto& seg : e.text) {
        if (seg.is_ref)
          os << '{' << seg.value << '}';
        else
          os << seg.value;
      }
      os << '"';
      break;
    case Expr::Kind::Array: {
      os << '[';
      for (std::size_t i = 0; i < e.children.size(); ++i) {
        if (i) os << ", ";
        render_expr(e.children[i], os);
      }
      os << ']';
      break;
    }
    case Expr::Kind::Binary:
      render_expr(e.children[0], os);
      os << ' ' << e.op << ' ';
      render_expr(e.children[1], os);
      break;
  }
}

}  // namespace

std::string render_call(const FunctionCall& call) {
  std::ostringstream os;
  os << call.id << ": " << call.function << '(';
  for (std::size_t i = 0; i < call.args.size(); ++i) {
    if (i) os << ", ";
    const auto& a = call.args[i];
    bool positional = a.synthetic && a.name == "arg" + std::to_string(i);
    if (!positional) os << a.name << '=';
    render_expr(a.value, os);
  }
  os << ')';
  return os.str();
}

std::string render_sequence(const CallSequence& seq) {
  std::ostringstream os;
  for (const auto& c : seq.calls) os << render_call(c) << '\n';
  return os.str();
}

std::optional<CompileError> validate_against_registry(const CallSequence& seq,
                                                      const ToolManifest& manifest) {
  for (const auto& call : seq.calls) {
    if (call.function == "self" || manifest.knows(call.function)) continue;
    return err(CompileError::Kind::UnknownFunction,
               "Function '" + call.function + "' used by call '" + call.id +
                   "' is not registered in the tool manifest.",
               call.line, call.col);
  }
  return std::nullopt;
}

void collect_refs(const Expr& e, std::vector<std::string>& out) {
  auto add = [&out](const std::string& id) {
    for (const auto& seen : out)
      if (seen == id) return;
    out.push_back(id);
  };
  switch (e.kind) {
    case Expr::Kind::Ref:
      add(e.ref);
      break;
    case Expr::Kind::Text:
      for (const auto& seg : e.text)
        if (seg.is_ref) add(seg.value);
      break;
    case Expr::Kind::Array:
    case Expr::Kind::Binary:
      for (const auto& c : e.children) collect_refs(c, out);
      break;
    case Expr::Kind::Number:
      break;
  }
}

std::vector<std::string> collect_refs(const FunctionCall& call) {
  std::vector<std::string> out;
  for (const auto& arg : call.args) collect_refs(arg.value, out);
  return out;
}

}  // namespace callflow
