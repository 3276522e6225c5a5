#include <cctype>
#include <charconv>
#include <cmath>
#include <set>

#include <fmt/format.h>

#include "tabdsr/tpl.hpp"

namespace tabdsr::tpl {

namespace {

enum class Tok {
  Ident, Number, String,
  LParen, RParen, LBracket, RBracket, Comma, Semicolon, Assign, Pipe,
  Plus, Minus, Star, Slash,
  Eq, Ne, Lt, Le, Gt, Ge,
  End,
};

struct Token {
  Tok kind = Tok::End;
  std::string text;
  CellValue number;
  std::size_t pos = 0;
};

[[noreturn]] void syntax_error(std::size_t pos, std::string msg) {
  throw ExecError(ExecCategory::SyntaxError, std::move(msg), pos);
}

const std::set<std::string, std::less<>>& keywords() {
  static const std::set<std::string, std::less<>> kKeywords = {
      "table", "filter", "select", "sortby", "head", "col", "and", "or", "not", "asc", "desc",
      "sum", "mean", "min", "max", "count", "cell", "values", "abs", "round"};
  return kKeywords;
}

std::vector<Token> lex(std::string_view src) {
  std::vector<Token> out;
  std::size_t i = 0;
  const std::size_t n = src.size();
  auto push = [&](Tok k, std::size_t pos, std::size_t len) {
    out.push_back(Token{k, std::string(src.substr(pos, len)), NullVal{}, pos});
  };
  while (i < n) {
    const char c = src[i];
    if (std::isspace(static_cast<unsigned char>(c))) { ++i; continue; }
    if (c == '#') {
      while (i < n && src[i] != '\n') ++i;
      continue;
    }
    const std::size_t start = i;
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      while (i < n && (std::isalnum(static_cast<unsigned char>(src[i])) || src[i] == '_')) ++i;
      push(Tok::Ident, start, i - start);
      continue;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) ||
        (c == '.' && i + 1 < n && std::isdigit(static_cast<unsigned char>(src[i + 1])))) {
      bool is_float = false;
      while (i < n && std::isdigit(static_cast<unsigned char>(src[i]))) ++i;
      if (i < n && src[i] == '.') {
        is_float = true;
        ++i;
        while (i < n && std::isdigit(static_cast<unsigned char>(src[i]))) ++i;
      }
      if (i < n && (src[i] == 'e' || src[i] == 'E')) {
        std::size_t j = i + 1;
        if (j < n && (src[j] == '+' || src[j] == '-')) ++j;
        if (j < n && std::isdigit(static_cast<unsigned char>(src[j]))) {
          is_float = true;
          i = j;
          while (i < n && std::isdigit(static_cast<unsigned char>(src[i]))) ++i;
        }
      }
      std::string_view lit = src.substr(start, i - start);
      Token t{Tok::Number, std::string(lit), NullVal{}, start};
      bool ok = false;
      if (!is_float) {
        std::int64_t v = 0;
        auto [p, ec] = std::from_chars(lit.data(), lit.data() + lit.size(), v);
        if (ec == std::errc() && p == lit.data() + lit.size()) {
          t.number = v;
          ok = true;
        }
      }
      if (!ok) {
        double d = 0;
        auto [p, ec] = std::from_chars(lit.data(), lit.data() + lit.size(), d);
        if (ec != std::errc() || p != lit.data() + lit.size() || !std::isfinite(d)) {
          syntax_error(start, fmt::format("bad number literal '{}'", lit));
        }
        t.number = d;
      }
      out.push_back(std::move(t));
      continue;
    }
    if (c == '"') {
      std::string value;
      ++i;
      bool closed = false;
      while (i < n) {
        char d = src[i++];
        if (d == '"') { closed = true; break; }
        if (d == '\\') {
          if (i >= n) break;
          char e = src[i++];
          switch (e) {
            case '"': value += '"'; break;
            case '\\': value += '\\'; break;
            case '/': value += '/'; break;
            case 'n': value += '\n'; break;
            case 't': value += '\t'; break;
            case 'r': value += '\r'; break;
            default: syntax_error(i - 2, fmt::format("unknown escape '\\{}'", e));
          }
          continue;
        }
        value += d;
      }
      if (!closed) syntax_error(start, "unterminated string literal");
      out.push_back(Token{Tok::String, std::move(value), NullVal{}, start});
      continue;
    }
    auto two = src.substr(i, 2);
    if (two == "|>") { push(Tok::Pipe, i, 2); i += 2; continue; }
    if (two == "==") { push(Tok::Eq, i, 2); i += 2; continue; }
    if (two == "!=") { push(Tok::Ne, i, 2); i += 2; continue; }
    if (two == "<=") { push(Tok::Le, i, 2); i += 2; continue; }
    if (two == ">=") { push(Tok::Ge, i, 2); i += 2; continue; }
    Tok k;
    switch (c) {
      case '(': k = Tok::LParen; break;
      case ')': k = Tok::RParen; break;
      case '[': k = Tok::LBracket; break;
      case ']': k = Tok::RBracket; break;
      case ',': k = Tok::Comma; break;
      case ';': k = Tok::Semicolon; break;
      case '=': k = Tok::Assign; break;
      case '+': k = Tok::Plus; break;
      case '-': k = Tok::Minus; break;
      case '*': k = Tok::Star; break;
      case '/': k = Tok::Slash; break;
      case '<': k = Tok::Lt; break;
      case '>': k = Tok::Gt; break;
      default: syntax_error(i, fmt::format("unexpected character '{}'", c));
    }
    push(k, i, 1);
    ++i;
  }
  out.push_back(Token{Tok::End, "", NullVal{}, n});
  return out;
}

class Parser {
 public:
  explicit Parser(std::vector<Token> toks) : toks_(std::move(toks)) {}

  TplProgram program() {
    TplProgram p;
    std::set<std::string, std::less<>> bound;
    while (peek().kind == Tok::Ident && peek(1).kind == Tok::Assign) {
      const Token& name = next();
      if (keywords().count(name.text)) syntax_error(name.pos, fmt::format("'{}' is reserved", name.text));
      if (!bound.insert(name.text).second) {
        syntax_error(name.pos, fmt::format("'{}' is already bound", name.text));
      }
      next();  // '='
      std::unique_ptr<Expr> value = pipeline_start() ? pipe_expr() : expr();
      expect(Tok::Semicolon, "';' after binding");
      p.bindings.push_back(Binding{name.text, std::move(value)});
    }
    if (peek().kind == Tok::End) syntax_error(peek().pos, "program has no final expression");
    p.final = expr();
    if (peek().kind == Tok::Semicolon) next();
    if (peek().kind != Tok::End) syntax_error(peek().pos, fmt::format("unexpected '{}'", peek().text));
    return p;
  }

 private:
  const Token& peek(std::size_t k = 0) const {
    return toks_[std::min(idx_ + k, toks_.size() - 1)];
  }
  const Token& next() {
    const Token& t = toks_[idx_];
    if (idx_ + 1 < toks_.size()) ++idx_;
    return t;
  }
  bool is_word(const Token& t, std::string_view w) const { return t.kind == Tok::Ident && t.text == w; }

  [[noreturn]] void unexpected(const std::string& wanted) const {
    const Token& t = peek();
    if (t.kind == Tok::End) syntax_error(t.pos, fmt::format("expected {} but the program ended", wanted));
    syntax_error(t.pos, fmt::format("expected {} but found '{}'", wanted, t.text));
  }
  const Token& expect(Tok k, const std::string& what) {
    if (peek().kind != k) unexpected(what);
    return next();
  }
  void expect_word(std::string_view w) {
    if (!is_word(peek(), w)) unexpected(fmt::format("'{}'", w));
    next();
  }

  bool pipeline_start() const {
    if (is_word(peek(), "table")) return true;
    return peek().kind == Tok::Ident && !keywords().count(peek().text) && peek(1).kind == Tok::Pipe;
  }

  std::unique_ptr<Expr> pipe_expr() {
    auto e = std::make_unique<Expr>();
    e->kind = Expr::Kind::Pipe;
    e->pos = peek().pos;
    e->pipe = pipeline();
    return e;
  }

  std::unique_ptr<Pipeline> pipeline() {
    auto p = std::make_unique<Pipeline>();
    p->pos = peek().pos;
    const Token& src = peek();
    if (is_word(src, "table")) {
      next();
    } else if (src.kind == Tok::Ident && !keywords().count(src.text)) {
      p->source = next().text;
    } else {
      unexpected("'table' or a bound pipeline");
    }
    while (peek().kind == Tok::Pipe) {
      next();
      p->stages.push_back(stage());
    }
    return p;
  }

  Stage stage() {
    Stage s;
    s.pos = peek().pos;
    const Token& t = peek();
    if (is_word(t, "filter")) {
      next();
      expect(Tok::LParen, "'('");
      s.kind = Stage::Kind::Filter;
      s.pred = pred_or();
      expect(Tok::RParen, "')'");
    } else if (is_word(t, "select")) {
      next();
      expect(Tok::LParen, "'('");
      expect(Tok::LBracket, "'['");
      s.kind = Stage::Kind::Select;
      s.columns.push_back(expect(Tok::String, "a column name").text);
      while (peek().kind == Tok::Comma) {
        next();
        s.columns.push_back(expect(Tok::String, "a column name").text);
      }
      expect(Tok::RBracket, "']'");
      expect(Tok::RParen, "')'");
    } else if (is_word(t, "sortby")) {
      next();
      expect(Tok::LParen, "'('");
      s.kind = Stage::Kind::SortBy;
      s.column = expect(Tok::String, "a column name").text;
      expect(Tok::Comma, "','");
      if (is_word(peek(), "asc")) {
        next();
      } else if (is_word(peek(), "desc")) {
        next();
        s.descending = true;
      } else {
        unexpected("'asc' or 'desc'");
      }
      expect(Tok::RParen, "')'");
    } else if (is_word(t, "head")) {
      next();
      expect(Tok::LParen, "'('");
      s.kind = Stage::Kind::Head;
      s.n = int_literal(false);
      expect(Tok::RParen, "')'");
    } else {
      unexpected("a pipeline stage (filter, select, sortby, head)");
    }
    return s;
  }

  std::int64_t int_literal(bool allow_negative) {
    bool neg = false;
    if (allow_negative && peek().kind == Tok::Minus) {
      next();
      neg = true;
    }
    const Token& t = expect(Tok::Number, "an integer");
    if (!is_int(t.number)) syntax_error(t.pos, "expected an integer");
    std::int64_t v = std::get<std::int64_t>(t.number);
    return neg ? -v : v;
  }

  std::unique_ptr<Pred> pred_or() {
    auto lhs = pred_and();
    while (is_word(peek(), "or")) {
      auto p = std::make_unique<Pred>();
      p->pos = next().pos;
      p->kind = Pred::Kind::Or;
      p->lhs = std::move(lhs);
      p->rhs = pred_and();
      lhs = std::move(p);
    }
    return lhs;
  }

  std::unique_ptr<Pred> pred_and() {
    auto lhs = pred_unary();
    while (is_word(peek(), "and")) {
      auto p = std::make_unique<Pred>();
      p->pos = next().pos;
      p->kind = Pred::Kind::And;
      p->lhs = std::move(lhs);
      p->rhs = pred_unary();
      lhs = std::move(p);
    }
    return lhs;
  }

  std::unique_ptr<Pred> pred_unary() {
    if (is_word(peek(), "not")) {
      auto p = std::make_unique<Pred>();
      p->pos = next().pos;
      p->kind = Pred::Kind::Not;
      p->lhs = pred_unary();
      return p;
    }
    if (peek().kind == Tok::LParen) {
      next();
      auto p = pred_or();
      expect(Tok::RParen, "')'");
      return p;
    }
    auto p = std::make_unique<Pred>();
    p->pos = peek().pos;
    p->kind = Pred::Kind::Cmp;
    expect_word("col");
    expect(Tok::LParen, "'('");
    p->column = expect(Tok::String, "a column name").text;
    expect(Tok::RParen, "')'");
    switch (peek().kind) {
      case Tok::Eq: p->op = CmpOp::Eq; break;
      case Tok::Ne: p->op = CmpOp::Ne; break;
      case Tok::Lt: p->op = CmpOp::Lt; break;
      case Tok::Le: p->op = CmpOp::Le; break;
      case Tok::Gt: p->op = CmpOp::Gt; break;
      case Tok::Ge: p->op = CmpOp::Ge; break;
      default: unexpected("a comparison operator");
    }
    next();
    p->literal = pred_literal();
    return p;
  }

  std::unique_ptr<Expr> pred_literal() {
    auto e = std::make_unique<Expr>();
    e->pos = peek().pos;
    const Token& t = peek();
    if (t.kind == Tok::Minus && peek(1).kind == Tok::Number) {
      next();
      const Token& num = next();
      e->kind = Expr::Kind::Number;
      if (is_int(num.number)) {
        e->literal = -std::get<std::int64_t>(num.number);
      } else {
        e->literal = -std::get<double>(num.number);
      }
    } else if (t.kind == Tok::Number) {
      e->kind = Expr::Kind::Number;
      e->literal = next().number;
    } else if (t.kind == Tok::String) {
      e->kind = Expr::Kind::String;
      e->literal = next().text;
    } else if (t.kind == Tok::Ident && !keywords().count(t.text)) {
      e->kind = Expr::Kind::Ident;
      e->name = next().text;
    } else {
      unexpected("a number, string or identifier");
    }
    return e;
  }

  std::unique_ptr<Expr> expr() {
    auto lhs = term();
    while (peek().kind == Tok::Plus || peek().kind == Tok::Minus) {
      auto e = std::make_unique<Expr>();
      e->kind = Expr::Kind::Binary;
      e->pos = peek().pos;
      e->op = next().kind == Tok::Plus ? BinOp::Add : BinOp::Sub;
      e->lhs = std::move(lhs);
      e->rhs = term();
      lhs = std::move(e);
    }
    return lhs;
  }

  std::unique_ptr<Expr> term() {
    auto lhs = factor();
    while (peek().kind == Tok::Star || peek().kind == Tok::Slash) {
      auto e = std::make_unique<Expr>();
      e->kind = Expr::Kind::Binary;
      e->pos = peek().pos;
      e->op = next().kind == Tok::Star ? BinOp::Mul : BinOp::Div;
      e->lhs = std::move(lhs);
      e->rhs = factor();
      lhs = std::move(e);
    }
    return lhs;
  }

  std::unique_ptr<Expr> factor() {
    auto e = std::make_unique<Expr>();
    const Token& t = peek();
    e->pos = t.pos;
    switch (t.kind) {
      case Tok::Number:
        e->kind = Expr::Kind::Number;
        e->literal = next().number;
        return e;
      case Tok::String:
        e->kind = Expr::Kind::String;
        e->literal = next().text;
        return e;
      case Tok::LParen: {
        next();
        auto inner = expr();
        expect(Tok::RParen, "')'");
        return inner;
      }
      case Tok::Minus:
        next();
        e->kind = Expr::Kind::Neg;
        e->lhs = factor();
        return e;
      case Tok::Ident:
        break;
      default:
        unexpected("an expression");
    }

    const std::string word = t.text;
    if (!keywords().count(word)) {
      if (peek(1).kind == Tok::LParen) syntax_error(t.pos, fmt::format("unknown function '{}'", word));
      next();
      e->kind = Expr::Kind::Ident;
      e->name = word;
      return e;
    }
    next();
    if (word == "abs") {
      expect(Tok::LParen, "'('");
      e->kind = Expr::Kind::Abs;
      e->lhs = expr();
      expect(Tok::RParen, "')'");
    } else if (word == "round") {
      expect(Tok::LParen, "'('");
      e->kind = Expr::Kind::Round;
      e->lhs = expr();
      expect(Tok::Comma, "','");
      e->n = int_literal(true);
      expect(Tok::RParen, "')'");
    } else if (word == "sum" || word == "mean" || word == "min" || word == "max") {
      expect(Tok::LParen, "'('");
      e->kind = Expr::Kind::Agg;
      e->agg = word == "sum" ? AggKind::Sum : word == "mean" ? AggKind::Mean : word == "min" ? AggKind::Min : AggKind::Max;
      e->pipe = pipeline();
      expect(Tok::Comma, "','");
      e->name = expect(Tok::String, "a column name").text;
      expect(Tok::RParen, "')'");
    } else if (word == "count") {
      expect(Tok::LParen, "'('");
      e->kind = Expr::Kind::Count;
      e->pipe = pipeline();
      expect(Tok::RParen, "')'");
    } else if (word == "cell") {
      expect(Tok::LParen, "'('");
      e->kind = Expr::Kind::Cell;
      e->pipe = pipeline();
      expect(Tok::Comma, "','");
      e->n = int_literal(false);
      expect(Tok::Comma, "','");
      e->name = expect(Tok::String, "a column name").text;
      expect(Tok::RParen, "')'");
    } else if (word == "values") {
      expect(Tok::LParen, "'('");
      e->kind = Expr::Kind::Values;
      e->pipe = pipeline();
      expect(Tok::Comma, "','");
      e->name = expect(Tok::String, "a column name").text;
      expect(Tok::RParen, "')'");
    } else if (word == "table") {
      syntax_error(t.pos, "a table cannot be used as a value; aggregate it first");
    } else {
      syntax_error(t.pos, fmt::format("'{}' cannot start an expression", word));
    }
    return e;
  }

  std::vector<Token> toks_;
  std::size_t idx_ = 0;
};

std::string quote(const std::string& s) { return fmt::format("\"{}\"", s); }

std::string sexpr_pred(const Pred& p);

std::string sexpr_pipe(const Pipeline& p) {
  std::string out = "(pipe " + (p.source.empty() ? std::string("table") : p.source);
  for (const auto& s : p.stages) {
    switch (s.kind) {
      case Stage::Kind::Filter: out += " (filter " + sexpr_pred(*s.pred) + ")"; break;
      case Stage::Kind::Select: {
        out += " (select";
        for (const auto& c : s.columns) out += " " + quote(c);
        out += ")";
        break;
      }
      case Stage::Kind::SortBy:
        out += fmt::format(" (sortby {} {})", quote(s.column), s.descending ? "desc" : "asc");
        break;
      case Stage::Kind::Head: out += fmt::format(" (head {})", s.n); break;
    }
  }
  return out + ")";
}

std::string_view cmp_name(CmpOp op) {
  switch (op) {
    case CmpOp::Eq: return "==";
    case CmpOp::Ne: return "!=";
    case CmpOp::Lt: return "<";
    case CmpOp::Le: return "<=";
    case CmpOp::Gt: return ">";
    case CmpOp::Ge: return ">=";
  }
  return "?";
}

std::string sexpr_pred(const Pred& p) {
  switch (p.kind) {
    case Pred::Kind::And: return "(and " + sexpr_pred(*p.lhs) + " " + sexpr_pred(*p.rhs) + ")";
    case Pred::Kind::Or: return "(or " + sexpr_pred(*p.lhs) + " " + sexpr_pred(*p.rhs) + ")";
    case Pred::Kind::Not: return "(not " + sexpr_pred(*p.lhs) + ")";
    case Pred::Kind::Cmp: return fmt::format("({} {} {})", cmp_name(p.op), quote(p.column), to_sexpr(*p.literal));
  }
  return "?";
}

}  // namespace

TplProgram parse_program(std::string_view text) { return Parser(lex(text)).program(); }

std::string to_sexpr(const Expr& e) {
  switch (e.kind) {
    case Expr::Kind::Number:
    case Expr::Kind::String: return to_debug_string(e.literal);
    case Expr::Kind::Ident: return e.name;
    case Expr::Kind::Binary: {
      const char* op = e.op == BinOp::Add ? "+" : e.op == BinOp::Sub ? "-" : e.op == BinOp::Mul ? "*" : "/";
      return fmt::format("({} {} {})", op, to_sexpr(*e.lhs), to_sexpr(*e.rhs));
    }
    case Expr::Kind::Neg: return "(neg " + to_sexpr(*e.lhs) + ")";
    case Expr::Kind::Abs: return "(abs " + to_sexpr(*e.lhs) + ")";
    case Expr::Kind::Round: return fmt::format("(round {} {})", to_sexpr(*e.lhs), e.n);
    case Expr::Kind::Agg: {
      const char* name = e.agg == AggKind::Sum ? "sum" : e.agg == AggKind::Mean ? "mean" : e.agg == AggKind::Min ? "min" : "max";
      return fmt::format("({} {} {})", name, sexpr_pipe(*e.pipe), quote(e.name));
    }
    case Expr::Kind::Count: return "(count " + sexpr_pipe(*e.pipe) + ")";
    case Expr::Kind::Cell: return fmt::format("(cell {} {} {})", sexpr_pipe(*e.pipe), e.n, quote(e.name));
    case Expr::Kind::Values: return fmt::format("(values {} {})", sexpr_pipe(*e.pipe), quote(e.name));
    case Expr::Kind::Pipe: return sexpr_pipe(*e.pipe);
  }
  return "?";
}

std::string to_sexpr(const TplProgram& p) {
  std::string out;
  for (const auto& b : p.bindings) out += fmt::format("(let {} {}) ", b.name, to_sexpr(*b.value));
  return out + to_sexpr(*p.final);
}

}  // namespace tabdsr::tpl
