#pragma once

// Table Program Language: a small deterministic language for arithmetic over
// a single clean table.
//
//   program   := { IDENT "=" (pipeline | expr) ";" } expr [";"]
//   pipeline  := ("table" | IDENT) { "|>" stage }
//   stage     := filter(pred) | select([STRING, ...]) | sortby(STRING, asc|desc) | head(INT)
//   pred      := pred or pred | pred and pred | not pred | (pred) | col(STRING) cmp literal
//   expr      := arithmetic over NUMBER, STRING, IDENT, abs(), round(x, INT),
//                sum/mean/min/max(pipeline, STRING), count(pipeline),
//                cell(pipeline, INT, STRING), values(pipeline, STRING)
//
// Comments run from '#' to end of line.

#include <cstdint>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "tabdsr/exec.hpp"
#include "tabdsr/table.hpp"

namespace tabdsr::tpl {

enum class CmpOp { Eq, Ne, Lt, Le, Gt, Ge };
enum class AggKind { Sum, Mean, Min, Max };
enum class BinOp { Add, Sub, Mul, Div };

struct Expr;
struct Pred;

struct Stage {
  enum class Kind { Filter, Select, SortBy, Head };
  Kind kind = Kind::Head;
  std::unique_ptr<Pred> pred;
  std::vector<std::string> columns;  // Select
  std::string column;                // SortBy
  bool descending = false;           // SortBy
  std::int64_t n = 0;                // Head
  std::size_t pos = 0;
};

struct Pipeline {
  /// Empty means the input table; otherwise a bound pipeline.
  std::string source;
  std::vector<Stage> stages;
  std::size_t pos = 0;
};

struct Pred {
  enum class Kind { And, Or, Not, Cmp };
  Kind kind = Kind::Cmp;
  std::unique_ptr<Pred> lhs;
  std::unique_ptr<Pred> rhs;
  std::string column;
  CmpOp op = CmpOp::Eq;
  std::unique_ptr<Expr> literal;
  std::size_t pos = 0;
};

struct Expr {
  enum class Kind { Number, String, Ident, Binary, Neg, Abs, Round, Agg, Count, Cell, Values, Pipe };
  Kind kind = Kind::Number;
  CellValue literal;   // Number, String
  std::string name;    // Ident; column for Agg/Cell/Values
  BinOp op = BinOp::Add;
  AggKind agg = AggKind::Sum;
  std::int64_t n = 0;  // Round digits, Cell index
  std::unique_ptr<Expr> lhs;
  std::unique_ptr<Expr> rhs;
  std::unique_ptr<Pipeline> pipe;
  std::size_t pos = 0;
};

struct Binding {
  std::string name;
  std::unique_ptr<Expr> value;
};

struct TplProgram {
  std::vector<Binding> bindings;
  std::unique_ptr<Expr> final;
};

/// Throws ExecError(SyntaxError) with the byte offset of the offending token.
TplProgram parse_program(std::string_view text);

/// Evaluates against `table`, which is only read.
ExecValue eval_program(const TplProgram& program, const CleanTable& table);

/// Compact S-expression rendering of the AST, e.g.
/// (sum (pipe table (select "v")) "v").
std::string to_sexpr(const Expr& e);
std::string to_sexpr(const TplProgram& p);

class TplExecutor : public Executor {
 public:
  Dialect dialect() const override { return Dialect::Tpl; }
  ExecValue run(std::string_view program, const CleanTable& table) override {
    return eval_program(parse_program(program), table);
  }
};

}  // namespace tabdsr::tpl
