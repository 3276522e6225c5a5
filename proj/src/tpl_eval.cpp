#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include <fmt/format.h>

#include "tabdsr/tpl.hpp"

namespace tabdsr::tpl {

namespace {

/// Rows and columns of the input table still visible after a pipeline.
struct Frame {
  std::vector<std::size_t> rows;
  std::vector<std::size_t> cols;
};

using Value = std::variant<CellValue, std::vector<CellValue>, Frame>;

[[noreturn]] void fail(ExecCategory c, std::size_t pos, std::string msg) { throw ExecError(c, std::move(msg), pos); }

std::string_view kind_name(const Value& v) {
  if (std::holds_alternative<Frame>(v)) return "table";
  if (std::holds_alternative<std::vector<CellValue>>(v)) return "list";
  const auto& c = std::get<CellValue>(v);
  if (is_null(c)) return "null";
  if (is_text(c)) return "text";
  return "number";
}

CellValue make_float(double d, std::size_t pos) {
  if (!std::isfinite(d)) fail(ExecCategory::TypeMismatch, pos, "arithmetic result is not finite");
  return d;
}

class Evaluator {
 public:
  explicit Evaluator(const CleanTable& table) : table_(table) {}

  ExecValue run(const TplProgram& p) {
    for (const auto& b : p.bindings) env_[b.name] = eval(*b.value);
    Value v = eval(*p.final);
    if (auto* f = std::get_if<Frame>(&v)) {
      (void)f;
      fail(ExecCategory::TypeMismatch, p.final->pos, "program must end in a value, not a table");
    }
    if (auto* list = std::get_if<std::vector<CellValue>>(&v)) return std::move(*list);
    return std::get<CellValue>(std::move(v));
  }

 private:
  const Value& lookup(const std::string& name, std::size_t pos) const {
    auto it = env_.find(name);
    if (it == env_.end()) fail(ExecCategory::UnknownIdentifier, pos, fmt::format("'{}' is not defined", name));
    return it->second;
  }

  std::size_t column(const Frame& f, const std::string& name, std::size_t pos) const {
    for (std::size_t c : f.cols) {
      if (table_.columns[c] == name) return c;
    }
    if (table_.column_index(name)) {
      fail(ExecCategory::UnknownColumn, pos, fmt::format("column \"{}\" was removed by select", name));
    }
    fail(ExecCategory::UnknownColumn, pos, fmt::format("no column named \"{}\"", name));
  }

  void require_numeric(std::size_t c, std::size_t pos, std::string_view what) const {
    if (table_.column_kinds[c] != ColumnKind::Numeric) {
      fail(ExecCategory::TypeMismatch, pos,
           fmt::format("{} needs a numeric column, \"{}\" holds text", what, table_.columns[c]));
    }
  }

  Frame pipeline(const Pipeline& p) {
    Frame f;
    if (p.source.empty()) {
      f.rows.resize(table_.num_rows());
      for (std::size_t i = 0; i < f.rows.size(); ++i) f.rows[i] = i;
      f.cols.resize(table_.num_cols());
      for (std::size_t i = 0; i < f.cols.size(); ++i) f.cols[i] = i;
    } else {
      const Value& v = lookup(p.source, p.pos);
      const auto* bound = std::get_if<Frame>(&v);
      if (!bound) {
        fail(ExecCategory::TypeMismatch, p.pos, fmt::format("'{}' is a {}, not a table", p.source, kind_name(v)));
      }
      f = *bound;
    }
    for (const auto& s : p.stages) apply(s, f);
    return f;
  }

  void apply(const Stage& s, Frame& f) {
    switch (s.kind) {
      case Stage::Kind::Filter: {
        check_pred(*s.pred, f);
        std::vector<std::size_t> kept;
        for (std::size_t r : f.rows) {
          if (test(*s.pred, f, r)) kept.push_back(r);
        }
        f.rows = std::move(kept);
        break;
      }
      case Stage::Kind::Select: {
        std::vector<std::size_t> cols;
        for (const auto& name : s.columns) cols.push_back(column(f, name, s.pos));
        f.cols = std::move(cols);
        break;
      }
      case Stage::Kind::SortBy: {
        std::size_t c = column(f, s.column, s.pos);
        require_numeric(c, s.pos, "sortby");
        const bool desc = s.descending;
        std::stable_sort(f.rows.begin(), f.rows.end(), [&](std::size_t a, std::size_t b) {
          const auto& va = table_.rows[a][c];
          const auto& vb = table_.rows[b][c];
          if (is_null(va) || is_null(vb)) return !is_null(va) && is_null(vb);
          int cmp = compare_numbers(va, vb);
          return desc ? cmp > 0 : cmp < 0;
        });
        break;
      }
      case Stage::Kind::Head:
        if (static_cast<std::uint64_t>(s.n) < f.rows.size()) f.rows.resize(static_cast<std::size_t>(s.n));
        break;
    }
  }

  static int compare_numbers(const CellValue& a, const CellValue& b) {
    if (is_int(a) && is_int(b)) {
      auto x = std::get<std::int64_t>(a), y = std::get<std::int64_t>(b);
      return x < y ? -1 : (x > y ? 1 : 0);
    }
    double x = as_double(a), y = as_double(b);
    return x < y ? -1 : (x > y ? 1 : 0);
  }

  CellValue pred_literal(const Expr& e) {
    if (e.kind != Expr::Kind::Ident) return e.literal;
    const Value& v = lookup(e.name, e.pos);
    const auto* c = std::get_if<CellValue>(&v);
    if (!c || is_null(*c)) {
      fail(ExecCategory::TypeMismatch, e.pos, fmt::format("'{}' is a {}, expected a number or text", e.name, kind_name(v)));
    }
    return *c;
  }

  // Type checks happen once per filter, before any row is looked at, so an
  // ill-typed predicate fails the same way on an empty frame.
  void check_pred(const Pred& p, const Frame& f) {
    switch (p.kind) {
      case Pred::Kind::And:
      case Pred::Kind::Or:
        check_pred(*p.lhs, f);
        check_pred(*p.rhs, f);
        return;
      case Pred::Kind::Not:
        check_pred(*p.lhs, f);
        return;
      case Pred::Kind::Cmp: {
        std::size_t c = column(f, p.column, p.pos);
        CellValue lit = pred_literal(*p.literal);
        if (table_.column_kinds[c] == ColumnKind::Numeric) {
          if (!is_number(lit)) {
            fail(ExecCategory::TypeMismatch, p.pos,
                 fmt::format("column \"{}\" is numeric but is compared with text", p.column));
          }
        } else {
          if (!is_text(lit)) {
            fail(ExecCategory::TypeMismatch, p.pos,
                 fmt::format("column \"{}\" holds text but is compared with a number", p.column));
          }
          if (p.op != CmpOp::Eq && p.op != CmpOp::Ne) {
            fail(ExecCategory::TypeMismatch, p.pos, "text supports only == and !=");
          }
        }
        literals_[&p] = std::move(lit);
        columns_[&p] = c;
        return;
      }
    }
  }

  bool test(const Pred& p, const Frame& f, std::size_t row) {
    switch (p.kind) {
      case Pred::Kind::And: return test(*p.lhs, f, row) && test(*p.rhs, f, row);
      case Pred::Kind::Or: return test(*p.lhs, f, row) || test(*p.rhs, f, row);
      case Pred::Kind::Not: return !test(*p.lhs, f, row);
      case Pred::Kind::Cmp: break;
    }
    const auto& cell = table_.rows[row][columns_.at(&p)];
    if (is_null(cell)) return false;
    const auto& lit = literals_.at(&p);
    int cmp = 0;
    if (is_text(cell)) {
      cmp = std::get<std::string>(cell) == std::get<std::string>(lit) ? 0 : 1;
    } else {
      cmp = compare_numbers(cell, lit);
    }
    switch (p.op) {
      case CmpOp::Eq: return cmp == 0;
      case CmpOp::Ne: return cmp != 0;
      case CmpOp::Lt: return cmp < 0;
      case CmpOp::Le: return cmp <= 0;
      case CmpOp::Gt: return cmp > 0;
      case CmpOp::Ge: return cmp >= 0;
    }
    return false;
  }

  CellValue scalar(const Expr& e) {
    Value v = eval(e);
    auto* c = std::get_if<CellValue>(&v);
    if (!c || !is_number(*c)) {
      fail(ExecCategory::TypeMismatch, e.pos, fmt::format("expected a number, got {}", kind_name(v)));
    }
    return *c;
  }

  CellValue arith(const Expr& e) {
    CellValue a = scalar(*e.lhs);
    CellValue b = scalar(*e.rhs);
    if (e.op == BinOp::Div) {
      if (as_double(b) == 0.0) fail(ExecCategory::DivisionByZero, e.pos, "division by zero");
      return make_float(as_double(a) / as_double(b), e.pos);
    }
    if (is_int(a) && is_int(b)) {
      auto x = std::get<std::int64_t>(a), y = std::get<std::int64_t>(b);
      std::int64_t r = 0;
      bool overflow = false;
      switch (e.op) {
        case BinOp::Add: overflow = __builtin_add_overflow(x, y, &r); break;
        case BinOp::Sub: overflow = __builtin_sub_overflow(x, y, &r); break;
        case BinOp::Mul: overflow = __builtin_mul_overflow(x, y, &r); break;
        case BinOp::Div: break;
      }
      if (!overflow) return r;
    }
    double x = as_double(a), y = as_double(b);
    switch (e.op) {
      case BinOp::Add: return make_float(x + y, e.pos);
      case BinOp::Sub: return make_float(x - y, e.pos);
      case BinOp::Mul: return make_float(x * y, e.pos);
      case BinOp::Div: break;
    }
    return make_float(x / y, e.pos);
  }

  CellValue aggregate(const Expr& e) {
    Frame f = pipeline(*e.pipe);
    std::size_t c = column(f, e.name, e.pos);
    const char* names[] = {"sum", "mean", "min", "max"};
    require_numeric(c, e.pos, names[static_cast<int>(e.agg)]);

    std::vector<const CellValue*> cells;
    for (std::size_t r : f.rows) {
      const auto& v = table_.rows[r][c];
      if (!is_null(v)) cells.push_back(&v);
    }
    switch (e.agg) {
      case AggKind::Sum: {
        std::int64_t isum = 0;
        bool all_int = true;
        for (const auto* v : cells) {
          if (!is_int(*v) || __builtin_add_overflow(isum, std::get<std::int64_t>(*v), &isum)) {
            all_int = false;
            break;
          }
        }
        if (all_int) return isum;
        double dsum = 0.0;
        for (const auto* v : cells) dsum += as_double(*v);
        return make_float(dsum, e.pos);
      }
      case AggKind::Mean: {
        if (cells.empty()) fail(ExecCategory::EmptyAggregation, e.pos, fmt::format("mean of \"{}\" over no values", e.name));
        double dsum = 0.0;
        for (const auto* v : cells) dsum += as_double(*v);
        return make_float(dsum / static_cast<double>(cells.size()), e.pos);
      }
      case AggKind::Min:
      case AggKind::Max: {
        if (cells.empty()) {
          fail(ExecCategory::EmptyAggregation, e.pos,
               fmt::format("{} of \"{}\" over no values", e.agg == AggKind::Min ? "min" : "max", e.name));
        }
        const CellValue* best = cells.front();
        for (const auto* v : cells) {
          int cmp = compare_numbers(*v, *best);
          if (e.agg == AggKind::Min ? cmp < 0 : cmp > 0) best = v;
        }
        return *best;
      }
    }
    return NullVal{};
  }

  Value eval(const Expr& e) {
    switch (e.kind) {
      case Expr::Kind::Number:
      case Expr::Kind::String:
        return e.literal;
      case Expr::Kind::Ident:
        return lookup(e.name, e.pos);
      case Expr::Kind::Binary:
        return arith(e);
      case Expr::Kind::Neg: {
        CellValue v = scalar(*e.lhs);
        if (is_int(v)) {
          auto x = std::get<std::int64_t>(v);
          if (x != std::numeric_limits<std::int64_t>::min()) return -x;
        }
        return make_float(-as_double(v), e.pos);
      }
      case Expr::Kind::Abs: {
        CellValue v = scalar(*e.lhs);
        if (is_int(v)) {
          auto x = std::get<std::int64_t>(v);
          if (x != std::numeric_limits<std::int64_t>::min()) return x < 0 ? -x : x;
        }
        return make_float(std::fabs(as_double(v)), e.pos);
      }
      case Expr::Kind::Round: {
        CellValue v = scalar(*e.lhs);
        if (is_int(v) && e.n >= 0) return v;
        if (e.n > 300 || e.n < -300) return v;
        double r = 0.0;
        if (e.n >= 0) {
          double scale = std::pow(10.0, static_cast<double>(e.n));
          r = std::nearbyint(as_double(v) * scale) / scale;
        } else {
          double step = std::pow(10.0, static_cast<double>(-e.n));
          r = std::nearbyint(as_double(v) / step) * step;
        }
        if (is_int(v) && std::fabs(r) < 9.0e18) return static_cast<std::int64_t>(r);
        return make_float(r, e.pos);
      }
      case Expr::Kind::Agg:
        return aggregate(e);
      case Expr::Kind::Count:
        return static_cast<std::int64_t>(pipeline(*e.pipe).rows.size());
      case Expr::Kind::Cell: {
        Frame f = pipeline(*e.pipe);
        std::size_t c = column(f, e.name, e.pos);
        if (e.n < 0 || static_cast<std::uint64_t>(e.n) >= f.rows.size()) {
          fail(ExecCategory::IndexOutOfRange, e.pos,
               fmt::format("row {} requested but the pipeline has {} rows", e.n, f.rows.size()));
        }
        return table_.rows[f.rows[static_cast<std::size_t>(e.n)]][c];
      }
      case Expr::Kind::Values: {
        Frame f = pipeline(*e.pipe);
        std::size_t c = column(f, e.name, e.pos);
        std::vector<CellValue> out;
        out.reserve(f.rows.size());
        for (std::size_t r : f.rows) out.push_back(table_.rows[r][c]);
        return out;
      }
      case Expr::Kind::Pipe:
        return pipeline(*e.pipe);
    }
    return CellValue{NullVal{}};
  }

  const CleanTable& table_;
  std::map<std::string, Value> env_;
  std::map<const Pred*, CellValue> literals_;
  std::map<const Pred*, std::size_t> columns_;
};

}  // namespace

ExecValue eval_program(const TplProgram& program, const CleanTable& table) {
  if (table.column_kinds.size() != table.num_cols()) {
    throw std::invalid_argument("clean table needs one kind per column");
  }
  return Evaluator(table).run(program);
}

}  // namespace tabdsr::tpl
