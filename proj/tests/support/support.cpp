#include "support.hpp"

#include "tabdsr/sanitizer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <memory>
#include <set>
#include <sstream>

#include <fmt/format.h>

#ifndef TABDSR_FIXTURES_DIR
#error "TABDSR_FIXTURES_DIR must be defined"
#endif

namespace tabdsr::support {

std::filesystem::path fixture(const std::string& rel) { return std::filesystem::path(TABDSR_FIXTURES_DIR) / rel; }

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

namespace {

const char* kWords[] = {"alpha", "beta", "gamma", "delta", "epsilon"};

bool chance(SplitMix64& rng, double p) { return rng.uniform() < p; }

std::size_t pick(SplitMix64& rng, std::size_t n) { return static_cast<std::size_t>(rng.below(n)); }

std::int64_t range(SplitMix64& rng, std::int64_t lo, std::int64_t hi) {
  return lo + static_cast<std::int64_t>(rng.below(static_cast<std::uint64_t>(hi - lo + 1)));
}

// --- generated program shape --------------------------------------------------

struct GPred {
  enum Kind { Cmp, And, Or, Not } kind = Cmp;
  std::size_t col = 0;
  std::string op;
  CellValue lit;
  std::shared_ptr<GPred> a, b;
};

struct GStage {
  enum Kind { Filter, Select, Sort, Head } kind = Head;
  std::shared_ptr<GPred> pred;
  std::vector<std::size_t> cols;
  std::size_t col = 0;
  bool desc = false;
  std::int64_t n = 0;
};

struct GPipe {
  bool from_binding = false;
  std::vector<GStage> stages;
};

struct GExpr {
  enum Kind { Agg, Count, Cell, Values, Bin, Abs, Round, Num, Ref } kind = Num;
  int agg = 0;  // sum mean min max
  GPipe pipe;
  std::size_t col = 0;
  std::int64_t idx = 0;
  char op = '+';
  std::shared_ptr<GExpr> l, r;
  CellValue num;
  int digits = 0;
};

struct GProgram {
  std::optional<GPipe> pipe_binding;  // p = ...
  std::shared_ptr<GExpr> scalar_binding;  // a = ...
  std::shared_ptr<GExpr> final;
};

// --- rendering ------------------------------------------------------------------

std::string lit_text(const CellValue& v) {
  if (is_int(v)) return std::to_string(std::get<std::int64_t>(v));
  if (is_float(v)) return fmt::format("{:.2f}", std::get<double>(v));
  return "\"" + std::get<std::string>(v) + "\"";
}

std::string render(const GPred& p, const CleanTable& t) {
  switch (p.kind) {
    case GPred::Cmp: return fmt::format("col(\"{}\") {} {}", t.columns[p.col], p.op, lit_text(p.lit));
    case GPred::And: return fmt::format("({} and {})", render(*p.a, t), render(*p.b, t));
    case GPred::Or: return fmt::format("({} or {})", render(*p.a, t), render(*p.b, t));
    case GPred::Not: return fmt::format("not ({})", render(*p.a, t));
  }
  return "";
}

std::string render(const GPipe& p, const CleanTable& t) {
  std::string out = p.from_binding ? "p" : "table";
  for (const auto& s : p.stages) {
    switch (s.kind) {
      case GStage::Filter: out += " |> filter(" + render(*s.pred, t) + ")"; break;
      case GStage::Select: {
        std::string cols;
        for (std::size_t c : s.cols) cols += (cols.empty() ? "" : ", ") + fmt::format("\"{}\"", t.columns[c]);
        out += " |> select([" + cols + "])";
        break;
      }
      case GStage::Sort: out += fmt::format(" |> sortby(\"{}\", {})", t.columns[s.col], s.desc ? "desc" : "asc"); break;
      case GStage::Head: out += fmt::format(" |> head({})", s.n); break;
    }
  }
  return out;
}

std::string render(const GExpr& e, const CleanTable& t) {
  static const char* kAgg[] = {"sum", "mean", "min", "max"};
  switch (e.kind) {
    case GExpr::Agg: return fmt::format("{}({}, \"{}\")", kAgg[e.agg], render(e.pipe, t), t.columns[e.col]);
    case GExpr::Count: return fmt::format("count({})", render(e.pipe, t));
    case GExpr::Cell: return fmt::format("cell({}, {}, \"{}\")", render(e.pipe, t), e.idx, t.columns[e.col]);
    case GExpr::Values: return fmt::format("values({}, \"{}\")", render(e.pipe, t), t.columns[e.col]);
    case GExpr::Bin: return fmt::format("({} {} {})", render(*e.l, t), e.op, render(*e.r, t));
    case GExpr::Abs: return fmt::format("abs({})", render(*e.l, t));
    case GExpr::Round: return fmt::format("round({}, {})", render(*e.l, t), e.digits);
    case GExpr::Num: return lit_text(e.num);
    case GExpr::Ref: return "a";
  }
  return "";
}

std::string render(const GProgram& p, const CleanTable& t) {
  std::string out;
  if (p.pipe_binding) out += "p = " + render(*p.pipe_binding, t) + ";\n";
  if (p.scalar_binding) out += "a = " + render(*p.scalar_binding, t) + ";\n";
  return out + render(*p.final, t);
}

// --- generation -------------------------------------------------------------------

struct Gen {
  SplitMix64& rng;
  const CleanTable& t;
  std::vector<std::size_t> numeric, text;

  Gen(SplitMix64& r, const CleanTable& table) : rng(r), t(table) {
    for (std::size_t c = 0; c < t.num_cols(); ++c) {
      (t.column_kinds[c] == ColumnKind::Numeric ? numeric : text).push_back(c);
    }
  }

  CellValue sample_cell(std::size_t c) {
    // Literals drawn from the column itself hit real rows more often.
    for (int tries = 0; tries < 4 && t.num_rows() > 0; ++tries) {
      const auto& v = t.rows[pick(rng, t.num_rows())][c];
      if (!is_null(v)) return v;
    }
    if (t.column_kinds[c] == ColumnKind::Text) return std::string(kWords[pick(rng, 5)]);
    return range(rng, -20, 200);
  }

  std::shared_ptr<GPred> pred(int depth) {
    auto p = std::make_shared<GPred>();
    const int roll = static_cast<int>(pick(rng, 10));
    if (depth > 0 && roll < 2) {
      p->kind = roll == 0 ? GPred::And : GPred::Or;
      p->a = pred(depth - 1);
      p->b = pred(depth - 1);
      return p;
    }
    if (depth > 0 && roll == 2) {
      p->kind = GPred::Not;
      p->a = pred(depth - 1);
      return p;
    }
    const bool use_text = !text.empty() && (numeric.empty() || chance(rng, 0.3));
    if (use_text) {
      p->col = text[pick(rng, text.size())];
      p->op = chance(rng, 0.5) ? "==" : "!=";
    } else {
      static const char* kOps[] = {"==", "!=", "<", "<=", ">", ">="};
      p->col = numeric[pick(rng, numeric.size())];
      p->op = kOps[pick(rng, 6)];
    }
    p->lit = sample_cell(p->col);
    if (!use_text && chance(rng, 0.2)) p->lit = as_double(p->lit) + 0.5;
    return p;
  }

  /// Random stages; a select, when drawn,
  /// keeps `needed` and every column used after it.
  std::vector<GStage> stages(const std::vector<std::size_t>& needed, bool allow_select) {
    std::vector<GStage> out;
    const std::size_t n = pick(rng, 4);
    for (std::size_t i = 0; i < n; ++i) {
      GStage s;
      const std::size_t roll = pick(rng, 3);
      if (roll == 0) {
        s.kind = GStage::Filter;
        s.pred = pred(2);
      } else if (roll == 1 && !numeric.empty()) {
        s.kind = GStage::Sort;
        s.col = numeric[pick(rng, numeric.size())];
        s.desc = chance(rng, 0.5);
      } else {
        s.kind = GStage::Head;
        s.n = range(rng, 0, 12);
      }
      out.push_back(std::move(s));
    }
    if (allow_select && chance(rng, 0.3)) {
      const std::size_t at = pick(rng, out.size() + 1);
      std::vector<bool> keep(t.num_cols(), false);
      for (std::size_t c : needed) keep[c] = true;
      std::function<void(const GPred&)> mark = [&](const GPred& p) {
        if (p.kind == GPred::Cmp) keep[p.col] = true;
        if (p.a) mark(*p.a);
        if (p.b) mark(*p.b);
      };
      for (std::size_t i = at; i < out.size(); ++i) {
        if (out[i].kind == GStage::Filter) mark(*out[i].pred);
        if (out[i].kind == GStage::Sort) keep[out[i].col] = true;
      }
      GStage sel;
      sel.kind = GStage::Select;
      for (std::size_t c = 0; c < t.num_cols(); ++c) {
        if (keep[c] || chance(rng, 0.3)) sel.cols.push_back(c);
      }
      if (sel.cols.empty()) sel.cols.push_back(0);
      out.insert(out.begin() + static_cast<std::ptrdiff_t>(at), std::move(sel));
    }
    return out;
  }

  GPipe pipe(const std::vector<std::size_t>& needed, bool binding_available) {
    GPipe p;
    p.from_binding = binding_available && chance(rng, 0.5);
    p.stages = stages(needed, true);
    return p;
  }

  std::shared_ptr<GExpr> scalar(int depth, bool binding_available, bool ref_available) {
    auto e = std::make_shared<GExpr>();
    const std::size_t roll = pick(rng, depth > 0 ? 9 : 5);
    if (roll == 0 && !numeric.empty()) {
      e->kind = GExpr::Agg;
      e->agg = static_cast<int>(pick(rng, 4));
      e->col = numeric[pick(rng, numeric.size())];
      e->pipe = pipe({e->col}, binding_available);
    } else if (roll == 1) {
      e->kind = GExpr::Count;
      e->pipe = pipe({}, binding_available);
    } else if (roll == 2 && !numeric.empty()) {
      e->kind = GExpr::Cell;
      e->col = numeric[pick(rng, numeric.size())];
      e->idx = range(rng, 0, 3);
      e->pipe = pipe({e->col}, binding_available);
    } else if (roll == 3 && ref_available) {
      e->kind = GExpr::Ref;
    } else if (roll <= 4) {
      e->kind = GExpr::Num;
      e->num = chance(rng, 0.5) ? CellValue{range(rng, 0, 100)} : CellValue{static_cast<double>(range(rng, 0, 10000)) / 100.0};
    } else if (roll <= 6) {
      static const char kOps[] = {'+', '-', '*', '/'};
      e->kind = GExpr::Bin;
      e->op = kOps[pick(rng, 4)];
      e->l = scalar(depth - 1, binding_available, ref_available);
      e->r = scalar(depth - 1, binding_available, ref_available);
    } else if (roll == 7) {
      e->kind = GExpr::Abs;
      e->l = scalar(depth - 1, binding_available, ref_available);
    } else {
      e->kind = GExpr::Round;
      e->digits = static_cast<int>(range(rng, 0, 3));
      e->l = scalar(depth - 1, binding_available, ref_available);
    }
    return e;
  }

  GProgram program() {
    GProgram p;
    if (chance(rng, 0.4)) {
      GPipe b;
      b.stages = stages({}, false);
      p.pipe_binding = b;
    }
    const bool has_pipe = p.pipe_binding.has_value();
    if (chance(rng, 0.3)) p.scalar_binding = scalar(1, has_pipe, false);
    const bool has_ref = p.scalar_binding != nullptr;
    const std::size_t roll = pick(rng, 10);
    if (roll < 6) {
      p.final = scalar(2, has_pipe, has_ref);
    } else {
      auto e = std::make_shared<GExpr>();
      e->kind = roll < 8 ? GExpr::Cell : GExpr::Values;
      e->col = pick(rng, t.num_cols());
      e->idx = range(rng, 0, 3);
      e->pipe = pipe({e->col}, has_pipe);
      p.final = e;
    }
    return p;
  }
};

// --- reference evaluation ------------------------------------------------------------

struct Scan {
  const CleanTable& t;
  const GProgram& prog;
  std::optional<ExecValue> a;

  bool holds(const GPred& p, std::size_t row) const {
    switch (p.kind) {
      case GPred::And: return holds(*p.a, row) && holds(*p.b, row);
      case GPred::Or: return holds(*p.a, row) || holds(*p.b, row);
      case GPred::Not: return !holds(*p.a, row);
      case GPred::Cmp: break;
    }
    const CellValue& v = t.rows[row][p.col];
    if (is_null(v)) return false;
    if (is_text(v)) {
      bool eq = std::get<std::string>(v) == std::get<std::string>(p.lit);
      return p.op == "==" ? eq : !eq;
    }
    const double x = as_double(v), y = as_double(p.lit);
    if (p.op == "==") return x == y;
    if (p.op == "!=") return x != y;
    if (p.op == "<") return x < y;
    if (p.op == "<=") return x <= y;
    if (p.op == ">") return x > y;
    return x >= y;
  }

  std::vector<std::size_t> rows(const GPipe& p) const {
    std::vector<GStage> all;
    if (p.from_binding) all = prog.pipe_binding->stages;
    all.insert(all.end(), p.stages.begin(), p.stages.end());
    std::vector<std::size_t> rs;
    for (std::size_t r = 0; r < t.num_rows(); ++r) rs.push_back(r);
    for (const auto& s : all) {
      if (s.kind == GStage::Filter) {
        std::vector<std::size_t> kept;
        for (std::size_t r : rs) {
          if (holds(*s.pred, r)) kept.push_back(r);
        }
        rs = kept;
      } else if (s.kind == GStage::Sort) {
        // Insertion sort: stable by construction, nulls last either way.
        auto before = [&](std::size_t x, std::size_t y) {
          const auto& vx = t.rows[x][s.col];
          const auto& vy = t.rows[y][s.col];
          if (is_null(vx)) return false;
          if (is_null(vy)) return true;
          return s.desc ? as_double(vx) > as_double(vy) : as_double(vx) < as_double(vy);
        };
        for (std::size_t i = 1; i < rs.size(); ++i) {
          for (std::size_t j = i; j > 0 && before(rs[j], rs[j - 1]); --j) std::swap(rs[j], rs[j - 1]);
        }
      } else if (s.kind == GStage::Head) {
        if (rs.size() > static_cast<std::size_t>(s.n)) rs.resize(static_cast<std::size_t>(s.n));
      }
    }
    return rs;
  }

  CellValue number(const GExpr& e) {
    ExecValue v = eval(e);
    auto* c = std::get_if<CellValue>(&v);
    if (!c || !is_number(*c)) throw ExecCategory::TypeMismatch;
    return *c;
  }

  ExecValue eval(const GExpr& e) {
    switch (e.kind) {
      case GExpr::Num: return e.num;
      case GExpr::Ref: return *a;
      case GExpr::Count: return CellValue{static_cast<std::int64_t>(rows(e.pipe).size())};
      case GExpr::Cell: {
        auto rs = rows(e.pipe);
        if (static_cast<std::size_t>(e.idx) >= rs.size()) throw ExecCategory::IndexOutOfRange;
        return t.rows[rs[static_cast<std::size_t>(e.idx)]][e.col];
      }
      case GExpr::Values: {
        std::vector<CellValue> out;
        for (std::size_t r : rows(e.pipe)) out.push_back(t.rows[r][e.col]);
        return out;
      }
      case GExpr::Agg: {
        std::vector<CellValue> vals;
        for (std::size_t r : rows(e.pipe)) {
          if (!is_null(t.rows[r][e.col])) vals.push_back(t.rows[r][e.col]);
        }
        if (e.agg == 0) {
          bool ints = std::all_of(vals.begin(), vals.end(), [](const CellValue& v) { return is_int(v); });
          if (ints) {
            std::int64_t s = 0;
            for (const auto& v : vals) s += std::get<std::int64_t>(v);
            return CellValue{s};
          }
          double s = 0.0;
          for (const auto& v : vals) s += as_double(v);
          return CellValue{s};
        }
        if (vals.empty()) throw ExecCategory::EmptyAggregation;
        if (e.agg == 1) {
          double s = 0.0;
          for (const auto& v : vals) s += as_double(v);
          return CellValue{s / static_cast<double>(vals.size())};
        }
        CellValue best = vals[0];
        for (const auto& v : vals) {
          if (e.agg == 2 ? as_double(v) < as_double(best) : as_double(v) > as_double(best)) best = v;
        }
        return best;
      }
      case GExpr::Bin: {
        CellValue x = number(*e.l);
        CellValue y = number(*e.r);
        if (e.op == '/') {
          if (as_double(y) == 0.0) throw ExecCategory::DivisionByZero;
          return CellValue{as_double(x) / as_double(y)};
        }
        if (is_int(x) && is_int(y)) {
          auto p = std::get<std::int64_t>(x), q = std::get<std::int64_t>(y);
          return CellValue{e.op == '+' ? p + q : e.op == '-' ? p - q : p * q};
        }
        double p = as_double(x), q = as_double(y);
        return CellValue{e.op == '+' ? p + q : e.op == '-' ? p - q : p * q};
      }
      case GExpr::Abs: {
        CellValue x = number(*e.l);
        if (is_int(x)) return CellValue{std::llabs(std::get<std::int64_t>(x))};
        return CellValue{std::fabs(std::get<double>(x))};
      }
      case GExpr::Round: {
        CellValue x = number(*e.l);
        if (is_int(x)) return x;
        const double scale = std::pow(10.0, e.digits);
        return CellValue{std::nearbyint(std::get<double>(x) * scale) / scale};
      }
    }
    throw ExecCategory::SyntaxError;
  }

  OracleResult run() {
    try {
      if (prog.scalar_binding) a = eval(*prog.scalar_binding);
      return eval(*prog.final);
    } catch (ExecCategory c) {
      return c;
    }
  }
};

bool close_enough(const CellValue& x, const CellValue& y) {
  if (x.index() != y.index()) return false;
  if (is_float(x)) {
    const double a = std::get<double>(x), b = std::get<double>(y);
    return a == b || std::fabs(a - b) <= 1e-9 * std::max(std::fabs(a), std::fabs(b));
  }
  return x == y;
}

}  // namespace

CleanTable random_clean_table(SplitMix64& rng, std::size_t min_rows, std::size_t max_rows, std::size_t min_cols,
                              std::size_t max_cols) {
  CleanTable t;
  const std::size_t ncols = min_cols + pick(rng, max_cols - min_cols + 1);
  const std::size_t nrows = min_rows + pick(rng, max_rows - min_rows + 1);
  std::vector<int> kind(ncols);  // 0 int, 1 float, 2 text
  for (std::size_t c = 0; c < ncols; ++c) {
    kind[c] = static_cast<int>(pick(rng, 3));
    t.columns.push_back(fmt::format("{}{}", kind[c] == 0 ? "n" : kind[c] == 1 ? "f" : "t", c));
    t.column_kinds.push_back(kind[c] == 2 ? ColumnKind::Text : ColumnKind::Numeric);
  }
  for (std::size_t r = 0; r < nrows; ++r) {
    std::vector<CellValue> row;
    for (std::size_t c = 0; c < ncols; ++c) {
      if (chance(rng, 0.1)) {
        row.push_back(NullVal{});
      } else if (kind[c] == 0) {
        row.push_back(range(rng, -20, 200));
      } else if (kind[c] == 1) {
        row.push_back(static_cast<double>(range(rng, -2000, 20000)) / 100.0);
      } else {
        row.push_back(std::string(kWords[pick(rng, 5)]));
      }
    }
    t.rows.push_back(std::move(row));
  }
  return t;
}

OracleCase random_oracle_case(SplitMix64& rng, std::size_t max_rows, std::size_t max_cols) {
  OracleCase oc;
  oc.table = random_clean_table(rng, 0, max_rows, 1, max_cols);
  Gen gen(rng, oc.table);
  GProgram prog = gen.program();
  oc.program = render(prog, oc.table);
  oc.expected = Scan{oc.table, prog, std::nullopt}.run();
  return oc;
}

std::string describe(const OracleResult& r) {
  if (auto* c = std::get_if<ExecCategory>(&r)) return "error " + std::string(to_string(*c));
  const auto& v = std::get<ExecValue>(r);
  if (auto* cell = std::get_if<CellValue>(&v)) return to_debug_string(*cell);
  std::string out = "[";
  for (const auto& c : std::get<std::vector<CellValue>>(v)) out += (out.size() > 1 ? ", " : "") + to_debug_string(c);
  return out + "]";
}

std::optional<std::string> compare_oracle(const OracleResult& expected, const OracleResult& actual) {
  auto mismatch = [&] { return fmt::format("expected {}, got {}", describe(expected), describe(actual)); };
  if (expected.index() != actual.index()) return mismatch();
  if (auto* c = std::get_if<ExecCategory>(&expected)) {
    if (*c != std::get<ExecCategory>(actual)) return mismatch();
    return std::nullopt;
  }
  const auto& ev = std::get<ExecValue>(expected);
  const auto& av = std::get<ExecValue>(actual);
  if (ev.index() != av.index()) return mismatch();
  if (auto* cell = std::get_if<CellValue>(&ev)) {
    if (!close_enough(*cell, std::get<CellValue>(av))) return mismatch();
    return std::nullopt;
  }
  const auto& el = std::get<std::vector<CellValue>>(ev);
  const auto& al = std::get<std::vector<CellValue>>(av);
  if (el.size() != al.size()) return mismatch();
  for (std::size_t i = 0; i < el.size(); ++i) {
    if (!close_enough(el[i], al[i])) return mismatch();
  }
  return std::nullopt;
}

std::size_t brute_force_lcs(const std::vector<std::string>& a, const std::vector<std::string>& b) {
  const auto& shorter = a.size() <= b.size() ? a : b;
  const auto& longer = a.size() <= b.size() ? b : a;
  std::size_t best = 0;
  for (std::uint32_t mask = 0; mask < (1u << shorter.size()); ++mask) {
    std::size_t j = 0, taken = 0;
    bool ok = true;
    for (std::size_t i = 0; i < shorter.size() && ok; ++i) {
      if (!(mask & (1u << i))) continue;
      while (j < longer.size() && longer[j] != shorter[i]) ++j;
      if (j == longer.size()) ok = false;
      else {
        ++j;
        ++taken;
      }
    }
    if (ok) best = std::max(best, taken);
  }
  return best;
}

double brute_force_rouge_l(const std::vector<std::string>& pred, const std::vector<std::string>& gold) {
  if (pred.empty() || gold.empty()) return 0.0;
  const double l = static_cast<double>(brute_force_lcs(pred, gold));
  if (l == 0.0) return 0.0;
  const double p = l / static_cast<double>(pred.size());
  const double r = l / static_cast<double>(gold.size());
  return 2.0 * p * r / (p + r);
}

std::optional<std::string> check_perturbation(const CleanTable& base, const CleanTable& perturbed, double lo, double hi,
                                              std::size_t& changed) {
  if (base.columns != perturbed.columns || base.num_rows() != perturbed.num_rows()) return "shape changed";
  for (std::size_t r = 0; r < base.num_rows(); ++r) {
    for (std::size_t c = 0; c < base.num_cols(); ++c) {
      const auto& v = base.rows[r][c];
      const auto& w = perturbed.rows[r][c];
      auto where = fmt::format("row {} col {} ({} -> {})", r, c, to_debug_string(v), to_debug_string(w));
      if (!is_number(v)) {
        if (v != w) return "non-numeric cell changed at " + where;
        continue;
      }
      if (v.index() != w.index()) return "cell type changed at " + where;
      const double x = as_double(v);
      std::string header = base.columns[c];
      for (auto& ch : header) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
      const bool year = x == std::floor(x) && x >= 1900 && x <= 2100 &&
                        (header.find("year") != std::string::npos || header.find("date") != std::string::npos);
      if (x == 0.0 || year) {
        if (v != w) return "fixed cell moved at " + where;
        continue;
      }
      // half a unit in the last place the value is written with
      const double slack = 0.5 * std::pow(10.0, -decimal_places(x)) * (1 + 1e-9) + 1e-12 * std::fabs(x);
      const double delta = std::fabs(as_double(w) - x);
      if (delta < lo * std::fabs(x) - slack || delta > hi * std::fabs(x) + slack) {
        return fmt::format("relative change {:.6f} out of bounds at {}", delta / std::fabs(x), where);
      }
      if (v != w) ++changed;
    }
  }
  return std::nullopt;
}

CleanTable perturbed_of(const ForgeRecord& rec) {
  const auto& first = rec.provenance.at(0);
  ForgeConfig cfg;
  cfg.perturb_lo = first.params.at("perturb_lo").get<double>();
  cfg.perturb_hi = first.params.at("perturb_hi").get<double>();
  SplitMix64 rng(first.seed_state);
  return perturb_numeric(rec.base_table, cfg, rng);
}

std::optional<std::string> check_nulls(const ForgeRecord& rec, const ForgeConfig& cfg) {
  const auto& cells = rec.provenance.at(3).params.at("cells");
  if (cells.size() < cfg.null_min || cells.size() > cfg.null_max) {
    return fmt::format("{} nulls inserted, expected {}..{}", cells.size(), cfg.null_min, cfg.null_max);
  }
  for (const auto& cell : cells) {
    auto r = cell[0].get<std::size_t>(), c = cell[1].get<std::size_t>();
    auto label = cell[2].get<std::string>();
    if (std::find(cfg.null_labels.begin(), cfg.null_labels.end(), label) == cfg.null_labels.end()) {
      return "unexpected null label " + label;
    }
    if (rec.noisy_table.rows.at(r).at(c) != CellValue{label}) return fmt::format("label missing at {},{}", r, c);
  }
  return std::nullopt;
}

std::optional<std::string> check_recovery(const ForgeRecord& rec) {
  const CleanTable perturbed = perturbed_of(rec);
  const auto& structure = rec.provenance.at(2).params;
  auto rows = structure.at("row_order").get<std::vector<std::size_t>>();
  auto cols = structure.at("col_order").get<std::vector<std::size_t>>();
  std::set<std::pair<std::size_t, std::size_t>> nulled;
  for (const auto& cell : rec.provenance.at(3).params.at("cells")) {
    nulled.emplace(cell[0].get<std::size_t>(), cell[1].get<std::size_t>());
  }
  // Rows left with nothing but nulls read as divider rows and are dropped.
  std::vector<std::size_t> kept;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    bool empty = true;
    for (std::size_t j = 0; j < cols.size() && empty; ++j) {
      empty = nulled.count({i, j}) || is_null(perturbed.rows[rows[i]][cols[j]]);
    }
    if (!empty) kept.push_back(i);
  }
  const CleanTable clean = rule_clean(rec.noisy_table);
  if (clean.num_rows() != kept.size() || clean.num_cols() != cols.size()) {
    return fmt::format("rule_clean changed the shape of {}", serialize_table(rec.noisy_table));
  }
  for (std::size_t k = 0; k < kept.size(); ++k) {
    const std::size_t i = kept[k];
    for (std::size_t j = 0; j < cols.size(); ++j) {
      if (nulled.count({i, j})) continue;
      if (perturbed.column_kinds[cols[j]] != ColumnKind::Numeric) continue;
      const auto& want = perturbed.rows[rows[i]][cols[j]];
      const auto& got = clean.rows[k][j];
      const bool same = is_null(want) ? is_null(got) : is_number(got) && as_double(got) == as_double(want);
      if (!same) {
        return fmt::format("cell {},{} came back as {} instead of {} in {}", i, j, to_debug_string(got),
                           to_debug_string(want), serialize_table(rec.noisy_table));
      }
    }
  }
  return std::nullopt;
}

}  // namespace tabdsr::support
