#include "tabdsr/table.hpp"

#include <array>
#include <charconv>
#include <cmath>
#include <limits>
#include <set>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

namespace tabdsr {

using nlohmann::json;

double as_double(const CellValue& v) {
  if (const auto* i = std::get_if<std::int64_t>(&v)) return static_cast<double>(*i);
  return std::get<double>(v);
}

std::string to_debug_string(const CellValue& v) {
  if (is_null(v)) return "null";
  if (is_int(v)) return std::to_string(std::get<std::int64_t>(v));
  if (is_float(v)) return json(std::get<double>(v)).dump();
  return json(std::get<std::string>(v)).dump();
}

std::optional<std::size_t> CleanTable::column_index(std::string_view name) const {
  for (std::size_t i = 0; i < columns.size(); ++i) {
    if (columns[i] == name) return i;
  }
  return std::nullopt;
}

std::string_view to_string(ValidationCode code) {
  switch (code) {
    case ValidationCode::SchemaError: return "SchemaError";
    case ValidationCode::RowShapeError: return "RowShapeError";
    case ValidationCode::MixedTypeColumn: return "MixedTypeColumn";
    case ValidationCode::DuplicateHeader: return "DuplicateHeader";
    case ValidationCode::EmptyHeader: return "EmptyHeader";
    case ValidationCode::NonFiniteNumber: return "NonFiniteNumber";
  }
  return "Unknown";
}

std::string Location::to_string() const {
  if (header) return fmt::format("header {}", *header);
  if (row && col) return fmt::format("row {}, col {}", *row, *col);
  if (row) return fmt::format("row {}", *row);
  if (col) return fmt::format("col {}", *col);
  return "whole-table";
}

std::string ValidationError::to_string() const {
  return fmt::format("{} at {}: {}", tabdsr::to_string(code), location.to_string(), message);
}

namespace {

[[noreturn]] void fail(ValidationCode code, Location loc, std::string message) {
  throw TableError(ValidationError{code, loc, std::move(message)});
}

CellValue cell_from_json(const json& j, std::size_t r, std::size_t c) {
  switch (j.type()) {
    case json::value_t::null:
      return NullVal{};
    case json::value_t::boolean:
      return std::string(j.get<bool>() ? "true" : "false");
    case json::value_t::string:
      return j.get<std::string>();
    case json::value_t::number_integer:
      return j.get<std::int64_t>();
    case json::value_t::number_unsigned: {
      auto u = j.get<std::uint64_t>();
      if (u <= static_cast<std::uint64_t>(std::numeric_limits<std::int64_t>::max())) {
        return static_cast<std::int64_t>(u);
      }
      return static_cast<double>(u);
    }
    case json::value_t::number_float: {
      double d = j.get<double>();
      if (!std::isfinite(d)) {
        fail(ValidationCode::NonFiniteNumber, Location::at_cell(r, c), "number is not finite");
      }
      return d;
    }
    default:
      fail(ValidationCode::SchemaError, Location::at_cell(r, c),
           fmt::format("cell must be a scalar, got {}", j.type_name()));
  }
}

json cell_to_json(const CellValue& v) {
  if (is_null(v)) return nullptr;
  if (is_int(v)) return std::get<std::int64_t>(v);
  if (is_float(v)) return std::get<double>(v);
  return std::get<std::string>(v);
}

json rows_to_json(const std::vector<std::string>& columns,
                  const std::vector<std::vector<CellValue>>& rows) {
  json data = json::array();
  for (const auto& row : rows) {
    json jr = json::array();
    for (const auto& cell : row) jr.push_back(cell_to_json(cell));
    data.push_back(std::move(jr));
  }
  json out = json::object();
  out["columns"] = columns;
  out["data"] = std::move(data);
  return out;
}

bool is_digit(char c) { return c >= '0' && c <= '9'; }

void replace_all(std::string& s, std::string_view from, std::string_view to) {
  std::size_t pos = 0;
  while ((pos = s.find(from, pos)) != std::string::npos) {
    s.replace(pos, from.size(), to);
    pos += to.size();
  }
}

constexpr std::array<std::string_view, 4> kCurrencySymbols = {"$", "€", "£", "¥"};

}  // namespace

RawTable table_from_json(const json& j) {
  if (!j.is_object()) {
    fail(ValidationCode::SchemaError, Location::whole_table(), "table must be a JSON object");
  }
  auto cols = j.find("columns");
  if (cols == j.end()) {
    fail(ValidationCode::SchemaError, Location::whole_table(), "\"columns\" missing");
  }
  if (!cols->is_array()) {
    fail(ValidationCode::SchemaError, Location::whole_table(), "\"columns\" must be an array");
  }
  auto data = j.find("data");
  if (data == j.end()) {
    fail(ValidationCode::SchemaError, Location::whole_table(), "\"data\" missing");
  }
  if (!data->is_array()) {
    fail(ValidationCode::SchemaError, Location::whole_table(), "\"data\" must be an array");
  }

  RawTable t;
  for (std::size_t i = 0; i < cols->size(); ++i) {
    const auto& h = (*cols)[i];
    if (!h.is_string()) {
      fail(ValidationCode::SchemaError, Location::at_header(i), "header must be a string");
    }
    t.columns.push_back(h.get<std::string>());
  }
  if (t.columns.empty()) {
    fail(ValidationCode::SchemaError, Location::whole_table(), "\"columns\" is empty");
  }

  t.rows.reserve(data->size());
  for (std::size_t r = 0; r < data->size(); ++r) {
    const auto& jr = (*data)[r];
    if (!jr.is_array()) {
      fail(ValidationCode::SchemaError, Location::at_row(r), "row must be an array");
    }
    if (jr.size() != t.columns.size()) {
      fail(ValidationCode::RowShapeError, Location::at_row(r),
           fmt::format("row has {} cells, expected {}", jr.size(), t.columns.size()));
    }
    std::vector<CellValue> row;
    row.reserve(jr.size());
    for (std::size_t c = 0; c < jr.size(); ++c) row.push_back(cell_from_json(jr[c], r, c));
    t.rows.push_back(std::move(row));
  }
  return t;
}

RawTable parse_table(std::string_view json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    fail(ValidationCode::SchemaError, Location::whole_table(),
         fmt::format("invalid JSON: {}", e.what()));
  }
  return table_from_json(j);
}

json table_to_json(const RawTable& t) { return rows_to_json(t.columns, t.rows); }
json table_to_json(const CleanTable& t) { return rows_to_json(t.columns, t.rows); }
std::string serialize_table(const RawTable& t) { return table_to_json(t).dump(); }
std::string serialize_table(const CleanTable& t) { return table_to_json(t).dump(); }

std::string trim(std::string_view s) {
  constexpr std::string_view ws = " \t\r\n\f\v";
  auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(ws);
  return std::string(s.substr(b, e - b + 1));
}

std::optional<CellValue> parse_plain_number(std::string_view text) {
  std::size_t i = 0;
  const std::size_t n = text.size();
  bool negative = false;
  if (i < n && (text[i] == '+' || text[i] == '-')) {
    negative = text[i] == '-';
    ++i;
  }
  const std::size_t mantissa_start = i;
  std::size_t int_digits = 0;
  std::size_t frac_digits = 0;
  bool has_point = false;
  bool has_exponent = false;
  while (i < n && is_digit(text[i])) { ++i; ++int_digits; }
  if (i < n && text[i] == '.') {
    has_point = true;
    ++i;
    while (i < n && is_digit(text[i])) { ++i; ++frac_digits; }
  }
  if (int_digits + frac_digits == 0) return std::nullopt;
  if (i < n && (text[i] == 'e' || text[i] == 'E')) {
    has_exponent = true;
    ++i;
    if (i < n && (text[i] == '+' || text[i] == '-')) ++i;
    std::size_t exp_digits = 0;
    while (i < n && is_digit(text[i])) { ++i; ++exp_digits; }
    if (exp_digits == 0) return std::nullopt;
  }
  if (i != n) return std::nullopt;

  // from_chars rejects a leading '+', and handles '-' itself.
  std::string_view body = text.substr(negative ? mantissa_start - 1 : mantissa_start);
  if (!has_point && !has_exponent) {
    std::int64_t iv = 0;
    auto [p, ec] = std::from_chars(body.data(), body.data() + body.size(), iv);
    if (ec == std::errc() && p == body.data() + body.size()) return CellValue{iv};
  }
  double dv = 0.0;
  auto [p, ec] = std::from_chars(body.data(), body.data() + body.size(), dv);
  if (ec != std::errc() || p != body.data() + body.size() || !std::isfinite(dv)) {
    return std::nullopt;
  }
  return CellValue{dv};
}

bool is_blank_marker(std::string_view text) {
  static const std::set<std::string, std::less<>> kMarkers = {
      "", "-", "–", "—", "N/A", "NA", "n/a", "none", "None", "null", "Null", "???"};
  return kMarkers.count(trim(text)) > 0;
}

std::optional<CellValue> numeric_residue(std::string_view text) {
  std::string s = trim(text);
  replace_all(s, "−", "-");
  for (auto sym : kCurrencySymbols) replace_all(s, sym, "");
  replace_all(s, "%", "");
  s = trim(s);
  if (s.empty()) return std::nullopt;

  // Trailing explanatory note, e.g. "1.24(approx)".
  if (s.back() == ')') {
    auto open = s.rfind('(');
    if (open != std::string::npos && open > 0) {
      std::string head = trim(std::string_view(s).substr(0, open));
      if (!head.empty() && head != "-" && head != "+") s = head;
    }
  }

  bool negate = false;
  if (s.size() >= 2 && s.front() == '(' && s.back() == ')') {
    negate = true;
    s = trim(std::string_view(s).substr(1, s.size() - 2));
  } else if (s.size() >= 3 && s[0] == '-' && s[1] == '(' && s.back() == ')') {
    negate = true;
    s = trim(std::string_view(s).substr(2, s.size() - 3));
  }

  std::string stripped;
  stripped.reserve(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == ',' && i > 0 && i + 1 < s.size() && is_digit(s[i - 1]) && is_digit(s[i + 1])) {
      continue;
    }
    stripped.push_back(s[i]);
  }
  stripped = trim(stripped);
  // "$ -12" style leftovers
  if (stripped.size() >= 2 && (stripped[0] == '-' || stripped[0] == '+') && stripped[1] == ' ') {
    stripped = std::string(1, stripped[0]) + trim(std::string_view(stripped).substr(1));
  }

  auto value = parse_plain_number(stripped);
  if (!value) return std::nullopt;
  if (negate) {
    if (!stripped.empty() && (stripped[0] == '-' || stripped[0] == '+')) return std::nullopt;
    if (auto* iv = std::get_if<std::int64_t>(&*value)) {
      *value = -*iv;
    } else {
      *value = -std::get<double>(*value);
    }
  }
  return value;
}

int decimal_places(double v) {
  std::array<char, 512> buf{};
  auto [p, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v, std::chars_format::fixed);
  if (ec != std::errc()) return 0;
  std::string_view s(buf.data(), static_cast<std::size_t>(p - buf.data()));
  auto dot = s.find('.');
  if (dot == std::string_view::npos) return 0;
  return static_cast<int>(std::min<std::size_t>(s.size() - dot - 1, 10));
}

namespace {

enum class CellClass { Null, JsonNumber, Plain, Decorated, Blank, Text };

CellClass classify(const CellValue& v) {
  if (is_null(v)) return CellClass::Null;
  if (is_number(v)) return CellClass::JsonNumber;
  const auto& s = std::get<std::string>(v);
  if (parse_plain_number(trim(s))) return CellClass::Plain;
  if (is_blank_marker(s)) return CellClass::Blank;
  if (numeric_residue(s)) return CellClass::Decorated;
  return CellClass::Text;
}

}  // namespace

ValidationResult validate_clean(const RawTable& t) {
  std::vector<ValidationError> errors;

  std::set<std::string, std::less<>> seen;
  for (std::size_t h = 0; h < t.columns.size(); ++h) {
    const auto& name = t.columns[h];
    if (trim(name).empty()) {
      errors.push_back({ValidationCode::EmptyHeader, Location::at_header(h), "header is empty"});
      continue;
    }
    if (!seen.insert(name).second) {
      errors.push_back({ValidationCode::DuplicateHeader, Location::at_header(h),
                        fmt::format("header \"{}\" appears more than once", name)});
    }
  }
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    if (t.rows[r].size() != t.columns.size()) {
      errors.push_back({ValidationCode::RowShapeError, Location::at_row(r),
                        fmt::format("row has {} cells, expected {}", t.rows[r].size(),
                                    t.columns.size())});
    }
  }
  if (!errors.empty() && errors.back().code == ValidationCode::RowShapeError) return errors;

  std::vector<ColumnKind> kinds(t.columns.size(), ColumnKind::Text);
  for (std::size_t c = 0; c < t.columns.size(); ++c) {
    bool json_number = false, plain = false, decorated = false, blank = false, text = false;
    std::optional<std::size_t> noisy_row;
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
      switch (classify(t.rows[r][c])) {
        case CellClass::Null: break;
        case CellClass::JsonNumber: json_number = true; break;
        case CellClass::Plain: plain = true; break;
        case CellClass::Decorated:
          decorated = true;
          if (!noisy_row) noisy_row = r;
          break;
        case CellClass::Blank:
          blank = true;
          if (!noisy_row) noisy_row = r;
          break;
        case CellClass::Text:
          text = true;
          if (!noisy_row) noisy_row = r;
          break;
      }
    }
    const bool numeric_like = json_number || plain || decorated;
    const bool mixed = (json_number && (decorated || blank || text)) ||
                       (!text && (decorated || blank) && numeric_like);
    if (mixed) {
      errors.push_back({ValidationCode::MixedTypeColumn, Location::at_col(c),
                        fmt::format("column \"{}\" mixes numbers with non-numeric cells "
                                    "(first offending cell at row {}: {})",
                                    t.columns[c], *noisy_row,
                                    to_debug_string(t.rows[*noisy_row][c]))});
      continue;
    }
    kinds[c] = (text || blank || decorated) ? ColumnKind::Text : ColumnKind::Numeric;
  }
  if (!errors.empty()) return errors;

  CleanTable out;
  out.columns = t.columns;
  out.column_kinds = kinds;
  out.rows.reserve(t.rows.size());
  for (const auto& row : t.rows) {
    std::vector<CellValue> clean_row;
    clean_row.reserve(row.size());
    for (std::size_t c = 0; c < row.size(); ++c) {
      const auto& cell = row[c];
      if (kinds[c] == ColumnKind::Numeric && is_text(cell)) {
        clean_row.push_back(*parse_plain_number(trim(std::get<std::string>(cell))));
      } else {
        clean_row.push_back(cell);
      }
    }
    out.rows.push_back(std::move(clean_row));
  }
  return out;
}

}  // namespace tabdsr
