#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace tabdsr {

struct NullVal {
  friend bool operator==(NullVal, NullVal) = default;
};

/// A single table cell. FloatVal is always finite.
using CellValue = std::variant<NullVal, std::int64_t, double, std::string>;

inline bool is_null(const CellValue& v) { return std::holds_alternative<NullVal>(v); }
inline bool is_int(const CellValue& v) { return std::holds_alternative<std::int64_t>(v); }
inline bool is_float(const CellValue& v) { return std::holds_alternative<double>(v); }
inline bool is_text(const CellValue& v) { return std::holds_alternative<std::string>(v); }
inline bool is_number(const CellValue& v) { return is_int(v) || is_float(v); }

/// Numeric value of an IntVal/FloatVal cell. Precondition: is_number(v).
double as_double(const CellValue& v);

/// Debug rendering: null, 42, 1.5, "text".
std::string to_debug_string(const CellValue& v);

enum class ColumnKind { Numeric, Text };

/// Noisy table as stored: verbatim cells, headers may be empty or duplicated.
struct RawTable {
  std::vector<std::string> columns;
  std::vector<std::vector<CellValue>> rows;

  std::size_t num_rows() const { return rows.size(); }
  std::size_t num_cols() const { return columns.size(); }

  friend bool operator==(const RawTable&, const RawTable&) = default;
};

/// Machine-computable table: unique non-empty headers, homogeneous columns.
/// Numeric columns hold only IntVal/FloatVal/NullVal, Text columns only
/// TextVal/NullVal.
struct CleanTable {
  std::vector<std::string> columns;
  std::vector<std::vector<CellValue>> rows;
  std::vector<ColumnKind> column_kinds;

  std::size_t num_rows() const { return rows.size(); }
  std::size_t num_cols() const { return columns.size(); }
  std::optional<std::size_t> column_index(std::string_view name) const;

  RawTable to_raw() const { return RawTable{columns, rows}; }

  friend bool operator==(const CleanTable&, const CleanTable&) = default;
};

enum class ValidationCode {
  SchemaError,
  RowShapeError,
  MixedTypeColumn,
  DuplicateHeader,
  EmptyHeader,
  NonFiniteNumber,
};

std::string_view to_string(ValidationCode code);

/// Where a violation sits. All fields empty means `whole-table`.
struct Location {
  std::optional<std::size_t> row;
  std::optional<std::size_t> col;
  std::optional<std::size_t> header;

  static Location whole_table() { return {}; }
  static Location at_row(std::size_t r) { return {r, std::nullopt, std::nullopt}; }
  static Location at_col(std::size_t c) { return {std::nullopt, c, std::nullopt}; }
  static Location at_header(std::size_t h) { return {std::nullopt, std::nullopt, h}; }
  static Location at_cell(std::size_t r, std::size_t c) { return {r, c, std::nullopt}; }

  std::string to_string() const;
  friend bool operator==(const Location&, const Location&) = default;
};

struct ValidationError {
  ValidationCode code;
  Location location;
  std::string message;

  std::string to_string() const;
};

/// Thrown by parse_table.
class TableError : public std::runtime_error {
 public:
  explicit TableError(ValidationError error)
      : std::runtime_error(error.to_string()), error_(std::move(error)) {}

  const ValidationError& error() const noexcept { return error_; }

 private:
  ValidationError error_;
};

/// Parses {"columns": [...], "data": [[...], ...]}. Booleans become text.
RawTable parse_table(std::string_view json_text);
RawTable table_from_json(const nlohmann::json& j);

nlohmann::json table_to_json(const RawTable& t);
nlohmann::json table_to_json(const CleanTable& t);
std::string serialize_table(const RawTable& t);
std::string serialize_table(const CleanTable& t);

using ValidationResult = std::variant<CleanTable, std::vector<ValidationError>>;

/// Checks every CleanTable invariant and returns either the typed table or
/// the complete list of violations.
ValidationResult validate_clean(const RawTable& t);

// Cell-level text helpers shared by the validator, the sanitizer's rule
// cleaner and the forge.

/// Plain number: optional sign, digits, at most one '.', optional exponent.
/// Integers outside int64 come back as double.
std::optional<CellValue> parse_plain_number(std::string_view text);

/// True for the blank markers that stand for missing data ("N/A", "-", ...).
bool is_blank_marker(std::string_view text);

/// Strips currency symbols, '%', thousands separators and trailing notes,
/// maps accounting parentheses to a negative sign, then parses what is left.
std::optional<CellValue> numeric_residue(std::string_view text);

std::string trim(std::string_view s);

/// Decimal places in the shortest round-trip rendering of v (capped at 10).
int decimal_places(double v);

}  // namespace tabdsr
