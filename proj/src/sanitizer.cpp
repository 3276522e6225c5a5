#include "tabdsr/sanitizer.hpp"

#include <algorithm>
#include <set>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "tabdsr/decomposer.hpp"

namespace tabdsr {

std::string_view to_string(SanitizeOutcome outcome) {
  switch (outcome) {
    case SanitizeOutcome::LlmFirstTry: return "LlmFirstTry";
    case SanitizeOutcome::LlmAfterReflection: return "LlmAfterReflection";
    case SanitizeOutcome::RuleFallback: return "RuleFallback";
  }
  return "Unknown";
}

namespace {

enum class Slot { Null, Number, Text };

struct Cleaned {
  Slot slot = Slot::Null;
  CellValue value;
};

Cleaned clean_cell(const CellValue& v) {
  if (is_null(v)) return {Slot::Null, NullVal{}};
  if (is_number(v)) return {Slot::Number, v};
  const auto& s = std::get<std::string>(v);
  if (is_blank_marker(s)) return {Slot::Null, NullVal{}};
  if (auto num = numeric_residue(s)) return {Slot::Number, *num};
  return {Slot::Text, trim(s)};
}

std::string original_text(const CellValue& raw) {
  if (is_int(raw)) return std::to_string(std::get<std::int64_t>(raw));
  if (is_float(raw)) return nlohmann::json(std::get<double>(raw)).dump();
  return trim(std::get<std::string>(raw));
}

bool row_all_null(const std::vector<Cleaned>& row) {
  for (const auto& c : row) {
    if (c.slot != Slot::Null) return false;
  }
  return true;
}

// Row 0 is a second header level when every cell in it is text while at
// least 60% of the columns are numeric below it.
bool first_row_is_header_level(const std::vector<std::vector<Cleaned>>& rows, std::size_t ncols) {
  if (rows.size() < 2 || ncols == 0) return false;
  for (const auto& c : rows[0]) {
    if (c.slot != Slot::Text) return false;
  }
  std::size_t numeric_cols = 0;
  for (std::size_t c = 0; c < ncols; ++c) {
    bool any_number = false;
    bool all_number = true;
    for (std::size_t r = 1; r < rows.size(); ++r) {
      if (rows[r][c].slot == Slot::Number) any_number = true;
      if (rows[r][c].slot == Slot::Text) all_number = false;
    }
    if (any_number && all_number) ++numeric_cols;
  }
  return numeric_cols * 10 >= ncols * 6;
}

}  // namespace

CleanTable rule_clean(const RawTable& raw, std::vector<std::string>* log) {
  const std::size_t ncols = raw.num_cols();
  std::vector<std::vector<Cleaned>> rows;
  std::vector<std::vector<const CellValue*>> originals;
  rows.reserve(raw.num_rows());
  std::size_t nulled = 0, stripped = 0;
  for (const auto& raw_row : raw.rows) {
    std::vector<Cleaned> row;
    std::vector<const CellValue*> orig;
    for (const auto& cell : raw_row) {
      row.push_back(clean_cell(cell));
      orig.push_back(&cell);
      if (is_text(cell)) {
        if (row.back().slot == Slot::Null) ++nulled;
        if (row.back().slot == Slot::Number && !parse_plain_number(trim(std::get<std::string>(cell)))) ++stripped;
      }
    }
    rows.push_back(std::move(row));
    originals.push_back(std::move(orig));
  }
  if (log && nulled) log->push_back(fmt::format("mapped {} blank markers to null", nulled));
  if (log && stripped) log->push_back(fmt::format("stripped decoration from {} numeric cells", stripped));

  std::size_t dropped = 0;
  for (std::size_t r = rows.size(); r-- > 0;) {
    if (row_all_null(rows[r])) {
      rows.erase(rows.begin() + static_cast<std::ptrdiff_t>(r));
      originals.erase(originals.begin() + static_cast<std::ptrdiff_t>(r));
      ++dropped;
    }
  }
  if (log && dropped) log->push_back(fmt::format("dropped {} empty divider rows", dropped));

  std::vector<std::string> headers = raw.columns;
  while (first_row_is_header_level(rows, ncols)) {
    for (std::size_t c = 0; c < ncols; ++c) {
      const auto& sub = std::get<std::string>(rows[0][c].value);
      headers[c] = trim(headers[c]).empty() ? sub : headers[c] + " / " + sub;
    }
    rows.erase(rows.begin());
    originals.erase(originals.begin());
    if (log) log->push_back("merged a split header row into the headers");
  }

  std::set<std::string, std::less<>> used;
  for (std::size_t c = 0; c < ncols; ++c) {
    if (trim(headers[c]).empty()) {
      headers[c] = fmt::format("col_{}", c);
      if (log) log->push_back(fmt::format("named empty header {} as {}", c, headers[c]));
    }
  }
  for (std::size_t c = 0; c < ncols; ++c) {
    if (used.count(headers[c])) {
      std::string base = headers[c];
      int suffix = 2;
      std::string candidate;
      do {
        candidate = fmt::format("{}_{}", base, suffix++);
      } while (used.count(candidate) || std::find(headers.begin() + static_cast<std::ptrdiff_t>(c) + 1,
                                                  headers.end(), candidate) != headers.end());
      if (log) log->push_back(fmt::format("renamed duplicate header \"{}\" to \"{}\"", base, candidate));
      headers[c] = candidate;
    }
    used.insert(headers[c]);
  }

  CleanTable out;
  out.columns = std::move(headers);
  out.column_kinds.assign(ncols, ColumnKind::Numeric);
  for (std::size_t c = 0; c < ncols; ++c) {
    for (const auto& row : rows) {
      if (row[c].slot == Slot::Text) {
        out.column_kinds[c] = ColumnKind::Text;
        break;
      }
    }
  }
  out.rows.reserve(rows.size());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    std::vector<CellValue> row;
    row.reserve(ncols);
    for (std::size_t c = 0; c < ncols; ++c) {
      const auto& cell = rows[r][c];
      if (cell.slot == Slot::Null) {
        row.emplace_back(NullVal{});
      } else if (out.column_kinds[c] == ColumnKind::Numeric) {
        row.push_back(cell.value);
      } else {
        row.emplace_back(original_text(*originals[r][c]));
      }
    }
    out.rows.push_back(std::move(row));
  }
  return out;
}

std::optional<CleanTable> accept_cleaned_output(std::string_view model_text, const RawTable& raw, std::string& error,
                                                std::string& kind) {
  nlohmann::json j;
  try {
    j = extract_json(model_text);
  } catch (const NoJsonFound& e) {
    kind = "JsonDecodeError";
    error = e.what();
    return std::nullopt;
  }
  RawTable parsed;
  try {
    parsed = table_from_json(j);
  } catch (const TableError& e) {
    kind = std::string(to_string(e.error().code));
    error = e.what();
    return std::nullopt;
  }
  auto result = validate_clean(parsed);
  if (auto* errors = std::get_if<std::vector<ValidationError>>(&result)) {
    kind = std::string(to_string(errors->front().code));
    error.clear();
    for (const auto& e : *errors) {
      if (!error.empty()) error += '\n';
      error += e.to_string();
    }
    return std::nullopt;
  }
  auto& table = std::get<CleanTable>(result);
  if (table.num_rows() > raw.num_rows()) {
    kind = "RowCountError";
    error = fmt::format("cleaned table has {} rows but the original has only {}; do not invent rows",
                        table.num_rows(), raw.num_rows());
    return std::nullopt;
  }
  return std::move(table);
}

namespace {

std::vector<ValidationError> recheck(const CleanTable& t) {
  auto result = validate_clean(parse_table(serialize_table(t)));
  if (auto* errs = std::get_if<std::vector<ValidationError>>(&result)) return *errs;
  return {};
}

}  // namespace

SanitizeResult sanitize(const RawTable& raw, Gateway& gateway, const PromptSet& prompts, std::string_view sample_id) {
  SanitizeResult out;
  auto& report = out.report;
  auto before = validate_clean(raw);
  if (auto* errs = std::get_if<std::vector<ValidationError>>(&before)) report.violations_before = *errs;

  const std::string table_json = serialize_table(raw);
  ChatRequest req;
  req.system_prompt = prompts.sanitizer_system;
  req.user_prompt = render(prompts.sanitizer_user, {{"table_json", table_json}});
  req.tag = "sanitizer";
  req.sample_id = sample_id;

  auto attempt = [&](const ChatRequest& r, std::string& reply) -> std::optional<CleanTable> {
    std::string error;
    std::string kind;
    try {
      reply = gateway.complete(r);
    } catch (const GatewayError& e) {
      reply.clear();
      report.attempt_errors.push_back(e.what());
      report.failure_kind = "GatewayError";
      return std::nullopt;
    }
    auto table = accept_cleaned_output(reply, raw, error, kind);
    if (!table) {
      report.attempt_errors.push_back(error);
      report.failure_kind = kind;
    }
    return table;
  };

  std::string reply;
  if (auto table = attempt(req, reply)) {
    out.table = std::move(*table);
    report.outcome = SanitizeOutcome::LlmFirstTry;
    report.failure_kind.clear();
    report.transformations.push_back("model cleaned the table on the first attempt");
    report.violations_after = recheck(out.table);
    return out;
  }

  ChatRequest reflect = req;
  reflect.user_prompt = render(prompts.sanitizer_reflect, {{"table_json", table_json},
                                                           {"error_message", report.attempt_errors.back()},
                                                           {"previous_output", reply}});
  report.retries_used = 1;
  std::string second_reply;
  if (auto table = attempt(reflect, second_reply)) {
    out.table = std::move(*table);
    report.outcome = SanitizeOutcome::LlmAfterReflection;
    report.transformations.push_back("model cleaned the table after one reflection round");
    report.violations_after = recheck(out.table);
    return out;
  }

  report.outcome = SanitizeOutcome::RuleFallback;
  report.transformations.push_back("model output rejected twice; applied rule-based cleaning");
  out.table = rule_clean(raw, &report.transformations);
  report.violations_after = recheck(out.table);
  return out;
}

}  // namespace tabdsr
