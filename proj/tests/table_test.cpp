#include <gtest/gtest.h>

#include <nlohmann/json.hpp>

#include "tabdsr/table.hpp"

using namespace tabdsr;

namespace {

std::vector<ValidationError> violations(std::string_view json) {
  auto r = validate_clean(parse_table(json));
  if (auto* e = std::get_if<std::vector<ValidationError>>(&r)) return *e;
  return {};
}

}  // namespace

TEST(Table, ParsesCellTypes) {
  auto t = parse_table(R"({"columns": ["a", "b"], "data": [[1, 2.5], ["x", null], [true, 3]]})");
  ASSERT_EQ(t.num_rows(), 3u);
  EXPECT_TRUE(is_int(t.rows[0][0]));
  EXPECT_TRUE(is_float(t.rows[0][1]));
  EXPECT_TRUE(is_null(t.rows[1][1]));
  EXPECT_EQ(t.rows[2][0], CellValue{std::string("true")});
}

TEST(Table, SchemaErrors) {
  auto code = [](std::string_view json) {
    try {
      parse_table(json);
    } catch (const TableError& e) {
      return e.error().code;
    }
    return ValidationCode::NonFiniteNumber;
  };
  EXPECT_EQ(code("[1]"), ValidationCode::SchemaError);
  EXPECT_EQ(code(R"({"columns": ["a"]})"), ValidationCode::SchemaError);
  EXPECT_EQ(code(R"({"columns": ["a"], "data": [[{"x": 1}]]})"), ValidationCode::SchemaError);
  EXPECT_EQ(code(R"({"columns": ["a", "b"], "data": [[1]]})"), ValidationCode::RowShapeError);
  EXPECT_EQ(code("{not json"), ValidationCode::SchemaError);
}

TEST(Table, ValidatorReportsEveryViolation) {
  auto errs = violations(R"({"columns": ["a", "a", " "], "data": [[1, "$5", "x"], [2, 3, "y"]]})");
  ASSERT_EQ(errs.size(), 3u);
  EXPECT_EQ(errs[0].code, ValidationCode::DuplicateHeader);
  EXPECT_EQ(errs[0].location, Location::at_header(1));
  EXPECT_EQ(errs[1].code, ValidationCode::EmptyHeader);
  EXPECT_EQ(errs[2].code, ValidationCode::MixedTypeColumn);

  errs = violations(R"({"columns": ["a", "b"], "data": [[1, "$5"], [2, 3]]})");
  ASSERT_EQ(errs.size(), 1u);
  EXPECT_EQ(errs[0].code, ValidationCode::MixedTypeColumn);
  EXPECT_EQ(errs[0].location.to_string(), "col 1");
}

TEST(Table, NumericTextColumnsBecomeNumbers) {
  auto r = validate_clean(parse_table(R"({"columns": ["a", "b"], "data": [["1", "x"], ["2.5", null]]})"));
  const auto& t = std::get<CleanTable>(r);
  EXPECT_EQ(t.column_kinds, (std::vector<ColumnKind>{ColumnKind::Numeric, ColumnKind::Text}));
  EXPECT_EQ(t.rows[0][0], CellValue{std::int64_t{1}});
  EXPECT_EQ(t.rows[1][0], CellValue{2.5});
}

TEST(Table, DecoratedNumbersAreNotClean) {
  // still numbers underneath, so the sanitizer has work to do
  auto decorated = violations(R"({"columns": ["a"], "data": [["$5"], ["$6"]]})");
  auto noted = violations(R"j({"columns": ["a"], "data": [["1.24(approx)"], ["1.55"]]})j");
  auto text = violations(R"({"columns": ["a"], "data": [["Q1 2020"], ["N/A"]]})");
  ASSERT_EQ(decorated.size(), 1u);
  EXPECT_EQ(decorated[0].code, ValidationCode::MixedTypeColumn);
  ASSERT_EQ(noted.size(), 1u);
  EXPECT_EQ(noted[0].code, ValidationCode::MixedTypeColumn);
  EXPECT_TRUE(text.empty());
}

TEST(Table, SerializeRoundTrip) {
  const std::string json = R"({"columns":["k","v"],"data":[["a",1],["b",0.1],["c",null]]})";
  auto t = parse_table(json);
  EXPECT_EQ(serialize_table(t), json);
  EXPECT_EQ(parse_table(serialize_table(t)), t);
}

TEST(Table, CellHelpers) {
  EXPECT_EQ(parse_plain_number("-1.5e3"), CellValue{-1500.0});
  EXPECT_FALSE(parse_plain_number("1,000"));
  EXPECT_TRUE(is_blank_marker(" n/a "));
  EXPECT_FALSE(is_blank_marker("0"));
  EXPECT_EQ(numeric_residue("(1,200)"), CellValue{std::int64_t{-1200}});
  EXPECT_EQ(decimal_places(0.1), 1);
  EXPECT_EQ(decimal_places(12.0), 0);
}
