#include <gtest/gtest.h>

#include "support.hpp"
#include "tabdsr/tpl.hpp"

using namespace tabdsr;
using tabdsr::tpl::eval_program;
using tabdsr::tpl::parse_program;

namespace {

CleanTable sales() {
  auto v = validate_clean(parse_table(R"({"columns": ["Region", "Units", "Price"],
    "data": [["north", 10, 2.5], ["south", 4, 1.25], ["east", null, 3.0], ["west", 7, 0.5]]})"));
  return std::get<CleanTable>(v);
}

ExecValue run(std::string_view program, const CleanTable& t = sales()) {
  return eval_program(parse_program(program), t);
}

ExecCategory fails(std::string_view program, const CleanTable& t = sales()) {
  try {
    run(program, t);
  } catch (const ExecError& e) {
    return e.category();
  }
  ADD_FAILURE() << "no error from: " << program;
  return ExecCategory::RunnerProtocolError;
}

CellValue scalar(std::string_view program) { return std::get<CellValue>(run(program)); }

}  // namespace

TEST(Tpl, Aggregates) {
  EXPECT_EQ(scalar(R"(sum(table, "Units"))"), CellValue{std::int64_t{21}});
  EXPECT_EQ(scalar(R"(count(table))"), CellValue{std::int64_t{4}});
  EXPECT_EQ(scalar(R"(mean(table, "Units"))"), CellValue{7.0});
  EXPECT_EQ(scalar(R"(max(table, "Price"))"), CellValue{3.0});
  EXPECT_EQ(scalar(R"(min(table, "Units"))"), CellValue{std::int64_t{4}});
}

TEST(Tpl, PipelineStages) {
  EXPECT_EQ(scalar(R"(cell(table |> sortby("Units", desc), 0, "Region"))"), CellValue{std::string("north")});
  // nulls sort last in both directions
  EXPECT_EQ(scalar(R"(cell(table |> sortby("Units", asc), 3, "Region"))"), CellValue{std::string("east")});
  EXPECT_EQ(scalar(R"(count(table |> filter(col("Units") > 5)))"), CellValue{std::int64_t{2}});
  EXPECT_EQ(scalar(R"(count(table |> filter(not (col("Units") > 5))))"), CellValue{std::int64_t{2}});
  EXPECT_EQ(scalar(R"(count(table |> head(2)))"), CellValue{std::int64_t{2}});
  EXPECT_EQ(scalar(R"(count(table |> filter(col("Region") == "south" or col("Price") >= 3)))"),
            CellValue{std::int64_t{2}});
}

TEST(Tpl, BindingsAndArithmetic) {
  EXPECT_EQ(scalar("p = table |> filter(col(\"Units\") >= 7);\n"
                   "a = sum(p, \"Units\");\n"
                   "a / count(p)"),
            CellValue{8.5});
  EXPECT_EQ(scalar("round(2.675 * 100, 0)"), CellValue{268.0});
  EXPECT_EQ(scalar("round(0.125, 2)"), CellValue{0.12});
  EXPECT_EQ(scalar("abs(3 - 10)"), CellValue{std::int64_t{7}});
  EXPECT_EQ(scalar("-(4) + 1  # comment"), CellValue{std::int64_t{-3}});
}

TEST(Tpl, ValuesKeepsRowOrder) {
  auto v = std::get<std::vector<CellValue>>(run(R"(values(table |> head(3), "Units"))"));
  ASSERT_EQ(v.size(), 3u);
  EXPECT_TRUE(is_null(v[2]));
}

TEST(Tpl, ErrorCategories) {
  EXPECT_EQ(fails(R"(sum(table, "Cost"))"), ExecCategory::UnknownColumn);
  EXPECT_EQ(fails(R"(sum(table |> select(["Region"]), "Units"))"), ExecCategory::UnknownColumn);
  EXPECT_EQ(fails("b + 1"), ExecCategory::UnknownIdentifier);
  EXPECT_EQ(fails(R"(sum(table, "Region"))"), ExecCategory::TypeMismatch);
  EXPECT_EQ(fails(R"(cell(table, 4, "Units"))"), ExecCategory::IndexOutOfRange);
  EXPECT_EQ(fails("1 / 0"), ExecCategory::DivisionByZero);
  EXPECT_EQ(fails(R"(mean(table |> filter(col("Units") > 100), "Units"))"), ExecCategory::EmptyAggregation);
  EXPECT_EQ(fails("sum(table, "), ExecCategory::SyntaxError);
  EXPECT_EQ(fails(R"(count(table |> filter(col("Region") > 3)))"), ExecCategory::TypeMismatch);
}

TEST(Tpl, SyntaxErrorCarriesPosition) {
  try {
    parse_program("count(table) +* 2");
    FAIL();
  } catch (const ExecError& e) {
    ASSERT_TRUE(e.position().has_value());
    EXPECT_EQ(*e.position(), 14u);
  }
}

TEST(Tpl, EmptySumIsZero) {
  EXPECT_EQ(scalar(R"(sum(table |> head(0), "Units"))"), CellValue{std::int64_t{0}});
}

TEST(Tpl, IntOverflowPromotesToFloat) {
  EXPECT_TRUE(is_float(scalar("9223372036854775807 + 1")));
}

TEST(Tpl, TableIsNotModified) {
  CleanTable t = sales();
  const CleanTable before = t;
  run(R"(count(table |> sortby("Price", asc) |> select(["Price"]) |> head(1)))", t);
  EXPECT_EQ(t, before);
}

TEST(Tpl, MatchesRowScanReference) {
  SplitMix64 rng(7);
  for (int i = 0; i < 300; ++i) {
    auto oc = support::random_oracle_case(rng);
    support::OracleResult actual;
    try {
      actual = run(oc.program, oc.table);
    } catch (const ExecError& e) {
      actual = e.category();
    }
    auto diff = support::compare_oracle(oc.expected, actual);
    ASSERT_FALSE(diff) << oc.program << "\n" << *diff;
  }
}
