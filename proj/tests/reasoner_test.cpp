#include <gtest/gtest.h>

#include "tabdsr/reasoner.hpp"
#include "tabdsr/tpl.hpp"

using namespace tabdsr;

namespace {

CleanTable table() {
  return std::get<CleanTable>(validate_clean(
      parse_table(R"({"columns": ["Year", "Revenue"], "data": [[2019, 2400.0], [2020, 2730.0], [2021, null]]})")));
}

std::string fenced(const std::string& code) { return "Program:\n```tpl\n" + code + "\n```\nDone."; }

struct Scripted {
  std::shared_ptr<MockBackend> backend;
  Gateway gateway;
  explicit Scripted(const std::vector<std::string>& replies)
      : backend(std::make_shared<MockBackend>(TranscriptScript([&] {
          std::vector<TranscriptEntry> e;
          for (const auto& r : replies) e.push_back({"reasoner", r, ""});
          return e;
        }()))),
        gateway(LlmConfig{}, backend) {}
};

}  // namespace

TEST(FormatAnswer, Rules) {
  EXPECT_EQ(format_answer(CellValue{std::int64_t{42}}), "42");
  EXPECT_EQ(format_answer(CellValue{13.75}), "13.75");
  EXPECT_EQ(format_answer(CellValue{2.5}), "2.5");
  EXPECT_EQ(format_answer(CellValue{3.0}), "3");
  EXPECT_EQ(format_answer(CellValue{0.125}), "0.12");
  EXPECT_EQ(format_answer(CellValue{0.375}), "0.38");
  EXPECT_EQ(format_answer(CellValue{-0.001}), "0");
  EXPECT_EQ(format_answer(CellValue{NullVal{}}), "N/A");
  EXPECT_EQ(format_answer(CellValue{std::string("Harbor Street")}), "Harbor Street");
  EXPECT_EQ(format_answer(ExecValue{std::vector<CellValue>{std::string("Ana"), std::int64_t{3}}}), "Ana, 3");
}

TEST(ExtractProgram, FencesAndBareCode) {
  EXPECT_EQ(extract_program(fenced("count(table)"), Dialect::Tpl).text, "count(table)");
  EXPECT_EQ(extract_program("  count(table)  ", Dialect::Tpl).text, "count(table)");
  EXPECT_THROW(extract_program("The answer is 7.", Dialect::Tpl), NoCodeBlock);
  EXPECT_THROW(extract_program("print(1)", Dialect::DfScript), NoCodeBlock);
  EXPECT_EQ(extract_program("```python\nresult = 1\n```", Dialect::DfScript).text, "result = 1");
}

TEST(Answer, ChainsSteps) {
  Scripted s({fenced(R"(cell(table |> filter(col("Year") == 2019), 0, "Revenue"))"),
              fenced(R"((cell(table, 1, "Revenue") - 2400) / 2400 * 100)")});
  tpl::TplExecutor exec;
  auto out = answer(table(), SubQuestionList{2, {"Revenue in 2019?", "Percent change?"}}, s.gateway, exec);
  EXPECT_FALSE(out.failed);
  EXPECT_EQ(out.text, "13.75");
  ASSERT_EQ(out.steps.size(), 2u);
  EXPECT_FALSE(out.steps[0].repair_attempted);
}

TEST(Answer, PriorStepsReachTheNextPrompt) {
  struct Capture : ChatBackend {
    std::vector<std::string> prompts;
    std::string complete(const LlmConfig&, const ChatRequest& req) override {
      prompts.push_back(req.user_prompt);
      return "```\ncount(table)\n```";
    }
  };
  auto backend = std::make_shared<Capture>();
  Gateway gw(LlmConfig{}, backend);
  tpl::TplExecutor exec;
  answer(table(), SubQuestionList{2, {"How many rows?", "And again?"}}, gw, exec);
  ASSERT_EQ(backend->prompts.size(), 2u);
  EXPECT_NE(backend->prompts[1].find("1. How many rows?\n   Answer: 3"), std::string::npos);
}

TEST(Answer, OneRepairRound) {
  Scripted s({fenced(R"(sum(table, "Revenu"))"), fenced(R"(sum(table, "Revenue"))")});
  tpl::TplExecutor exec;
  auto out = answer(table(), SubQuestionList{1, {"Total?"}}, s.gateway, exec);
  EXPECT_EQ(out.text, "5130");
  EXPECT_TRUE(out.steps[0].repair_attempted);
  EXPECT_EQ(out.steps[0].repair_program->text, R"(sum(table, "Revenue"))");
  EXPECT_EQ(s.gateway.calls(), 2u);
}

TEST(Answer, FailsAfterRepair) {
  Scripted s({fenced(R"(sum(table, "Revenu"))"), "I am not sure."});
  tpl::TplExecutor exec;
  auto out = answer(table(), SubQuestionList{1, {"Total?"}}, s.gateway, exec);
  EXPECT_TRUE(out.failed);
  EXPECT_EQ(out.text, "N/A");
  EXPECT_EQ(out.steps[0].error->category(), ExecCategory::SyntaxError);
}

TEST(Answer, ExecutionErrorIsRecorded) {
  Scripted s({fenced(R"(mean(table |> head(0), "Revenue"))"), fenced(R"(mean(table |> head(0), "Revenue"))")});
  tpl::TplExecutor exec;
  auto out = answer(table(), SubQuestionList{1, {"Mean?"}}, s.gateway, exec);
  ASSERT_TRUE(out.failed);
  EXPECT_EQ(out.steps[0].error->category(), ExecCategory::EmptyAggregation);
}
