#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "tabdsr/decomposer.hpp"
#include "tabdsr/exec.hpp"
#include "tabdsr/llm_gateway.hpp"
#include "tabdsr/prompts.hpp"
#include "tabdsr/table.hpp"

namespace tabdsr {

class NoCodeBlock : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct StepResult {
  std::string sub_question;
  ProgramSource program;
  /// Program from the repair round; set iff repair_attempted.
  std::optional<ProgramSource> repair_program;
  std::optional<ExecValue> value;
  std::optional<ExecError> error;
  bool repair_attempted = false;
};

struct FinalAnswer {
  std::string text;
  std::vector<StepResult> steps;
  bool failed = false;
};

/// Contents of the first fenced code block. Without a fence the whole reply
/// is accepted only if it parses as a Tpl program.
ProgramSource extract_program(std::string_view model_text, Dialect dialect);

/// Integers as digits, floats rounded half-even to 2 places with trailing
/// zeros trimmed, text verbatim, null as "N/A", lists joined with ", ".
std::string format_answer(const CellValue& v);
std::string format_answer(const ExecValue& v);

/// Renders the {prior_steps} block from earlier steps.
std::string format_prior_steps(const std::vector<StepResult>& steps);

/// Solves each sub-question in order by asking for a program and running it,
/// with one repair round per failing step. The last step's value is the
/// answer. Never throws on model or execution failure.
FinalAnswer answer(const CleanTable& table, const SubQuestionList& subs, Gateway& gateway, Executor& executor,
                   const PromptSet& prompts = PromptSet::builtin(), std::string_view sample_id = {});

}  // namespace tabdsr
