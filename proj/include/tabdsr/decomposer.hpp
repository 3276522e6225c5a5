#pragma once

#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "tabdsr/llm_gateway.hpp"
#include "tabdsr/prompts.hpp"

namespace tabdsr {

class NoJsonFound : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Model output that does not follow the requested schema.
class MalformedOutput : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// First balanced top-level JSON object or array in `text`, ignoring any
/// surrounding prose or markdown fences.
nlohmann::json extract_json(std::string_view text);

inline constexpr std::size_t kMaxSubQuestions = 6;

struct SubQuestionList {
  std::size_t count = 0;
  std::vector<std::string> items;

  friend bool operator==(const SubQuestionList&, const SubQuestionList&) = default;
};

/// Builds the decomposer prompt. Takes no table, and never will.
ChatRequest build_decomposer_request(std::string_view question, const PromptSet& prompts = PromptSet::builtin());

/// Parses {"count": n, "sub_questions": [...]}; a wrong count is corrected and
/// reported through `warnings`.
SubQuestionList parse_sub_questions(std::string_view model_text, std::vector<std::string>* warnings = nullptr);

/// Throws MalformedOutput when the reply has no usable JSON.
SubQuestionList decompose(std::string_view question, Gateway& gateway,
                          const PromptSet& prompts = PromptSet::builtin(), std::string_view sample_id = {},
                          std::vector<std::string>* warnings = nullptr);

struct DecomposeOutcome {
  SubQuestionList subs;
  /// True when the fallback {1, [question]} was used.
  bool failed = false;
  std::string error;
  std::vector<std::string> warnings;
};

/// decompose() with the single-question fallback applied on any failure.
DecomposeOutcome decompose_or_fallback(std::string_view question, Gateway& gateway,
                                       const PromptSet& prompts = PromptSet::builtin(),
                                       std::string_view sample_id = {});

}  // namespace tabdsr
