#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "tabdsr/llm_gateway.hpp"
#include "tabdsr/prompts.hpp"
#include "tabdsr/table.hpp"

namespace tabdsr {

enum class SanitizeOutcome { LlmFirstTry, LlmAfterReflection, RuleFallback };

std::string_view to_string(SanitizeOutcome outcome);

struct SanitizeReport {
  SanitizeOutcome outcome = SanitizeOutcome::LlmFirstTry;
  int retries_used = 0;
  std::vector<ValidationError> violations_before;
  std::vector<ValidationError> violations_after;
  /// One message per rejected model attempt.
  std::vector<std::string> attempt_errors;
  /// Error class of the last rejected attempt (JsonDecodeError, SchemaError,
  /// MixedTypeColumn, ...); empty when the first attempt was accepted.
  std::string failure_kind;
  std::vector<std::string> transformations;
};

struct SanitizeResult {
  CleanTable table;
  SanitizeReport report;
};

/// Deterministic cleaner used as the fallback. Blank markers become null,
/// decorations are stripped, divider rows dropped, split header rows merged
/// with " / ", and headers made unique. Optionally logs what it changed.
CleanTable rule_clean(const RawTable& raw, std::vector<std::string>* log = nullptr);

/// Checks one model reply against the parser and validator. Returns the table
/// or fills `error`/`kind` and returns nullopt.
std::optional<CleanTable> accept_cleaned_output(std::string_view model_text, const RawTable& raw,
                                                std::string& error, std::string& kind);

/// Model cleaning with one reflection retry, then rule_clean. Never throws on
/// model failure. At most two gateway calls.
SanitizeResult sanitize(const RawTable& raw, Gateway& gateway, const PromptSet& prompts = PromptSet::builtin(),
                        std::string_view sample_id = {});

}  // namespace tabdsr
