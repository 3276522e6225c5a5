#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <string_view>

namespace tabdsr {

/// Prompt templates for every agent. Placeholders are written `{name}`;
/// anything else in braces is left alone, so templates can embed JSON.
struct PromptSet {
  std::string decomposer_system;
  std::string decomposer_user;     // {question} {example}
  std::string decomposer_example;
  std::string sanitizer_system;
  std::string sanitizer_user;      // {table_json}
  std::string sanitizer_reflect;   // {table_json} {error_message} {previous_output}
  std::string reasoner_system;
  std::string reasoner_user;       // {table_json} {sub_question} {prior_steps} {dialect_instructions}
  std::string dialect_tpl;
  std::string dialect_dfscript;
  std::string forge_user;          // {table_json}

  static const PromptSet& builtin();

  /// Reads `<dir>/<field>.txt` for each field; missing files keep the
  /// built-in text.
  static PromptSet load(const std::filesystem::path& dir);

  /// Writes every template as `<dir>/<field>.txt`.
  void save(const std::filesystem::path& dir) const;
};

std::string render(std::string_view tmpl, const std::map<std::string, std::string>& vars);

}  // namespace tabdsr
