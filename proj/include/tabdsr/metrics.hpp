#pragma once

#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace tabdsr {

/// Canonical form of an answer string used for accuracy.
struct NormalizedAnswer {
  enum class Kind { Number, Text, List };
  Kind kind = Kind::Text;
  double number = 0.0;
  std::string text;
  std::vector<NormalizedAnswer> items;

  static NormalizedAnswer make_number(double v) { return {Kind::Number, v, {}, {}}; }
  static NormalizedAnswer make_text(std::string s) { return {Kind::Text, 0.0, std::move(s), {}}; }
  static NormalizedAnswer make_list(std::vector<NormalizedAnswer> xs) { return {Kind::List, 0.0, {}, std::move(xs)}; }
};

NormalizedAnswer normalize_answer(std::string_view text);

/// Numbers match within max(1e-6, 1e-4·|gold|); lists match as multisets.
bool answers_match(std::string_view pred, std::string_view gold);
bool answers_match(const NormalizedAnswer& pred, const NormalizedAnswer& gold);

/// Lowercased tokens split on runs of non-alphanumeric characters. Bytes of
/// multi-byte UTF-8 sequences count as alphanumeric.
std::vector<std::string> rouge_tokens(std::string_view text);

std::size_t lcs_length(const std::vector<std::string>& a, const std::vector<std::string>& b);

/// Sentence-level ROUGE-L F1 over tokens.
double rouge_l(std::string_view pred, std::string_view gold);
double rouge_l_tokens(const std::vector<std::string>& pred, const std::vector<std::string>& gold);

}  // namespace tabdsr
