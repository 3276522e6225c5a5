#include "tabdsr/exec.hpp"

#include <array>
#include <utility>

#include <fmt/format.h>

namespace tabdsr {

namespace {

constexpr std::array<std::pair<ExecCategory, std::string_view>, 9> kCategoryNames = {{
    {ExecCategory::SyntaxError, "SyntaxError"},
    {ExecCategory::UnknownColumn, "UnknownColumn"},
    {ExecCategory::UnknownIdentifier, "UnknownIdentifier"},
    {ExecCategory::TypeMismatch, "TypeMismatch"},
    {ExecCategory::IndexOutOfRange, "IndexOutOfRange"},
    {ExecCategory::DivisionByZero, "DivisionByZero"},
    {ExecCategory::EmptyAggregation, "EmptyAggregation"},
    {ExecCategory::Timeout, "Timeout"},
    {ExecCategory::RunnerProtocolError, "RunnerProtocolError"},
}};

std::string describe(ExecCategory c, const std::string& message, std::optional<std::size_t> pos) {
  if (pos) return fmt::format("{} at offset {}: {}", to_string(c), *pos, message);
  return fmt::format("{}: {}", to_string(c), message);
}

}  // namespace

std::string_view to_string(ExecCategory c) {
  for (const auto& [cat, name] : kCategoryNames) {
    if (cat == c) return name;
  }
  return "Unknown";
}

std::optional<ExecCategory> exec_category_from_string(std::string_view name) {
  for (const auto& [cat, n] : kCategoryNames) {
    if (n == name) return cat;
  }
  return std::nullopt;
}

ExecError::ExecError(ExecCategory category, std::string message, std::optional<std::size_t> position)
    : std::runtime_error(describe(category, message, position)),
      category_(category),
      message_(std::move(message)),
      position_(position) {}

std::string_view to_string(Dialect d) { return d == Dialect::Tpl ? "tpl" : "dfscript"; }

}  // namespace tabdsr
