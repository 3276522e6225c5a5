#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "tabdsr/table.hpp"

namespace tabdsr {

/// Result of running a table program: one cell or a list of cells.
using ExecValue = std::variant<CellValue, std::vector<CellValue>>;

/// Shared failure taxonomy for every execution backend.
enum class ExecCategory {
  SyntaxError,
  UnknownColumn,
  UnknownIdentifier,
  TypeMismatch,
  IndexOutOfRange,
  DivisionByZero,
  EmptyAggregation,
  Timeout,
  RunnerProtocolError,
};

std::string_view to_string(ExecCategory c);
std::optional<ExecCategory> exec_category_from_string(std::string_view name);

class ExecError : public std::runtime_error {
 public:
  ExecError(ExecCategory category, std::string message, std::optional<std::size_t> position = std::nullopt);

  ExecCategory category() const noexcept { return category_; }
  const std::string& message() const noexcept { return message_; }
  /// Byte offset into the program text, when known.
  std::optional<std::size_t> position() const noexcept { return position_; }

 private:
  ExecCategory category_;
  std::string message_;
  std::optional<std::size_t> position_;
};

enum class Dialect { Tpl, DfScript };

std::string_view to_string(Dialect d);

struct ProgramSource {
  Dialect dialect = Dialect::Tpl;
  std::string text;

  friend bool operator==(const ProgramSource&, const ProgramSource&) = default;
};

/// Execution backend. run() throws ExecError; it never modifies the table.
class Executor {
 public:
  virtual ~Executor() = default;
  virtual Dialect dialect() const = 0;
  virtual ExecValue run(std::string_view program, const CleanTable& table) = 0;
};

}  // namespace tabdsr
