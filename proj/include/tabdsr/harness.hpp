#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "tabdsr/exec.hpp"
#include "tabdsr/llm_gateway.hpp"
#include "tabdsr/prompts.hpp"
#include "tabdsr/reasoner.hpp"
#include "tabdsr/sanitizer.hpp"

namespace tabdsr {

struct QaRecord {
  std::string id;
  std::string table_json;
  std::string question;
  std::string gold_answer;
  /// tatqa | tablebench | caltab151 | custom
  std::string source;
  std::optional<std::string> answer_from;

  friend bool operator==(const QaRecord&, const QaRecord&) = default;
};

class DatasetError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct LoadResult {
  std::vector<QaRecord> records;
  /// One message per skipped record.
  std::vector<std::string> warnings;
};

/// Decodes one record object. Throws DatasetError on a schema problem.
QaRecord record_from_json(const nlohmann::json& j, const std::string& source);
nlohmann::json record_to_json(const QaRecord& r);

/// JSON lines or a JSON array of records. Malformed records and duplicate
/// ids are skipped with a warning. For source "tatqa" only records whose
/// answer_from is "table" are kept. Throws DatasetError if the file cannot
/// be read.
LoadResult load_dataset(const std::filesystem::path& path, const std::string& source);
LoadResult load_dataset_text(std::string_view text, const std::string& source);

/// CSV with header id,table_path,question,answer; table paths are relative
/// to the CSV file. Records get source "custom".
LoadResult load_csv_dataset(const std::filesystem::path& path);

/// RFC 4180 CSV helpers shared with the forge's annotation sheet.
std::vector<std::vector<std::string>> parse_csv(std::string_view text);
std::string csv_escape(std::string_view field);

struct StepSummary {
  std::string sub_question;
  std::string program;
  std::optional<std::string> repair_program;
  std::optional<std::string> value;
  std::optional<std::string> error;
};

struct SampleResult {
  std::string id;
  std::string question;
  std::string predicted;
  std::string gold;
  bool matched = false;
  double rouge_l = 0.0;
  SanitizeOutcome sanitize_outcome = SanitizeOutcome::LlmFirstTry;
  std::string sanitizer_failure_kind;
  bool decomposer_failed = false;
  bool executor_failed = false;
  std::optional<ExecCategory> executor_error;
  std::vector<std::string> sub_questions;
  std::vector<StepSummary> steps;
};

struct EvalReport {
  std::size_t n = 0;
  double accuracy = 0.0;
  double rouge_l_mean = 0.0;
  /// Keys: Decomposer, Sanitizer, Executor.
  std::map<std::string, double> failure_rates;
  std::map<std::string, std::size_t> error_histogram;
  std::map<std::string, std::size_t> sanitizer_error_histogram;
  std::size_t llm_calls = 0;
  /// Sorted by id.
  std::vector<SampleResult> per_sample;
};

/// Decomposer and sanitizer (run side by side when the backend allows it),
/// then the reasoner, then scoring.
SampleResult run_sample(const QaRecord& record, Gateway& gateway, Executor& executor,
                        const PromptSet& prompts = PromptSet::builtin());

/// Runs every record on `parallelism` workers and aggregates in id order.
EvalReport run_eval(const std::vector<QaRecord>& records, Gateway& gateway, Executor& executor,
                    std::size_t parallelism, const PromptSet& prompts = PromptSet::builtin());

/// Recomputes the header fields of a report from its per-sample rows.
void aggregate(EvalReport& report);

nlohmann::json report_to_json(const EvalReport& report);

/// Component failure-rate table and error-type histograms, one column per
/// named report.
std::string failure_report(const std::vector<std::pair<std::string, EvalReport>>& reports);
std::string failure_report(const EvalReport& report, const std::string& dataset = "dataset");

}  // namespace tabdsr
