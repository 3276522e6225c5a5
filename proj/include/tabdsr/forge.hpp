#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "tabdsr/harness.hpp"
#include "tabdsr/llm_gateway.hpp"
#include "tabdsr/prompts.hpp"
#include "tabdsr/rng.hpp"
#include "tabdsr/table.hpp"

namespace tabdsr {

struct ForgeConfig {
  std::uint64_t seed = 0;
  double perturb_lo = 0.03;
  double perturb_hi = 0.05;
  std::size_t null_min = 2;
  std::size_t null_max = 4;
  std::vector<std::string> null_labels = {"None", "Null", "N/A", "???", "-"};
  double max_delete_frac = 0.2;
  std::vector<std::string> currency_symbols = {"$", "€"};
  std::vector<std::string> percent_symbols = {"%"};

  /// Throws std::invalid_argument.
  void validate() const;
};

nlohmann::json forge_config_to_json(const ForgeConfig& cfg);
ForgeConfig forge_config_from_json(const nlohmann::json& j);

class NoNumericColumn : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class TooSmall : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ImportError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class FileError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// One applied step: name, RNG state before the step, and what it did.
struct ProvenanceEntry {
  std::string step;
  std::uint64_t seed_state = 0;
  nlohmann::json params;

  friend bool operator==(const ProvenanceEntry&, const ProvenanceEntry&) = default;
};

std::string provenance_to_jsonl(const std::vector<ProvenanceEntry>& log);
std::vector<ProvenanceEntry> provenance_from_jsonl(std::string_view text);

/// True for 4-digit integers in [1900, 2100] under a header mentioning a
/// year or date; such values are never perturbed.
bool is_year_like(const CellValue& v, std::string_view header);

// The four table steps. Each draws from `rng` and, when `params` is given,
// records what it chose.

CleanTable perturb_numeric(const CleanTable& t, const ForgeConfig& cfg, SplitMix64& rng,
                           nlohmann::json* params = nullptr);
/// Throws NoNumericColumn.
RawTable inject_noise(const CleanTable& t, const ForgeConfig& cfg, SplitMix64& rng,
                      nlohmann::json* params = nullptr);
/// Throws TooSmall below 3 rows or 3 columns.
RawTable randomize_structure(const RawTable& t, const ForgeConfig& cfg, SplitMix64& rng,
                             nlohmann::json* params = nullptr);
/// Throws std::invalid_argument below 4 cells.
RawTable fill_nulls(const RawTable& t, const ForgeConfig& cfg, SplitMix64& rng, nlohmann::json* params = nullptr);

/// "$1,234.50" style rendering with `decimals` fixed places.
std::string format_decorated(double v, int decimals, std::string_view prefix, std::string_view suffix);

struct MultiHopQuestion {
  std::string question;
  std::vector<std::string> sub_questions;
};

/// Parses {"sub_questions": [a, b], "merged": "..."}. Throws MalformedOutput.
MultiHopQuestion parse_multihop(std::string_view model_text);
MultiHopQuestion gen_multihop(const CleanTable& t, Gateway& gateway, const PromptSet& prompts = PromptSet::builtin(),
                              std::string_view sample_id = {});

struct ForgeRecord {
  std::string id;
  CleanTable base_table;
  RawTable noisy_table;
  std::string question;
  std::vector<std::string> sub_questions;
  std::string answer;
  std::vector<ProvenanceEntry> provenance;
  /// Set when no question could be generated for the table.
  std::optional<std::string> question_note;
};

/// Steps 1 to 4 on one table, drawing from `rng`.
ForgeRecord forge_table(std::string id, const CleanTable& base, const ForgeConfig& cfg, SplitMix64& rng);

/// Re-runs the logged steps on `base`; reproduces the noisy table exactly.
RawTable replay(const CleanTable& base, const std::vector<ProvenanceEntry>& provenance);

struct ForgeSummary {
  std::vector<ForgeRecord> records;
  std::size_t skipped_malformed = 0;
  std::vector<std::string> warnings;
};

/// Forges every table in order on one RNG stream seeded by cfg.seed. With a
/// gateway, each record gets a generated question; records whose question
/// comes back malformed are dropped and counted. Without one, questions stay
/// empty and are flagged.
ForgeSummary forge_corpus(const std::vector<std::pair<std::string, CleanTable>>& tables, const ForgeConfig& cfg,
                          Gateway* gateway, const PromptSet& prompts = PromptSet::builtin());

/// Annotation sheet columns: id,table_json,question,sub_questions,answer,notes.
std::string annotation_csv(const std::vector<ForgeRecord>& records);
std::string annotation_jsonl(const std::vector<ForgeRecord>& records);
/// Writes <dir>/annotation.csv and <dir>/annotation.jsonl. Throws FileError.
void export_annotation(const std::vector<ForgeRecord>& records, const std::filesystem::path& dir);

/// Reads a filled CSV sheet. Throws ImportError naming the offending id on a
/// blank answer or a duplicate id.
std::vector<QaRecord> import_annotation_csv(std::string_view csv_text);
std::vector<QaRecord> import_annotation(const std::filesystem::path& csv_path);

}  // namespace tabdsr
