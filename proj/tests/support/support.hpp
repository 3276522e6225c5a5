#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "tabdsr/exec.hpp"
#include "tabdsr/forge.hpp"
#include "tabdsr/rng.hpp"
#include "tabdsr/table.hpp"

namespace tabdsr::support {

std::filesystem::path fixture(const std::string& rel);
std::string read_file(const std::filesystem::path& path);

// --- Tpl reference ----------------------------------------------------------

/// Outcome of a program: a value or the error category it must raise.
using OracleResult = std::variant<ExecValue, ExecCategory>;

struct OracleCase {
  CleanTable table;
  std::string program;
  OracleResult expected;
};

/// Random clean table (up to max_rows x max_cols) with integer, two-decimal
/// float and short text columns and scattered nulls.
CleanTable random_clean_table(SplitMix64& rng, std::size_t min_rows, std::size_t max_rows, std::size_t min_cols,
                              std::size_t max_cols);

/// A well-typed random program over `table` plus the answer a naive row scan
/// gives for it.
OracleCase random_oracle_case(SplitMix64& rng, std::size_t max_rows = 50, std::size_t max_cols = 8);

/// Ints must match exactly, floats within 1e-9 relative, everything else
/// exactly. Returns an explanation on mismatch.
std::optional<std::string> compare_oracle(const OracleResult& expected, const OracleResult& actual);

std::string describe(const OracleResult& r);

// --- ROUGE reference ---------------------------------------------------------

/// LCS length by enumerating every subsequence of the shorter list.
std::size_t brute_force_lcs(const std::vector<std::string>& a, const std::vector<std::string>& b);
double brute_force_rouge_l(const std::vector<std::string>& pred, const std::vector<std::string>& gold);

// --- forge properties ---------------------------------------------------------

/// Every changed numeric cell moved by lo..hi of its magnitude, give or take
/// half a unit in its last decimal place; zeros and year-like cells did not
/// move. `changed` accumulates the number of moved cells.
std::optional<std::string> check_perturbation(const CleanTable& base, const CleanTable& perturbed, double lo, double hi,
                                              std::size_t& changed);

/// The perturbed table a record was forged from, rebuilt from its first
/// provenance entry.
CleanTable perturbed_of(const ForgeRecord& rec);

/// 2..4 nulls from the five labels, sitting where the log says.
std::optional<std::string> check_nulls(const ForgeRecord& rec, const ForgeConfig& cfg);

/// rule_clean(noisy) gives back every perturbed numeric value that was not
/// overwritten by a null label.
std::optional<std::string> check_recovery(const ForgeRecord& rec);

}  // namespace tabdsr::support
