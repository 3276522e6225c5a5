#include "tabdsr/forge.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <fmt/format.h>

#include "tabdsr/decomposer.hpp"
#include "tabdsr/sanitizer.hpp"

namespace tabdsr {

using nlohmann::json;

void ForgeConfig::validate() const {
  if (!(perturb_lo > 0.0 && perturb_lo < perturb_hi && perturb_hi < 1.0)) {
    throw std::invalid_argument("need 0 < perturb_lo < perturb_hi < 1");
  }
  if (null_min < 1 || null_min > null_max) throw std::invalid_argument("need 1 <= null_min <= null_max");
  if (null_labels.empty()) throw std::invalid_argument("null_labels is empty");
  if (!(max_delete_frac >= 0.0 && max_delete_frac < 1.0)) throw std::invalid_argument("need 0 <= max_delete_frac < 1");
  if (currency_symbols.empty() || percent_symbols.empty()) throw std::invalid_argument("noise symbol lists are empty");
}

json forge_config_to_json(const ForgeConfig& cfg) {
  return json{{"seed", cfg.seed},
              {"perturb_lo", cfg.perturb_lo},
              {"perturb_hi", cfg.perturb_hi},
              {"null_count_range", {cfg.null_min, cfg.null_max}},
              {"null_labels", cfg.null_labels},
              {"max_delete_frac", cfg.max_delete_frac},
              {"noise_symbols", {{"currency", cfg.currency_symbols}, {"percent", cfg.percent_symbols}}}};
}

ForgeConfig forge_config_from_json(const json& j) {
  ForgeConfig cfg;
  try {
    cfg.seed = j.value("seed", cfg.seed);
    cfg.perturb_lo = j.value("perturb_lo", cfg.perturb_lo);
    cfg.perturb_hi = j.value("perturb_hi", cfg.perturb_hi);
    if (j.contains("null_count_range")) {
      const auto& r = j.at("null_count_range");
      cfg.null_min = r.at(0).get<std::size_t>();
      cfg.null_max = r.at(1).get<std::size_t>();
    }
    cfg.null_labels = j.value("null_labels", cfg.null_labels);
    cfg.max_delete_frac = j.value("max_delete_frac", cfg.max_delete_frac);
    if (j.contains("noise_symbols")) {
      const auto& s = j.at("noise_symbols");
      cfg.currency_symbols = s.value("currency", cfg.currency_symbols);
      cfg.percent_symbols = s.value("percent", cfg.percent_symbols);
    }
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("forge config: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

std::string provenance_to_jsonl(const std::vector<ProvenanceEntry>& log) {
  std::string out;
  for (const auto& e : log) {
    out += json{{"step", e.step}, {"seed_state", e.seed_state}, {"params", e.params}}.dump();
    out += "\n";
  }
  return out;
}

std::vector<ProvenanceEntry> provenance_from_jsonl(std::string_view text) {
  std::vector<ProvenanceEntry> out;
  std::istringstream in{std::string(text)};
  std::string line;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    json j = json::parse(line);
    out.push_back({j.at("step").get<std::string>(), j.at("seed_state").get<std::uint64_t>(), j.at("params")});
  }
  return out;
}

namespace {

std::string lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out) {
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  }
  return out;
}

bool contains_any(std::string_view haystack, std::initializer_list<std::string_view> needles) {
  return std::any_of(needles.begin(), needles.end(),
                     [&](std::string_view n) { return haystack.find(n) != std::string_view::npos; });
}

double pow10(int d) {
  double p = 1.0;
  for (int i = 0; i < d; ++i) p *= 10.0;
  return p;
}

// First `k` entries of a seeded Fisher-Yates pass over 0..n-1.
std::vector<std::size_t> sample_indices(std::size_t n, std::size_t k, SplitMix64& rng) {
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  k = std::min(k, n);
  for (std::size_t i = 0; i < k; ++i) {
    std::size_t j = i + static_cast<std::size_t>(rng.below(n - i));
    std::swap(idx[i], idx[j]);
  }
  idx.resize(k);
  return idx;
}

std::vector<std::size_t> permutation(std::size_t n, SplitMix64& rng) { return sample_indices(n, n, rng); }

int column_decimals(const CleanTable& t, std::size_t c) {
  int d = 0;
  for (const auto& row : t.rows) {
    if (is_float(row[c])) d = std::max(d, decimal_places(std::get<double>(row[c])));
  }
  return d;
}

}  // namespace

bool is_year_like(const CellValue& v, std::string_view header) {
  std::string h = lower(header);
  if (!contains_any(h, {"year", "date"})) return false;
  if (!is_number(v)) return false;
  double d = as_double(v);
  return d == std::floor(d) && d >= 1900.0 && d <= 2100.0;
}

CleanTable perturb_numeric(const CleanTable& t, const ForgeConfig& cfg, SplitMix64& rng, json* params) {
  CleanTable out = t;
  std::size_t changed = 0;
  for (auto& row : out.rows) {
    for (std::size_t c = 0; c < out.num_cols(); ++c) {
      if (out.column_kinds[c] != ColumnKind::Numeric) continue;
      CellValue& cell = row[c];
      if (!is_number(cell) || as_double(cell) == 0.0 || is_year_like(cell, out.columns[c])) continue;
      const double u = rng.uniform(cfg.perturb_lo, cfg.perturb_hi);
      const double sign = rng.below(2) == 0 ? -1.0 : 1.0;
      const double v = as_double(cell);
      const double moved = v * (1.0 + sign * u);
      CellValue next;
      if (is_int(cell) && std::fabs(moved) < 9.0e18) {
        next = static_cast<std::int64_t>(std::nearbyint(moved));
      } else {
        const int d = is_int(cell) ? 0 : decimal_places(v);
        const double scale = pow10(d);
        next = std::nearbyint(moved * scale) / scale;
      }
      if (next != cell) ++changed;
      cell = next;
    }
  }
  if (params) *params = json{{"perturb_lo", cfg.perturb_lo}, {"perturb_hi", cfg.perturb_hi}, {"changed", changed}};
  return out;
}

std::string format_decorated(double v, int decimals, std::string_view prefix, std::string_view suffix) {
  std::string digits = fmt::format("{:.{}f}", std::fabs(v), decimals);
  auto dot = digits.find('.');
  std::size_t int_len = dot == std::string::npos ? digits.size() : dot;
  for (std::size_t pos = int_len; pos > 3; pos -= 3) digits.insert(pos - 3, ",");
  const bool negative = v < 0.0 && digits.find_first_not_of("0.,") != std::string::npos;
  return fmt::format("{}{}{}{}", negative ? "-" : "", prefix, digits, suffix);
}

RawTable inject_noise(const CleanTable& t, const ForgeConfig& cfg, SplitMix64& rng, json* params) {
  // Year and date columns stay bare for the same reason they are not perturbed.
  std::vector<std::size_t> numeric;
  for (std::size_t c = 0; c < t.num_cols(); ++c) {
    if (t.column_kinds[c] == ColumnKind::Numeric && !contains_any(lower(t.columns[c]), {"year", "date"})) {
      numeric.push_back(c);
    }
  }
  if (numeric.empty()) throw NoNumericColumn("table has no numeric column to decorate");

  const std::size_t k = std::min<std::size_t>(1 + rng.below(2), numeric.size());
  RawTable out = t.to_raw();
  json applied = json::array();
  for (std::size_t pick : sample_indices(numeric.size(), k, rng)) {
    const std::size_t c = numeric[pick];
    const std::string h = lower(t.columns[c]);
    std::string prefix, suffix;
    if (contains_any(h, {"price", "cost", "revenue", "sales", "amount", "value"})) {
      prefix = cfg.currency_symbols.front();
    } else if (contains_any(h, {"rate", "pct", "percent", "share", "margin"})) {
      suffix = cfg.percent_symbols.front();
    } else {
      const std::size_t choice = rng.below(cfg.currency_symbols.size() + cfg.percent_symbols.size());
      if (choice < cfg.currency_symbols.size()) {
        prefix = cfg.currency_symbols[choice];
      } else {
        suffix = cfg.percent_symbols[choice - cfg.currency_symbols.size()];
      }
    }
    const int decimals = column_decimals(t, c);
    for (auto& row : out.rows) {
      if (is_number(row[c])) row[c] = format_decorated(as_double(row[c]), decimals, prefix, suffix);
    }
    applied.push_back({{"column", t.columns[c]}, {"prefix", prefix}, {"suffix", suffix}, {"decimals", decimals}});
  }
  if (params) {
    *params = json{{"currency_symbols", cfg.currency_symbols},
                   {"percent_symbols", cfg.percent_symbols},
                   {"columns", std::move(applied)}};
  }
  return out;
}

RawTable randomize_structure(const RawTable& t, const ForgeConfig& cfg, SplitMix64& rng, json* params) {
  if (t.num_rows() < 3 || t.num_cols() < 3) {
    throw TooSmall(fmt::format("need at least 3 rows and 3 columns, got {}x{}", t.num_rows(), t.num_cols()));
  }
  auto rows = permutation(t.num_rows(), rng);
  auto cols = permutation(t.num_cols(), rng);
  auto deletions = [&](std::size_t n) {
    auto allowed = static_cast<std::size_t>(std::floor(cfg.max_delete_frac * static_cast<double>(n)));
    return std::min<std::size_t>(rng.below(allowed + 1), n - 2);
  };
  rows.resize(rows.size() - deletions(rows.size()));
  cols.resize(cols.size() - deletions(cols.size()));

  RawTable out;
  for (std::size_t c : cols) out.columns.push_back(t.columns[c]);
  for (std::size_t r : rows) {
    std::vector<CellValue> row;
    for (std::size_t c : cols) row.push_back(t.rows[r][c]);
    out.rows.push_back(std::move(row));
  }
  if (params) *params = json{{"max_delete_frac", cfg.max_delete_frac}, {"row_order", rows}, {"col_order", cols}};
  return out;
}

RawTable fill_nulls(const RawTable& t, const ForgeConfig& cfg, SplitMix64& rng, json* params) {
  const std::size_t cells = t.num_rows() * t.num_cols();
  if (cells < 4) throw std::invalid_argument("fill_nulls needs at least 4 cells");
  const std::size_t k = cfg.null_min + rng.below(cfg.null_max - cfg.null_min + 1);
  RawTable out = t;
  json placed = json::array();
  for (std::size_t pos : sample_indices(cells, k, rng)) {
    const std::size_t r = pos / t.num_cols(), c = pos % t.num_cols();
    const std::string& label = cfg.null_labels[rng.below(cfg.null_labels.size())];
    out.rows[r][c] = label;
    placed.push_back({r, c, label});
  }
  if (params) {
    *params = json{{"null_count_range", {cfg.null_min, cfg.null_max}},
                   {"null_labels", cfg.null_labels},
                   {"cells", std::move(placed)}};
  }
  return out;
}

MultiHopQuestion parse_multihop(std::string_view model_text) {
  json j;
  try {
    j = extract_json(model_text);
  } catch (const NoJsonFound& e) {
    throw MalformedOutput(e.what());
  }
  if (!j.is_object()) throw MalformedOutput("expected a JSON object");
  auto subs = j.find("sub_questions");
  if (subs == j.end() || !subs->is_array()) throw MalformedOutput("\"sub_questions\" missing or not a list");
  if (subs->size() != 2) throw MalformedOutput(fmt::format("expected 2 sub-questions, got {}", subs->size()));
  MultiHopQuestion out;
  for (const auto& s : *subs) {
    if (!s.is_string() || trim(s.get<std::string>()).empty()) throw MalformedOutput("sub-question is not a non-empty string");
    out.sub_questions.push_back(trim(s.get<std::string>()));
  }
  auto merged = j.find("merged");
  if (merged == j.end() || !merged->is_string() || trim(merged->get<std::string>()).empty()) {
    throw MalformedOutput("\"merged\" missing or empty");
  }
  out.question = trim(merged->get<std::string>());
  return out;
}

MultiHopQuestion gen_multihop(const CleanTable& t, Gateway& gateway, const PromptSet& prompts,
                              std::string_view sample_id) {
  ChatRequest req;
  req.system_prompt = "You write numerical reasoning questions about tables for a benchmark.";
  req.user_prompt = render(prompts.forge_user, {{"table_json", serialize_table(t)}});
  req.tag = "forge";
  req.sample_id = sample_id;
  return parse_multihop(gateway.complete(req));
}

ForgeRecord forge_table(std::string id, const CleanTable& base, const ForgeConfig& cfg, SplitMix64& rng) {
  ForgeRecord rec;
  rec.id = std::move(id);
  rec.base_table = base;
  auto step = [&](const char* name, auto&& fn) {
    ProvenanceEntry e{name, rng.state(), json::object()};
    auto result = fn(&e.params);
    rec.provenance.push_back(std::move(e));
    return result;
  };
  CleanTable perturbed = step("perturb_numeric", [&](json* p) { return perturb_numeric(base, cfg, rng, p); });
  RawTable noisy = step("inject_noise", [&](json* p) { return inject_noise(perturbed, cfg, rng, p); });
  noisy = step("randomize_structure", [&](json* p) { return randomize_structure(noisy, cfg, rng, p); });
  rec.noisy_table = step("fill_nulls", [&](json* p) { return fill_nulls(noisy, cfg, rng, p); });
  return rec;
}

RawTable replay(const CleanTable& base, const std::vector<ProvenanceEntry>& provenance) {
  static const char* kOrder[] = {"perturb_numeric", "inject_noise", "randomize_structure", "fill_nulls"};
  if (provenance.size() != 4) throw std::invalid_argument("provenance must list the four forge steps");
  for (std::size_t i = 0; i < 4; ++i) {
    if (provenance[i].step != kOrder[i]) {
      throw std::invalid_argument(fmt::format("step {} is \"{}\", expected \"{}\"", i, provenance[i].step, kOrder[i]));
    }
  }
  ForgeConfig cfg;
  const auto& p0 = provenance[0].params;
  cfg.perturb_lo = p0.at("perturb_lo").get<double>();
  cfg.perturb_hi = p0.at("perturb_hi").get<double>();
  const auto& p1 = provenance[1].params;
  cfg.currency_symbols = p1.at("currency_symbols").get<std::vector<std::string>>();
  cfg.percent_symbols = p1.at("percent_symbols").get<std::vector<std::string>>();
  cfg.max_delete_frac = provenance[2].params.at("max_delete_frac").get<double>();
  const auto& p3 = provenance[3].params;
  cfg.null_min = p3.at("null_count_range").at(0).get<std::size_t>();
  cfg.null_max = p3.at("null_count_range").at(1).get<std::size_t>();
  cfg.null_labels = p3.at("null_labels").get<std::vector<std::string>>();

  SplitMix64 rng(provenance[0].seed_state);
  CleanTable perturbed = perturb_numeric(base, cfg, rng);
  rng.set_state(provenance[1].seed_state);
  RawTable t = inject_noise(perturbed, cfg, rng);
  rng.set_state(provenance[2].seed_state);
  t = randomize_structure(t, cfg, rng);
  rng.set_state(provenance[3].seed_state);
  return fill_nulls(t, cfg, rng);
}

ForgeSummary forge_corpus(const std::vector<std::pair<std::string, CleanTable>>& tables, const ForgeConfig& cfg,
                          Gateway* gateway, const PromptSet& prompts) {
  cfg.validate();
  ForgeSummary out;
  SplitMix64 rng(cfg.seed);
  for (const auto& [id, table] : tables) {
    ForgeRecord rec;
    try {
      rec = forge_table(id, table, cfg, rng);
    } catch (const NoNumericColumn& e) {
      out.warnings.push_back(fmt::format("{}: skipped, {}", id, e.what()));
      continue;
    } catch (const TooSmall& e) {
      out.warnings.push_back(fmt::format("{}: skipped, {}", id, e.what()));
      continue;
    }
    if (!gateway) {
      rec.question_note = "question pending: no model backend configured";
    } else {
      try {
        auto q = gen_multihop(rule_clean(rec.noisy_table), *gateway, prompts, id);
        rec.question = std::move(q.question);
        rec.sub_questions = std::move(q.sub_questions);
      } catch (const MalformedOutput& e) {
        ++out.skipped_malformed;
        out.warnings.push_back(fmt::format("{}: question dropped, MalformedOutput: {}", id, e.what()));
        continue;
      } catch (const GatewayError& e) {
        out.warnings.push_back(fmt::format("{}: question dropped, {}", id, e.what()));
        continue;
      }
    }
    out.records.push_back(std::move(rec));
  }
  return out;
}

namespace {

const std::vector<std::string> kSheetColumns = {"id", "table_json", "question", "sub_questions", "answer", "notes"};

std::vector<std::string> sheet_row(const ForgeRecord& r) {
  return {r.id, serialize_table(r.noisy_table), r.question, json(r.sub_questions).dump(), r.answer,
          r.question_note.value_or("")};
}

}  // namespace

std::string annotation_csv(const std::vector<ForgeRecord>& records) {
  auto line = [](const std::vector<std::string>& fields) {
    std::string out;
    for (std::size_t i = 0; i < fields.size(); ++i) {
      if (i) out += ",";
      out += csv_escape(fields[i]);
    }
    return out + "\n";
  };
  std::string out = line(kSheetColumns);
  for (const auto& r : records) out += line(sheet_row(r));
  return out;
}

std::string annotation_jsonl(const std::vector<ForgeRecord>& records) {
  std::string out;
  for (const auto& r : records) {
    out += json{{"id", r.id},
                {"table_json", serialize_table(r.noisy_table)},
                {"question", r.question},
                {"sub_questions", r.sub_questions},
                {"answer", r.answer},
                {"notes", r.question_note.value_or("")}}
               .dump();
    out += "\n";
  }
  return out;
}

void export_annotation(const std::vector<ForgeRecord>& records, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  for (const auto& [name, body] : {std::pair{"annotation.csv", annotation_csv(records)},
                                   std::pair{"annotation.jsonl", annotation_jsonl(records)}}) {
    std::ofstream out(dir / name, std::ios::binary | std::ios::trunc);
    if (!out || !(out << body) || !out.flush()) throw FileError(fmt::format("cannot write {}", (dir / name).string()));
  }
}

std::vector<QaRecord> import_annotation_csv(std::string_view csv_text) {
  auto rows = parse_csv(csv_text);
  if (rows.empty() || rows[0] != kSheetColumns) {
    throw ImportError("sheet header must be id,table_json,question,sub_questions,answer,notes");
  }
  std::vector<QaRecord> out;
  std::set<std::string> ids;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const auto& row = rows[i];
    if (row.size() == 1 && row[0].empty()) continue;
    if (row.size() != kSheetColumns.size()) {
      throw ImportError(fmt::format("sheet row {} has {} fields, expected 6", i, row.size()));
    }
    const std::string& id = row[0];
    if (!ids.insert(id).second) throw ImportError(fmt::format("duplicate id \"{}\"", id));
    if (trim(row[4]).empty()) throw ImportError(fmt::format("record \"{}\" has a blank answer", id));
    if (trim(row[2]).empty()) throw ImportError(fmt::format("record \"{}\" has a blank question", id));
    try {
      out.push_back(record_from_json(
          json{{"id", id}, {"table_json", row[1]}, {"question", row[2]}, {"gold_answer", trim(row[4])}}, "caltab151"));
    } catch (const DatasetError& e) {
      throw ImportError(fmt::format("record \"{}\": {}", id, e.what()));
    }
  }
  return out;
}

std::vector<QaRecord> import_annotation(const std::filesystem::path& csv_path) {
  std::ifstream in(csv_path, std::ios::binary);
  if (!in) throw FileError(fmt::format("cannot read {}", csv_path.string()));
  std::stringstream ss;
  ss << in.rdbuf();
  return import_annotation_csv(ss.str());
}

}  // namespace tabdsr
