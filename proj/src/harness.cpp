#include "tabdsr/harness.hpp"

#include <algorithm>
#include <atomic>
#include <fstream>
#include <future>
#include <set>
#include <sstream>
#include <thread>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "tabdsr/decomposer.hpp"
#include "tabdsr/metrics.hpp"

namespace tabdsr {

using nlohmann::json;

namespace {

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DatasetError(fmt::format("cannot read {}", path.string()));
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string required_string(const json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end() || !it->is_string()) throw DatasetError(fmt::format("field \"{}\" missing or not a string", key));
  return it->get<std::string>();
}

void keep_record(LoadResult& out, std::set<std::string>& ids, QaRecord rec) {
  if (!ids.insert(rec.id).second) {
    out.warnings.push_back(fmt::format("duplicate id \"{}\" skipped", rec.id));
    return;
  }
  out.records.push_back(std::move(rec));
}

}  // namespace

QaRecord record_from_json(const json& j, const std::string& source) {
  if (!j.is_object()) throw DatasetError("record is not a JSON object");
  QaRecord r;
  auto id = j.find("id");
  if (id == j.end()) throw DatasetError("field \"id\" missing");
  r.id = id->is_string() ? id->get<std::string>() : id->dump();
  auto table = j.find("table_json");
  if (table == j.end()) throw DatasetError("field \"table_json\" missing");
  r.table_json = table->is_string() ? table->get<std::string>() : table->dump();
  r.question = required_string(j, "question");
  if (j.contains("gold_answer")) {
    const auto& g = j["gold_answer"];
    r.gold_answer = g.is_string() ? g.get<std::string>() : g.dump();
  } else {
    throw DatasetError("field \"gold_answer\" missing");
  }
  r.source = source.empty() ? j.value("source", std::string("custom")) : source;
  if (auto af = j.find("answer_from"); af != j.end() && af->is_string()) r.answer_from = af->get<std::string>();
  if (trim(r.question).empty()) throw DatasetError("question is empty");
  try {
    parse_table(r.table_json);
  } catch (const TableError& e) {
    throw DatasetError(fmt::format("table_json: {}", e.what()));
  }
  return r;
}

json record_to_json(const QaRecord& r) {
  json j{{"id", r.id}, {"table_json", r.table_json}, {"question", r.question}, {"gold_answer", r.gold_answer},
         {"source", r.source}};
  if (r.answer_from) j["answer_from"] = *r.answer_from;
  return j;
}

LoadResult load_dataset_text(std::string_view text, const std::string& source) {
  LoadResult out;
  std::set<std::string> ids;
  auto consider = [&](const json& j, const std::string& where) {
    QaRecord rec;
    try {
      rec = record_from_json(j, source);
    } catch (const DatasetError& e) {
      out.warnings.push_back(fmt::format("{}: {}", where, e.what()));
      return;
    }
    if (source == "tatqa" && rec.answer_from != "table") return;
    keep_record(out, ids, std::move(rec));
  };

  auto first = text.find_first_not_of(" \t\r\n");
  if (first != std::string_view::npos && text[first] == '[') {
    json arr = json::parse(text, nullptr, false);
    if (arr.is_discarded() || !arr.is_array()) throw DatasetError("dataset looks like a JSON array but does not parse");
    for (std::size_t i = 0; i < arr.size(); ++i) consider(arr[i], fmt::format("record {}", i));
    return out;
  }

  std::size_t lineno = 0;
  std::size_t start = 0;
  while (start < text.size()) {
    auto end = text.find('\n', start);
    std::string_view line = text.substr(start, end == std::string_view::npos ? std::string_view::npos : end - start);
    start = end == std::string_view::npos ? text.size() : end + 1;
    ++lineno;
    if (trim(line).empty()) continue;
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded()) {
      out.warnings.push_back(fmt::format("line {}: not valid JSON", lineno));
      continue;
    }
    consider(j, fmt::format("line {}", lineno));
  }
  return out;
}

LoadResult load_dataset(const std::filesystem::path& path, const std::string& source) {
  return load_dataset_text(read_file(path), source);
}

std::vector<std::vector<std::string>> parse_csv(std::string_view text) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> row;
  std::string field;
  bool quoted = false;
  bool field_started = false;
  for (std::size_t i = 0; i < text.size(); ++i) {
    char c = text[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field.push_back(c);
      }
      continue;
    }
    switch (c) {
      case '"':
        quoted = true;
        field_started = true;
        break;
      case ',':
        row.push_back(std::move(field));
        field.clear();
        field_started = true;
        break;
      case '\r':
        break;
      case '\n':
        row.push_back(std::move(field));
        field.clear();
        rows.push_back(std::move(row));
        row.clear();
        field_started = false;
        break;
      default:
        field.push_back(c);
        field_started = true;
    }
  }
  if (field_started || !field.empty() || !row.empty()) {
    row.push_back(std::move(field));
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string csv_escape(std::string_view field) {
  if (field.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(field);
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

LoadResult load_csv_dataset(const std::filesystem::path& path) {
  auto rows = parse_csv(read_file(path));
  if (rows.empty()) throw DatasetError(fmt::format("{} is empty", path.string()));
  const std::vector<std::string> expected = {"id", "table_path", "question", "answer"};
  if (rows[0] != expected) throw DatasetError("CSV header must be id,table_path,question,answer");
  LoadResult out;
  std::set<std::string> ids;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const auto& row = rows[i];
    if (row.size() == 1 && row[0].empty()) continue;
    if (row.size() != 4) {
      out.warnings.push_back(fmt::format("row {}: expected 4 fields, got {}", i, row.size()));
      continue;
    }
    try {
      json j{{"id", row[0]},
             {"table_json", read_file(path.parent_path() / row[1])},
             {"question", row[2]},
             {"gold_answer", row[3]}};
      keep_record(out, ids, record_from_json(j, "custom"));
    } catch (const DatasetError& e) {
      out.warnings.push_back(fmt::format("row {}: {}", i, e.what()));
    }
  }
  return out;
}

SampleResult run_sample(const QaRecord& record, Gateway& gateway, Executor& executor, const PromptSet& prompts) {
  SampleResult res;
  res.id = record.id;
  res.question = record.question;
  res.gold = record.gold_answer;

  RawTable raw = parse_table(record.table_json);
  DecomposeOutcome dec;
  SanitizeResult san;
  if (gateway.order_independent()) {
    auto pending = std::async(std::launch::async, [&] { return sanitize(raw, gateway, prompts, record.id); });
    dec = decompose_or_fallback(record.question, gateway, prompts, record.id);
    san = pending.get();
  } else {
    dec = decompose_or_fallback(record.question, gateway, prompts, record.id);
    san = sanitize(raw, gateway, prompts, record.id);
  }
  res.decomposer_failed = dec.failed;
  res.sub_questions = dec.subs.items;
  res.sanitize_outcome = san.report.outcome;
  if (san.report.outcome == SanitizeOutcome::RuleFallback) res.sanitizer_failure_kind = san.report.failure_kind;

  FinalAnswer fin = answer(san.table, dec.subs, gateway, executor, prompts, record.id);
  res.predicted = fin.text;
  res.executor_failed = fin.failed;
  if (fin.failed) res.executor_error = fin.steps.back().error->category();
  for (const auto& s : fin.steps) {
    StepSummary sum;
    sum.sub_question = s.sub_question;
    sum.program = s.program.text;
    if (s.repair_program) sum.repair_program = s.repair_program->text;
    if (s.value) sum.value = format_answer(*s.value);
    if (s.error) sum.error = s.error->what();
    res.steps.push_back(std::move(sum));
  }
  res.matched = !fin.failed && answers_match(res.predicted, res.gold);
  res.rouge_l = rouge_l(res.predicted, res.gold);
  return res;
}

void aggregate(EvalReport& report) {
  report.n = report.per_sample.size();
  report.error_histogram.clear();
  report.sanitizer_error_histogram.clear();
  std::size_t matched = 0, dec_fail = 0, san_fail = 0, exec_fail = 0;
  double rouge_sum = 0.0;
  for (const auto& s : report.per_sample) {
    matched += s.matched ? 1 : 0;
    rouge_sum += s.rouge_l;
    dec_fail += s.decomposer_failed ? 1 : 0;
    if (s.sanitize_outcome == SanitizeOutcome::RuleFallback) {
      ++san_fail;
      ++report.sanitizer_error_histogram[s.sanitizer_failure_kind.empty() ? "Unknown" : s.sanitizer_failure_kind];
    }
    if (s.executor_failed) {
      ++exec_fail;
      ++report.error_histogram[std::string(to_string(*s.executor_error))];
    }
  }
  const double n = report.n ? static_cast<double>(report.n) : 1.0;
  report.accuracy = report.n ? static_cast<double>(matched) / n : 0.0;
  report.rouge_l_mean = report.n ? rouge_sum / n : 0.0;
  report.failure_rates = {{"Decomposer", static_cast<double>(dec_fail) / n},
                          {"Sanitizer", static_cast<double>(san_fail) / n},
                          {"Executor", static_cast<double>(exec_fail) / n}};
  if (!report.n) report.failure_rates = {{"Decomposer", 0.0}, {"Sanitizer", 0.0}, {"Executor", 0.0}};
}

EvalReport run_eval(const std::vector<QaRecord>& records, Gateway& gateway, Executor& executor,
                    std::size_t parallelism, const PromptSet& prompts) {
  if (parallelism < 1) throw std::invalid_argument("parallelism must be >= 1");
  const std::size_t calls_before = gateway.calls();
  std::vector<SampleResult> results(records.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < records.size(); i = next++) {
      results[i] = run_sample(records[i], gateway, executor, prompts);
    }
  };
  const std::size_t nworkers = std::min(parallelism, std::max<std::size_t>(records.size(), 1));
  if (nworkers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < nworkers; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  EvalReport report;
  report.per_sample = std::move(results);
  std::sort(report.per_sample.begin(), report.per_sample.end(),
            [](const SampleResult& a, const SampleResult& b) { return a.id < b.id; });
  report.llm_calls = gateway.calls() - calls_before;
  aggregate(report);
  return report;
}

namespace {

json optional_json(const std::optional<std::string>& s) { return s ? json(*s) : json(nullptr); }

}  // namespace

json report_to_json(const EvalReport& report) {
  json samples = json::array();
  for (const auto& s : report.per_sample) {
    json steps = json::array();
    for (const auto& st : s.steps) {
      steps.push_back({{"sub_question", st.sub_question},
                       {"program", st.program},
                       {"repair_program", optional_json(st.repair_program)},
                       {"value", optional_json(st.value)},
                       {"error", optional_json(st.error)}});
    }
    samples.push_back({{"id", s.id},
                       {"question", s.question},
                       {"predicted", s.predicted},
                       {"gold", s.gold},
                       {"matched", s.matched},
                       {"rouge_l", s.rouge_l},
                       {"sanitize_outcome", std::string(to_string(s.sanitize_outcome))},
                       {"decomposer_failed", s.decomposer_failed},
                       {"executor_error",
                        s.executor_error ? json(std::string(to_string(*s.executor_error))) : json(nullptr)},
                       {"sub_questions", s.sub_questions},
                       {"steps", std::move(steps)}});
  }
  return json{{"n", report.n},
              {"accuracy", report.accuracy},
              {"rouge_l_mean", report.rouge_l_mean},
              {"failure_rates", report.failure_rates},
              {"error_histogram", report.error_histogram},
              {"sanitizer_error_histogram", report.sanitizer_error_histogram},
              {"llm_calls", report.llm_calls},
              {"per_sample", std::move(samples)}};
}

namespace {

using Histogram = std::map<std::string, std::size_t>;

void render_histogram(std::string& out, const std::string& title,
                      const std::vector<std::pair<std::string, EvalReport>>& reports,
                      Histogram EvalReport::*field, bool with_rate) {
  std::map<std::string, std::size_t> totals;
  for (const auto& [name, r] : reports) {
    for (const auto& [k, v] : r.*field) totals[k] += v;
  }
  std::vector<std::pair<std::string, std::size_t>> rows(totals.begin(), totals.end());
  std::stable_sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) { return a.second > b.second; });

  const std::string rate_label = "Error Rate (Errors / Dataset Size)";
  std::size_t w = std::max<std::size_t>(with_rate ? rate_label.size() : 12, 20);
  for (const auto& [k, v] : rows) w = std::max(w, k.size());

  out += title + "\n";
  out += fmt::format("{:<{}}", "Error Type", w);
  for (const auto& [name, r] : reports) out += fmt::format("  {:>12}", name);
  out += "\n";
  for (const auto& [k, total] : rows) {
    out += fmt::format("{:<{}}", k, w);
    for (const auto& [name, r] : reports) {
      auto it = (r.*field).find(k);
      out += fmt::format("  {:>12}", it == (r.*field).end() ? 0 : it->second);
    }
    out += "\n";
  }
  out += fmt::format("{:<{}}", "Total Errors", w);
  for (const auto& [name, r] : reports) {
    std::size_t sum = 0;
    for (const auto& [k, v] : r.*field) sum += v;
    out += fmt::format("  {:>12}", sum);
  }
  out += "\n";
  if (with_rate) {
    out += fmt::format("{:<{}}", rate_label, w);
    for (const auto& [name, r] : reports) {
      std::size_t sum = 0;
      for (const auto& [k, v] : r.*field) sum += v;
      double rate = r.n ? static_cast<double>(sum) / static_cast<double>(r.n) : 0.0;
      out += fmt::format("  {:>12.2f}", rate);
    }
    out += "\n";
  }
}

}  // namespace

std::string failure_report(const std::vector<std::pair<std::string, EvalReport>>& reports) {
  std::string out = "Failure rates of each component\n";
  out += fmt::format("{:<16}", "Component");
  for (const auto& [name, r] : reports) out += fmt::format("  {:>12}", name);
  out += "\n";
  const std::pair<const char*, const char*> components[] = {
      {"Decomposer", "Decomposer (D)"}, {"Sanitizer", "Sanitizer (S)"}, {"Executor", "Executor (R)"}};
  for (const auto& [key, label] : components) {
    out += fmt::format("{:<16}", label);
    for (const auto& [name, r] : reports) {
      auto it = r.failure_rates.find(key);
      out += fmt::format("  {:>12.2f}", it == r.failure_rates.end() ? 0.0 : it->second);
    }
    out += "\n";
  }
  out += "\n";
  render_histogram(out, "Sanitizer (S) error types", reports, &EvalReport::sanitizer_error_histogram, false);
  out += "\n";
  render_histogram(out, "Executor (R) error types and frequencies", reports, &EvalReport::error_histogram, true);
  return out;
}

std::string failure_report(const EvalReport& report, const std::string& dataset) {
  return failure_report({{dataset, report}});
}

}  // namespace tabdsr
