// tabdsr: ask one question, evaluate a dataset, or forge a noisy corpus.
//
// Exit codes: 0 success, 1 environment/I-O/config error, 2 pipeline failure.

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "tabdsr/decomposer.hpp"
#include "tabdsr/forge.hpp"
#include "tabdsr/harness.hpp"
#include "tabdsr/llm_gateway.hpp"
#include "tabdsr/prompts.hpp"
#include "tabdsr/reasoner.hpp"
#include "tabdsr/sanitizer.hpp"
#include "tabdsr/script_client.hpp"
#include "tabdsr/tpl.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kOk = 0;
constexpr int kEnvError = 1;
constexpr int kPipelineFailure = 2;

/// Raised for anything the user has to fix outside the pipeline.
class EnvError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct CliConfig {
  std::string config_path;
  std::string backend;
  std::string executor = "builtin";
  std::size_t parallelism = 1;
  std::uint64_t seed = 0;
  std::string output_path;
  std::string prompts_dir;
  int verbosity = 0;
};

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw EnvError(fmt::format("cannot read {}", path.string()));
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const fs::path& path, const std::string& text) {
  std::error_code ec;
  if (path.has_parent_path()) fs::create_directories(path.parent_path(), ec);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out || !(out << text) || !out.flush()) throw EnvError(fmt::format("cannot write {}", path.string()));
}

json config_json(const CliConfig& cli) {
  if (cli.config_path.empty()) return json::object();
  json j = json::parse(read_text(cli.config_path), nullptr, false, true);
  if (j.is_discarded() || !j.is_object()) throw EnvError(fmt::format("{} is not a JSON object", cli.config_path));
  return j;
}

tabdsr::LlmConfig llm_config(const json& cfg) {
  try {
    return tabdsr::llm_config_from_json(cfg.contains("llm") ? cfg["llm"] : cfg);
  } catch (const std::exception& e) {
    throw EnvError(fmt::format("bad llm config: {}", e.what()));
  }
}

/// Returns nullptr for backend "none".
std::unique_ptr<tabdsr::Gateway> make_gateway(const CliConfig& cli, const json& cfg) {
  if (cli.backend == "none") return nullptr;
  tabdsr::LlmConfig llm = llm_config(cfg);
  std::shared_ptr<tabdsr::ChatBackend> backend;
  if (cli.backend == "live") {
    backend = std::make_shared<tabdsr::LiveBackend>();
  } else if (cli.backend.rfind("mock:", 0) == 0) {
    fs::path path = cli.backend.substr(5);
    if (!fs::exists(path)) throw EnvError(fmt::format("transcript {} does not exist", path.string()));
    try {
      backend = std::make_shared<tabdsr::MockBackend>(tabdsr::TranscriptScript::load(path));
    } catch (const std::exception& e) {
      throw EnvError(fmt::format("cannot load transcript {}: {}", path.string(), e.what()));
    }
  } else if (cli.backend.rfind("record:", 0) == 0) {
    try {
      backend = std::make_shared<tabdsr::RecordingBackend>(std::make_unique<tabdsr::LiveBackend>(),
                                                           cli.backend.substr(7));
    } catch (const std::exception& e) {
      throw EnvError(e.what());
    }
  } else {
    throw EnvError(fmt::format("unknown backend \"{}\" (live | mock:<path> | record:<path> | none)", cli.backend));
  }
  return std::make_unique<tabdsr::Gateway>(llm, backend);
}

std::unique_ptr<tabdsr::Executor> make_executor(const CliConfig& cli, const json& cfg) {
  if (cli.executor == "builtin") return std::make_unique<tabdsr::tpl::TplExecutor>();
  if (cli.executor == "extern") {
    std::vector<std::string> command = {"python3", "-m", "script_runner"};
    int timeout_s = 10;
    if (auto it = cfg.find("runner"); it != cfg.end()) {
      command = it->value("command", command);
      timeout_s = it->value("timeout_s", timeout_s);
    }
    return std::make_unique<tabdsr::ExternalExecutor>(command, timeout_s);
  }
  throw EnvError(fmt::format("unknown executor \"{}\" (builtin | extern)", cli.executor));
}

tabdsr::PromptSet prompts(const CliConfig& cli) {
  if (cli.prompts_dir.empty()) return tabdsr::PromptSet::builtin();
  if (!fs::is_directory(cli.prompts_dir)) throw EnvError(fmt::format("{} is not a directory", cli.prompts_dir));
  return tabdsr::PromptSet::load(cli.prompts_dir);
}

void log(const CliConfig& cli, int level, const std::string& msg) {
  if (cli.verbosity >= level) fmt::print(stderr, "{}\n", msg);
}

// --- ask --------------------------------------------------------------------

int cmd_ask(const std::string& table_path, const std::string& question, CliConfig cli) {
  if (cli.backend.empty()) cli.backend = "live";
  std::string table_json = read_text(table_path);
  tabdsr::RawTable raw;
  try {
    raw = tabdsr::parse_table(table_json);
  } catch (const tabdsr::TableError& e) {
    throw EnvError(fmt::format("{}: {}", table_path, e.what()));
  }
  json cfg = config_json(cli);
  auto gateway = make_gateway(cli, cfg);
  if (!gateway) throw EnvError("ask needs a model backend");
  auto executor = make_executor(cli, cfg);
  auto ps = prompts(cli);

  tabdsr::QaRecord record{"ask", table_json, question, "", "custom", std::nullopt};
  tabdsr::SampleResult res = tabdsr::run_sample(record, *gateway, *executor, ps);

  fmt::print("{}\n", res.predicted);
  fmt::print("sub-questions:\n");
  for (std::size_t i = 0; i < res.sub_questions.size(); ++i) fmt::print("  {}. {}\n", i + 1, res.sub_questions[i]);
  if (res.decomposer_failed) fmt::print("  (decomposer failed; asked the question whole)\n");
  fmt::print("sanitize: {}\n", tabdsr::to_string(res.sanitize_outcome));
  if (cli.verbosity >= 1) {
    for (std::size_t i = 0; i < res.steps.size(); ++i) {
      const auto& s = res.steps[i];
      fmt::print("step {}: {}\n{}\n", i + 1, s.sub_question, s.program);
      if (s.repair_program) fmt::print("repair:\n{}\n", *s.repair_program);
      fmt::print("=> {}\n", s.value ? *s.value : "error: " + s.error.value_or("?"));
    }
  }
  return res.executor_failed ? kPipelineFailure : kOk;
}

// --- eval -------------------------------------------------------------------

int cmd_eval(const std::string& dataset_path, const std::string& source, CliConfig cli) {
  if (cli.backend.empty()) cli.backend = "live";
  if (cli.output_path.empty()) cli.output_path = "tabdsr_eval";
  fs::path out_dir = cli.output_path;
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (!fs::is_directory(out_dir)) throw EnvError(fmt::format("cannot create output directory {}", out_dir.string()));

  tabdsr::LoadResult loaded;
  try {
    loaded = fs::path(dataset_path).extension() == ".csv" ? tabdsr::load_csv_dataset(dataset_path)
                                                          : tabdsr::load_dataset(dataset_path, source);
  } catch (const tabdsr::DatasetError& e) {
    throw EnvError(e.what());
  }
  for (const auto& w : loaded.warnings) log(cli, 1, "warning: " + w);
  log(cli, 1, fmt::format("{} records loaded", loaded.records.size()));

  json cfg = config_json(cli);
  auto gateway = make_gateway(cli, cfg);
  if (!gateway) throw EnvError("eval needs a model backend");
  auto executor = make_executor(cli, cfg);
  auto report = tabdsr::run_eval(loaded.records, *gateway, *executor, cli.parallelism, prompts(cli));

  write_text(out_dir / "report.json", tabdsr::report_to_json(report).dump(2) + "\n");
  const std::string name = source.empty() ? fs::path(dataset_path).stem().string() : source;
  write_text(out_dir / "failure_report.txt", tabdsr::failure_report(report, name));
  for (const auto& s : report.per_sample) {
    log(cli, 2, fmt::format("{}: predicted {} gold {} {}", s.id, s.predicted, s.gold, s.matched ? "ok" : "miss"));
  }
  fmt::print("n={} accuracy={:.4f} rouge_l={:.4f}\n", report.n, report.accuracy, report.rouge_l_mean);
  return kOk;
}

// --- forge ------------------------------------------------------------------

int cmd_forge(const std::string& tables_dir, CliConfig cli) {
  json cfg = config_json(cli);
  if (cli.backend.empty()) cli.backend = cli.config_path.empty() ? "none" : "live";
  if (cli.output_path.empty()) cli.output_path = "tabdsr_forge";
  if (!fs::is_directory(tables_dir)) throw EnvError(fmt::format("{} is not a directory", tables_dir));

  tabdsr::ForgeConfig fcfg;
  try {
    if (auto it = cfg.find("forge"); it != cfg.end()) fcfg = tabdsr::forge_config_from_json(*it);
  } catch (const std::exception& e) {
    throw EnvError(e.what());
  }
  fcfg.seed = cli.seed;

  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(tables_dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".json") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  std::vector<std::pair<std::string, tabdsr::CleanTable>> tables;
  for (const auto& f : files) {
    tabdsr::ValidationResult v;
    try {
      v = tabdsr::validate_clean(tabdsr::parse_table(read_text(f)));
    } catch (const tabdsr::TableError& e) {
      throw EnvError(fmt::format("{}: {}", f.string(), e.what()));
    }
    if (auto* errs = std::get_if<std::vector<tabdsr::ValidationError>>(&v)) {
      throw EnvError(fmt::format("{} is not a clean table: {}", f.string(), errs->front().to_string()));
    }
    tables.emplace_back(f.stem().string(), std::get<tabdsr::CleanTable>(std::move(v)));
  }

  auto gateway = make_gateway(cli, cfg);
  if (!gateway) log(cli, 1, "no model backend; questions are left for annotators");
  auto summary = tabdsr::forge_corpus(tables, fcfg, gateway.get(), prompts(cli));
  for (const auto& w : summary.warnings) log(cli, 1, "warning: " + w);

  fs::path out = cli.output_path;
  for (const auto& r : summary.records) {
    write_text(out / "noisy" / (r.id + ".json"), tabdsr::serialize_table(r.noisy_table) + "\n");
    write_text(out / "provenance" / (r.id + ".jsonl"), tabdsr::provenance_to_jsonl(r.provenance));
  }
  try {
    tabdsr::export_annotation(summary.records, out);
  } catch (const tabdsr::FileError& e) {
    throw EnvError(e.what());
  }
  write_text(out / "forge_config.json", tabdsr::forge_config_to_json(fcfg).dump(2) + "\n");
  fmt::print("forged {} of {} tables, {} dropped for malformed questions\n", summary.records.size(), tables.size(),
             summary.skipped_malformed);
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Decompose, sanitize and reason over noisy tables."};
  app.require_subcommand(1);
  CliConfig cli;
  // Counted per subcommand: CLI11 resets a flag variable shared between them.
  std::vector<CLI::Option*> verbose_flags;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", cli.config_path, "JSON config file")->check(CLI::ExistingFile);
    sub->add_option("--backend", cli.backend, "live | mock:<transcript> | record:<transcript> | none");
    sub->add_option("--executor", cli.executor, "builtin | extern");
    sub->add_option("--parallelism", cli.parallelism, "worker count")->check(CLI::PositiveNumber);
    sub->add_option("--seed", cli.seed, "forge RNG seed");
    sub->add_option("--out", cli.output_path, "output directory");
    sub->add_option("--prompts", cli.prompts_dir, "directory of prompt overrides");
    verbose_flags.push_back(sub->add_flag("-v", "more output (repeat for more)"));
  };

  std::string table_path, question, dataset, source = "custom", tables_dir;
  auto* ask = app.add_subcommand("ask", "answer one question about one table");
  ask->add_option("table", table_path, "table JSON file")->required();
  ask->add_option("question", question, "question text")->required();
  add_common(ask);

  auto* eval = app.add_subcommand("eval", "evaluate a dataset and write reports");
  eval->add_option("dataset", dataset, "JSON lines, JSON array or CSV dataset")->required();
  eval->add_option("--source", source, "tatqa | tablebench | caltab151 | custom");
  add_common(eval);

  auto* forge = app.add_subcommand("forge", "build a noisy corpus from clean tables");
  forge->add_option("tables_dir", tables_dir, "directory of clean table JSON files")->required();
  add_common(forge);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kOk : kEnvError;
  }
  for (auto* flag : verbose_flags) cli.verbosity += static_cast<int>(flag->count());

  try {
    if (*ask) return cmd_ask(table_path, question, cli);
    if (*eval) return cmd_eval(dataset, source, cli);
    return cmd_forge(tables_dir, cli);
  } catch (const EnvError& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return kEnvError;
  } catch (const tabdsr::GatewayError& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return kPipelineFailure;
  } catch (const std::exception& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return kEnvError;
  }
}
