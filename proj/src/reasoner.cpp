#include "tabdsr/reasoner.hpp"

#include <cmath>

#include <fmt/format.h>

#include "tabdsr/tpl.hpp"

namespace tabdsr {

ProgramSource extract_program(std::string_view text, Dialect dialect) {
  auto open = text.find("```");
  if (open != std::string_view::npos) {
    auto body = text.find('\n', open + 3);
    if (body == std::string_view::npos) throw NoCodeBlock("code fence has no body");
    ++body;
    auto close = text.find("```", body);
    std::string code = trim(text.substr(body, close == std::string_view::npos ? std::string_view::npos : close - body));
    if (code.empty()) throw NoCodeBlock("code block is empty");
    return ProgramSource{dialect, std::move(code)};
  }
  std::string whole = trim(text);
  if (dialect == Dialect::Tpl && !whole.empty()) {
    try {
      tpl::parse_program(whole);
      return ProgramSource{dialect, std::move(whole)};
    } catch (const ExecError&) {
    }
  }
  throw NoCodeBlock("reply contains no code block");
}

std::string format_answer(const CellValue& v) {
  if (is_null(v)) return "N/A";
  if (is_int(v)) return std::to_string(std::get<std::int64_t>(v));
  if (is_text(v)) return std::get<std::string>(v);

  double x = std::get<double>(v);
  double scaled = std::nearbyint(x * 100.0);
  std::string s;
  if (std::fabs(scaled) < 9.0e15) {
    auto k = static_cast<long long>(scaled);
    bool negative = k < 0;
    unsigned long long mag = negative ? static_cast<unsigned long long>(-k) : static_cast<unsigned long long>(k);
    s = fmt::format("{}{}.{:02}", negative ? "-" : "", mag / 100, mag % 100);
  } else {
    s = fmt::format("{:.2f}", x);
  }
  while (s.back() == '0') s.pop_back();
  if (s.back() == '.') s.pop_back();
  if (s == "-0") s = "0";
  return s;
}

std::string format_answer(const ExecValue& v) {
  if (const auto* c = std::get_if<CellValue>(&v)) return format_answer(*c);
  std::string out;
  for (const auto& item : std::get<std::vector<CellValue>>(v)) {
    if (!out.empty()) out += ", ";
    out += format_answer(item);
  }
  return out;
}

std::string format_prior_steps(const std::vector<StepResult>& steps) {
  if (steps.empty()) return "(none)";
  std::string out;
  for (std::size_t i = 0; i < steps.size(); ++i) {
    const auto& s = steps[i];
    out += fmt::format("{}. {}\n   Answer: {}\n", i + 1, s.sub_question,
                       s.value ? format_answer(*s.value) : std::string("N/A (step failed)"));
  }
  return out;
}

namespace {

struct Attempt {
  ProgramSource program;
  std::optional<ExecValue> value;
  std::optional<ExecError> error;
};

Attempt attempt(Gateway& gateway, const ChatRequest& req, Executor& executor, const CleanTable& table) {
  Attempt a;
  a.program.dialect = executor.dialect();
  std::string reply;
  try {
    reply = gateway.complete(req);
  } catch (const GatewayError& e) {
    a.error = ExecError(ExecCategory::SyntaxError, fmt::format("no program received: {}", e.what()));
    return a;
  }
  try {
    a.program = extract_program(reply, executor.dialect());
  } catch (const NoCodeBlock& e) {
    a.program.text = reply;
    a.error = ExecError(ExecCategory::SyntaxError, e.what());
    return a;
  }
  try {
    a.value = executor.run(a.program.text, table);
  } catch (const ExecError& e) {
    a.error = e;
  }
  return a;
}

}  // namespace

FinalAnswer answer(const CleanTable& table, const SubQuestionList& subs, Gateway& gateway, Executor& executor,
                   const PromptSet& prompts, std::string_view sample_id) {
  if (subs.items.empty()) throw std::invalid_argument("answer() needs at least one sub-question");
  FinalAnswer out;
  const std::string table_json = serialize_table(table);
  const std::string& dialect_text =
      executor.dialect() == Dialect::Tpl ? prompts.dialect_tpl : prompts.dialect_dfscript;

  for (const auto& sub : subs.items) {
    ChatRequest req;
    req.system_prompt = prompts.reasoner_system;
    req.user_prompt = render(prompts.reasoner_user, {{"table_json", table_json},
                                                     {"sub_question", sub},
                                                     {"prior_steps", format_prior_steps(out.steps)},
                                                     {"dialect_instructions", dialect_text}});
    req.tag = "reasoner";
    req.sample_id = sample_id;

    StepResult step;
    step.sub_question = sub;
    Attempt first = attempt(gateway, req, executor, table);
    step.program = first.program;
    if (first.value) {
      step.value = std::move(first.value);
    } else {
      ChatRequest repair = req;
      repair.user_prompt += fmt::format(
          "\nYour previous program:\n```\n{}\n```\nfailed with:\n{}\n\nReturn a corrected program in a single "
          "fenced code block.\n",
          first.program.text, first.error->what());
      Attempt second = attempt(gateway, repair, executor, table);
      step.repair_attempted = true;
      step.repair_program = second.program;
      if (second.value) {
        step.value = std::move(second.value);
      } else {
        step.error = std::move(second.error);
      }
    }
    out.steps.push_back(std::move(step));
  }

  const auto& last = out.steps.back();
  out.failed = !last.value.has_value();
  out.text = out.failed ? "N/A" : format_answer(*last.value);
  return out;
}

}  // namespace tabdsr
