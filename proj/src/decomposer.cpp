#include "tabdsr/decomposer.hpp"

#include <fmt/format.h>

#include "tabdsr/table.hpp"

namespace tabdsr {

using nlohmann::json;

namespace {

// Index one past the bracket closing the one at `open`, or npos.
std::size_t balanced_end(std::string_view text, std::size_t open) {
  std::vector<char> stack;
  bool in_string = false;
  bool escaped = false;
  for (std::size_t i = open; i < text.size(); ++i) {
    char c = text[i];
    if (in_string) {
      if (escaped) {
        escaped = false;
      } else if (c == '\\') {
        escaped = true;
      } else if (c == '"') {
        in_string = false;
      }
      continue;
    }
    switch (c) {
      case '"': in_string = true; break;
      case '{': stack.push_back('}'); break;
      case '[': stack.push_back(']'); break;
      case '}':
      case ']':
        if (stack.empty() || stack.back() != c) return std::string_view::npos;
        stack.pop_back();
        if (stack.empty()) return i + 1;
        break;
      default: break;
    }
  }
  return std::string_view::npos;
}

}  // namespace

json extract_json(std::string_view text) {
  for (std::size_t i = 0; i < text.size(); ++i) {
    if (text[i] != '{' && text[i] != '[') continue;
    auto end = balanced_end(text, i);
    if (end == std::string_view::npos) continue;
    json j = json::parse(text.substr(i, end - i), nullptr, false);
    if (!j.is_discarded()) return j;
  }
  throw NoJsonFound("no JSON object or array found in model output");
}

ChatRequest build_decomposer_request(std::string_view question, const PromptSet& prompts) {
  ChatRequest req;
  req.system_prompt = prompts.decomposer_system;
  req.user_prompt = render(prompts.decomposer_user,
                           {{"question", std::string(question)}, {"example", prompts.decomposer_example}});
  req.tag = "decomposer";
  return req;
}

SubQuestionList parse_sub_questions(std::string_view model_text, std::vector<std::string>* warnings) {
  json j;
  try {
    j = extract_json(model_text);
  } catch (const NoJsonFound& e) {
    throw MalformedOutput(e.what());
  }
  const json* items = nullptr;
  if (j.is_object() && j.contains("sub_questions")) {
    items = &j["sub_questions"];
  } else if (j.is_array()) {
    items = &j;
  }
  if (!items || !items->is_array()) throw MalformedOutput("expected a \"sub_questions\" array");

  SubQuestionList out;
  for (const auto& item : *items) {
    if (!item.is_string()) throw MalformedOutput("sub-questions must be strings");
    std::string s = trim(item.get<std::string>());
    if (s.empty()) throw MalformedOutput("empty sub-question");
    out.items.push_back(std::move(s));
  }
  if (out.items.empty()) throw MalformedOutput("no sub-questions");
  if (out.items.size() > kMaxSubQuestions) {
    throw MalformedOutput(fmt::format("{} sub-questions exceeds the cap of {}", out.items.size(), kMaxSubQuestions));
  }
  out.count = out.items.size();

  if (j.is_object() && j.contains("count")) {
    const auto& declared = j["count"];
    if (!declared.is_number_integer() || declared.get<long long>() != static_cast<long long>(out.count)) {
      if (warnings) {
        warnings->push_back(fmt::format("declared count {} corrected to {}", declared.dump(), out.count));
      }
    }
  } else if (warnings && j.is_object()) {
    warnings->push_back(fmt::format("count missing, using {}", out.count));
  }
  return out;
}

SubQuestionList decompose(std::string_view question, Gateway& gateway, const PromptSet& prompts,
                          std::string_view sample_id, std::vector<std::string>* warnings) {
  if (trim(question).empty()) throw std::invalid_argument("question must not be empty");
  ChatRequest req = build_decomposer_request(question, prompts);
  req.sample_id = sample_id;
  return parse_sub_questions(gateway.complete(req), warnings);
}

DecomposeOutcome decompose_or_fallback(std::string_view question, Gateway& gateway, const PromptSet& prompts,
                                       std::string_view sample_id) {
  DecomposeOutcome out;
  try {
    out.subs = decompose(question, gateway, prompts, sample_id, &out.warnings);
  } catch (const MalformedOutput& e) {
    out.failed = true;
    out.error = std::string("MalformedOutput: ") + e.what();
  } catch (const GatewayError& e) {
    out.failed = true;
    out.error = e.what();
  }
  if (out.failed) out.subs = SubQuestionList{1, {std::string(question)}};
  return out;
}

}  // namespace tabdsr
