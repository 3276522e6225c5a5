#include "tabdsr/prompts.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>
#include <utility>
#include <vector>

namespace tabdsr {

namespace {

constexpr std::string_view kDecomposerSystem =
    R"P(You split complex questions about tables into simple sub-questions. You never see the table.)P";

constexpr std::string_view kDecomposerUser = R"P(Break the question below into the smallest ordered list of sub-questions that can each be answered with one lookup or one calculation.

Rules:
- Split at conjunctions such as "and" or "or", at commas, and wherever one quantity must be known before another can be computed.
- Keep each sub-question self-contained: repeat entity names, years and units instead of using pronouns.
- A later sub-question may depend on the answer to an earlier one; keep that order.
- If the question is already simple, return it unchanged as the only sub-question.
- Return at most 6 sub-questions.

Answer with one JSON object and nothing else:
{"count": <number of sub-questions>, "sub_questions": ["...", "..."]}

Example:
{example}

Question: {question}
)P";

constexpr std::string_view kDecomposerExample = R"P(Question: What was the revenue in 2019, and what is the percentage change in revenue from 2019 to 2020?
Output: {"count": 2, "sub_questions": ["What was the revenue in 2019?", "What is the percentage change in revenue from 2019 to 2020?"]})P";

constexpr std::string_view kSanitizerSystem =
    R"P(You clean tables so that a program can compute over them. You return the full table as JSON.)P";

constexpr std::string_view kSanitizerUser = R"P(Clean the table below and return it in the same JSON layout: {"columns": [...], "data": [[...], ...]}.

Structure:
- If the header is split over several lines (extra header rows appear as the first data rows), merge the levels into single headers joined by " / ".
- If the table is split into sections by blank or divider rows, remove those rows.
- Every header must be non-empty and unique.

Content:
- Remove currency symbols, "%" signs, thousands separators, explanatory notes such as "(approx)", emojis and other non-numeric characters from numeric cells, then write them as JSON numbers.
- Write accounting negatives such as "(123)" as -123.
- Replace blank markers such as "", "-", "N/A", "None", "???" with null.
- A column holds either only numbers and null, or only text and null.

Keep every remaining row and column; do not summarize, drop or invent data.

Return only the JSON object.

Table:
{table_json}
)P";

constexpr std::string_view kSanitizerReflect = R"P(Your previous cleaned table could not be read by the table parser.

Parser error:
{error_message}

Your previous output:
{previous_output}

Original table:
{table_json}

Fix the problem and return the complete cleaned table as one JSON object {"columns": [...], "data": [[...], ...]}, following the same cleaning rules. Return only the JSON object.
)P";

constexpr std::string_view kReasonerSystem =
    R"P(You answer questions about a clean table by writing a short program. The program is executed; you never compute numbers yourself.)P";

constexpr std::string_view kReasonerUser = R"P(Table (JSON, already cleaned; numeric columns hold numbers or null):
{table_json}

Answers to earlier sub-questions:
{prior_steps}

Sub-question: {sub_question}

{dialect_instructions}

Before doing arithmetic, check that the columns you use are numeric and that lookups return exactly one row. Reply with a single fenced code block.
)P";

constexpr std::string_view kDialectTpl = R"P(Write the program in the table program language:
- Bindings: `name = expr;` then one final expression whose value is the answer.
- Pipelines start at `table` (or a bound pipeline) and chain stages with `|>`:
  filter(col("Year") == 2019 and col("Region") != "EU"), select(["a", "b"]), sortby("a", desc), head(3)
- Aggregates: sum(p, "col"), mean(p, "col"), min(p, "col"), max(p, "col"), count(p)
- Lookups: cell(p, 0, "col") (0-based row after the pipeline), values(p, "col") (list answer)
- Arithmetic: + - * / ( ), abs(x), round(x, n). Text supports == and != only.
- Use earlier answers as literal values.
No loops, no functions of your own, no other operations.

Example:
```
rev19 = cell(table |> filter(col("Year") == 2019), 0, "Revenue");
rev20 = cell(table |> filter(col("Year") == 2020), 0, "Revenue");
(rev20 - rev19) / rev19 * 100
```)P";

constexpr std::string_view kDialectDfScript = R"P(Write Python that uses only the DataFrame `df` (already loaded from the table) and stores the result in a variable named `answer`.
- Allowed: column selection, boolean filtering, .loc/.iloc, sum/mean/min/max/count, sort_values, head, basic arithmetic, round, abs.
- Not allowed: imports, file or network access, .append, .ix, inplace=True, apply with lambdas.
- Convert with float() before arithmetic on single cells.

Example:
```python
rev19 = float(df.loc[df["Year"] == 2019, "Revenue"].iloc[0])
rev20 = float(df.loc[df["Year"] == 2020, "Revenue"].iloc[0])
answer = (rev20 - rev19) / rev19 * 100
```)P";

constexpr std::string_view kForgeUser = R"P(Read the table below and write a two-hop numerical question about it.

1. Write a first sub-question whose answer is a value read or computed from the table.
2. Write a second sub-question that can only be answered once the first answer is known, and that needs a calculation.
3. Merge both into one fluent question that reads naturally and asks only for the final value.

Answer with one JSON object and nothing else:
{"sub_questions": ["<first>", "<second>"], "merged": "<merged question>"}

Table:
{table_json}
)P";

using Field = std::string PromptSet::*;

const std::vector<std::pair<const char*, Field>>& fields() {
  static const std::vector<std::pair<const char*, Field>> kFields = {
      {"decomposer_system", &PromptSet::decomposer_system},
      {"decomposer_user", &PromptSet::decomposer_user},
      {"decomposer_example", &PromptSet::decomposer_example},
      {"sanitizer_system", &PromptSet::sanitizer_system},
      {"sanitizer_user", &PromptSet::sanitizer_user},
      {"sanitizer_reflect", &PromptSet::sanitizer_reflect},
      {"reasoner_system", &PromptSet::reasoner_system},
      {"reasoner_user", &PromptSet::reasoner_user},
      {"dialect_tpl", &PromptSet::dialect_tpl},
      {"dialect_dfscript", &PromptSet::dialect_dfscript},
      {"forge_user", &PromptSet::forge_user},
  };
  return kFields;
}

}  // namespace

const PromptSet& PromptSet::builtin() {
  static const PromptSet kBuiltin = [] {
    PromptSet p;
    p.decomposer_system = kDecomposerSystem;
    p.decomposer_user = kDecomposerUser;
    p.decomposer_example = kDecomposerExample;
    p.sanitizer_system = kSanitizerSystem;
    p.sanitizer_user = kSanitizerUser;
    p.sanitizer_reflect = kSanitizerReflect;
    p.reasoner_system = kReasonerSystem;
    p.reasoner_user = kReasonerUser;
    p.dialect_tpl = kDialectTpl;
    p.dialect_dfscript = kDialectDfScript;
    p.forge_user = kForgeUser;
    return p;
  }();
  return kBuiltin;
}

PromptSet PromptSet::load(const std::filesystem::path& dir) {
  PromptSet p = builtin();
  for (const auto& [name, field] : fields()) {
    std::ifstream in(dir / (std::string(name) + ".txt"), std::ios::binary);
    if (!in) continue;
    std::stringstream ss;
    ss << in.rdbuf();
    p.*field = ss.str();
  }
  return p;
}

void PromptSet::save(const std::filesystem::path& dir) const {
  std::filesystem::create_directories(dir);
  for (const auto& [name, field] : fields()) {
    std::ofstream out(dir / (std::string(name) + ".txt"), std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write prompt file in " + dir.string());
    out << this->*field;
  }
}

std::string render(std::string_view tmpl, const std::map<std::string, std::string>& vars) {
  std::string out;
  out.reserve(tmpl.size());
  std::size_t i = 0;
  while (i < tmpl.size()) {
    if (tmpl[i] == '{') {
      auto close = tmpl.find('}', i + 1);
      if (close != std::string_view::npos) {
        auto it = vars.find(std::string(tmpl.substr(i + 1, close - i - 1)));
        if (it != vars.end()) {
          out += it->second;
          i = close + 1;
          continue;
        }
      }
    }
    out.push_back(tmpl[i++]);
  }
  return out;
}

}  // namespace tabdsr
