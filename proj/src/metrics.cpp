#include "tabdsr/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <regex>

#include "tabdsr/table.hpp"

namespace tabdsr {

namespace {

std::string lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out) {
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  }
  return out;
}

void erase_all(std::string& s, std::string_view what) {
  for (auto pos = s.find(what); pos != std::string::npos; pos = s.find(what, pos)) s.erase(pos, what.size());
}

std::string strip_decoration(std::string s) {
  for (std::string_view sym : {"$", "€", "£", "%"}) erase_all(s, sym);
  return trim(s);
}

std::optional<double> as_number(std::string_view text) {
  static const std::regex kThousands(R"(^[-+]?\d{1,3}(,\d{3})+(\.\d+)?$)");
  std::string s = strip_decoration(std::string(text));
  bool negate = false;
  if (s.size() >= 2 && s.front() == '(' && s.back() == ')') {
    negate = true;
    s = trim(std::string_view(s).substr(1, s.size() - 2));
  }
  if (s.find(',') != std::string::npos) {
    if (!std::regex_match(s, kThousands)) return std::nullopt;
    erase_all(s, ",");
  }
  auto v = parse_plain_number(s);
  if (!v) return std::nullopt;
  double d = as_double(*v);
  if (negate) {
    if (s.front() == '-' || s.front() == '+') return std::nullopt;
    d = -d;
  }
  return d;
}

std::string collapse_whitespace(std::string_view s) {
  std::string out;
  bool pending_space = false;
  for (char c : s) {
    if (c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v') {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) out.push_back(' ');
    pending_space = false;
    out.push_back(c);
  }
  return out;
}

bool numbers_match(double pred, double gold) {
  return std::fabs(pred - gold) <= std::max(1e-6, 1e-4 * std::fabs(gold));
}

std::optional<double> leading_number(const std::string& text) {
  auto space = text.find(' ');
  return as_number(space == std::string::npos ? text : text.substr(0, space));
}

// Perfect matching between two equally sized lists under answers_match.
bool lists_match(const std::vector<NormalizedAnswer>& pred, const std::vector<NormalizedAnswer>& gold) {
  if (pred.size() != gold.size()) return false;
  const std::size_t n = pred.size();
  std::vector<int> owner(n, -1);
  std::function<bool(std::size_t, std::vector<bool>&)> augment = [&](std::size_t i, std::vector<bool>& seen) {
    for (std::size_t j = 0; j < n; ++j) {
      if (seen[j] || !answers_match(pred[i], gold[j])) continue;
      seen[j] = true;
      if (owner[j] < 0 || augment(static_cast<std::size_t>(owner[j]), seen)) {
        owner[j] = static_cast<int>(i);
        return true;
      }
    }
    return false;
  };
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<bool> seen(n, false);
    if (!augment(i, seen)) return false;
  }
  return true;
}

}  // namespace

NormalizedAnswer normalize_answer(std::string_view text) {
  std::string s = lower(trim(text));
  if (auto d = as_number(s)) return NormalizedAnswer::make_number(*d);

  if (s.find_first_of(",;") != std::string::npos) {
    std::vector<NormalizedAnswer> parts;
    std::size_t start = 0;
    while (start <= s.size()) {
      auto end = s.find_first_of(",;", start);
      std::string part = trim(std::string_view(s).substr(start, end == std::string::npos ? std::string::npos : end - start));
      if (!part.empty()) parts.push_back(normalize_answer(part));
      if (end == std::string::npos) break;
      start = end + 1;
    }
    if (parts.size() >= 2) return NormalizedAnswer::make_list(std::move(parts));
  }
  return NormalizedAnswer::make_text(collapse_whitespace(strip_decoration(s)));
}

bool answers_match(const NormalizedAnswer& pred, const NormalizedAnswer& gold) {
  using K = NormalizedAnswer::Kind;
  if (pred.kind == K::Number && gold.kind == K::Number) return numbers_match(pred.number, gold.number);
  if (pred.kind == K::Text && gold.kind == K::Text) return pred.text == gold.text;
  if (pred.kind == K::List && gold.kind == K::List) return lists_match(pred.items, gold.items);
  if (pred.kind == K::Number && gold.kind == K::Text) {
    auto g = leading_number(gold.text);
    return g && numbers_match(pred.number, *g);
  }
  if (pred.kind == K::Text && gold.kind == K::Number) {
    auto p = leading_number(pred.text);
    return p && numbers_match(*p, gold.number);
  }
  return false;
}

bool answers_match(std::string_view pred, std::string_view gold) {
  return answers_match(normalize_answer(pred), normalize_answer(gold));
}

std::vector<std::string> rouge_tokens(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : text) {
    auto c = static_cast<unsigned char>(ch);
    bool word = (c >= '0' && c <= '9') || (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c >= 0x80;
    if (word) {
      cur.push_back(c >= 'A' && c <= 'Z' ? static_cast<char>(c - 'A' + 'a') : ch);
    } else if (!cur.empty()) {
      out.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

std::size_t lcs_length(const std::vector<std::string>& a, const std::vector<std::string>& b) {
  std::vector<std::size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j) {
      cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

double rouge_l_tokens(const std::vector<std::string>& pred, const std::vector<std::string>& gold) {
  if (pred.empty() || gold.empty()) return 0.0;
  const auto l = static_cast<double>(lcs_length(pred, gold));
  if (l == 0.0) return 0.0;
  const double p = l / static_cast<double>(pred.size());
  const double r = l / static_cast<double>(gold.size());
  return 2.0 * p * r / (p + r);
}

double rouge_l(std::string_view pred, std::string_view gold) {
  return rouge_l_tokens(rouge_tokens(pred), rouge_tokens(gold));
}

}  // namespace tabdsr
