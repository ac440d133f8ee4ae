#include "sciqa/anskit.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <sstream>

#include "sciqa/error.hpp"
#include "sciqa/util.hpp"

namespace sciqa {

namespace {

constexpr const char* kSlot = "<ANSWER>";

const char* format_command(answer_format f) {
  switch (f) {
    case answer_format::boxed: return "\\boxed{";
    case answer_format::mathrm: return "\\mathrm{";
    case answer_format::mathbf: return "\\mathbf{";
    case answer_format::text: return "\\text{";
    default: return nullptr;
  }
}

// Content span of a brace group starting at `open` (the '{'). Returns the
// index one past the matching '}' or npos when unbalanced.
std::size_t balanced_end(std::string_view s, std::size_t open) {
  int depth = 0;
  for (std::size_t i = open; i < s.size(); ++i) {
    if (s[i] == '{') {
      ++depth;
    } else if (s[i] == '}') {
      --depth;
      if (depth == 0) return i + 1;
    }
  }
  return std::string_view::npos;
}

// Last balanced occurrence of a \command{...} group; earlier occurrences
// are tried when the trailing one is unterminated.
std::optional<std::pair<std::size_t, std::size_t>> find_last_group(
    std::string_view s, std::string_view command) {
  std::size_t pos = s.rfind(command);
  while (pos != std::string_view::npos) {
    std::size_t open = pos + command.size() - 1;  // the '{'
    std::size_t end = balanced_end(s, open);
    if (end != std::string_view::npos) return std::make_pair(pos, end);
    if (pos == 0) break;
    pos = s.rfind(command, pos - 1);
  }
  return std::nullopt;
}

std::string strip_wrapping_emphasis(std::string s) {
  // markdown emphasis and code ticks are formatting, never content
  auto is_emphasis = [](char c) { return c == '*' || c == '`' || c == '_'; };
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && is_emphasis(s[b])) ++b;
  while (e > b && is_emphasis(s[e - 1])) --e;
  s = trim(s.substr(b, e - b));
  // symmetric quotes
  while (s.size() >= 2 && (s.front() == '"' || s.front() == '\'') &&
         s.back() == s.front()) {
    s = trim(s.substr(1, s.size() - 2));
  }
  return s;
}

std::string strip_trailing_punct(std::string s) {
  while (!s.empty()) {
    char c = s.back();
    if (c == '.' || c == ',' || c == ';' || c == ':' || c == '!') {
      s.pop_back();
      // a single dot after a digit is sentence punctuation; stop there
      if (c == '.' && !s.empty() &&
          std::isdigit(static_cast<unsigned char>(s.back()))) {
        break;
      }
    } else {
      break;
    }
  }
  return trim(s);
}

bool has_unwrapper(const extraction_rule_set& rules, answer_format f) {
  return std::find(rules.format_unwrappers.begin(),
                   rules.format_unwrappers.end(),
                   f) != rules.format_unwrappers.end();
}

// Replace every \mathrm{..}/\mathbf{..}/\text{..} group with its content.
std::string flatten_text_commands(std::string s,
                                  const extraction_rule_set& rules) {
  for (answer_format f :
       {answer_format::mathrm, answer_format::mathbf, answer_format::text}) {
    if (!has_unwrapper(rules, f)) continue;
    const char* cmd = format_command(f);
    std::size_t pos;
    while ((pos = s.find(cmd)) != std::string::npos) {
      std::size_t open = pos + std::strlen(cmd) - 1;
      std::size_t end = balanced_end(s, open);
      if (end == std::string::npos) break;
      std::string inner = s.substr(open + 1, end - open - 2);
      s = s.substr(0, pos) + inner + s.substr(end);
    }
  }
  return s;
}

// Unwraps formatting layers until the value stabilizes. A \boxed group
// anywhere in the string wins and replaces it outright; the other commands
// are flattened in place; whole-string parens/brackets are peeled when the
// content is not a tuple.
std::string unwrap_formats(std::string s, const extraction_rule_set& rules) {
  for (int round = 0; round < 8; ++round) {
    std::string before = s;
    s = trim(strip_wrapping_emphasis(trim(s)));
    if (has_unwrapper(rules, answer_format::boxed)) {
      if (auto group = find_last_group(s, "\\boxed{")) {
        std::size_t open = group->first + 6;  // after "\boxed"
        s = s.substr(open + 1, group->second - open - 2);
        continue;
      }
    }
    s = flatten_text_commands(std::move(s), rules);
    if (s.size() >= 2) {
      bool parens = s.front() == '(' && s.back() == ')' &&
                    has_unwrapper(rules, answer_format::parens);
      bool brackets = s.front() == '[' && s.back() == ']' &&
                      has_unwrapper(rules, answer_format::brackets);
      // commas mark tuples/intervals whose delimiters carry meaning
      if ((parens || brackets) && s.find(',') == std::string::npos) {
        std::string_view body(s);
        // verify the closing delimiter matches the opening one
        int depth = 0;
        bool wraps_whole = true;
        char openc = s.front();
        char closec = parens ? ')' : ']';
        for (std::size_t i = 0; i < body.size(); ++i) {
          if (body[i] == openc) ++depth;
          if (body[i] == closec) {
            --depth;
            if (depth == 0 && i + 1 != body.size()) {
              wraps_whole = false;
              break;
            }
          }
        }
        if (wraps_whole && depth == 0) s = trim(s.substr(1, s.size() - 2));
      }
    }
    s = strip_trailing_punct(std::move(s));
    if (s == before) break;
  }
  return s;
}

// Superscript code points -> caret runs: "cm²" -> "cm^2", "s⁻¹" -> "s^-1".
std::string map_superscripts(std::string_view s) {
  auto sup_char = [](std::string_view v, std::size_t i,
                     char& out) -> std::size_t {
    unsigned char c0 = static_cast<unsigned char>(v[i]);
    if (c0 == 0xC2 && i + 1 < v.size()) {
      unsigned char c1 = static_cast<unsigned char>(v[i + 1]);
      if (c1 == 0xB2) { out = '2'; return 2; }
      if (c1 == 0xB3) { out = '3'; return 2; }
      if (c1 == 0xB9) { out = '1'; return 2; }
    }
    if (c0 == 0xE2 && i + 2 < v.size() &&
        static_cast<unsigned char>(v[i + 1]) == 0x81) {
      unsigned char c2 = static_cast<unsigned char>(v[i + 2]);
      if (c2 == 0xB0) { out = '0'; return 3; }
      if (c2 >= 0xB4 && c2 <= 0xB9) { out = static_cast<char>('4' + c2 - 0xB4); return 3; }
      if (c2 == 0xBB) { out = '-'; return 3; }
      if (c2 == 0xBA) { out = '+'; return 3; }
    }
    return 0;
  };

  std::string out;
  out.reserve(s.size());
  std::size_t i = 0;
  while (i < s.size()) {
    char mapped;
    std::size_t len = sup_char(s, i, mapped);
    if (len == 0) {
      out.push_back(s[i]);
      ++i;
      continue;
    }
    out.push_back('^');
    while (len != 0) {
      out.push_back(mapped);
      i += len;
      len = i < s.size() ? sup_char(s, i, mapped) : 0;
    }
  }
  return out;
}

// Byte length of a superscript code point at i (0 when none).
std::size_t superscript_len(std::string_view v, std::size_t i) {
  unsigned char c0 = static_cast<unsigned char>(v[i]);
  if (c0 == 0xC2 && i + 1 < v.size()) {
    unsigned char c1 = static_cast<unsigned char>(v[i + 1]);
    if (c1 == 0xB2 || c1 == 0xB3 || c1 == 0xB9) return 2;
  }
  if (c0 == 0xE2 && i + 2 < v.size() &&
      static_cast<unsigned char>(v[i + 1]) == 0x81) {
    unsigned char c2 = static_cast<unsigned char>(v[i + 2]);
    if (c2 == 0xB0 || (c2 >= 0xB4 && c2 <= 0xB9) || c2 == 0xBB || c2 == 0xBA) {
      return 3;
    }
  }
  return 0;
}

// Leading numeric token measured on the raw bytes, so a trailing unit can
// be cut off without disturbing its original spelling. Accepts decimals,
// scientific notation, caret powers (10^-4) and superscript exponents.
std::size_t numeric_prefix_len(std::string_view s) {
  std::size_t i = 0;
  if (i < s.size() && (s[i] == '+' || s[i] == '-')) ++i;
  std::size_t digits = 0;
  while (i < s.size()) {
    char c = s[i];
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.' || c == ',') {
      if (std::isdigit(static_cast<unsigned char>(c))) ++digits;
      ++i;
      continue;
    }
    if (std::size_t sup = superscript_len(s, i); sup != 0 && digits > 0) {
      i += sup;
      continue;
    }
    if ((c == 'e' || c == 'E') && digits > 0) {
      std::size_t j = i + 1;
      if (j < s.size() && (s[j] == '+' || s[j] == '-')) ++j;
      std::size_t ed = 0;
      while (j < s.size() && std::isdigit(static_cast<unsigned char>(s[j]))) {
        ++j;
        ++ed;
      }
      if (ed == 0) break;
      i = j;
      continue;
    }
    if (c == '^' && digits > 0) {
      std::size_t j = i + 1;
      if (j < s.size() && (s[j] == '+' || s[j] == '-')) ++j;
      std::size_t ed = 0;
      while (j < s.size() && std::isdigit(static_cast<unsigned char>(s[j]))) {
        ++j;
        ++ed;
      }
      if (ed == 0) break;
      i = j;
      continue;
    }
    break;
  }
  if (digits == 0) return 0;
  // trailing dot/comma belongs to the sentence, not the number
  while (i > 0 && (s[i - 1] == '.' || s[i - 1] == ',')) --i;
  return i;
}

struct indicator_hit {
  std::size_t position = 0;  // where the indicator literal starts
  std::size_t rank = 0;
  std::string raw_value;
};

std::string line_of_remainder(std::string_view s, std::size_t from) {
  std::size_t end = s.find('\n', from);
  if (end == std::string_view::npos) end = s.size();
  return std::string(s.substr(from, end - from));
}

// Answer text preceding a suffix indicator ("(B) is correct"): the tail of
// the current sentence, narrowed to its last token unless a \boxed group
// spans more.
std::string region_before(std::string_view s, std::size_t upto) {
  std::size_t start = 0;
  for (std::size_t i = upto; i-- > 0;) {
    char c = s[i];
    if (c == '\n') {
      start = i + 1;
      break;
    }
    if ((c == '.' || c == '!' || c == '?' || c == ':') && i + 1 < upto &&
        std::isspace(static_cast<unsigned char>(s[i + 1]))) {
      start = i + 1;
      break;
    }
  }
  std::string region = trim(std::string(s.substr(start, upto - start)));
  if (region.find("\\boxed{") != std::string::npos) return region;
  std::size_t last_ws = region.find_last_of(" \t");
  if (last_ws != std::string::npos) return region.substr(last_ws + 1);
  return region;
}

std::vector<indicator_hit> collect_indicator_hits(
    const std::string& response, const extraction_rule_set& rules) {
  std::vector<indicator_hit> hits;
  for (std::size_t rank = 0; rank < rules.indicators.size(); ++rank) {
    const answer_indicator& ind = rules.indicators[rank];
    if (!ind.before.empty()) {
      std::size_t pos = rfind_ci(response, ind.before);
      if (pos == std::string::npos) continue;
      std::size_t slot_start = pos + ind.before.size();
      std::string raw;
      if (ind.after.empty()) {
        raw = line_of_remainder(response, slot_start);
      } else {
        std::string line = line_of_remainder(response, slot_start);
        std::size_t close = rfind_ci(line, ind.after);
        if (close == std::string::npos) continue;
        raw = line.substr(0, close);
      }
      hits.push_back({pos, rank, trim(raw)});
    } else if (!ind.after.empty()) {
      std::size_t pos = rfind_ci(response, ind.after);
      if (pos == std::string::npos) continue;
      hits.push_back({pos, rank, trim(region_before(response, pos))});
    }
  }
  std::sort(hits.begin(), hits.end(),
            [](const indicator_hit& a, const indicator_hit& b) {
              if (a.position != b.position) return a.position > b.position;
              return a.rank < b.rank;
            });
  return hits;
}

std::string normalize_token(const std::string& value) {
  std::string s = trim(value);
  // peel wrapping punctuation: "(c)", "[b].", "c)."
  bool changed = true;
  while (changed && !s.empty()) {
    changed = false;
    char f = s.front();
    if (f == '(' || f == '[' || f == '{' || f == '*' || f == '`' ||
        f == '"' || f == '\'') {
      s.erase(s.begin());
      changed = true;
    }
    if (s.empty()) break;
    char b = s.back();
    if (b == ')' || b == ']' || b == '}' || b == '.' || b == ',' ||
        b == ':' || b == ';' || b == '*' || b == '`' || b == '"' ||
        b == '\'') {
      s.pop_back();
      changed = true;
    }
    s = trim(s);
  }
  std::string out;
  for (char c : s) out.push_back(static_cast<char>(std::toupper(
      static_cast<unsigned char>(c))));
  return out;
}

std::optional<double> try_parse_fraction(const std::string& s) {
  // plain a/b
  std::size_t slash = s.find('/');
  if (slash != std::string::npos && slash > 0 && slash + 1 < s.size()) {
    char* end1 = nullptr;
    char* end2 = nullptr;
    std::string num = s.substr(0, slash);
    std::string den = s.substr(slash + 1);
    double a = std::strtod(num.c_str(), &end1);
    double b = std::strtod(den.c_str(), &end2);
    if (end1 == num.c_str() + num.size() && end2 == den.c_str() + den.size() &&
        b != 0.0) {
      return a / b;
    }
  }
  // \frac{a}{b}
  if (s.rfind("\\frac{", 0) == 0) {
    std::size_t end_a = balanced_end(s, 5);
    if (end_a != std::string::npos && end_a < s.size() && s[end_a] == '{') {
      std::size_t end_b = balanced_end(s, end_a);
      if (end_b == s.size()) {
        std::string a = s.substr(6, end_a - 7);
        std::string b = s.substr(end_a + 1, end_b - end_a - 2);
        auto pa = parse_numeric(a);
        auto pb = parse_numeric(b);
        if (pa && pb && *pb != 0.0) return *pa / *pb;
      }
    }
  }
  return std::nullopt;
}

std::string canonical_decimal(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

}  // namespace

std::optional<double> parse_numeric(const std::string& value) {
  std::string s = trim(value);
  if (s.empty()) return std::nullopt;
  if (auto frac = try_parse_fraction(s)) return frac;
  // caret power: 10^-4, 2^10
  if (std::size_t caret = s.find('^');
      caret != std::string::npos && caret > 0 && caret + 1 < s.size() &&
      s.find('^', caret + 1) == std::string::npos) {
    auto base = parse_numeric(s.substr(0, caret));
    auto exp = parse_numeric(s.substr(caret + 1));
    if (base && exp) {
      double v = std::pow(*base, *exp);
      if (!std::isnan(v) && !std::isinf(v)) return v;
    }
  }
  // tolerate thousands separators ("1,261.5")
  std::string plain;
  plain.reserve(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == ',' && i > 0 && i + 1 < s.size() &&
        std::isdigit(static_cast<unsigned char>(s[i - 1])) &&
        std::isdigit(static_cast<unsigned char>(s[i + 1]))) {
      continue;
    }
    plain.push_back(s[i]);
  }
  if (!plain.empty() && plain.back() == '.') plain.pop_back();
  if (plain.empty()) return std::nullopt;
  char* end = nullptr;
  double v = std::strtod(plain.c_str(), &end);
  if (end != plain.c_str() + plain.size()) return std::nullopt;
  if (std::isnan(v) || std::isinf(v)) return std::nullopt;
  return v;
}

std::string normalize(const std::string& value, question_kind kind) {
  if (kind == question_kind::multi_choice || kind == question_kind::true_false) {
    return normalize_token(value);
  }
  // computational / open
  std::string s = map_superscripts(value);
  s = replace_all(std::move(s), "$", "");
  s = replace_all(std::move(s), "\\left", "");
  s = replace_all(std::move(s), "\\right", "");
  s = replace_all(std::move(s), "\\,", "");
  s = replace_all(std::move(s), "\\;", "");
  s = replace_all(std::move(s), "\\cdot", "·");
  s = flatten_text_commands(std::move(s), extraction_rule_set::defaults());
  std::string no_space;
  no_space.reserve(s.size());
  for (char c : s) {
    if (!std::isspace(static_cast<unsigned char>(c))) no_space.push_back(c);
  }
  no_space = strip_trailing_punct(std::move(no_space));
  if (auto num = parse_numeric(no_space)) return canonical_decimal(*num);
  return no_space;
}

answer_indicator answer_indicator::from_template(const std::string& tmpl) {
  std::size_t slot = tmpl.find(kSlot);
  if (slot == std::string::npos) {
    throw error("indicator template lacks <ANSWER> slot: " + tmpl);
  }
  answer_indicator ind;
  ind.before = tmpl.substr(0, slot);
  ind.after = tmpl.substr(slot + std::strlen(kSlot));
  // the slot's own whitespace stays flexible so "Answer:** (C)" still hits
  while (!ind.before.empty() && ind.before.back() == ' ') {
    ind.before.pop_back();
  }
  if (ind.before.empty() && ind.after.empty()) {
    throw error("indicator template is just the slot: " + tmpl);
  }
  return ind;
}

std::string answer_indicator::to_template() const {
  return before + kSlot + after;
}

const extraction_rule_set& extraction_rule_set::defaults() {
  static const extraction_rule_set rules = [] {
    extraction_rule_set r;
    for (const char* tmpl : {
             "The final answer to this question is <ANSWER>",
             "The correct answer is <ANSWER>",
             "The best option is <ANSWER>",
             "The answer is <ANSWER>",
             "Answer: <ANSWER>",
             "Answer should be: <ANSWER>",
             "Answer must be <ANSWER>",
             "Answer is probably <ANSWER>",
             "<ANSWER> is correct",
             "<ANSWER> seems correct",
             "<ANSWER> is the right answer",
             "Answer is <ANSWER>",
         }) {
      r.indicators.push_back(answer_indicator::from_template(tmpl));
    }
    r.format_unwrappers = {answer_format::boxed,  answer_format::mathrm,
                           answer_format::mathbf, answer_format::text,
                           answer_format::parens, answer_format::brackets};
    return r;
  }();
  return rules;
}

extraction_rule_set extraction_rule_set::load(
    const std::filesystem::path& config) {
  extraction_rule_set rules = defaults();
  std::ifstream in(config);
  if (!in) throw error("cannot open rule config " + config.string());
  std::stringstream buf;
  buf << in.rdbuf();
  ordered_json j = ordered_json::parse(buf.str());
  if (j.contains("indicator_phrases")) {
    for (const auto& tmpl : j.at("indicator_phrases")) {
      rules.indicators.push_back(
          answer_indicator::from_template(tmpl.get<std::string>()));
    }
  }
  return rules;
}

std::optional<std::string> match_option(
    const std::string& response,
    const std::vector<std::pair<std::string, std::string>>& options) {
  if (options.empty()) return std::nullopt;
  // final answer region: the last nonempty line
  std::string region;
  auto lines = split_lines(response);
  for (auto it = lines.rbegin(); it != lines.rend(); ++it) {
    if (!trim(*it).empty()) {
      region = *it;
      break;
    }
  }
  if (region.empty()) return std::nullopt;
  std::string norm_region = to_lower(collapse_whitespace(region));
  while (!norm_region.empty() &&
         (norm_region.back() == '.' || norm_region.back() == '!' ||
          norm_region.back() == '?')) {
    norm_region.pop_back();
  }

  std::vector<std::string> matched;
  for (const auto& [label, text] : options) {
    std::string norm_text = to_lower(collapse_whitespace(text));
    while (!norm_text.empty() &&
           (norm_text.back() == '.' || norm_text.back() == '!' ||
            norm_text.back() == '?')) {
      norm_text.pop_back();
    }
    if (norm_text.empty()) continue;
    if (norm_region.find(norm_text) != std::string::npos) {
      matched.push_back(label);
    }
  }
  if (matched.size() == 1) return matched.front();
  return std::nullopt;
}

namespace {

std::optional<extracted> finish_choice(const std::string& value,
                                       const std::string& response,
                                       const extract_options& opt,
                                       extraction_route via) {
  if (opt.options != nullptr && !opt.options->empty()) {
    std::string token = normalize_token(value);
    for (const auto& [label, _] : *opt.options) {
      if (normalize_token(label) == token) {
        return extracted{value, std::nullopt, via};
      }
    }
    if (auto label = match_option(response, *opt.options)) {
      return extracted{*label, std::nullopt, extraction_route::option_content};
    }
    // fall through: keep the non-label value; grading will judge it
  }
  if (value.empty()) return std::nullopt;
  return extracted{value, std::nullopt, via};
}

extracted split_unit_if_asked(std::string value, const extract_options& opt,
                              extraction_route via) {
  extracted out;
  out.via = via;
  if (opt.split_unit && opt.kind == question_kind::computational) {
    std::size_t len = numeric_prefix_len(value);
    if (len > 0 && len < value.size()) {
      std::string unit = trim(value.substr(len));
      // a unit starts with a letter or latex command, not an operator
      if (!unit.empty() &&
          (std::isalpha(static_cast<unsigned char>(unit.front())) ||
           unit.front() == '\\' ||
           static_cast<unsigned char>(unit.front()) >= 0x80)) {
        out.value = trim(value.substr(0, len));
        out.unit = unit;
        return out;
      }
    }
  }
  out.value = std::move(value);
  return out;
}

}  // namespace

std::optional<extracted> extract_answer(const std::string& response,
                                        const extract_options& opt) {
  const extraction_rule_set& rules =
      opt.rules ? *opt.rules : extraction_rule_set::defaults();
  if (trim(response).empty()) return std::nullopt;

  auto finish = [&](std::string raw,
                    extraction_route via) -> std::optional<extracted> {
    std::string value = unwrap_formats(std::move(raw), rules);
    if (value.empty()) return std::nullopt;
    if (opt.kind == question_kind::multi_choice) {
      return finish_choice(value, response, opt, via);
    }
    extracted out = split_unit_if_asked(std::move(value), opt, via);
    if (out.value.empty()) return std::nullopt;
    return out;
  };

  // stage 1: indicator phrases, last occurrence first
  for (const indicator_hit& hit : collect_indicator_hits(response, rules)) {
    if (auto out = finish(hit.raw_value, extraction_route::indicator)) {
      return out;
    }
  }

  // stage 2 fallback: a bare trailing \boxed{...}
  if (has_unwrapper(rules, answer_format::boxed)) {
    if (auto group = find_last_group(response, "\\boxed{")) {
      std::string raw =
          response.substr(group->first, group->second - group->first);
      if (auto out = finish(raw, extraction_route::format_only)) return out;
    }
  }

  // last resort for multiple choice: option content match
  if (opt.kind == question_kind::multi_choice && opt.options != nullptr) {
    if (auto label = match_option(response, *opt.options)) {
      return extracted{*label, std::nullopt, extraction_route::option_content};
    }
  }
  return std::nullopt;
}

bool grade(const std::optional<extracted>& pred, const benchmark_item& gold,
           const grade_options& opt) {
  if (!pred.has_value() || pred->value.empty()) return false;

  std::string canon_pred = normalize(pred->value, gold.kind);
  std::string canon_gold = normalize(gold.gold, gold.kind);

  bool value_ok = canon_pred == canon_gold;
  if (!value_ok && gold.kind != question_kind::multi_choice &&
      gold.kind != question_kind::true_false) {
    auto a = parse_numeric(canon_pred);
    auto b = parse_numeric(canon_gold);
    if (a && b) {
      double scale = std::max(std::abs(*a), std::abs(*b));
      value_ok = scale == 0.0 ? *a == *b
                              : std::abs(*a - *b) <= opt.rel_tol * scale;
    }
  }
  if (!value_ok) return false;

  if (opt.require_unit) {
    std::string pred_unit =
        pred->unit ? normalize(*pred->unit, question_kind::computational) : "";
    std::string gold_unit =
        gold.unit ? normalize(*gold.unit, question_kind::computational) : "";
    return pred_unit == gold_unit;
  }
  return true;
}

}  // namespace sciqa
