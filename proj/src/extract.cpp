#include "sciqa/extract.hpp"

#include <array>

#include "sciqa/error.hpp"
#include "sciqa/util.hpp"

namespace sciqa {

extraction_prompt_set extraction_prompt_set::from_library(
    const prompt_library& lib) {
  extraction_prompt_set set;
  for (subject s : all_subjects()) {
    if (s == subject::unknown) continue;
    std::array<std::string, 2> pair;
    pair[0] = lib.extraction(s, qa_standard::high);
    pair[1] = lib.extraction(s, qa_standard::low);
    for (const auto& tmpl : pair) {
      if (count_occurrences(tmpl, "<DOCUMENT>") != 1) {
        throw invariant_violation(
            "prompt", "extraction template for " + to_string(s) +
                          " must contain <DOCUMENT> exactly once");
      }
    }
    set.prompts_[s] = std::move(pair);
  }
  return set;
}

const std::string& extraction_prompt_set::prompt(subject s,
                                                 qa_standard st) const {
  auto it = prompts_.find(s);
  if (it == prompts_.end()) {
    throw error("no extraction prompts for subject " + to_string(s));
  }
  return it->second[st == qa_standard::high ? 0 : 1];
}

namespace {

// Line-anchored keyword match, case-sensitive, tolerating markdown bold
// around the keyword ("**Question:** ..." and "Question: ..." both hit).
std::optional<std::string> keyword_line(const std::string& line,
                                        std::string_view keyword) {
  std::string buffer = trim(line);
  std::string_view v = buffer;
  auto eat = [&v](std::string_view token) {
    if (v.substr(0, token.size()) == token) {
      v.remove_prefix(token.size());
      return true;
    }
    return false;
  };
  eat("**");
  if (!eat(keyword)) return std::nullopt;
  eat("**");
  if (v.empty() || v.front() != ':') return std::nullopt;
  v.remove_prefix(1);
  eat("**");
  while (!v.empty() && (v.front() == ' ' || v.front() == '\t')) {
    v.remove_prefix(1);
  }
  return std::string(v);
}

bool is_no_qa_line(const std::string& line) {
  std::string s = trim(line);
  // tolerate emphasis or code ticks around the marker
  while (!s.empty() && (s.front() == '*' || s.front() == '`')) s.erase(0, 1);
  while (!s.empty() && (s.back() == '*' || s.back() == '`' || s.back() == '.'))
    s.pop_back();
  return trim(s) == "[NO QA]";
}

}  // namespace

parsed_extraction parse_extraction_output(const std::string& text) {
  parsed_extraction result;
  auto lines = split_lines(text);

  for (const auto& line : lines) {
    if (is_no_qa_line(line)) {
      result.outcome = extraction_outcome::no_qa;
      return result;
    }
  }

  // block parser: content accumulates into the open question or answer
  std::optional<std::string> question;
  std::optional<std::string> answer;
  enum class section { none, question, answer } open = section::none;

  auto flush = [&] {
    if (question.has_value()) {
      std::string q = trim(*question);
      std::optional<std::string> a;
      if (answer.has_value() && !trim(*answer).empty()) a = trim(*answer);
      if (!q.empty()) result.pairs.emplace_back(std::move(q), std::move(a));
    }
    question.reset();
    answer.reset();
  };

  for (const auto& line : lines) {
    if (auto q = keyword_line(line, "Question")) {
      flush();
      question = *q;
      open = section::question;
      continue;
    }
    if (auto a = keyword_line(line, "Answer")) {
      if (question.has_value()) {
        answer = *a;
        open = section::answer;
      }
      continue;
    }
    if (open == section::question && question.has_value()) {
      *question += "\n" + line;
    } else if (open == section::answer && answer.has_value()) {
      *answer += "\n" + line;
    }
  }
  flush();

  if (result.pairs.empty()) {
    result.outcome = extraction_outcome::no_structure;
  } else {
    result.outcome = extraction_outcome::pairs;
  }
  return result;
}

standard_choice standard_choice_from_string(const std::string& s) {
  if (s == "both") return standard_choice::both;
  if (s == "high") return standard_choice::high_only;
  if (s == "low") return standard_choice::low_only;
  throw usage_error("standard must be both, high or low; got '" + s + "'");
}

std::vector<qa_pair> extract_from_chunk(const chunk& ch,
                                        const extraction_prompt_set& prompts,
                                        gateway& gw, extract_stats* stats,
                                        standard_choice standards) {
  if (ch.subj == subject::unknown) {
    throw invariant_violation("subject", "chunk subject must be known");
  }
  std::vector<qa_pair> out;
  for (qa_standard st : {qa_standard::high, qa_standard::low}) {
    if (standards == standard_choice::high_only && st != qa_standard::high) {
      continue;
    }
    if (standards == standard_choice::low_only && st != qa_standard::low) {
      continue;
    }
    std::string prompt =
        replace_all(prompts.prompt(ch.subj, st), "<DOCUMENT>", ch.text);
    std::string response;
    try {
      response = gw.complete_chat(
          chat_request::single_user(gw.model_for("extractor"), prompt));
    } catch (const error&) {
      // one standard failing does not void the other
      if (stats) ++stats->gateway_errors;
      continue;
    }
    parsed_extraction parsed = parse_extraction_output(response);
    if (parsed.outcome == extraction_outcome::no_qa) {
      if (stats) ++stats->no_qa;
      continue;
    }
    if (parsed.outcome == extraction_outcome::no_structure) {
      if (stats) ++stats->no_structure;
      continue;
    }
    int ordinal = 0;
    for (auto& [q, a] : parsed.pairs) {
      qa_pair p;
      p.chunk_id = ch.chunk_id;
      p.subj = ch.subj;
      p.standard = st;
      p.question = q;
      p.answer = a;
      char suffix[24];
      std::snprintf(suffix, sizeof(suffix), ":%c%03d",
                    st == qa_standard::high ? 'h' : 'l', ordinal++);
      p.pair_id = ch.chunk_id + suffix;
      out.push_back(std::move(p));
    }
  }
  return out;
}

}  // namespace sciqa
