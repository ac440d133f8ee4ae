#include "sciqa/refine.hpp"

#include "sciqa/error.hpp"
#include "sciqa/util.hpp"

namespace sciqa {

void refine_config::validate() const {
  if (max_solution_tokens < 256) {
    throw invariant_violation("max_solution_tokens", "must be >= 256");
  }
  if (refine_temperature < 0) {
    throw invariant_violation("refine_temperature", "must be >= 0");
  }
}

std::optional<std::pair<std::string, std::string>> parse_refinement(
    const std::string& transcript) {
  auto lines = split_lines(transcript);
  // find the LAST answer header, then the last question header before it
  std::ptrdiff_t answer_at = -1;
  for (std::ptrdiff_t i = static_cast<std::ptrdiff_t>(lines.size()) - 1;
       i >= 0; --i) {
    if (starts_with_ci(trim(lines[i]), "Refined Answer:")) {
      answer_at = i;
      break;
    }
  }
  if (answer_at < 0) return std::nullopt;
  std::ptrdiff_t question_at = -1;
  for (std::ptrdiff_t i = answer_at - 1; i >= 0; --i) {
    if (starts_with_ci(trim(lines[i]), "Refined Question:")) {
      question_at = i;
      break;
    }
  }
  if (question_at < 0) return std::nullopt;

  auto tail_after = [](const std::string& line, std::size_t header_len) {
    return trim(trim(line).substr(header_len));
  };
  std::string question = tail_after(lines[question_at],
                                    std::string("Refined Question:").size());
  for (std::ptrdiff_t i = question_at + 1; i < answer_at; ++i) {
    question += "\n" + lines[i];
  }
  std::string answer =
      tail_after(lines[answer_at], std::string("Refined Answer:").size());
  for (std::size_t i = answer_at + 1; i < lines.size(); ++i) {
    answer += "\n" + lines[i];
  }
  question = trim(question);
  answer = trim(answer);
  if (question.empty() || answer.empty()) return std::nullopt;
  return std::make_pair(std::move(question), std::move(answer));
}

verdict_line parse_decision(const std::string& transcript) {
  auto lines = split_lines(transcript);
  for (std::ptrdiff_t i = static_cast<std::ptrdiff_t>(lines.size()) - 1;
       i >= 0; --i) {
    std::string line = trim(lines[i]);
    while (!line.empty() && (line.front() == '*' || line.front() == '#')) {
      line.erase(line.begin());
    }
    line = trim(line);
    if (!starts_with_ci(line, "Decision")) continue;
    std::size_t colon = line.find(':');
    std::string value =
        to_lower(colon == std::string::npos ? "" : trim(line.substr(colon + 1)));
    // strip brackets the prompt's own format line uses
    value = replace_all(std::move(value), "[", "");
    value = replace_all(std::move(value), "]", "");
    value = replace_all(std::move(value), "*", "");
    value = trim(value);
    if (starts_with_ci(value, "yes")) return verdict_line::yes;
    if (starts_with_ci(value, "no")) return verdict_line::no;
  }
  // some models answer on the following line
  for (std::ptrdiff_t i = static_cast<std::ptrdiff_t>(lines.size()) - 1;
       i >= 0; --i) {
    std::string line = to_lower(trim(lines[i]));
    if (line == "yes" || line == "<yes>") return verdict_line::yes;
    if (line == "no" || line == "<no>") return verdict_line::no;
  }
  return verdict_line::unparseable;
}

namespace {

std::string fill_pair_prompt(const std::string& tmpl, const qa_pair& pair) {
  std::string filled = replace_all(tmpl, "<PROBLEM>", pair.question);
  return replace_all(std::move(filled), "<ANSWER>",
                     pair.answer.value_or(""));
}

}  // namespace

std::optional<qa_pair> refine_pair(const qa_pair& pair,
                                   const std::string& doc_text, gateway& gw,
                                   const refine_config& cfg,
                                   const prompt_library& prompts) {
  cfg.validate();
  std::string prompt =
      replace_all(prompts.qa_refinement(), "<DOCUMENT>", doc_text);
  prompt = fill_pair_prompt(prompt, pair);

  for (int attempt = 0; attempt < 2; ++attempt) {
    chat_request req =
        chat_request::single_user(gw.model_for("refiner"), prompt);
    req.temperature = cfg.refine_temperature;
    if (attempt > 0) req.seed_hint = attempt;
    std::string transcript = gw.complete_chat(req);
    if (auto refined = parse_refinement(transcript)) {
      qa_pair out = pair;
      out.question = refined->first;
      out.answer = refined->second;
      out.refined = true;
      return out;
    }
  }
  return std::nullopt;
}

bool identify_missing_cot(const qa_pair& pair, gateway& gw, bool* warned,
                          const prompt_library& prompts) {
  if (!pair.answer || pair.answer->empty()) {
    throw invariant_violation("answer", "must be present for CoT check");
  }
  std::string prompt = fill_pair_prompt(prompts.identify_missing_cot(), pair);
  std::string transcript =
      gw.complete_chat(chat_request::single_user(gw.model_for("judge"), prompt));
  switch (parse_decision(transcript)) {
    case verdict_line::yes: return false;  // reasoning present
    case verdict_line::no: return true;    // reasoning missing
    case verdict_line::unparseable:
      if (warned) *warned = true;
      return false;  // keep as-is, do not re-annotate
  }
  return false;
}

bool filter_defective(const qa_pair& pair, gateway& gw, bool* warned,
                      const prompt_library& prompts) {
  std::string prompt = fill_pair_prompt(prompts.filter_defective(), pair);
  std::string transcript =
      gw.complete_chat(chat_request::single_user(gw.model_for("judge"), prompt));
  switch (parse_decision(transcript)) {
    case verdict_line::yes: return true;  // keep
    case verdict_line::no: return false;  // drop
    case verdict_line::unparseable:
      if (warned) *warned = true;
      return false;  // drop when in doubt
  }
  return false;
}

std::variant<std::string, rejection> annotate_solution(
    const std::string& question, const refine_config& cfg, gateway& gw,
    const prompt_library& prompts) {
  cfg.validate();
  if (question.empty()) {
    throw invariant_violation("question", "must be nonempty");
  }
  std::string prompt =
      replace_all(prompts.solution_annotation(), "<PROBLEM>", question);
  chat_request req =
      chat_request::single_user(gw.model_for("annotator"), prompt);
  req.max_output_tokens =
      static_cast<int>(cfg.max_solution_tokens + cfg.max_solution_tokens / 4);
  std::string solution = trim(gw.complete_chat(req));
  if (solution.empty()) return rejection::empty;
  auto estimate = chars_per_token_estimator(cfg.chars_per_token);
  if (estimate(solution) > cfg.max_solution_tokens) return rejection::too_long;
  return solution;
}

}  // namespace sciqa
