#include "sciqa/select.hpp"

#include <algorithm>
#include <cstdlib>
#include <numeric>
#include <random>

#include "sciqa/corpus.hpp"
#include "sciqa/error.hpp"
#include "sciqa/util.hpp"

namespace sciqa {

score_record score_record::make(std::string pair_id,
                                std::vector<double> scores) {
  score_record r;
  r.pair_id = std::move(pair_id);
  r.sample_scores = std::move(scores);
  double sum = 0.0;
  for (double s : r.sample_scores) sum += s;
  r.avg = r.sample_scores.empty()
              ? 0.0
              : sum / static_cast<double>(r.sample_scores.size());
  return r;
}

ordered_json score_record::to_json() const {
  ordered_json j;
  j["pair_id"] = pair_id;
  j["sample_scores"] = sample_scores;
  j["avg"] = avg;
  return j;
}

score_record score_record::from_json(const ordered_json& j) {
  score_record r;
  r.pair_id = j.at("pair_id").get<std::string>();
  r.sample_scores = j.at("sample_scores").get<std::vector<double>>();
  r.avg = j.at("avg").get<double>();
  return r;
}

const score_record& validate(const score_record& r) {
  if (r.pair_id.empty()) {
    throw invariant_violation("pair_id", "must be nonempty");
  }
  double sum = 0.0;
  for (double s : r.sample_scores) {
    if (s < 0.0 || s > 10.0) {
      throw invariant_violation("sample_scores", "scores must be in [0, 10]");
    }
    sum += s;
  }
  double mean = r.sample_scores.empty()
                    ? 0.0
                    : sum / static_cast<double>(r.sample_scores.size());
  if (std::abs(mean - r.avg) > 1e-9) {
    throw invariant_violation("avg", "must equal the mean of sample_scores");
  }
  return r;
}

select_strategy strategy_from_string(const std::string& s) {
  if (s == "difficulty") return select_strategy::difficulty;
  if (s == "response_length" || s == "length") {
    return select_strategy::response_length;
  }
  if (s == "random") return select_strategy::random;
  throw usage_error("unknown selection strategy '" + s + "'");
}

std::string to_string(select_strategy s) {
  switch (s) {
    case select_strategy::difficulty: return "difficulty";
    case select_strategy::response_length: return "response_length";
    case select_strategy::random: return "random";
  }
  return "difficulty";
}

void select_config::validate() const {
  if (sample_count < 1) {
    throw invariant_violation("sample_count", "must be positive");
  }
  if (!(noise_cutoff < easy_cutoff)) {
    throw invariant_violation("noise_cutoff", "must be below easy_cutoff");
  }
}

std::optional<std::string> parse_reference_answer(const std::string& response) {
  auto lines = split_lines(response);
  for (std::ptrdiff_t i = static_cast<std::ptrdiff_t>(lines.size()) - 1;
       i >= 0; --i) {
    std::string line = trim(lines[i]);
    while (!line.empty() && (line.front() == '#' || line.front() == '*')) {
      line.erase(line.begin());
    }
    line = trim(line);
    if (!starts_with_ci(line, "Reference Answer")) continue;
    std::size_t colon = line.find(':');
    std::string out =
        colon == std::string::npos ? "" : trim(line.substr(colon + 1));
    for (std::size_t j = i + 1; j < lines.size(); ++j) {
      out += (out.empty() ? "" : "\n") + lines[j];
    }
    out = trim(out);
    if (out.empty()) return std::nullopt;
    return out;
  }
  std::string whole = trim(response);
  if (whole.empty()) return std::nullopt;
  return whole;
}

std::optional<std::string> annotate_reference(const qa_pair& pair, gateway& gw,
                                              const prompt_library& prompts) {
  if (!pair.answer || pair.answer->empty()) {
    throw invariant_violation("answer", "must be present for reference");
  }
  std::string prompt =
      replace_all(prompts.reference_annotation(), "<PROBLEM>", pair.question);
  prompt = replace_all(std::move(prompt), "<ANSWER>", *pair.answer);
  std::string response = gw.complete_chat(
      chat_request::single_user(gw.model_for("annotator"), prompt));
  return parse_reference_answer(response);
}

std::optional<double> parse_score_line(const std::string& transcript) {
  auto lines = split_lines(transcript);
  for (std::ptrdiff_t i = static_cast<std::ptrdiff_t>(lines.size()) - 1;
       i >= 0; --i) {
    std::string line = trim(lines[i]);
    while (!line.empty() && (line.front() == '*' || line.front() == '#')) {
      line.erase(line.begin());
    }
    line = trim(line);
    if (!starts_with_ci(line, "Score")) continue;
    std::size_t colon = line.find(':');
    if (colon == std::string::npos) continue;
    std::string value = trim(line.substr(colon + 1));
    value = replace_all(std::move(value), "*", "");
    value = trim(value);
    if (value.empty()) continue;
    char* end = nullptr;
    double score = std::strtod(value.c_str(), &end);
    if (end == value.c_str()) continue;
    // "7/10" style still reads as 7
    return score;
  }
  return std::nullopt;
}

std::optional<double> score_response(const std::string& question,
                                     const std::string& reference,
                                     const std::string& student_answer,
                                     gateway& gw,
                                     const prompt_library& prompts) {
  if (question.empty() || reference.empty() || student_answer.empty()) {
    throw invariant_violation("question", "scoring inputs must be nonempty");
  }
  std::string prompt =
      replace_all(prompts.student_scoring(), "<PROBLEM>", question);
  prompt = replace_all(std::move(prompt), "<REFERENCE_ANSWER>", reference);
  prompt = replace_all(std::move(prompt), "<STUDENT_ANSWER>", student_answer);

  for (int attempt = 0; attempt < 2; ++attempt) {
    chat_request req =
        chat_request::single_user(gw.model_for("scorer"), prompt);
    if (attempt > 0) req.seed_hint = 1000 + attempt;
    std::string transcript = gw.complete_chat(req);
    auto score = parse_score_line(transcript);
    if (score && *score >= 0.0 && *score <= 10.0) return score;
  }
  return std::nullopt;  // sample excluded, mean shrinks accordingly
}

std::optional<score_record> difficulty_of(const qa_pair& pair,
                                          const std::string& reference,
                                          const select_config& cfg,
                                          gateway& gw,
                                          const prompt_library& prompts) {
  cfg.validate();
  if (reference.empty()) {
    throw invariant_violation("reference", "must be nonempty");
  }
  std::vector<double> scores;
  for (int sample = 0; sample < cfg.sample_count; ++sample) {
    chat_request req =
        chat_request::single_user(gw.model_for("sampler"), pair.question);
    req.temperature = cfg.sample_temperature;
    req.top_p = cfg.sample_top_p;
    req.seed_hint = sample;  // distinct cache key per sample index
    std::string student;
    try {
      student = gw.complete_chat(req);
    } catch (const cache_miss&) {
      throw;
    } catch (const error&) {
      continue;
    }
    if (trim(student).empty()) continue;
    if (auto score = score_response(pair.question, reference, student, gw,
                                    prompts)) {
      scores.push_back(*score);
    }
  }
  if (static_cast<int>(scores.size()) < (cfg.sample_count + 1) / 2) {
    return std::nullopt;  // unscoreable
  }
  return score_record::make(pair.pair_id, std::move(scores));
}

std::pair<std::vector<qa_pair>, stage_manifest> select_subset(
    const std::vector<qa_pair>& pairs, const selection_aux& aux,
    const select_config& cfg) {
  cfg.validate();
  std::vector<const qa_pair*> chosen;

  switch (cfg.strategy) {
    case select_strategy::difficulty: {
      for (const auto& p : pairs) {
        auto it = aux.scores.find(p.pair_id);
        if (it == aux.scores.end()) {
          throw missing_aux("no score record for pair " + p.pair_id);
        }
        double avg = it->second.avg;
        // boundary scores stay: the cutoffs remove strictly outside
        if (avg >= cfg.noise_cutoff && avg <= cfg.easy_cutoff) {
          chosen.push_back(&p);
        }
      }
      break;
    }
    case select_strategy::response_length: {
      if (!cfg.n) {
        throw missing_aux("response_length selection needs n");
      }
      std::vector<std::pair<std::int64_t, const qa_pair*>> ranked;
      for (const auto& p : pairs) {
        auto it = aux.response_tokens.find(p.pair_id);
        if (it == aux.response_tokens.end()) {
          throw missing_aux("no response length for pair " + p.pair_id);
        }
        ranked.emplace_back(it->second, &p);
      }
      std::sort(ranked.begin(), ranked.end(),
                [](const auto& a, const auto& b) {
                  if (a.first != b.first) return a.first > b.first;
                  return a.second->pair_id < b.second->pair_id;
                });
      std::size_t take = std::min(*cfg.n, ranked.size());
      for (std::size_t i = 0; i < take; ++i) chosen.push_back(ranked[i].second);
      break;
    }
    case select_strategy::random: {
      if (!cfg.n) {
        throw missing_aux("random selection needs n");
      }
      std::size_t take = std::min(*cfg.n, pairs.size());
      std::vector<std::size_t> order(pairs.size());
      std::iota(order.begin(), order.end(), 0);
      std::mt19937_64 rng(cfg.seed);
      std::shuffle(order.begin(), order.end(), rng);
      order.resize(take);
      std::sort(order.begin(), order.end());  // keep input order in output
      for (std::size_t i : order) chosen.push_back(&pairs[i]);
      break;
    }
  }

  std::vector<qa_pair> out;
  stage_manifest manifest;
  manifest.stage = pipeline_stage::select;
  manifest.params["strategy"] = to_string(cfg.strategy);
  manifest.params["sample_count"] = std::to_string(cfg.sample_count);
  manifest.params["easy_cutoff"] = format_score(cfg.easy_cutoff);
  manifest.params["noise_cutoff"] = format_score(cfg.noise_cutoff);
  manifest.params["seed"] = std::to_string(cfg.seed);
  if (cfg.n) manifest.params["n"] = std::to_string(*cfg.n);

  for (const auto& p : pairs) manifest.bump(p.subj, 1, 0);
  for (const qa_pair* p : chosen) {
    qa_pair selected = *p;
    selected.stage_flags.insert(stage_flag::selected);
    manifest.bump(selected.subj, 0, 1);
    out.push_back(std::move(selected));
  }
  manifest.content_hash = content_hash(out);
  return {std::move(out), manifest};
}

}  // namespace sciqa
