#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "sciqa/gateway.hpp"
#include "sciqa/prompts.hpp"
#include "sciqa/records.hpp"

namespace sciqa {

struct score_record {
  std::string pair_id;
  std::vector<double> sample_scores;  // each in [0, 10]
  double avg = 0.0;                   // arithmetic mean of sample_scores

  static score_record make(std::string pair_id, std::vector<double> scores);
  ordered_json to_json() const;
  static score_record from_json(const ordered_json& j);
};

const score_record& validate(const score_record& r);

enum class select_strategy { difficulty, response_length, random };

select_strategy strategy_from_string(const std::string& s);
std::string to_string(select_strategy s);

struct select_config {
  select_strategy strategy = select_strategy::difficulty;
  int sample_count = 16;
  double easy_cutoff = 9.0;   // keep avg <= easy_cutoff
  double noise_cutoff = 1.0;  // keep avg >= noise_cutoff
  std::optional<std::size_t> n;
  std::uint64_t seed = 0;
  double sample_temperature = 1.0;
  double sample_top_p = 0.95;
  int workers = 1;

  void validate() const;
};

// Strategy-specific inputs: difficulty wants a score per pair,
// response-length wants annotated response token counts.
struct selection_aux {
  std::map<std::string, score_record> scores;
  std::map<std::string, std::int64_t> response_tokens;
};

// Text after a "Reference Answer:" header, else the whole trimmed response.
// nullopt when the result is empty (pair excluded from scoring).
std::optional<std::string> parse_reference_answer(const std::string& response);

std::optional<std::string> annotate_reference(const qa_pair& pair, gateway& gw,
                                              const prompt_library& prompts =
                                                  prompt_library::defaults());

// LAST "Score:" line of a judge transcript; decimals accepted, out-of-range
// rejected. nullopt when no usable line exists.
std::optional<double> parse_score_line(const std::string& transcript);

// One judged score in [0, 10]; unparseable or out-of-range transcripts are
// retried once, then nullopt (the sample is excluded from the mean).
std::optional<double> score_response(const std::string& question,
                                     const std::string& reference,
                                     const std::string& student_answer,
                                     gateway& gw,
                                     const prompt_library& prompts =
                                         prompt_library::defaults());

// Samples cfg.sample_count answers (distinct seed hints), scores each
// against the reference, returns the mean. nullopt when fewer than half the
// samples could be scored.
std::optional<score_record> difficulty_of(const qa_pair& pair,
                                          const std::string& reference,
                                          const select_config& cfg,
                                          gateway& gw,
                                          const prompt_library& prompts =
                                              prompt_library::defaults());

// difficulty: keep noise_cutoff <= avg <= easy_cutoff (n becomes the count);
// response_length: n longest annotated responses, ties by smaller pair_id;
// random: uniform without replacement under the seed, n clamped with a
// warning. Selected pairs gain the `selected` stage flag.
std::pair<std::vector<qa_pair>, stage_manifest> select_subset(
    const std::vector<qa_pair>& pairs, const selection_aux& aux,
    const select_config& cfg);

}  // namespace sciqa
