#pragma once

#include <optional>
#include <string>
#include <variant>

#include "sciqa/corpus.hpp"
#include "sciqa/gateway.hpp"
#include "sciqa/prompts.hpp"
#include "sciqa/records.hpp"

namespace sciqa {

struct refine_config {
  std::int64_t max_solution_tokens = 4096;
  double refine_temperature = 0.0;
  double chars_per_token = 4.0;

  void validate() const;
};

// Last "Refined Question:" / "Refined Answer:" sections of a refinement
// transcript; reasoning text before them is ignored. nullopt when either
// section is missing or empty.
std::optional<std::pair<std::string, std::string>> parse_refinement(
    const std::string& transcript);

enum class verdict_line { yes, no, unparseable };

// Case-insensitive read of the LAST "Decision:" line.
verdict_line parse_decision(const std::string& transcript);

// Rewrites the pair against its source text. On a missing section the call
// is retried once, then nullopt (caller drops the pair and counts it).
std::optional<qa_pair> refine_pair(const qa_pair& pair,
                                   const std::string& doc_text, gateway& gw,
                                   const refine_config& cfg = {},
                                   const prompt_library& prompts =
                                       prompt_library::defaults());

// True when the answer LACKS a reasoning process (judge says NO).
// Unparseable verdicts default to false (keep as-is) with a warning.
bool identify_missing_cot(const qa_pair& pair, gateway& gw,
                          bool* warned = nullptr,
                          const prompt_library& prompts =
                              prompt_library::defaults());

// True = keep. Unparseable verdicts drop the pair (conservative).
bool filter_defective(const qa_pair& pair, gateway& gw, bool* warned = nullptr,
                      const prompt_library& prompts =
                          prompt_library::defaults());

enum class rejection { too_long, empty };

// Step-by-step solution for a question, gated by the token budget:
// solutions estimated over max_solution_tokens are rejected.
std::variant<std::string, rejection> annotate_solution(
    const std::string& question, const refine_config& cfg, gateway& gw,
    const prompt_library& prompts = prompt_library::defaults());

}  // namespace sciqa
