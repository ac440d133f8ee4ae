#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "sciqa/gateway.hpp"
#include "sciqa/prompts.hpp"
#include "sciqa/records.hpp"

namespace sciqa {

// The fourteen subject x standard extraction templates, each carrying a
// single <DOCUMENT> placeholder.
class extraction_prompt_set {
 public:
  static extraction_prompt_set from_library(
      const prompt_library& lib = prompt_library::defaults());

  const std::string& prompt(subject s, qa_standard st) const;

 private:
  // indexed [subject][high=0 / low=1]
  std::map<subject, std::array<std::string, 2>> prompts_;
};

enum class extraction_outcome {
  pairs,         // one or more Question/Answer blocks
  no_qa,         // the explicit [NO QA] marker
  no_structure,  // neither marker nor any Question: line (warned)
};

struct parsed_extraction {
  extraction_outcome outcome = extraction_outcome::no_qa;
  std::vector<std::pair<std::string, std::optional<std::string>>> pairs;
};

// Grammar over a full model response: a lone [NO QA] line means no pairs;
// otherwise each line-anchored "Question:" block pairs with the following
// "Answer:" block when one exists. Total: never throws on response text.
parsed_extraction parse_extraction_output(const std::string& text);

struct extract_stats {
  int no_qa = 0;
  int no_structure = 0;
  int gateway_errors = 0;
};

// Both standards run by default; a single standard can be selected to save
// extraction cost.
enum class standard_choice { both, high_only, low_only };

standard_choice standard_choice_from_string(const std::string& s);

// Runs the chosen standards on the chunk and tags each resulting pair. A
// failure on one standard leaves the other's results intact. pair_ids
// derive from (chunk_id, standard, ordinal) so reruns are stable.
std::vector<qa_pair> extract_from_chunk(
    const chunk& ch, const extraction_prompt_set& prompts, gateway& gw,
    extract_stats* stats = nullptr,
    standard_choice standards = standard_choice::both);

}  // namespace sciqa
