#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "sciqa/records.hpp"

namespace sciqa {

// An answer indicator is a literal template with an <ANSWER> slot, e.g.
// "The correct answer is <ANSWER>" or "<ANSWER> is correct". Matching is
// case-insensitive and prefers the occurrence closest to the end of the
// response, where final answers live.
struct answer_indicator {
  std::string before;  // literal text preceding the slot ("" for suffix forms)
  std::string after;   // literal text following the slot ("" for prefix forms)

  static answer_indicator from_template(const std::string& tmpl);
  std::string to_template() const;
};

enum class answer_format { boxed, mathrm, mathbf, text, parens, brackets };

struct extraction_rule_set {
  std::vector<answer_indicator> indicators;
  std::vector<answer_format> format_unwrappers;

  // The twelve stock indicator phrases plus all six format unwrappers.
  static const extraction_rule_set& defaults();
  // Defaults plus extra indicator templates from a config file:
  // {"indicator_phrases": ["...<ANSWER>...", ...]}
  static extraction_rule_set load(const std::filesystem::path& config);
};

enum class extraction_route { indicator, format_only, option_content };

struct extracted {
  std::string value;
  std::optional<std::string> unit;
  extraction_route via = extraction_route::indicator;
};

struct extract_options {
  question_kind kind = question_kind::open;
  // Option labels/texts for multi-choice content matching; may be null.
  const std::vector<std::pair<std::string, std::string>>* options = nullptr;
  // Split a trailing unit off computational values (EM-with-unit benches).
  bool split_unit = false;
  const extraction_rule_set* rules = nullptr;  // null = defaults
};

// Two stages: indicator phrases first (last occurrence wins), then format
// unwrapping with balanced-brace scanning. A bare trailing \boxed{} is
// accepted even without an indicator. Returns nullopt instead of throwing,
// on any input.
std::optional<extracted> extract_answer(const std::string& response,
                                        const extract_options& opt);

// Content fallback for multiple choice: returns the unique option label
// whose text occurs in the final answer region, nullopt on miss or tie.
std::optional<std::string> match_option(
    const std::string& response,
    const std::vector<std::pair<std::string, std::string>>& options);

// Canonical comparison form. Choice/true-false answers become an uppercase
// token; computational answers lose $, \left/\right and whitespace, gain
// caret superscripts (cm^2) and a canonical decimal rendering for numbers
// and simple fractions.
std::string normalize(const std::string& value, question_kind kind);

// Numeric reading of a canonicalized value ("1/2", "0.5", "\frac{1}{2}",
// "3e-2"), nullopt for non-numeric strings.
std::optional<double> parse_numeric(const std::string& value);

struct grade_options {
  bool require_unit = false;
  double rel_tol = 1e-4;
};

// Exact match after normalization; numeric values compare within a relative
// tolerance that is symmetric in its arguments. With require_unit the
// canonical units must match too.
bool grade(const std::optional<extracted>& pred, const benchmark_item& gold,
           const grade_options& opt = {});

}  // namespace sciqa
