#pragma once

#include <optional>
#include <string>
#include <vector>

#include "sciqa/gateway.hpp"
#include "sciqa/prompts.hpp"
#include "sciqa/records.hpp"

namespace sciqa {

// Benchmark questions with their unit embedding vectors, row-aligned.
// Immutable once built; concurrent queries are safe.
struct contam_index {
  std::vector<benchmark_item> items;
  std::vector<std::vector<double>> vectors;
  std::string embedder_tag;
};

enum class unparseable_verdict_policy { remove, keep };

struct contam_config {
  int k = 5;
  unparseable_verdict_policy on_unparseable = unparseable_verdict_policy::remove;
  int workers = 1;

  void validate() const;
};

struct contam_removal {
  std::string pair_id;
  std::string matched_item_id;
  double similarity = 0.0;
  std::string judge_transcript_key;  // replay-cache key of the judge call
  bool policy_forced = false;        // removed by the unparseable policy
};

struct contam_report {
  std::vector<contam_removal> removed;
  std::int64_t kept_count = 0;
  std::int64_t judge_calls = 0;
  std::int64_t unparseable = 0;

  ordered_json to_json() const;
};

contam_index build_index(const std::vector<benchmark_item>& items,
                         gateway& gw);

// Exact brute-force cosine over the index, descending, ties by item_id,
// length min(k, |index|).
std::vector<std::pair<const benchmark_item*, double>> query_top_k(
    const contam_index& index, const std::vector<double>& query_vec, int k);

enum class verdict_yes_no { yes, no, unparseable };

struct judge_outcome {
  verdict_yes_no verdict = verdict_yes_no::unparseable;
  std::string transcript_key;
};

// Fills the paraphrase-judge prompt and reads the last Decision line.
// Retries an unparseable transcript once.
judge_outcome judge_paraphrase(const std::string& original,
                               const std::string& candidate, gateway& gw,
                               const prompt_library& prompts =
                                   prompt_library::defaults());

// For each pair: embed, take the top-k nearest benchmark items, judge them
// in similarity order, remove on the first YES. Per-pair errors are counted
// and the run continues.
std::pair<std::vector<qa_pair>, contam_report> decontaminate(
    const std::vector<qa_pair>& pairs, const contam_index& index,
    const contam_config& cfg, gateway& gw,
    const prompt_library& prompts = prompt_library::defaults());

}  // namespace sciqa
