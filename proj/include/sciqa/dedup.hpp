#pragma once

#include <cstdint>
#include <set>
#include <string>
#include <vector>

#include "sciqa/records.hpp"

namespace sciqa {

struct dedup_config {
  double threshold = 0.6;
  int num_perms = 256;
  int shingle_words = 5;
  // Exact-verify candidates so the result matches all-pairs Jaccard
  // clustering regardless of banding, seed or permutation count.
  bool verify_exact = true;
  std::uint64_t seed = 0;
  int workers = 1;
};

// Lowercased, whitespace-tokenized word n-grams. Texts shorter than n words
// yield the single full-text shingle.
std::set<std::string> word_shingles(const std::string& question, int n);

// Exact set Jaccard; two empty sets count as identical.
double exact_jaccard(const std::set<std::string>& a,
                     const std::set<std::string>& b);

struct minhash_signature {
  std::vector<std::uint64_t> slots;
  int num_perms = 0;
  std::uint64_t seed = 0;
};

minhash_signature minhash_of(const std::set<std::string>& shingles,
                             int num_perms, std::uint64_t seed);

// Fraction of matching slots. Throws config_mismatch when the signatures
// were built under different num_perms or seed.
double estimate_jaccard(const minhash_signature& a, const minhash_signature& b);

// (bands, rows) with bands*rows = num_perms minimizing the combined
// false-positive/false-negative integral of 1-(1-s^r)^b around `threshold`.
std::pair<int, int> choose_banding(int num_perms, double threshold);

struct dedup_report {
  // Clusters with at least two members; singletons are implicitly kept.
  std::vector<std::vector<std::string>> clusters;
  std::vector<std::string> kept_ids;
  std::vector<std::string> removed_ids;

  ordered_json to_json() const;
};

// LSH proposes candidate pairs; under verify_exact a shingle inverted index
// supplements them so no pair at or above the threshold can be missed, and
// every candidate is confirmed against exact Jaccard. Duplicates cluster by
// union-find; the lexicographically smallest pair_id per cluster survives.
dedup_report deduplicate(const std::vector<qa_pair>& pairs,
                         const dedup_config& cfg);

}  // namespace sciqa
