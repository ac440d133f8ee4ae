#pragma once

// Synthetic corpora shared by the dedup property tests and the acceptance
// suite: random questions plus planted near-duplicates.

#include <cstdint>
#include <cstdio>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "sciqa/records.hpp"

namespace sciqa::testing {

inline std::string random_question(std::mt19937_64& rng, int words) {
  static const std::vector<std::string> vocab = {
      "electron", "enzyme",   "vector",  "matrix",   "entropy", "velocity",
      "isotope",  "gradient", "lattice", "neuron",   "orbital", "protein",
      "integral", "momentum", "crystal", "catalyst", "tensor",  "photon",
      "genome",   "acid",     "field",   "wave",     "charge",  "mass"};
  std::uniform_int_distribution<std::size_t> pick(0, vocab.size() - 1);
  std::string q = "what happens to the";
  for (int i = 0; i < words; ++i) q += " " + vocab[pick(rng)];
  return q + " under pressure?";
}

// Light edit that keeps most shingles intact: tweak one word.
inline std::string perturb_question(std::mt19937_64& rng, std::string q) {
  std::vector<std::string> words;
  std::string w;
  for (char c : q + " ") {
    if (c == ' ') {
      if (!w.empty()) words.push_back(w);
      w.clear();
    } else {
      w.push_back(c);
    }
  }
  if (words.size() > 4) {
    std::uniform_int_distribution<std::size_t> pick(2, words.size() - 2);
    words[pick(rng)] = "modified";
  }
  std::string out;
  for (std::size_t i = 0; i < words.size(); ++i) {
    if (i) out += " ";
    out += words[i];
  }
  return out;
}

struct synthetic_corpus {
  std::vector<qa_pair> pairs;
  std::vector<std::pair<std::string, std::string>> id_questions;
};

inline synthetic_corpus make_dedup_corpus(std::uint64_t seed,
                                          std::size_t max_size) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> size_dist(20, max_size);
  std::uniform_int_distribution<int> words_dist(8, 18);
  std::uniform_int_distribution<int> dup_dist(0, 3);

  synthetic_corpus corpus;
  const std::size_t target = size_dist(rng);
  std::size_t serial = 0;
  while (corpus.pairs.size() < target) {
    std::string base = random_question(rng, words_dist(rng));
    int copies = dup_dist(rng);
    std::vector<std::string> variants = {base};
    for (int c = 0; c < copies && corpus.pairs.size() + variants.size() < target;
         ++c) {
      // mix exact copies and light edits so similarities straddle 0.6
      variants.push_back(c % 2 == 0 ? base : perturb_question(rng, base));
    }
    for (const auto& q : variants) {
      qa_pair p;
      char id[16];
      std::snprintf(id, sizeof(id), "q%05zu", serial++);
      p.pair_id = id;
      p.subj = subject::physics;
      p.standard = qa_standard::low;
      p.question = q;
      p.answer = "because";
      corpus.pairs.push_back(p);
      corpus.id_questions.emplace_back(p.pair_id, q);
    }
  }
  return corpus;
}

}  // namespace sciqa::testing
