#include "sciqa/dedup.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <unordered_map>

#include "sciqa/error.hpp"
#include "sciqa/util.hpp"

namespace sciqa {

std::set<std::string> word_shingles(const std::string& question, int n) {
  if (n < 1) throw error("shingle_words must be >= 1");
  std::vector<std::string> words = split_words(to_lower(question));
  std::set<std::string> shingles;
  if (words.empty()) return shingles;
  if (static_cast<int>(words.size()) < n) {
    std::string full = words[0];
    for (std::size_t i = 1; i < words.size(); ++i) full += " " + words[i];
    shingles.insert(std::move(full));
    return shingles;
  }
  for (std::size_t i = 0; i + n <= words.size(); ++i) {
    std::string gram = words[i];
    for (int k = 1; k < n; ++k) gram += " " + words[i + k];
    shingles.insert(std::move(gram));
  }
  return shingles;
}

double exact_jaccard(const std::set<std::string>& a,
                     const std::set<std::string>& b) {
  if (a.empty() && b.empty()) return 1.0;
  if (a.empty() || b.empty()) return 0.0;
  std::size_t inter = 0;
  auto ia = a.begin();
  auto ib = b.begin();
  while (ia != a.end() && ib != b.end()) {
    if (*ia == *ib) {
      ++inter;
      ++ia;
      ++ib;
    } else if (*ia < *ib) {
      ++ia;
    } else {
      ++ib;
    }
  }
  std::size_t uni = a.size() + b.size() - inter;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

minhash_signature minhash_of(const std::set<std::string>& shingles,
                             int num_perms, std::uint64_t seed) {
  minhash_signature sig;
  sig.num_perms = num_perms;
  sig.seed = seed;
  sig.slots.assign(num_perms, std::numeric_limits<std::uint64_t>::max());
  // one independent hash per permutation, derived from (seed, p)
  std::vector<std::uint64_t> keys(num_perms);
  for (int p = 0; p < num_perms; ++p) {
    keys[p] = splitmix64(seed +
                         0x9e3779b97f4a7c15ULL * static_cast<std::uint64_t>(p + 1));
  }
  for (const auto& shingle : shingles) {
    std::uint64_t base = fnv1a64(shingle);
    for (int p = 0; p < num_perms; ++p) {
      std::uint64_t h = splitmix64(base ^ keys[p]);
      if (h < sig.slots[p]) sig.slots[p] = h;
    }
  }
  return sig;
}

double estimate_jaccard(const minhash_signature& a,
                        const minhash_signature& b) {
  if (a.num_perms != b.num_perms || a.seed != b.seed) {
    throw config_mismatch("signatures built under different num_perms/seed");
  }
  if (a.num_perms == 0) return 1.0;
  int match = 0;
  for (int i = 0; i < a.num_perms; ++i) {
    if (a.slots[i] == b.slots[i]) ++match;
  }
  return static_cast<double>(match) / static_cast<double>(a.num_perms);
}

std::pair<int, int> choose_banding(int num_perms, double threshold) {
  // candidate-catch probability of (b, r) banding at similarity s
  auto catch_prob = [](double s, int r, int b) {
    return 1.0 - std::pow(1.0 - std::pow(s, r), b);
  };
  double best_cost = std::numeric_limits<double>::infinity();
  std::pair<int, int> best = {num_perms, 1};
  const int steps = 2000;
  for (int rows = 1; rows <= num_perms; ++rows) {
    if (num_perms % rows != 0) continue;
    int bands = num_perms / rows;
    // trapezoid integral: false positives below threshold + false negatives above
    double cost = 0.0;
    for (int i = 0; i <= steps; ++i) {
      double s = static_cast<double>(i) / steps;
      double p = catch_prob(s, rows, bands);
      double f = s < threshold ? p : 1.0 - p;
      double w = (i == 0 || i == steps) ? 0.5 : 1.0;
      cost += w * f;
    }
    cost /= steps;
    if (cost < best_cost) {
      best_cost = cost;
      best = {bands, rows};
    }
  }
  return best;
}

namespace {

struct union_find {
  std::vector<std::size_t> parent;

  explicit union_find(std::size_t n) : parent(n) {
    std::iota(parent.begin(), parent.end(), 0);
  }

  std::size_t find(std::size_t x) {
    while (parent[x] != x) {
      parent[x] = parent[parent[x]];
      x = parent[x];
    }
    return x;
  }

  void unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a != b) parent[std::max(a, b)] = std::min(a, b);
  }
};

std::uint64_t band_key(const minhash_signature& sig, int band, int rows) {
  std::uint64_t h = 0xcbf29ce484222325ULL ^ static_cast<std::uint64_t>(band);
  for (int r = 0; r < rows; ++r) {
    std::uint64_t slot = sig.slots[band * rows + r];
    for (int byte = 0; byte < 8; ++byte) {
      h ^= (slot >> (byte * 8)) & 0xff;
      h *= 0x100000001b3ULL;
    }
  }
  return h;
}

}  // namespace

dedup_report deduplicate(const std::vector<qa_pair>& pairs,
                         const dedup_config& cfg) {
  const std::size_t n = pairs.size();
  std::vector<std::set<std::string>> shingles(n);
  std::vector<minhash_signature> sigs(n);
  parallel_for(n, cfg.workers, [&](std::size_t i) {
    shingles[i] = word_shingles(pairs[i].question, cfg.shingle_words);
    sigs[i] = minhash_of(shingles[i], cfg.num_perms, cfg.seed);
  });

  // LSH banding: items sharing any band bucket become candidates.
  auto [bands, rows] = choose_banding(cfg.num_perms, cfg.threshold);
  std::set<std::pair<std::size_t, std::size_t>> candidates;
  for (int band = 0; band < bands; ++band) {
    std::unordered_map<std::uint64_t, std::vector<std::size_t>> buckets;
    for (std::size_t i = 0; i < n; ++i) {
      buckets[band_key(sigs[i], band, rows)].push_back(i);
    }
    for (const auto& [_, members] : buckets) {
      for (std::size_t a = 0; a < members.size(); ++a) {
        for (std::size_t b = a + 1; b < members.size(); ++b) {
          candidates.emplace(members[a], members[b]);
        }
      }
    }
  }

  if (cfg.verify_exact) {
    // Two sets with Jaccard > 0 share a shingle, so an inverted index over
    // shingles yields a superset of every pair the threshold can accept.
    // That superset is what makes the verified output independent of the
    // banding, seed and permutation count.
    std::unordered_map<std::string, std::vector<std::size_t>> postings;
    for (std::size_t i = 0; i < n; ++i) {
      for (const auto& s : shingles[i]) postings[s].push_back(i);
    }
    for (const auto& [_, members] : postings) {
      for (std::size_t a = 0; a < members.size(); ++a) {
        for (std::size_t b = a + 1; b < members.size(); ++b) {
          candidates.emplace(members[a], members[b]);
        }
      }
    }
  }

  union_find uf(n);
  for (const auto& [a, b] : candidates) {
    double sim = cfg.verify_exact ? exact_jaccard(shingles[a], shingles[b])
                                  : estimate_jaccard(sigs[a], sigs[b]);
    if (sim >= cfg.threshold) uf.unite(a, b);
  }

  std::unordered_map<std::size_t, std::vector<std::size_t>> clusters;
  for (std::size_t i = 0; i < n; ++i) clusters[uf.find(i)].push_back(i);

  dedup_report report;
  std::vector<std::string> kept, removed;
  std::vector<std::vector<std::string>> cluster_ids;
  for (auto& [_, members] : clusters) {
    std::vector<std::string> ids;
    ids.reserve(members.size());
    for (std::size_t i : members) ids.push_back(pairs[i].pair_id);
    std::sort(ids.begin(), ids.end());
    kept.push_back(ids.front());
    for (std::size_t i = 1; i < ids.size(); ++i) removed.push_back(ids[i]);
    if (ids.size() > 1) cluster_ids.push_back(std::move(ids));
  }
  std::sort(kept.begin(), kept.end());
  std::sort(removed.begin(), removed.end());
  std::sort(cluster_ids.begin(), cluster_ids.end());
  report.kept_ids = std::move(kept);
  report.removed_ids = std::move(removed);
  report.clusters = std::move(cluster_ids);
  return report;
}

ordered_json dedup_report::to_json() const {
  ordered_json j;
  ordered_json cl = ordered_json::array();
  for (const auto& cluster : clusters) cl.push_back(cluster);
  j["clusters"] = std::move(cl);
  j["kept_ids"] = kept_ids;
  j["removed_ids"] = removed_ids;
  return j;
}

}  // namespace sciqa
