#include "sciqa/decontam.hpp"

#include <algorithm>
#include <mutex>

#include "sciqa/error.hpp"
#include "sciqa/refine.hpp"
#include "sciqa/util.hpp"

namespace sciqa {

void contam_config::validate() const {
  if (k < 1) throw invariant_violation("k", "must be >= 1");
}

contam_index build_index(const std::vector<benchmark_item>& items,
                         gateway& gw) {
  if (items.empty()) {
    throw empty_input("contamination index needs at least one benchmark item");
  }
  std::vector<std::string> questions;
  questions.reserve(items.size());
  for (const auto& item : items) questions.push_back(item.question);

  contam_index index;
  index.items = items;
  index.vectors = gw.embed_texts(questions);
  index.embedder_tag = gw.model_for("embedder");
  return index;
}

std::vector<std::pair<const benchmark_item*, double>> query_top_k(
    const contam_index& index, const std::vector<double>& query_vec, int k) {
  std::vector<std::pair<const benchmark_item*, double>> scored;
  scored.reserve(index.items.size());
  for (std::size_t i = 0; i < index.items.size(); ++i) {
    const auto& v = index.vectors[i];
    double dot = 0.0;
    std::size_t dim = std::min(v.size(), query_vec.size());
    for (std::size_t d = 0; d < dim; ++d) dot += v[d] * query_vec[d];
    scored.emplace_back(&index.items[i], dot);
  }
  std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first->item_id < b.first->item_id;
  });
  if (static_cast<int>(scored.size()) > k) scored.resize(k);
  return scored;
}

judge_outcome judge_paraphrase(const std::string& original,
                               const std::string& candidate, gateway& gw,
                               const prompt_library& prompts) {
  if (original.empty() || candidate.empty()) {
    throw invariant_violation("question", "judge inputs must be nonempty");
  }
  std::string prompt = replace_all(prompts.decontam_judge(),
                                   "<ORIGINAL_PROBLEM>", original);
  prompt = replace_all(std::move(prompt), "<CANDIDATE_PROBLEM>", candidate);

  judge_outcome out;
  for (int attempt = 0; attempt < 2; ++attempt) {
    chat_request req =
        chat_request::single_user(gw.model_for("judge"), prompt);
    if (attempt > 0) req.seed_hint = attempt;
    // the transcript key doubles as an audit pointer in reports
    out.transcript_key = chat_cache_key(req);

    std::string transcript = gw.complete_chat(req);
    switch (parse_decision(transcript)) {
      case verdict_line::yes:
        out.verdict = verdict_yes_no::yes;
        return out;
      case verdict_line::no:
        out.verdict = verdict_yes_no::no;
        return out;
      case verdict_line::unparseable:
        break;
    }
  }
  out.verdict = verdict_yes_no::unparseable;
  return out;
}

std::pair<std::vector<qa_pair>, contam_report> decontaminate(
    const std::vector<qa_pair>& pairs, const contam_index& index,
    const contam_config& cfg, gateway& gw, const prompt_library& prompts) {
  cfg.validate();
  if (index.items.empty()) {
    throw empty_input("decontaminate requires a built index");
  }

  struct pair_result {
    bool removed = false;
    contam_removal removal;
    std::int64_t judge_calls = 0;
    std::int64_t unparseable = 0;
  };
  std::vector<pair_result> results(pairs.size());

  parallel_for(pairs.size(), cfg.workers, [&](std::size_t i) {
    pair_result& r = results[i];
    std::vector<std::vector<double>> vec;
    try {
      vec = gw.embed_texts({pairs[i].question});
    } catch (const cache_miss&) {
      throw;  // replay holes are a configuration error, not contamination
    } catch (const error&) {
      return;  // embedding failure: keep the pair, counted by caller stats
    }
    auto nearest = query_top_k(index, vec[0], cfg.k);
    for (const auto& [item, similarity] : nearest) {
      judge_outcome outcome;
      try {
        outcome = judge_paraphrase(pairs[i].question, item->question, gw,
                                   prompts);
      } catch (const cache_miss&) {
        throw;
      } catch (const error&) {
        continue;  // judge failure on one candidate, try the next
      }
      ++r.judge_calls;
      if (outcome.verdict == verdict_yes_no::unparseable) {
        ++r.unparseable;
        if (cfg.on_unparseable == unparseable_verdict_policy::remove) {
          r.removed = true;
          r.removal = {pairs[i].pair_id, item->item_id, similarity,
                       outcome.transcript_key, true};
          return;
        }
        continue;
      }
      if (outcome.verdict == verdict_yes_no::yes) {
        // first yes wins, remaining candidates are never judged
        r.removed = true;
        r.removal = {pairs[i].pair_id, item->item_id, similarity,
                     outcome.transcript_key, false};
        return;
      }
    }
  });

  std::vector<qa_pair> kept;
  contam_report report;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    report.judge_calls += results[i].judge_calls;
    report.unparseable += results[i].unparseable;
    if (results[i].removed) {
      report.removed.push_back(results[i].removal);
    } else {
      qa_pair survivor = pairs[i];
      survivor.stage_flags.insert(stage_flag::decontaminated_survivor);
      kept.push_back(std::move(survivor));
    }
  }
  report.kept_count = static_cast<std::int64_t>(kept.size());
  return {std::move(kept), std::move(report)};
}

ordered_json contam_report::to_json() const {
  ordered_json j;
  ordered_json rm = ordered_json::array();
  for (const auto& r : removed) {
    ordered_json entry;
    entry["pair_id"] = r.pair_id;
    entry["matched_item_id"] = r.matched_item_id;
    entry["similarity"] = r.similarity;
    entry["judge_transcript_key"] = r.judge_transcript_key;
    entry["policy_forced"] = r.policy_forced;
    rm.push_back(std::move(entry));
  }
  j["removed"] = std::move(rm);
  j["kept_count"] = kept_count;
  j["judge_calls"] = judge_calls;
  j["unparseable"] = unparseable;
  return j;
}

}  // namespace sciqa
