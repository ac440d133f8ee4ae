#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "sciqa/decontam.hpp"
#include "sciqa/error.hpp"
#include "support/fake_transport.hpp"

using namespace sciqa;
using namespace sciqa::testing;

namespace {

benchmark_item bench_item(const std::string& id, const std::string& q) {
  benchmark_item item;
  item.bench = "demo";
  item.item_id = id;
  item.question = q;
  item.gold = "42";
  item.kind = question_kind::computational;
  return item;
}

qa_pair pair_q(const std::string& id, const std::string& q) {
  qa_pair p;
  p.pair_id = id;
  p.subj = subject::physics;
  p.standard = qa_standard::low;
  p.question = q;
  p.answer = "a";
  return p;
}

struct gw_fixture {
  std::filesystem::path dir;
  std::unique_ptr<gateway> gw;

  explicit gw_fixture(const std::string& tag, handler_fn handler,
                      cache_mode mode = cache_mode::passthrough) {
    dir = std::filesystem::temp_directory_path() / ("sciqa_dc_" + tag);
    std::filesystem::remove_all(dir);
    gateway_config cfg;
    cfg.cache_dir = dir;
    cfg.mode = mode;
    cfg.retry.base_delay_ms = 0;
    gw = std::make_unique<gateway>(
        cfg, std::make_unique<scripted_transport>(std::move(handler)));
  }
  ~gw_fixture() { std::filesystem::remove_all(dir); }
};

}  // namespace

TEST_CASE("index aligns one unit vector per item") {
  gw_fixture fx("index", decontam_mock_endpoint());
  auto index = build_index({bench_item("b1", "alpha"), bench_item("b2", "beta"),
                            bench_item("b3", "alpha")},
                           *fx.gw);
  REQUIRE(index.items.size() == 3);
  REQUIRE(index.vectors.size() == 3);
  CHECK(index.vectors[0] == index.vectors[2]);  // duplicate questions kept
  CHECK(index.vectors[0] != index.vectors[1]);
}

TEST_CASE("empty index input is rejected") {
  gw_fixture fx("index_empty", decontam_mock_endpoint());
  CHECK_THROWS_AS(build_index({}, *fx.gw), empty_input);
}

TEST_CASE("top-k is exact cosine, clamped, ties by item id") {
  gw_fixture fx("topk", decontam_mock_endpoint());
  auto index = build_index(
      {bench_item("b1", "how do enzymes accelerate reactions"),
       bench_item("b2", "what is the escape velocity of earth"),
       bench_item("b3", "integrate x squared over the unit interval")},
      *fx.gw);

  auto query_vec = fx.gw->embed_texts(
      {"how do enzymes accelerate reactions"})[0];
  auto top = query_top_k(index, query_vec, 5);
  REQUIRE(top.size() == 3);  // k clamps to index size
  CHECK(top[0].first->item_id == "b1");
  CHECK(std::abs(top[0].second - 1.0) <= 1e-6);
  CHECK(top[1].second < 1.0 - 1e-6);
}

TEST_CASE("orthogonal index vectors score zero for non-matches") {
  contam_index index;
  index.items = {bench_item("b1", "q1"), bench_item("b2", "q2")};
  index.vectors = {{1.0, 0.0, 0.0}, {0.0, 1.0, 0.0}};
  auto top = query_top_k(index, {0.0, 0.0, 1.0}, 2);
  REQUIRE(top.size() == 2);
  CHECK(top[0].second == doctest::Approx(0.0));
  CHECK(top[1].second == doctest::Approx(0.0));
}

TEST_CASE("short-circuiting changes judge calls, never the removed set") {
  gw_fixture fx("shortc", decontam_mock_endpoint(), cache_mode::record);
  std::vector<benchmark_item> items;
  for (int i = 0; i < 6; ++i) {
    items.push_back(bench_item("b" + std::to_string(i),
                               "unique benchmark text " + std::to_string(i)));
  }
  auto index = build_index(items, *fx.gw);
  std::vector<qa_pair> pairs;
  for (int i = 0; i < 4; ++i) {
    pairs.push_back(pair_q(
        "p" + std::to_string(i),
        i % 2 == 0 ? "unique benchmark text " + std::to_string(i) + "."
                   : "fresh question " + std::to_string(i)));
  }
  contam_config cfg;
  cfg.k = 4;
  auto [kept, report] = decontaminate(pairs, index, cfg, *fx.gw);

  // independent evaluation without short-circuit: judge every candidate
  std::set<std::string> removed_full;
  for (const auto& p : pairs) {
    auto vec = fx.gw->embed_texts({p.question});
    for (const auto& [item, _] : query_top_k(index, vec[0], cfg.k)) {
      auto outcome = judge_paraphrase(p.question, item->question, *fx.gw);
      if (outcome.verdict == verdict_yes_no::yes) {
        removed_full.insert(p.pair_id);
      }
    }
  }
  std::set<std::string> removed_sc;
  for (const auto& r : report.removed) removed_sc.insert(r.pair_id);
  CHECK(removed_sc == removed_full);
}

TEST_CASE("tied similarities order by item id") {
  contam_index index;
  index.items = {bench_item("z9", "q1"), bench_item("a1", "q2")};
  index.vectors = {{1.0, 0.0}, {1.0, 0.0}};
  auto top = query_top_k(index, {1.0, 0.0}, 2);
  REQUIRE(top.size() == 2);
  CHECK(top[0].first->item_id == "a1");
  CHECK(top[1].first->item_id == "z9");
}

TEST_CASE("judge verdict grammar") {
  gw_fixture fx("judge", decontam_mock_endpoint());
  auto same = judge_paraphrase("What is 2+2?", "what is 2 + 2", *fx.gw);
  CHECK(same.verdict == verdict_yes_no::yes);
  CHECK(!same.transcript_key.empty());

  auto diff = judge_paraphrase("What is 2+2?", "name the largest planet",
                               *fx.gw);
  CHECK(diff.verdict == verdict_yes_no::no);
}

TEST_CASE("unparseable judge transcripts surface after one retry") {
  gw_fixture fx("junk", [](const std::string& path, const std::string& body) {
    if (path == "/embeddings") return decontam_mock_endpoint()(path, body);
    return chat_body("no verdict in sight");
  });
  auto out = judge_paraphrase("a", "b", *fx.gw);
  CHECK(out.verdict == verdict_yes_no::unparseable);
}

TEST_CASE("planted paraphrases are removed, controls kept") {
  gw_fixture fx("plant", decontam_mock_endpoint());
  std::vector<benchmark_item> items = {
      bench_item("b1", "What is the escape velocity of Earth?"),
      bench_item("b2", "How many chromosomes does a human cell have?"),
  };
  auto index = build_index(items, *fx.gw);

  std::vector<qa_pair> pairs = {
      pair_q("p1", "what is the escape velocity of earth"),  // paraphrase of b1
      pair_q("p2", "describe the citric acid cycle"),
      pair_q("p3", "How many chromosomes does a human cell have!!"),  // b2
      pair_q("p4", "compute the derivative of sin x"),
  };
  auto [kept, report] = decontaminate(pairs, index, {}, *fx.gw);

  REQUIRE(report.removed.size() == 2);
  CHECK(report.removed[0].pair_id == "p1");
  CHECK(report.removed[0].matched_item_id == "b1");
  CHECK(std::abs(report.removed[0].similarity - 1.0) <= 1e-6);
  CHECK(!report.removed[0].judge_transcript_key.empty());
  CHECK(report.removed[1].pair_id == "p3");
  REQUIRE(kept.size() == 2);
  CHECK(kept[0].pair_id == "p2");
  CHECK(kept[0].has_flag(stage_flag::decontaminated_survivor));
  CHECK(report.kept_count == 2);
}

TEST_CASE("clean corpus keeps everything") {
  gw_fixture fx("clean", decontam_mock_endpoint());
  auto index = build_index({bench_item("b1", "benchmark only question")},
                           *fx.gw);
  std::vector<qa_pair> pairs = {pair_q("p1", "unrelated alpha"),
                                pair_q("p2", "unrelated beta")};
  auto [kept, report] = decontaminate(pairs, index, {}, *fx.gw);
  CHECK(report.removed.empty());
  CHECK(kept.size() == 2);
}

TEST_CASE("growing k never shrinks the removed set") {
  gw_fixture fx("monok", decontam_mock_endpoint(), cache_mode::record);
  std::vector<benchmark_item> items;
  for (int i = 0; i < 8; ++i) {
    items.push_back(bench_item("b" + std::to_string(i),
                               "benchmark question number " + std::to_string(i)));
  }
  auto index = build_index(items, *fx.gw);

  std::vector<qa_pair> pairs;
  for (int i = 0; i < 6; ++i) {
    pairs.push_back(pair_q("p" + std::to_string(i),
                           i % 2 == 0 ? "benchmark question number " +
                                            std::to_string(i) + "?"
                                      : "novel question " + std::to_string(i)));
  }

  std::set<std::string> prev;
  for (int k = 1; k <= 8; ++k) {
    contam_config cfg;
    cfg.k = k;
    auto [kept, report] = decontaminate(pairs, index, cfg, *fx.gw);
    std::set<std::string> removed;
    for (const auto& r : report.removed) removed.insert(r.pair_id);
    for (const auto& id : prev) CHECK(removed.count(id) == 1);
    prev = removed;
  }
}

TEST_CASE("unparseable policy decides removal") {
  auto junk_judge = [](const std::string& path, const std::string& body) {
    if (path == "/embeddings") return decontam_mock_endpoint()(path, body);
    return chat_body("mumbling without a verdict");
  };

  gw_fixture remove_fx("policy_rm", junk_judge);
  auto index = build_index({bench_item("b1", "target")}, *remove_fx.gw);
  std::vector<qa_pair> pairs = {pair_q("p1", "target")};
  {
    contam_config cfg;  // default policy: remove
    auto [kept, report] = decontaminate(pairs, index, cfg, *remove_fx.gw);
    CHECK(kept.empty());
    REQUIRE(report.removed.size() == 1);
    CHECK(report.removed[0].policy_forced);
    CHECK(report.unparseable >= 1);
  }
  {
    contam_config cfg;
    cfg.on_unparseable = unparseable_verdict_policy::keep;
    auto [kept, report] = decontaminate(pairs, index, cfg, *remove_fx.gw);
    CHECK(kept.size() == 1);
    CHECK(report.removed.empty());
  }
}
