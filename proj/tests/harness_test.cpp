#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <random>

#include "sciqa/error.hpp"
#include "sciqa/harness.hpp"
#include "support/fake_transport.hpp"
#include "support/score_fixtures.hpp"

using namespace sciqa;
using namespace sciqa::testing;

namespace {

benchmark_item mc_item(const std::string& id, const std::string& gold) {
  benchmark_item item;
  item.bench = "demo";
  item.item_id = id;
  item.question = "pick the labeled option";
  item.kind = question_kind::multi_choice;
  item.options = {{"A", "first thing"},
                  {"B", "second thing"},
                  {"C", "third thing"},
                  {"D", "fourth thing"}};
  item.gold = gold;
  return item;
}

benchmark_item comp_item(const std::string& id, const std::string& gold,
                         std::optional<std::string> unit = std::nullopt) {
  benchmark_item item;
  item.bench = "demo";
  item.item_id = id;
  item.question = "compute the value";
  item.kind = question_kind::computational;
  item.gold = gold;
  item.unit = std::move(unit);
  return item;
}

}  // namespace

TEST_CASE("gold-echo scores every kind at 100") {
  auto suite = default_suite();
  auto responder = mock_responder("mock://gold-echo");

  const bench_config* mc = find_bench(suite, "MedQA");
  REQUIRE(mc != nullptr);
  auto records =
      run_benchmark({mc_item("i1", "B"), mc_item("i2", "D")}, *mc, *responder);
  CHECK(compute_metric(records) == doctest::Approx(100.0));
  for (const auto& r : records) CHECK_NOTHROW(validate(r));

  const bench_config* unit_bench = find_bench(suite, "SciBench");
  REQUIRE(unit_bench != nullptr);
  records = run_benchmark({comp_item("i1", "78.54", "cm^2"),
                           comp_item("i2", "9.8", "m/s^2")},
                          *unit_bench, *responder);
  CHECK(compute_metric(records) == doctest::Approx(100.0));

  const bench_config* math_bench = find_bench(suite, "GSM8K");
  REQUIRE(math_bench != nullptr);
  records = run_benchmark({comp_item("i1", "42"), comp_item("i2", "1/2")},
                          *math_bench, *responder);
  CHECK(compute_metric(records) == doctest::Approx(100.0));
}

TEST_CASE("silent endpoint scores zero with no_extraction failures") {
  auto suite = default_suite();
  auto responder = mock_responder("mock://silent");
  const bench_config* cfg = find_bench(suite, "MATH");
  REQUIRE(cfg != nullptr);
  auto records = run_benchmark({comp_item("i1", "42"), comp_item("i2", "7")},
                               *cfg, *responder);
  CHECK(compute_metric(records) == doctest::Approx(0.0));
  for (const auto& r : records) {
    CHECK(r.failure == failure_kind::no_extraction);
    CHECK_NOTHROW(validate(r));
  }
}

TEST_CASE("gateway-backed runs replay byte-identically") {
  auto dir = std::filesystem::temp_directory_path() / "sciqa_harness_replay";
  std::filesystem::remove_all(dir);
  auto suite = default_suite();
  const bench_config* cfg = find_bench(suite, "MATH");
  std::vector<benchmark_item> items = {comp_item("i1", "42"),
                                       comp_item("i2", "7")};

  std::string first, second;
  {
    gateway_config gcfg;
    gcfg.cache_dir = dir;
    gcfg.mode = cache_mode::record;
    gateway gw(gcfg,
               std::make_unique<sciqa::testing::scripted_transport>(
                   sciqa::testing::echo_endpoint()));
    auto responder = gateway_responder(gw);
    for (const auto& r : run_benchmark(items, *cfg, *responder)) {
      first += serialize(r) + "\n";
    }
  }
  {
    gateway_config gcfg;
    gcfg.cache_dir = dir;
    gcfg.mode = cache_mode::replay;
    gateway gw(gcfg, nullptr);
    auto responder = gateway_responder(gw);
    for (const auto& r : run_benchmark(items, *cfg, *responder)) {
      second += serialize(r) + "\n";
    }
  }
  CHECK(first == second);
  std::filesystem::remove_all(dir);
}

TEST_CASE("compute_metric arithmetic") {
  std::vector<instance_record> records(4);
  for (std::size_t i = 0; i < records.size(); ++i) {
    records[i].bench = "b";
    records[i].item_id = "i" + std::to_string(i);
    records[i].prompt = "p";
    records[i].response = "r";
    records[i].correct = i < 3;
    if (!records[i].correct) records[i].failure = failure_kind::mismatch;
  }
  CHECK(compute_metric(records) == doctest::Approx(75.00));
  records.resize(0);
  CHECK_THROWS_AS(compute_metric(records), empty_run);

  std::vector<instance_record> none(5);
  for (std::size_t i = 0; i < none.size(); ++i) {
    none[i].bench = "b";
    none[i].item_id = "i" + std::to_string(i);
    none[i].correct = false;
    none[i].failure = failure_kind::no_extraction;
  }
  CHECK(compute_metric(none) == doctest::Approx(0.0));
}

TEST_CASE("reference score table reproduces its category averages") {
  auto report = aggregate_report(fixture_scores());
  CHECK(std::abs(report.category_avgs.at(bench_category::general) -
                 kExpectedGeneralAvg) <= 0.005);
  CHECK(std::abs(report.category_avgs.at(bench_category::specific) -
                 kExpectedSpecificAvg) <= 0.005);
  CHECK(std::abs(report.category_avgs.at(bench_category::math) -
                 kExpectedMathAvg) <= 0.005);
  CHECK(std::abs(report.all_avg - kExpectedAllAvg) <= 0.005);

  // the serialized report rounds to the reference two-decimal values
  auto j = report.to_json();
  CHECK(j["category_avgs"]["general"].get<double>() ==
        doctest::Approx(43.20));
  CHECK(j["category_avgs"]["specific"].get<double>() ==
        doctest::Approx(66.55));
  CHECK(j["category_avgs"]["math"].get<double>() == doctest::Approx(79.61));
  CHECK(j["all_avg"].get<double>() == doctest::Approx(61.01));
}

TEST_CASE("MMLU is excluded by default but scoreable when included") {
  auto scores = fixture_scores();
  scores.emplace_back("MMLU", 99.99);
  auto report = aggregate_report(scores);
  // unchanged averages: MMLU sits in the default exclusion list
  CHECK(std::abs(report.all_avg - kExpectedAllAvg) <= 0.005);

  auto included = aggregate_report(scores, kDefaultCategoryMap, {});
  CHECK(included.all_avg > report.all_avg);
}

TEST_CASE("single bench category average equals its score") {
  auto report = aggregate_report({{"GSM8K", 81.25}});
  CHECK(report.category_avgs.at(bench_category::math) ==
        doctest::Approx(81.25));
  CHECK(report.all_avg == doctest::Approx(81.25));
}

TEST_CASE("unmapped bench is an error") {
  CHECK_THROWS_AS(aggregate_report({{"UnknownBench", 50.0}}), unmapped_bench);
}

TEST_CASE("aggregation is permutation invariant and cross-checked") {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> dist(0.0, 100.0);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<std::pair<std::string, double>> scores;
    for (const auto& [bench, _] : kDefaultCategoryMap) {
      if (bench == "MMLU") continue;
      scores.emplace_back(bench, dist(rng));
    }
    auto base = aggregate_report(scores);

    // direct oracle: mean over the concatenated member scores
    double direct = 0.0;
    for (const auto& [_, s] : scores) {
      direct += std::floor(s * 100 + 0.5) / 100;
    }
    direct /= static_cast<double>(scores.size());
    CHECK(base.all_avg == doctest::Approx(direct).epsilon(1e-12));

    std::shuffle(scores.begin(), scores.end(), rng);
    auto shuffled = aggregate_report(scores);
    CHECK(shuffled.all_avg == doctest::Approx(base.all_avg).epsilon(1e-12));
    for (const auto& [cat, avg] : base.category_avgs) {
      CHECK(shuffled.category_avgs.at(cat) ==
            doctest::Approx(avg).epsilon(1e-12));
    }
  }
}

TEST_CASE("report json is a fixed point under re-aggregation") {
  auto report = aggregate_report(fixture_scores());
  auto j = report.to_json();
  auto back = suite_report::from_json(j);
  auto re = aggregate_report(back.per_bench);
  CHECK(re.to_json() == j);
}

TEST_CASE("count fixtures reproduce the reference row totals") {
  for (const auto& [rows, total] : fixture_count_rows()) {
    stage_manifest m;
    m.stage = pipeline_stage::dedup;
    for (const auto& row : rows) {
      m.bump(subject_from_string(row.subject), row.value, row.value);
    }
    CHECK(m.total_in() == total);
  }

  stage_manifest extraction;
  extraction.stage = pipeline_stage::extract;
  for (const auto& row : fixture_high_counts()) {
    extraction.bump(subject_from_string(row.subject), 0, row.value);
  }
  CHECK(extraction.total_out() == kHighTotal);

  stage_manifest low;
  low.stage = pipeline_stage::extract;
  for (const auto& row : fixture_low_counts()) {
    low.bump(subject_from_string(row.subject), 0, row.value);
  }
  CHECK(low.total_out() == kLowTotal);
  CHECK(extraction.total_out() + low.total_out() ==
        fixture_count_rows()[0].second);

  double selected = 0.0;
  for (double component : kMixtureSelected) selected += component;
  CHECK(selected == doctest::Approx(kMixtureSelectedTotal).epsilon(1e-9));
  double raw = 0.0;
  for (double component : kMixtureRaw) raw += component;
  CHECK(raw == doctest::Approx(kMixtureRawTotal).epsilon(1e-9));
}

TEST_CASE("default suite mirrors the reference settings") {
  auto suite = default_suite();
  REQUIRE(suite.size() == 15);
  int unit_count = 0;
  for (const auto& cfg : suite) {
    CHECK(cfg.cot);
    CHECK_NOTHROW(cfg.validate());
    if (cfg.unit) {
      ++unit_count;
      CHECK(cfg.metric() == "em_unit");
      CHECK(cfg.kind == question_kind::computational);
    } else {
      CHECK(cfg.metric() == "em");
    }
  }
  CHECK(unit_count == 2);  // the two computational benches with unit grading
  CHECK(find_bench(suite, "PubMedQA") != nullptr);
  CHECK(find_bench(suite, "MMLU") != nullptr);
  CHECK(find_bench(suite, "nope") == nullptr);
}

TEST_CASE("prompt building fills question and options") {
  auto suite = default_suite();
  const bench_config* mc = find_bench(suite, "MMLU-Pro");
  auto item = mc_item("i1", "C");
  std::string prompt = build_prompt(item, *mc);
  CHECK(prompt.find(item.question) != std::string::npos);
  CHECK(prompt.find("A. first thing") != std::string::npos);
  CHECK(prompt.find("D. fourth thing") != std::string::npos);
  CHECK(prompt.find("<QUESTION>") == std::string::npos);
  CHECK(prompt.find("<OPTIONS>") == std::string::npos);
}
