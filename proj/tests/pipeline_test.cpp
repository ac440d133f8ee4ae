#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "sciqa/error.hpp"
#include "sciqa/pipeline.hpp"
#include "support/fake_model.hpp"

using namespace sciqa;
using namespace sciqa::testing;

namespace {

std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

pipeline_config demo_config(const std::filesystem::path& work,
                            cache_mode mode) {
  pipeline_config cfg;
  cfg.out_dir = work / "out";
  cfg.input = std::filesystem::path(SCIQA_DEMO_DIR) / "docs";
  cfg.bench_dir = std::filesystem::path(SCIQA_DEMO_DIR) / "benches";
  cfg.workers = 2;
  cfg.seed = 0;
  cfg.gw.cache_dir = work / "cache";
  cfg.gw.mode = mode;
  auto stage = [](const char* name, ordered_json extra = {}) {
    ordered_json j = std::move(extra);
    j["stage"] = name;
    return std::make_pair(stage_from_string(name), j);
  };
  cfg.stages.push_back(stage("ingest"));
  cfg.stages.push_back(stage("extract", {{"budget_tokens", 512}}));
  cfg.stages.push_back(stage("dedup", {{"threshold", 0.6}}));
  cfg.stages.push_back(stage("refine"));
  cfg.stages.push_back(stage("filter"));
  cfg.stages.push_back(stage("decontam", {{"k", 5}}));
  cfg.stages.push_back(stage("select", {{"strategy", "difficulty"},
                                        {"sample_count", 4}}));
  cfg.stages.push_back(stage("annotate"));
  cfg.validate();
  return cfg;
}

const std::vector<std::string>& output_files() {
  static const std::vector<std::string> files = {
      "ingest.docs.jsonl",    "ingest.manifest.json",
      "extract.chunks.jsonl", "extract.qa.jsonl",
      "extract.manifest.json", "dedup.qa.jsonl",
      "dedup.manifest.json",  "dedup.report.json",
      "refine.qa.jsonl",      "refine.manifest.json",
      "filter.qa.jsonl",      "filter.manifest.json",
      "decontam.qa.jsonl",    "decontam.manifest.json",
      "decontam.report.json", "select.scores.jsonl",
      "select.qa.jsonl",      "select.manifest.json",
      "annotate.qa.jsonl",    "annotate.manifest.json",
  };
  return files;
}

}  // namespace

TEST_CASE("demo pipeline runs every stage with chained manifests") {
  auto work = std::filesystem::temp_directory_path() / "sciqa_pipeline_run";
  std::filesystem::remove_all(work);
  pipeline_runner runner(
      demo_config(work, cache_mode::record),
      std::make_unique<scripted_transport>(full_model_endpoint()));
  auto outcomes = runner.run();
  REQUIRE(outcomes.size() == 8);

  std::map<pipeline_stage, stage_manifest> manifests;
  for (const auto& outcome : outcomes) {
    manifests[outcome.stage] = outcome.manifest;
    CHECK(std::filesystem::exists(outcome.output_file));
    CHECK(std::filesystem::exists(outcome.manifest_file));
    CHECK(!outcome.manifest.content_hash.empty());
  }

  // the school-level doc is flagged excluded at ingest
  const auto& ingest = manifests.at(pipeline_stage::ingest);
  CHECK(ingest.total_in() == 4);
  CHECK(ingest.total_out() == 3);

  // every extracted pair flows through the chain: out(i) == in(i+1)
  CHECK(manifests.at(pipeline_stage::extract).total_out() ==
        manifests.at(pipeline_stage::dedup).total_in());
  CHECK(manifests.at(pipeline_stage::dedup).total_out() ==
        manifests.at(pipeline_stage::refine).total_in());
  CHECK(manifests.at(pipeline_stage::refine).total_out() ==
        manifests.at(pipeline_stage::filter).total_in());
  CHECK(manifests.at(pipeline_stage::filter).total_out() ==
        manifests.at(pipeline_stage::decontam).total_in());
  CHECK(manifests.at(pipeline_stage::decontam).total_out() ==
        manifests.at(pipeline_stage::select).total_in());
  CHECK(manifests.at(pipeline_stage::select).total_out() ==
        manifests.at(pipeline_stage::annotate).total_in());

  // filtering stages only shrink
  for (const auto& [stage, manifest] : manifests) {
    if (stage == pipeline_stage::extract) continue;  // chunks -> pairs
    for (const auto& [subj, io] : manifest.counts) {
      CHECK(io.second <= io.first);
    }
  }

  // both-standard copies and the cross-document plant collapse: surviving
  // questions are unique
  const auto& dedup = manifests.at(pipeline_stage::dedup);
  CHECK(dedup.total_out() < dedup.total_in());
  auto survivors = read_jsonl<qa_pair>(work / "out/dedup.qa.jsonl");
  std::set<std::string> unique_questions;
  for (const auto& p : survivors) {
    CHECK(p.has_flag(stage_flag::deduped_survivor));
    CHECK(unique_questions.insert(p.question).second);
  }

  // the external-reference exercise fell to the defect filter
  const auto& filter = manifests.at(pipeline_stage::filter);
  CHECK(filter.total_out() < filter.total_in());

  // the planted benchmark paraphrase was caught
  auto contam = ordered_json::parse(slurp(work / "out/decontam.report.json"));
  bool found_plant = false;
  for (const auto& removal : contam.at("removed")) {
    if (removal.at("matched_item_id") == "gsm8k-1") found_plant = true;
  }
  CHECK(found_plant);

  std::filesystem::remove_all(work);
}

TEST_CASE("replayed pipeline is byte-identical across runs") {
  auto work = std::filesystem::temp_directory_path() / "sciqa_pipeline_det";
  std::filesystem::remove_all(work);

  {
    pipeline_runner recorder(
        demo_config(work, cache_mode::record),
        std::make_unique<scripted_transport>(full_model_endpoint()));
    recorder.run();
  }

  auto run_replayed = [&](const std::filesystem::path& out_dir) {
    pipeline_config cfg = demo_config(work, cache_mode::replay);
    cfg.out_dir = out_dir;
    pipeline_runner runner(std::move(cfg), nullptr);  // no transport at all
    return runner.run();
  };

  auto first = run_replayed(work / "replay1");
  auto second = run_replayed(work / "replay2");
  REQUIRE(first.size() == second.size());

  for (const auto& name : output_files()) {
    CAPTURE(name);
    CHECK(slurp(work / "replay1" / name) == slurp(work / "replay2" / name));
  }
  for (std::size_t i = 0; i < first.size(); ++i) {
    CHECK(first[i].manifest.content_hash == second[i].manifest.content_hash);
  }

  // the record-mode originals match the replays too
  for (const auto& name : output_files()) {
    CAPTURE(name);
    CHECK(slurp(work / "out" / name) == slurp(work / "replay1" / name));
  }
  std::filesystem::remove_all(work);
}

TEST_CASE("stage order is validated") {
  pipeline_config cfg;
  cfg.stages.emplace_back(pipeline_stage::dedup, ordered_json{});
  cfg.stages.emplace_back(pipeline_stage::extract, ordered_json{});
  CHECK_THROWS_AS(cfg.validate(), usage_error);

  pipeline_config dup;
  dup.stages.emplace_back(pipeline_stage::dedup, ordered_json{});
  dup.stages.emplace_back(pipeline_stage::dedup, ordered_json{});
  CHECK_THROWS_AS(dup.validate(), usage_error);

  pipeline_config ok;
  ok.stages.emplace_back(pipeline_stage::extract, ordered_json{});
  ok.stages.emplace_back(pipeline_stage::decontam, ordered_json{});
  CHECK_NOTHROW(ok.validate());
}
