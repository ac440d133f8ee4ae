#pragma once

#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "sciqa/gateway.hpp"
#include "sciqa/prompts.hpp"
#include "sciqa/records.hpp"

namespace sciqa {

struct pipeline_config {
  std::filesystem::path out_dir = "out";
  std::filesystem::path input;      // docs dir or SourceDoc jsonl
  std::filesystem::path bench_dir;  // benchmark item files for decontam
  int workers = 1;
  std::uint64_t seed = 0;
  gateway_config gw;
  std::filesystem::path prompt_dir;  // optional template overrides
  std::vector<std::pair<pipeline_stage, ordered_json>> stages;

  static pipeline_config from_file(const std::filesystem::path& path);
  static pipeline_config from_json(const ordered_json& j,
                                   const std::filesystem::path& base_dir);
  // Listed stages must respect the canonical order
  // ingest -> extract -> dedup -> refine -> filter -> decontam -> select
  // -> annotate.
  void validate() const;
};

struct stage_outcome {
  pipeline_stage stage;
  stage_manifest manifest;
  std::filesystem::path output_file;
  std::filesystem::path manifest_file;
};

// Executes the configured stages in order, writing <stage>.qa.jsonl (or
// .docs/.chunks for the early stages) plus <stage>.manifest.json under
// out_dir. Stages chain by file: each reads its predecessor's output.
class pipeline_runner {
 public:
  explicit pipeline_runner(pipeline_config cfg,
                           std::unique_ptr<transport> tr = nullptr);

  std::vector<stage_outcome> run();

  gateway& gw() { return *gateway_; }

 private:
  stage_outcome run_ingest(const ordered_json& params);
  stage_outcome run_extract(const ordered_json& params);
  stage_outcome run_dedup(const ordered_json& params);
  stage_outcome run_refine(const ordered_json& params);
  stage_outcome run_filter(const ordered_json& params);
  stage_outcome run_decontam(const ordered_json& params);
  stage_outcome run_select(const ordered_json& params);
  stage_outcome run_annotate(const ordered_json& params);

  pipeline_config cfg_;
  std::unique_ptr<gateway> gateway_;
  prompt_library prompts_;
  std::filesystem::path docs_file_;
  std::filesystem::path chunks_file_;
  std::filesystem::path qa_file_;  // current head of the chain
};

// Benchmark item files under a directory: benches/<name>.jsonl.
std::vector<benchmark_item> load_bench_dir(const std::filesystem::path& dir);

}  // namespace sciqa
