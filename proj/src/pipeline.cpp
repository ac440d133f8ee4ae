#include "sciqa/pipeline.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <mutex>
#include <sstream>

#include "sciqa/corpus.hpp"
#include "sciqa/decontam.hpp"
#include "sciqa/dedup.hpp"
#include "sciqa/error.hpp"
#include "sciqa/extract.hpp"
#include "sciqa/refine.hpp"
#include "sciqa/select.hpp"
#include "sciqa/util.hpp"

namespace sciqa {

namespace {

std::filesystem::path resolve(const std::filesystem::path& base,
                              const std::string& p) {
  std::filesystem::path path(p);
  if (path.is_absolute() || base.empty()) return path;
  return base / path;
}

const std::vector<pipeline_stage>& canonical_order() {
  static const std::vector<pipeline_stage> order = {
      pipeline_stage::ingest,  pipeline_stage::extract,
      pipeline_stage::dedup,   pipeline_stage::refine,
      pipeline_stage::filter,  pipeline_stage::decontam,
      pipeline_stage::select,  pipeline_stage::annotate,
  };
  return order;
}

}  // namespace

pipeline_config pipeline_config::from_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw usage_error("cannot open pipeline config " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return from_json(ordered_json::parse(buf.str()),
                   path.has_parent_path() ? path.parent_path()
                                          : std::filesystem::path());
}

pipeline_config pipeline_config::from_json(
    const ordered_json& j, const std::filesystem::path& base_dir) {
  pipeline_config cfg;
  cfg.out_dir = resolve(base_dir, j.value("out_dir", std::string("out")));
  if (j.contains("input")) {
    cfg.input = resolve(base_dir, j.at("input").get<std::string>());
  }
  if (j.contains("bench_dir")) {
    cfg.bench_dir = resolve(base_dir, j.at("bench_dir").get<std::string>());
  }
  cfg.workers = j.value("workers", 1);
  cfg.seed = j.value("seed", 0);
  if (j.contains("prompt_dir")) {
    cfg.prompt_dir = resolve(base_dir, j.at("prompt_dir").get<std::string>());
  }
  if (j.contains("gateway")) {
    const auto& g = j.at("gateway");
    cfg.gw.base_url = g.value("base_url", std::string());
    cfg.gw.cache_dir =
        resolve(base_dir, g.value("cache_dir", std::string(".sciqa-cache")));
    cfg.gw.mode = cache_mode_from_string(g.value("cache_mode",
                                                 std::string("record")));
    cfg.gw.max_in_flight = g.value("max_in_flight", 8);
    if (g.contains("model_tags")) {
      for (const auto& item : g.at("model_tags").items()) {
        cfg.gw.model_tags[item.key()] = item.value().get<std::string>();
      }
    }
  }
  if (!j.contains("stages") || !j.at("stages").is_array() ||
      j.at("stages").empty()) {
    throw usage_error("pipeline config needs a nonempty stages array");
  }
  for (const auto& entry : j.at("stages")) {
    pipeline_stage stage =
        stage_from_string(entry.at("stage").get<std::string>());
    cfg.stages.emplace_back(stage, entry);
  }
  cfg.validate();
  return cfg;
}

void pipeline_config::validate() const {
  const auto& order = canonical_order();
  std::size_t cursor = 0;
  for (const auto& [stage, _] : stages) {
    auto it = std::find(order.begin() + cursor, order.end(), stage);
    if (it == order.end()) {
      throw usage_error("stage '" + to_string(stage) +
                        "' is out of order or repeated in the pipeline");
    }
    cursor = static_cast<std::size_t>(it - order.begin()) + 1;
  }
}

pipeline_runner::pipeline_runner(pipeline_config cfg,
                                 std::unique_ptr<transport> tr)
    : cfg_(std::move(cfg)),
      gateway_(std::make_unique<gateway>(cfg_.gw, std::move(tr))),
      prompts_(cfg_.prompt_dir.empty()
                   ? prompt_library::defaults()
                   : prompt_library::with_overrides(cfg_.prompt_dir)) {}

std::vector<stage_outcome> pipeline_runner::run() {
  std::filesystem::create_directories(cfg_.out_dir);
  std::vector<stage_outcome> outcomes;
  for (const auto& [stage, params] : cfg_.stages) {
    stage_outcome outcome;
    switch (stage) {
      case pipeline_stage::ingest: outcome = run_ingest(params); break;
      case pipeline_stage::extract: outcome = run_extract(params); break;
      case pipeline_stage::dedup: outcome = run_dedup(params); break;
      case pipeline_stage::refine: outcome = run_refine(params); break;
      case pipeline_stage::filter: outcome = run_filter(params); break;
      case pipeline_stage::decontam: outcome = run_decontam(params); break;
      case pipeline_stage::select: outcome = run_select(params); break;
      case pipeline_stage::annotate: outcome = run_annotate(params); break;
      default:
        throw usage_error("stage '" + to_string(stage) +
                          "' cannot run inside a pipeline");
    }
    outcomes.push_back(std::move(outcome));
  }
  return outcomes;
}

namespace {

stage_outcome finish_stage(const std::filesystem::path& out_dir,
                           stage_manifest manifest,
                           const std::filesystem::path& output_file) {
  stage_outcome outcome;
  outcome.stage = manifest.stage;
  outcome.output_file = output_file;
  outcome.manifest_file =
      out_dir / (to_string(manifest.stage) + ".manifest.json");
  outcome.manifest = std::move(manifest);
  write_manifest(outcome.manifest_file, outcome.manifest);
  return outcome;
}

}  // namespace

stage_outcome pipeline_runner::run_ingest(const ordered_json& params) {
  if (cfg_.input.empty()) throw usage_error("ingest needs an input path");
  std::vector<source_doc> docs;
  if (std::filesystem::is_directory(cfg_.input)) {
    docs = load_doc_dir(cfg_.input);
  } else {
    docs = read_jsonl<source_doc>(cfg_.input);
  }
  bool classify = params.value("classify", true);

  stage_manifest manifest;
  manifest.stage = pipeline_stage::ingest;
  manifest.params["classify"] = classify ? "true" : "false";

  if (classify) {
    std::vector<classify_result> results(docs.size());
    parallel_for(docs.size(), cfg_.workers, [&](std::size_t i) {
      if (docs[i].subj == subject::unknown || docs[i].lvl == level::unknown) {
        results[i] = classify_doc(docs[i], *gateway_, prompts_);
      } else {
        results[i].doc = docs[i];
      }
    });
    int warnings = 0;
    for (std::size_t i = 0; i < docs.size(); ++i) {
      docs[i] = results[i].doc;
      if (results[i].parse_warning) ++warnings;
    }
    manifest.params["classification_warnings"] = std::to_string(warnings);
  }

  for (const auto& doc : docs) {
    manifest.bump(doc.subj, 1, doc.excluded() ? 0 : 1);
  }
  manifest.content_hash = content_hash(docs);
  docs_file_ = cfg_.out_dir / "ingest.docs.jsonl";
  write_jsonl(docs_file_, docs);
  return finish_stage(cfg_.out_dir, std::move(manifest), docs_file_);
}

stage_outcome pipeline_runner::run_extract(const ordered_json& params) {
  std::filesystem::path docs_path =
      docs_file_.empty() ? cfg_.out_dir / "ingest.docs.jsonl" : docs_file_;
  auto docs = read_jsonl<source_doc>(docs_path);

  chunk_config ccfg;
  ccfg.budget_tokens = params.value("budget_tokens", 4096);
  ccfg.chars_per_token = params.value("chars_per_token", 4.0);

  std::vector<chunk> chunks;
  for (const auto& doc : docs) {
    if (doc.excluded() || doc.subj == subject::unknown) continue;
    auto doc_chunks = chunk_text(doc, ccfg);
    chunks.insert(chunks.end(), doc_chunks.begin(), doc_chunks.end());
  }
  chunks_file_ = cfg_.out_dir / "extract.chunks.jsonl";
  write_jsonl(chunks_file_, chunks);

  auto prompt_set = extraction_prompt_set::from_library(prompts_);
  standard_choice standards = standard_choice_from_string(
      params.value("standard", std::string("both")));
  std::vector<std::vector<qa_pair>> per_chunk(chunks.size());
  extract_stats stats;
  std::mutex stats_mutex;
  parallel_for(chunks.size(), cfg_.workers, [&](std::size_t i) {
    extract_stats local;
    per_chunk[i] = extract_from_chunk(chunks[i], prompt_set, *gateway_, &local,
                                      standards);
    std::lock_guard<std::mutex> lock(stats_mutex);
    stats.no_qa += local.no_qa;
    stats.no_structure += local.no_structure;
    stats.gateway_errors += local.gateway_errors;
  });

  stage_manifest manifest;
  manifest.stage = pipeline_stage::extract;
  manifest.params["budget_tokens"] = std::to_string(ccfg.budget_tokens);
  manifest.params["standard"] = params.value("standard", std::string("both"));
  manifest.params["no_qa"] = std::to_string(stats.no_qa);
  manifest.params["no_structure"] = std::to_string(stats.no_structure);
  manifest.params["gateway_errors"] = std::to_string(stats.gateway_errors);

  std::vector<qa_pair> pairs;
  for (std::size_t i = 0; i < chunks.size(); ++i) {
    manifest.bump(chunks[i].subj, 1, 0);
    for (auto& p : per_chunk[i]) {
      manifest.bump(p.subj, 0, 1);
      pairs.push_back(std::move(p));
    }
  }
  manifest.content_hash = content_hash(pairs);
  qa_file_ = cfg_.out_dir / "extract.qa.jsonl";
  write_jsonl(qa_file_, pairs);
  return finish_stage(cfg_.out_dir, std::move(manifest), qa_file_);
}

stage_outcome pipeline_runner::run_dedup(const ordered_json& params) {
  auto pairs = read_jsonl<qa_pair>(qa_file_);
  dedup_config dcfg;
  dcfg.threshold = params.value("threshold", 0.6);
  dcfg.num_perms = params.value("num_perms", 256);
  dcfg.shingle_words = params.value("shingle_words", 5);
  dcfg.verify_exact = params.value("verify_exact", true);
  dcfg.seed = cfg_.seed;
  dcfg.workers = cfg_.workers;

  auto report = deduplicate(pairs, dcfg);
  std::set<std::string> kept_ids(report.kept_ids.begin(),
                                 report.kept_ids.end());

  stage_manifest manifest;
  manifest.stage = pipeline_stage::dedup;
  manifest.params["threshold"] = format_score(dcfg.threshold);
  manifest.params["num_perms"] = std::to_string(dcfg.num_perms);
  manifest.params["shingle_words"] = std::to_string(dcfg.shingle_words);
  manifest.params["verify_exact"] = dcfg.verify_exact ? "true" : "false";

  std::vector<qa_pair> kept;
  for (auto& p : pairs) {
    manifest.bump(p.subj, 1, 0);
    if (kept_ids.count(p.pair_id)) {
      manifest.bump(p.subj, 0, 1);
      p.stage_flags.insert(stage_flag::deduped_survivor);
      kept.push_back(std::move(p));
    }
  }
  manifest.content_hash = content_hash(kept);
  qa_file_ = cfg_.out_dir / "dedup.qa.jsonl";
  write_jsonl(qa_file_, kept);

  std::ofstream out(cfg_.out_dir / "dedup.report.json");
  out << report.to_json().dump(2) << '\n';
  return finish_stage(cfg_.out_dir, std::move(manifest), qa_file_);
}

stage_outcome pipeline_runner::run_refine(const ordered_json& params) {
  auto pairs = read_jsonl<qa_pair>(qa_file_);

  // chunk texts keyed by id give each pair its source document
  std::map<std::string, std::string> chunk_texts;
  std::filesystem::path chunks_path =
      chunks_file_.empty() ? cfg_.out_dir / "extract.chunks.jsonl"
                           : chunks_file_;
  if (std::filesystem::exists(chunks_path)) {
    for (const auto& c : read_jsonl<chunk>(chunks_path)) {
      chunk_texts[c.chunk_id] = c.text;
    }
  }

  refine_config rcfg;
  rcfg.max_solution_tokens = params.value("max_solution_tokens", 4096);
  rcfg.refine_temperature = params.value("refine_temperature", 0.0);

  struct slot {
    std::optional<qa_pair> refined;
    bool cot_warn = false;
  };
  std::vector<slot> slots(pairs.size());
  parallel_for(pairs.size(), cfg_.workers, [&](std::size_t i) {
    const qa_pair& p = pairs[i];
    std::string doc_text;
    if (p.chunk_id) {
      auto it = chunk_texts.find(*p.chunk_id);
      if (it != chunk_texts.end()) doc_text = it->second;
    }
    auto refined = refine_pair(p, doc_text, *gateway_, rcfg, prompts_);
    if (!refined) return;

    // pairs that still lack reasoning go through a re-answer pass with the
    // refined answer as context
    bool warn = false;
    if (identify_missing_cot(*refined, *gateway_, &warn, prompts_)) {
      auto again =
          refine_pair(*refined, refined->answer.value_or(""), *gateway_,
                      rcfg, prompts_);
      if (again) {
        refined = again;
      }
    }
    if (refined) refined->stage_flags.insert(stage_flag::has_cot);
    slots[i].refined = std::move(refined);
    slots[i].cot_warn = warn;
  });

  stage_manifest manifest;
  manifest.stage = pipeline_stage::refine;
  int dropped = 0;
  int cot_warnings = 0;
  std::vector<qa_pair> refined;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    manifest.bump(pairs[i].subj, 1, 0);
    if (slots[i].cot_warn) ++cot_warnings;
    if (slots[i].refined) {
      manifest.bump(slots[i].refined->subj, 0, 1);
      refined.push_back(std::move(*slots[i].refined));
    } else {
      ++dropped;
    }
  }
  manifest.params["dropped_missing_section"] = std::to_string(dropped);
  manifest.params["cot_verdict_warnings"] = std::to_string(cot_warnings);
  manifest.content_hash = content_hash(refined);
  qa_file_ = cfg_.out_dir / "refine.qa.jsonl";
  write_jsonl(qa_file_, refined);
  return finish_stage(cfg_.out_dir, std::move(manifest), qa_file_);
}

stage_outcome pipeline_runner::run_filter(const ordered_json&) {
  auto pairs = read_jsonl<qa_pair>(qa_file_);
  std::vector<char> keep(pairs.size(), 0);
  std::vector<char> warned(pairs.size(), 0);
  parallel_for(pairs.size(), cfg_.workers, [&](std::size_t i) {
    bool warn = false;
    keep[i] = filter_defective(pairs[i], *gateway_, &warn, prompts_) ? 1 : 0;
    warned[i] = warn ? 1 : 0;
  });

  stage_manifest manifest;
  manifest.stage = pipeline_stage::filter;
  int warnings = 0;
  std::vector<qa_pair> kept;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    manifest.bump(pairs[i].subj, 1, keep[i] ? 1 : 0);
    warnings += warned[i];
    if (keep[i]) kept.push_back(std::move(pairs[i]));
  }
  manifest.params["verdict_warnings"] = std::to_string(warnings);
  manifest.content_hash = content_hash(kept);
  qa_file_ = cfg_.out_dir / "filter.qa.jsonl";
  write_jsonl(qa_file_, kept);
  return finish_stage(cfg_.out_dir, std::move(manifest), qa_file_);
}

stage_outcome pipeline_runner::run_decontam(const ordered_json& params) {
  if (cfg_.bench_dir.empty()) {
    throw usage_error("decontam needs bench_dir");
  }
  auto pairs = read_jsonl<qa_pair>(qa_file_);
  auto items = load_bench_dir(cfg_.bench_dir);
  auto index = build_index(items, *gateway_);

  contam_config ccfg;
  ccfg.k = params.value("k", 5);
  ccfg.workers = cfg_.workers;
  std::string policy = params.value("unparseable_verdict_policy",
                                    std::string("remove"));
  ccfg.on_unparseable = policy == "keep" ? unparseable_verdict_policy::keep
                                         : unparseable_verdict_policy::remove;

  auto [kept, report] = decontaminate(pairs, index, ccfg, *gateway_, prompts_);

  stage_manifest manifest;
  manifest.stage = pipeline_stage::decontam;
  manifest.params["k"] = std::to_string(ccfg.k);
  manifest.params["bench_items"] = std::to_string(items.size());
  manifest.params["judge_calls"] = std::to_string(report.judge_calls);
  for (const auto& p : pairs) manifest.bump(p.subj, 1, 0);
  for (const auto& p : kept) manifest.bump(p.subj, 0, 1);
  manifest.content_hash = content_hash(kept);
  qa_file_ = cfg_.out_dir / "decontam.qa.jsonl";
  write_jsonl(qa_file_, kept);

  std::ofstream out(cfg_.out_dir / "decontam.report.json");
  out << report.to_json().dump(2) << '\n';
  return finish_stage(cfg_.out_dir, std::move(manifest), qa_file_);
}

stage_outcome pipeline_runner::run_select(const ordered_json& params) {
  auto pairs = read_jsonl<qa_pair>(qa_file_);

  select_config scfg;
  scfg.strategy = strategy_from_string(
      params.value("strategy", std::string("difficulty")));
  scfg.sample_count = params.value("sample_count", 16);
  scfg.easy_cutoff = params.value("easy_cutoff", 9.0);
  scfg.noise_cutoff = params.value("noise_cutoff", 1.0);
  if (params.contains("n")) scfg.n = params.at("n").get<std::size_t>();
  scfg.seed = cfg_.seed;
  scfg.workers = cfg_.workers;

  selection_aux aux;
  int unscoreable = 0;
  // unscoreable pairs leave the corpus but still count as stage input
  std::map<subject, std::int64_t> unscoreable_by_subject;
  if (scfg.strategy == select_strategy::difficulty) {
    std::vector<std::optional<score_record>> records(pairs.size());
    parallel_for(pairs.size(), cfg_.workers, [&](std::size_t i) {
      auto reference = annotate_reference(pairs[i], *gateway_, prompts_);
      if (!reference) return;
      records[i] =
          difficulty_of(pairs[i], *reference, scfg, *gateway_, prompts_);
    });
    std::vector<qa_pair> scoreable;
    std::ofstream scores_out(cfg_.out_dir / "select.scores.jsonl");
    for (std::size_t i = 0; i < pairs.size(); ++i) {
      if (!records[i]) {
        ++unscoreable;
        ++unscoreable_by_subject[pairs[i].subj];
        continue;
      }
      aux.scores[pairs[i].pair_id] = *records[i];
      scores_out << records[i]->to_json().dump() << '\n';
      scoreable.push_back(pairs[i]);
    }
    pairs = std::move(scoreable);
  } else if (scfg.strategy == select_strategy::response_length) {
    // annotate one response per question and rank by its token estimate
    auto estimate = chars_per_token_estimator(4.0);
    std::vector<std::int64_t> lengths(pairs.size(), 0);
    parallel_for(pairs.size(), cfg_.workers, [&](std::size_t i) {
      chat_request req = chat_request::single_user(
          gateway_->model_for("annotator"), pairs[i].question);
      lengths[i] = estimate(gateway_->complete_chat(req));
    });
    for (std::size_t i = 0; i < pairs.size(); ++i) {
      aux.response_tokens[pairs[i].pair_id] = lengths[i];
    }
    if (!scfg.n) scfg.n = pairs.size();
  } else if (!scfg.n) {
    scfg.n = pairs.size();
  }

  auto [selected, manifest] = select_subset(pairs, aux, scfg);
  if (unscoreable > 0) {
    manifest.params["unscoreable"] = std::to_string(unscoreable);
    for (const auto& [subj, n] : unscoreable_by_subject) {
      manifest.bump(subj, n, 0);
    }
  }
  qa_file_ = cfg_.out_dir / "select.qa.jsonl";
  write_jsonl(qa_file_, selected);
  return finish_stage(cfg_.out_dir, std::move(manifest), qa_file_);
}

stage_outcome pipeline_runner::run_annotate(const ordered_json& params) {
  auto pairs = read_jsonl<qa_pair>(qa_file_);
  refine_config rcfg;
  rcfg.max_solution_tokens = params.value("max_solution_tokens", 4096);

  std::vector<std::optional<qa_pair>> slots(pairs.size());
  std::vector<char> too_long(pairs.size(), 0);
  parallel_for(pairs.size(), cfg_.workers, [&](std::size_t i) {
    auto outcome =
        annotate_solution(pairs[i].question, rcfg, *gateway_, prompts_);
    if (std::holds_alternative<std::string>(outcome)) {
      qa_pair annotated = pairs[i];
      annotated.answer = std::get<std::string>(outcome);
      annotated.refined = true;
      annotated.stage_flags.insert(stage_flag::has_cot);
      slots[i] = std::move(annotated);
    } else if (std::get<rejection>(outcome) == rejection::too_long) {
      too_long[i] = 1;
    }
  });

  stage_manifest manifest;
  manifest.stage = pipeline_stage::annotate;
  manifest.params["max_solution_tokens"] =
      std::to_string(rcfg.max_solution_tokens);
  int rejected_long = 0;
  int rejected_empty = 0;
  std::vector<qa_pair> annotated;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    manifest.bump(pairs[i].subj, 1, 0);
    if (slots[i]) {
      manifest.bump(slots[i]->subj, 0, 1);
      annotated.push_back(std::move(*slots[i]));
    } else if (too_long[i]) {
      ++rejected_long;
    } else {
      ++rejected_empty;
    }
  }
  manifest.params["rejected_too_long"] = std::to_string(rejected_long);
  manifest.params["rejected_empty"] = std::to_string(rejected_empty);
  manifest.content_hash = content_hash(annotated);
  qa_file_ = cfg_.out_dir / "annotate.qa.jsonl";
  write_jsonl(qa_file_, annotated);
  return finish_stage(cfg_.out_dir, std::move(manifest), qa_file_);
}

std::vector<benchmark_item> load_bench_dir(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) {
    throw usage_error("bench directory not found: " + dir.string());
  }
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.path().extension() == ".jsonl") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  std::vector<benchmark_item> items;
  for (const auto& file : files) {
    auto batch = read_jsonl<benchmark_item>(file);
    items.insert(items.end(), batch.begin(), batch.end());
  }
  return items;
}

}  // namespace sciqa
