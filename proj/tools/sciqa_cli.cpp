// Command-line front end: curation stages, evaluation, and pipelines over
// JSONL files.

#include <cstdlib>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "sciqa/corpus.hpp"
#include "sciqa/decontam.hpp"
#include "sciqa/dedup.hpp"
#include "sciqa/error.hpp"
#include "sciqa/extract.hpp"
#include "sciqa/gateway.hpp"
#include "sciqa/harness.hpp"
#include "sciqa/pipeline.hpp"
#include "sciqa/prompts.hpp"
#include "sciqa/records.hpp"
#include "sciqa/refine.hpp"
#include "sciqa/select.hpp"
#include "sciqa/util.hpp"

namespace {

using namespace sciqa;

struct global_options {
  std::string cache = "record";
  std::string cache_dir = ".sciqa-cache";
  std::string base_url;
  std::string prompt_dir;
  std::vector<std::string> model_tags;  // role=tag
  std::uint64_t seed = 0;
  int workers = 4;
};

gateway_config gateway_from(const global_options& opt) {
  gateway_config cfg;
  cfg.base_url = opt.base_url;
  cfg.cache_dir = opt.cache_dir;
  cfg.mode = cache_mode_from_string(opt.cache);
  for (const auto& spec : opt.model_tags) {
    std::size_t eq = spec.find('=');
    if (eq == std::string::npos) {
      throw usage_error("--model expects role=tag, got '" + spec + "'");
    }
    cfg.model_tags[spec.substr(0, eq)] = spec.substr(eq + 1);
  }
  return cfg;
}

prompt_library prompts_from(const global_options& opt) {
  return opt.prompt_dir.empty() ? prompt_library::defaults()
                                : prompt_library::with_overrides(opt.prompt_dir);
}

void write_json_file(const std::filesystem::path& path,
                     const ordered_json& j) {
  if (path.has_parent_path()) {
    std::filesystem::create_directories(path.parent_path());
  }
  std::ofstream out(path);
  if (!out) throw error("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

// --- subcommand bodies -------------------------------------------------------

int cmd_ingest(const global_options& gopt, const std::string& in,
               const std::string& out, bool classify) {
  std::vector<source_doc> docs;
  if (std::filesystem::is_directory(in)) {
    docs = load_doc_dir(in);
  } else {
    docs = read_jsonl<source_doc>(in);
  }
  stage_manifest manifest;
  manifest.stage = pipeline_stage::ingest;
  manifest.params["classify"] = classify ? "true" : "false";
  if (classify) {
    gateway gw(gateway_from(gopt));
    auto prompts = prompts_from(gopt);
    std::vector<classify_result> results(docs.size());
    parallel_for(docs.size(), gopt.workers, [&](std::size_t i) {
      results[i] = classify_doc(docs[i], gw, prompts);
    });
    for (std::size_t i = 0; i < docs.size(); ++i) docs[i] = results[i].doc;
  }
  for (const auto& d : docs) manifest.bump(d.subj, 1, d.excluded() ? 0 : 1);
  manifest.content_hash = content_hash(docs);
  write_jsonl(std::filesystem::path(out), docs);
  write_manifest(out + ".manifest.json", manifest);
  std::cout << "ingested " << docs.size() << " docs -> " << out << "\n";
  return 0;
}

int cmd_extract(const global_options& gopt, const std::string& docs_path,
                const std::string& out_dir, std::int64_t budget,
                const std::string& standard) {
  pipeline_config cfg;
  cfg.out_dir = out_dir;
  cfg.workers = gopt.workers;
  cfg.seed = gopt.seed;
  cfg.gw = gateway_from(gopt);
  if (!gopt.prompt_dir.empty()) cfg.prompt_dir = gopt.prompt_dir;
  ordered_json params;
  params["stage"] = "extract";
  params["budget_tokens"] = budget;
  params["standard"] = standard;
  cfg.stages.emplace_back(pipeline_stage::extract, params);

  // seed the runner's doc input by copying into the expected slot
  std::filesystem::create_directories(out_dir);
  auto staged = std::filesystem::path(out_dir) / "ingest.docs.jsonl";
  if (std::filesystem::absolute(staged) !=
      std::filesystem::absolute(docs_path)) {
    std::filesystem::copy_file(
        docs_path, staged, std::filesystem::copy_options::overwrite_existing);
  }
  pipeline_runner runner(cfg);
  auto outcomes = runner.run();
  std::cout << "extracted " << outcomes.back().manifest.total_out()
            << " pairs -> " << outcomes.back().output_file.string() << "\n";
  return 0;
}

int cmd_dedup(const global_options& gopt, const std::string& in,
              const std::string& out, const std::string& report_path,
              double threshold, int num_perms, int shingle_words,
              bool no_verify) {
  auto pairs = read_jsonl<qa_pair>(in);
  dedup_config cfg;
  cfg.threshold = threshold;
  cfg.num_perms = num_perms;
  cfg.shingle_words = shingle_words;
  cfg.verify_exact = !no_verify;
  cfg.seed = gopt.seed;
  cfg.workers = gopt.workers;
  auto report = deduplicate(pairs, cfg);

  std::set<std::string> kept_ids(report.kept_ids.begin(),
                                 report.kept_ids.end());
  stage_manifest manifest;
  manifest.stage = pipeline_stage::dedup;
  manifest.params["threshold"] = format_score(threshold);
  manifest.params["num_perms"] = std::to_string(num_perms);
  manifest.params["shingle_words"] = std::to_string(shingle_words);
  manifest.params["verify_exact"] = cfg.verify_exact ? "true" : "false";
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
  write_jsonl(std::filesystem::path(out), kept);

  ordered_json combined = to_json(manifest);
  combined["report"] = report.to_json();
  write_json_file(report_path, combined);
  std::cout << "dedup kept " << kept.size() << "/" << pairs.size() << " -> "
            << out << "\n";
  return 0;
}

int cmd_refine(const global_options& gopt, const std::string& in,
               const std::string& docs, const std::string& out) {
  auto pairs = read_jsonl<qa_pair>(in);
  std::map<std::string, std::string> chunk_texts;
  if (!docs.empty()) {
    for (const auto& c : read_jsonl<chunk>(docs)) {
      chunk_texts[c.chunk_id] = c.text;
    }
  }
  gateway gw(gateway_from(gopt));
  auto prompts = prompts_from(gopt);
  refine_config rcfg;

  std::vector<std::optional<qa_pair>> slots(pairs.size());
  parallel_for(pairs.size(), gopt.workers, [&](std::size_t i) {
    std::string doc_text;
    if (pairs[i].chunk_id) {
      auto it = chunk_texts.find(*pairs[i].chunk_id);
      if (it != chunk_texts.end()) doc_text = it->second;
    }
    auto refined = refine_pair(pairs[i], doc_text, gw, rcfg, prompts);
    if (refined && identify_missing_cot(*refined, gw, nullptr, prompts)) {
      if (auto again = refine_pair(*refined, refined->answer.value_or(""), gw,
                                   rcfg, prompts)) {
        refined = again;
      }
    }
    slots[i] = std::move(refined);
  });

  std::vector<qa_pair> refined;
  for (auto& slot : slots) {
    if (slot) refined.push_back(std::move(*slot));
  }
  write_jsonl(std::filesystem::path(out), refined);
  std::cout << "refined " << refined.size() << "/" << pairs.size() << " -> "
            << out << "\n";
  return 0;
}

int cmd_filter(const global_options& gopt, const std::string& in,
               const std::string& out) {
  auto pairs = read_jsonl<qa_pair>(in);
  gateway gw(gateway_from(gopt));
  auto prompts = prompts_from(gopt);
  std::vector<char> keep(pairs.size(), 0);
  parallel_for(pairs.size(), gopt.workers, [&](std::size_t i) {
    keep[i] = filter_defective(pairs[i], gw, nullptr, prompts) ? 1 : 0;
  });
  std::vector<qa_pair> kept;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    if (keep[i]) kept.push_back(std::move(pairs[i]));
  }
  write_jsonl(std::filesystem::path(out), kept);
  std::cout << "filter kept " << kept.size() << "/" << pairs.size() << " -> "
            << out << "\n";
  return 0;
}

int cmd_decontam(const global_options& gopt, const std::string& bench_dir,
                 int k, const std::string& in, const std::string& out,
                 const std::string& report_path) {
  auto pairs = read_jsonl<qa_pair>(in);
  auto items = load_bench_dir(bench_dir);
  gateway gw(gateway_from(gopt));
  auto prompts = prompts_from(gopt);
  auto index = build_index(items, gw);
  contam_config cfg;
  cfg.k = k;
  cfg.workers = gopt.workers;
  auto [kept, report] = decontaminate(pairs, index, cfg, gw, prompts);
  write_jsonl(std::filesystem::path(out), kept);
  write_json_file(report_path, report.to_json());
  std::cout << "decontam removed " << report.removed.size() << "/"
            << pairs.size() << " -> " << out << "\n";
  return 0;
}

int cmd_select(const global_options& gopt, const std::string& strategy,
               const std::string& in, const std::string& scores_path,
               const std::string& out, std::optional<std::size_t> n) {
  auto pairs = read_jsonl<qa_pair>(in);
  select_config cfg;
  cfg.strategy = strategy_from_string(strategy);
  cfg.seed = gopt.seed;
  cfg.workers = gopt.workers;
  if (n) cfg.n = *n;

  selection_aux aux;
  if (cfg.strategy == select_strategy::difficulty) {
    if (scores_path.empty()) {
      throw usage_error("difficulty selection needs --scores");
    }
    std::ifstream in_scores(scores_path);
    if (!in_scores) throw error("cannot open " + scores_path);
    std::string line;
    while (std::getline(in_scores, line)) {
      if (trim(line).empty()) continue;
      auto rec = score_record::from_json(ordered_json::parse(line));
      validate(rec);
      aux.scores[rec.pair_id] = std::move(rec);
    }
  } else if (cfg.strategy == select_strategy::response_length) {
    if (scores_path.empty()) {
      throw usage_error("response_length selection needs --scores");
    }
    std::ifstream in_scores(scores_path);
    if (!in_scores) throw error("cannot open " + scores_path);
    std::string line;
    while (std::getline(in_scores, line)) {
      if (trim(line).empty()) continue;
      auto j = ordered_json::parse(line);
      aux.response_tokens[j.at("pair_id").get<std::string>()] =
          j.at("response_tokens").get<std::int64_t>();
    }
    if (!cfg.n) cfg.n = pairs.size();
  } else if (!cfg.n) {
    cfg.n = pairs.size();
  }

  auto [selected, manifest] = select_subset(pairs, aux, cfg);
  write_jsonl(std::filesystem::path(out), selected);
  write_manifest(out + ".manifest.json", manifest);
  std::cout << "selected " << selected.size() << "/" << pairs.size() << " -> "
            << out << "\n";
  return 0;
}

int cmd_annotate(const global_options& gopt, const std::string& mode,
                 const std::string& in, const std::string& out) {
  auto pairs = read_jsonl<qa_pair>(in);
  gateway gw(gateway_from(gopt));
  auto prompts = prompts_from(gopt);

  if (mode == "solutions") {
    refine_config rcfg;
    std::vector<std::optional<qa_pair>> slots(pairs.size());
    parallel_for(pairs.size(), gopt.workers, [&](std::size_t i) {
      auto outcome = annotate_solution(pairs[i].question, rcfg, gw, prompts);
      if (std::holds_alternative<std::string>(outcome)) {
        qa_pair annotated = pairs[i];
        annotated.answer = std::get<std::string>(outcome);
        annotated.refined = true;
        annotated.stage_flags.insert(stage_flag::has_cot);
        slots[i] = std::move(annotated);
      }
    });
    std::vector<qa_pair> annotated;
    for (auto& slot : slots) {
      if (slot) annotated.push_back(std::move(*slot));
    }
    write_jsonl(std::filesystem::path(out), annotated);
    std::cout << "annotated " << annotated.size() << "/" << pairs.size()
              << " -> " << out << "\n";
    return 0;
  }
  if (mode == "difficulty") {
    select_config cfg;
    cfg.seed = gopt.seed;
    std::vector<std::optional<score_record>> records(pairs.size());
    parallel_for(pairs.size(), gopt.workers, [&](std::size_t i) {
      auto reference = annotate_reference(pairs[i], gw, prompts);
      if (!reference) return;
      records[i] = difficulty_of(pairs[i], *reference, cfg, gw, prompts);
    });
    std::ofstream out_scores(out);
    if (!out_scores) throw error("cannot write " + out);
    std::size_t written = 0;
    for (const auto& rec : records) {
      if (!rec) continue;
      out_scores << rec->to_json().dump() << '\n';
      ++written;
    }
    std::cout << "scored " << written << "/" << pairs.size() << " -> " << out
              << "\n";
    return 0;
  }
  throw usage_error("--mode must be solutions or difficulty");
}

int cmd_eval(const global_options& gopt, const std::string& endpoint,
             const std::string& suite_name, const std::string& bench_dir,
             const std::string& out_dir, const std::string& rules_path) {
  auto prompts = prompts_from(gopt);
  std::vector<bench_config> suite =
      suite_name == "default" ? default_suite(prompts)
                              : load_suite(suite_name, prompts);
  std::optional<extraction_rule_set> rules;
  if (!rules_path.empty()) rules = extraction_rule_set::load(rules_path);

  std::unique_ptr<gateway> gw;
  std::unique_ptr<item_responder> responder;
  if (is_mock_endpoint(endpoint)) {
    responder = mock_responder(endpoint);
  } else {
    gateway_config gcfg = gateway_from(gopt);
    gcfg.base_url = endpoint;
    gw = std::make_unique<gateway>(std::move(gcfg));
    responder = gateway_responder(*gw);
  }

  std::filesystem::create_directories(out_dir);
  std::vector<std::pair<std::string, double>> scores;
  for (const auto& cfg : suite) {
    auto items_file =
        std::filesystem::path(bench_dir) / (cfg.bench + ".jsonl");
    if (!std::filesystem::exists(items_file)) {
      std::cerr << "note: no items for " << cfg.bench << ", skipping\n";
      continue;
    }
    auto items = read_jsonl<benchmark_item>(items_file);
    auto records = run_benchmark(items, cfg, *responder, gopt.workers,
                                 rules ? &*rules : nullptr);
    write_jsonl(std::filesystem::path(out_dir) /
                    (cfg.bench + ".instances.jsonl"),
                records);
    double score = compute_metric(records);
    scores.emplace_back(cfg.bench, score);
    std::cout << cfg.bench << ": " << format_score(score) << "\n";
  }
  if (scores.empty()) throw usage_error("no benchmark had an items file");

  auto report = aggregate_report(scores);
  write_json_file(std::filesystem::path(out_dir) / "suite_report.json",
                  report.to_json());
  std::cout << "all_avg: " << format_score(round_half_up_2dp(report.all_avg))
            << "\n";
  return 0;
}

int cmd_report(const std::string& runs_dir, const std::string& from_report,
               const std::string& out) {
  std::vector<std::pair<std::string, double>> scores;
  if (!from_report.empty()) {
    std::ifstream in(from_report);
    if (!in) throw error("cannot open " + from_report);
    std::stringstream buf;
    buf << in.rdbuf();
    auto previous = suite_report::from_json(ordered_json::parse(buf.str()));
    scores = previous.per_bench;
  } else {
    for (const auto& entry : std::filesystem::directory_iterator(runs_dir)) {
      auto name = entry.path().filename().string();
      const std::string suffix = ".instances.jsonl";
      if (name.size() <= suffix.size() ||
          name.substr(name.size() - suffix.size()) != suffix) {
        continue;
      }
      auto records = read_jsonl<instance_record>(entry.path());
      scores.emplace_back(name.substr(0, name.size() - suffix.size()),
                          compute_metric(records));
    }
    std::sort(scores.begin(), scores.end());
  }
  auto report = aggregate_report(scores);
  write_json_file(out, report.to_json());
  std::cout << "report -> " << out << "\n";
  return 0;
}

int cmd_pipeline(const global_options& gopt, const std::string& config_path) {
  auto cfg = pipeline_config::from_file(config_path);
  // command-line globals override the file
  cfg.gw.mode = cache_mode_from_string(gopt.cache);
  if (!gopt.base_url.empty()) cfg.gw.base_url = gopt.base_url;
  if (gopt.seed != 0) cfg.seed = gopt.seed;
  pipeline_runner runner(std::move(cfg));
  auto outcomes = runner.run();
  for (const auto& outcome : outcomes) {
    std::cout << to_string(outcome.stage) << ": "
              << outcome.manifest.total_in() << " -> "
              << outcome.manifest.total_out() << " ("
              << outcome.output_file.filename().string() << ")\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"scientific QA curation and evaluation toolkit"};
  app.require_subcommand(1);
  // global flags are accepted after the subcommand too
  app.fallthrough();

  global_options gopt;
  app.add_option("--cache", gopt.cache, "record|replay|passthrough")
      ->check(CLI::IsMember({"record", "replay", "passthrough"}));
  app.add_option("--cache-dir", gopt.cache_dir, "replay cache directory");
  app.add_option("--base-url", gopt.base_url, "chat/embedding endpoint");
  app.add_option("--prompt-dir", gopt.prompt_dir, "prompt template overrides");
  app.add_option("--model", gopt.model_tags,
                 "role=tag model assignment (repeatable)");
  app.add_option("--seed", gopt.seed, "run seed");
  app.add_option("--workers", gopt.workers, "worker threads");

  // ingest
  std::string in_path, out_path;
  bool classify = true;
  auto* ingest = app.add_subcommand("ingest", "load and classify documents");
  ingest->add_option("--in", in_path, "docs dir or SourceDoc jsonl")
      ->required();
  ingest->add_option("--out", out_path, "output docs jsonl")->required();
  ingest->add_flag("--classify,!--no-classify", classify,
                   "label subject/level via the gateway");

  // extract
  std::string docs_path, out_dir, standard = "both";
  std::int64_t budget = 4096;
  auto* extract = app.add_subcommand("extract", "chunk docs and extract QA");
  extract->add_option("--docs", docs_path, "classified docs jsonl")->required();
  extract->add_option("--out-dir", out_dir, "stage output directory")
      ->required();
  extract->add_option("--budget", budget, "chunk budget in tokens");
  extract->add_option("--standard", standard, "both|high|low")
      ->check(CLI::IsMember({"both", "high", "low"}));

  // dedup
  std::string report_path;
  double threshold = 0.6;
  int num_perms = 256;
  int shingle_words = 5;
  bool no_verify = false;
  auto* dedup = app.add_subcommand("dedup", "near-duplicate removal");
  dedup->add_option("--in", in_path, "input qa jsonl")->required();
  dedup->add_option("--out", out_path, "output qa jsonl")->required();
  dedup->add_option("--report", report_path, "report/manifest json")
      ->required();
  dedup->add_option("--threshold", threshold, "jaccard threshold");
  dedup->add_option("--num-perms", num_perms, "minhash permutations");
  dedup->add_option("--shingle-words", shingle_words, "shingle width");
  dedup->add_flag("--no-verify-exact", no_verify,
                  "trust LSH candidates without exact verification");

  // refine
  std::string chunks_path;
  auto* refine = app.add_subcommand("refine", "rewrite QA against sources");
  refine->add_option("--in", in_path, "input qa jsonl")->required();
  refine->add_option("--docs", chunks_path, "chunks jsonl for source lookup");
  refine->add_option("--out", out_path, "output qa jsonl")->required();

  // filter
  auto* filter = app.add_subcommand("filter", "drop defective QA pairs");
  filter->add_option("--in", in_path, "input qa jsonl")->required();
  filter->add_option("--out", out_path, "output qa jsonl")->required();

  // decontam
  std::string bench_dir;
  int k = 5;
  auto* decontam =
      app.add_subcommand("decontam", "remove benchmark paraphrases");
  decontam->add_option("--bench-dir", bench_dir, "benchmark item files")
      ->required();
  decontam->add_option("--k", k, "nearest benchmark items to judge");
  decontam->add_option("--in", in_path, "input qa jsonl")->required();
  decontam->add_option("--out", out_path, "output qa jsonl")->required();
  decontam->add_option("--report", report_path, "removal report json")
      ->required();

  // select
  std::string strategy = "difficulty", scores_path;
  std::size_t n_value = 0;
  auto* select = app.add_subcommand("select", "data selection strategies");
  select->add_option("--strategy", strategy, "difficulty|length|random");
  select->add_option("--in", in_path, "input qa jsonl")->required();
  select->add_option("--scores", scores_path, "scores jsonl (difficulty) or "
                                              "lengths jsonl (length)");
  select->add_option("--out", out_path, "output qa jsonl")->required();
  select->add_option("--n", n_value, "selection size");

  // annotate
  std::string mode = "solutions";
  auto* annotate =
      app.add_subcommand("annotate", "solution or difficulty annotation");
  annotate->add_option("--mode", mode, "solutions|difficulty");
  annotate->add_option("--in", in_path, "input qa jsonl")->required();
  annotate->add_option("--out", out_path, "output jsonl")->required();

  // eval
  std::string endpoint, suite_name = "default", eval_out = "runs";
  std::string eval_bench_dir = "benches", rules_path;
  auto* eval = app.add_subcommand("eval", "run benchmark suites");
  eval->add_option("--model-endpoint", endpoint,
                   "chat endpoint url or mock://gold-echo")
      ->required();
  eval->add_option("--suite", suite_name, "default or a suite config json");
  eval->add_option("--bench-dir", eval_bench_dir, "benchmark item files");
  eval->add_option("--out-dir", eval_out, "instances and report directory");
  eval->add_option("--rules", rules_path,
                   "extraction rule config with extra indicator phrases");

  // report
  std::string runs_dir, from_report;
  auto* report = app.add_subcommand("report", "(re)aggregate a suite report");
  report->add_option("--runs-dir", runs_dir, "directory of instance files");
  report->add_option("--from-report", from_report,
                     "existing suite_report.json to re-aggregate");
  report->add_option("--out", out_path, "output report json")->required();

  // pipeline
  std::string config_path;
  auto* pipeline = app.add_subcommand("pipeline", "run configured stages");
  pipeline->add_option("--config", config_path, "pipeline config json")
      ->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (*ingest) return cmd_ingest(gopt, in_path, out_path, classify);
    if (*extract) {
      return cmd_extract(gopt, docs_path, out_dir, budget, standard);
    }
    if (*dedup) {
      return cmd_dedup(gopt, in_path, out_path, report_path, threshold,
                       num_perms, shingle_words, no_verify);
    }
    if (*refine) return cmd_refine(gopt, in_path, chunks_path, out_path);
    if (*filter) return cmd_filter(gopt, in_path, out_path);
    if (*decontam) {
      return cmd_decontam(gopt, bench_dir, k, in_path, out_path, report_path);
    }
    if (*select) {
      return cmd_select(gopt, strategy, in_path, scores_path, out_path,
                        n_value == 0 ? std::nullopt
                                     : std::optional<std::size_t>(n_value));
    }
    if (*annotate) return cmd_annotate(gopt, mode, in_path, out_path);
    if (*eval) {
      return cmd_eval(gopt, endpoint, suite_name, eval_bench_dir, eval_out,
                      rules_path);
    }
    if (*report) return cmd_report(runs_dir, from_report, out_path);
    if (*pipeline) return cmd_pipeline(gopt, config_path);
  } catch (const usage_error& e) {
    ordered_json err;
    err["error"] = {{"kind", "usage"}, {"message", e.what()}};
    std::cerr << err.dump() << "\n";
    return 2;
  } catch (const invariant_violation& e) {
    ordered_json err;
    err["error"] = {{"kind", "invariant_violation"},
                    {"field", e.field},
                    {"rule", e.rule},
                    {"message", e.what()}};
    std::cerr << err.dump() << "\n";
    return 1;
  } catch (const std::exception& e) {
    ordered_json err;
    err["error"] = {{"kind", "stage_failure"}, {"message", e.what()}};
    std::cerr << err.dump() << "\n";
    return 1;
  }
  return 2;
}
