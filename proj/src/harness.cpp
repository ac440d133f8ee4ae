#include "sciqa/harness.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "sciqa/error.hpp"
#include "sciqa/util.hpp"

namespace sciqa {

bench_category category_from_string(const std::string& s) {
  if (s == "general") return bench_category::general;
  if (s == "specific") return bench_category::specific;
  if (s == "math") return bench_category::math;
  throw usage_error("unknown bench category '" + s + "'");
}

std::string to_string(bench_category c) {
  switch (c) {
    case bench_category::general: return "general";
    case bench_category::specific: return "specific";
    case bench_category::math: return "math";
  }
  return "general";
}

void bench_config::validate() const {
  if (bench.empty()) throw invariant_violation("bench", "must be nonempty");
  if (unit && kind != question_kind::computational) {
    throw invariant_violation("unit", "unit grading implies computational");
  }
  if (prompt_template.find("<QUESTION>") == std::string::npos) {
    throw invariant_violation("prompt_template", "must contain <QUESTION>");
  }
}

namespace {

bench_config make_config(const prompt_library& prompts, const char* name,
                         bench_category cat, question_kind kind, bool unit) {
  bench_config cfg;
  cfg.bench = name;
  cfg.category = cat;
  cfg.kind = kind;
  cfg.cot = true;
  cfg.unit = unit;
  cfg.prompt_template = prompts.eval_template(kind, unit);
  return cfg;
}

}  // namespace

std::vector<bench_config> default_suite(const prompt_library& prompts) {
  using k = question_kind;
  using c = bench_category;
  std::vector<bench_config> suite;
  suite.push_back(make_config(prompts, "MMLU", c::general, k::multi_choice, false));
  suite.push_back(make_config(prompts, "MMLU-Pro", c::general, k::multi_choice, false));
  suite.push_back(make_config(prompts, "GPQA-Diamond", c::general, k::multi_choice, false));
  suite.push_back(make_config(prompts, "SuperGPQA", c::general, k::multi_choice, false));
  suite.push_back(make_config(prompts, "SciBench", c::general, k::computational, true));
  suite.push_back(make_config(prompts, "OlympicArena", c::general, k::computational, true));
  suite.push_back(make_config(prompts, "ChemBench", c::specific, k::multi_choice, false));
  suite.push_back(make_config(prompts, "CS-Bench", c::specific, k::multi_choice, false));
  suite.push_back(make_config(prompts, "MedQA", c::specific, k::multi_choice, false));
  suite.push_back(make_config(prompts, "MedMCQA", c::specific, k::multi_choice, false));
  suite.push_back(make_config(prompts, "PubMedQA", c::specific, k::multi_choice, false));
  suite.push_back(make_config(prompts, "PIQA", c::specific, k::multi_choice, false));
  suite.push_back(make_config(prompts, "GSM8K", c::math, k::computational, false));
  suite.push_back(make_config(prompts, "MATH", c::math, k::computational, false));
  suite.push_back(make_config(prompts, "MATH500", c::math, k::computational, false));
  return suite;
}

std::vector<bench_config> load_suite(const std::filesystem::path& config,
                                     const prompt_library& prompts) {
  std::ifstream in(config);
  if (!in) throw error("cannot open suite config " + config.string());
  std::stringstream buf;
  buf << in.rdbuf();
  ordered_json j = ordered_json::parse(buf.str());
  std::vector<bench_config> suite;
  for (const auto& entry : j.at("benches")) {
    bench_config cfg;
    cfg.bench = entry.at("bench").get<std::string>();
    cfg.category = category_from_string(entry.at("category").get<std::string>());
    cfg.kind = kind_from_string(entry.at("kind").get<std::string>());
    cfg.cot = entry.value("cot", true);
    cfg.unit = entry.value("unit", false);
    if (entry.contains("prompt_template")) {
      cfg.prompt_template = entry.at("prompt_template").get<std::string>();
    } else {
      cfg.prompt_template = prompts.eval_template(cfg.kind, cfg.unit);
    }
    cfg.validate();
    suite.push_back(std::move(cfg));
  }
  return suite;
}

const bench_config* find_bench(const std::vector<bench_config>& suite,
                               const std::string& name) {
  for (const auto& cfg : suite) {
    if (cfg.bench == name) return &cfg;
  }
  return nullptr;
}

// --- responders ----------------------------------------------------------------

namespace {

class gateway_responder_impl final : public item_responder {
 public:
  explicit gateway_responder_impl(gateway& gw) : gw_(gw) {}

  std::string respond(const benchmark_item&, const std::string& prompt) override {
    return gw_.complete_chat(
        chat_request::single_user(gw_.model_for("default"), prompt));
  }

 private:
  gateway& gw_;
};

class gold_echo_responder final : public item_responder {
 public:
  std::string respond(const benchmark_item& item, const std::string&) override {
    switch (item.kind) {
      case question_kind::multi_choice:
        return "Working through the options step by step.\n"
               "The correct answer is (" + item.gold + ").";
      case question_kind::true_false:
        return "Considering the claim carefully. The answer is " + item.gold +
               ".";
      case question_kind::computational: {
        std::string boxed = item.gold;
        if (item.unit) boxed += " " + *item.unit;
        return "Carrying the computation through.\n"
               "The final answer to this question is \\boxed{" + boxed + "}.";
      }
      case question_kind::open:
        return "Thinking it through.\nAnswer: " + item.gold;
    }
    return item.gold;
  }
};

class silent_responder final : public item_responder {
 public:
  std::string respond(const benchmark_item&, const std::string&) override {
    return "An interesting question; many factors could matter here.";
  }
};

}  // namespace

std::unique_ptr<item_responder> gateway_responder(gateway& gw) {
  return std::make_unique<gateway_responder_impl>(gw);
}

bool is_mock_endpoint(const std::string& url) {
  return url.rfind("mock://", 0) == 0;
}

std::unique_ptr<item_responder> mock_responder(const std::string& url) {
  if (url == "mock://gold-echo") return std::make_unique<gold_echo_responder>();
  if (url == "mock://silent") return std::make_unique<silent_responder>();
  throw usage_error("unknown mock endpoint '" + url + "'");
}

// --- running ---------------------------------------------------------------------

std::string build_prompt(const benchmark_item& item, const bench_config& cfg) {
  std::string prompt =
      replace_all(cfg.prompt_template, "<QUESTION>", item.question);
  std::string options_block;
  for (const auto& [label, text] : item.options) {
    options_block += label + ". " + text + "\n";
  }
  if (!options_block.empty()) options_block.pop_back();
  return replace_all(std::move(prompt), "<OPTIONS>", options_block);
}

std::vector<instance_record> run_benchmark(
    const std::vector<benchmark_item>& items, const bench_config& cfg,
    item_responder& responder, int workers,
    const extraction_rule_set* rules) {
  cfg.validate();
  std::vector<instance_record> records(items.size());
  parallel_for(items.size(), workers, [&](std::size_t i) {
    const benchmark_item& item = items[i];
    instance_record rec;
    rec.bench = cfg.bench;
    rec.item_id = item.item_id;
    rec.prompt = build_prompt(item, cfg);
    try {
      rec.response = responder.respond(item, rec.prompt);
    } catch (const cache_miss&) {
      throw;
    } catch (const error&) {
      rec.correct = false;
      rec.failure = failure_kind::no_extraction;
      records[i] = std::move(rec);
      return;
    }

    extract_options opt;
    opt.kind = item.kind;
    if (!item.options.empty()) opt.options = &item.options;
    opt.split_unit = cfg.unit;
    opt.rules = rules;
    auto extractedv = extract_answer(rec.response, opt);
    if (extractedv) {
      rec.extracted = extractedv->value;
      rec.extracted_unit = extractedv->unit;
      grade_options gopt;
      gopt.require_unit = cfg.unit;
      rec.correct = grade(extractedv, item, gopt);
      if (!rec.correct) rec.failure = failure_kind::mismatch;
    } else {
      rec.correct = false;
      rec.failure = failure_kind::no_extraction;
    }
    records[i] = std::move(rec);
  });
  return records;
}

double compute_metric(const std::vector<instance_record>& records) {
  if (records.empty()) throw empty_run("no instance records to score");
  std::int64_t correct = 0;
  for (const auto& r : records) correct += r.correct ? 1 : 0;
  double pct = 100.0 * static_cast<double>(correct) /
               static_cast<double>(records.size());
  return round_half_up_2dp(pct);
}

// --- aggregation -----------------------------------------------------------------

const std::vector<std::pair<std::string, bench_category>> kDefaultCategoryMap = {
    {"MMLU", bench_category::general},
    {"MMLU-Pro", bench_category::general},
    {"GPQA-Diamond", bench_category::general},
    {"SuperGPQA", bench_category::general},
    {"SciBench", bench_category::general},
    {"OlympicArena", bench_category::general},
    {"ChemBench", bench_category::specific},
    {"CS-Bench", bench_category::specific},
    {"MedQA", bench_category::specific},
    {"MedMCQA", bench_category::specific},
    {"PubMedQA", bench_category::specific},
    {"PIQA", bench_category::specific},
    {"GSM8K", bench_category::math},
    {"MATH", bench_category::math},
    {"MATH500", bench_category::math},
};

const std::vector<std::string> kDefaultExclusions = {"MMLU"};

suite_report aggregate_report(
    const std::vector<std::pair<std::string, double>>& per_bench_scores,
    const std::vector<std::pair<std::string, bench_category>>& category_map,
    const std::vector<std::string>& exclusions) {
  suite_report report;
  std::map<bench_category, std::pair<double, int>> sums;
  double total = 0.0;
  int count = 0;

  for (const auto& [bench, score] : per_bench_scores) {
    report.per_bench.emplace_back(bench, round_half_up_2dp(score));
    if (std::find(exclusions.begin(), exclusions.end(), bench) !=
        exclusions.end()) {
      continue;
    }
    auto it = std::find_if(category_map.begin(), category_map.end(),
                           [&bench = bench](const auto& entry) {
                             return entry.first == bench;
                           });
    if (it == category_map.end()) {
      throw unmapped_bench("bench '" + bench + "' has no category");
    }
    double rounded = round_half_up_2dp(score);
    auto& [sum, n] = sums[it->second];
    sum += rounded;
    ++n;
    total += rounded;
    ++count;
  }

  // full precision here; rounding happens at serialization
  for (const auto& [cat, sum_n] : sums) {
    report.category_avgs[cat] = sum_n.first / sum_n.second;
  }
  report.all_avg = count == 0 ? 0.0 : total / count;
  return report;
}

ordered_json suite_report::to_json() const {
  ordered_json j;
  ordered_json benches;
  for (const auto& [bench, score] : per_bench) benches[bench] = score;
  j["per_bench"] = std::move(benches);
  ordered_json cats;
  for (const auto& [cat, avg] : category_avgs) {
    cats[to_string(cat)] = round_half_up_2dp(avg);
  }
  j["category_avgs"] = std::move(cats);
  j["all_avg"] = round_half_up_2dp(all_avg);
  return j;
}

suite_report suite_report::from_json(const ordered_json& j) {
  suite_report r;
  for (const auto& item : j.at("per_bench").items()) {
    r.per_bench.emplace_back(item.key(), item.value().get<double>());
  }
  for (const auto& item : j.at("category_avgs").items()) {
    r.category_avgs[category_from_string(item.key())] =
        item.value().get<double>();
  }
  r.all_avg = j.at("all_avg").get<double>();
  return r;
}

}  // namespace sciqa
