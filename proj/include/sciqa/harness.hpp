#pragma once

#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "sciqa/anskit.hpp"
#include "sciqa/gateway.hpp"
#include "sciqa/prompts.hpp"
#include "sciqa/records.hpp"

namespace sciqa {

enum class bench_category { general, specific, math };

bench_category category_from_string(const std::string& s);
std::string to_string(bench_category c);

struct bench_config {
  std::string bench;
  bench_category category = bench_category::general;
  question_kind kind = question_kind::multi_choice;
  bool cot = true;
  bool unit = false;
  // em_unit exactly when unit grading is on
  std::string metric() const { return unit ? "em_unit" : "em"; }
  std::string prompt_template;

  void validate() const;
};

// The fifteen stock bench configs. MMLU ships but sits in the default
// exclusion list for aggregation.
std::vector<bench_config> default_suite(
    const prompt_library& prompts = prompt_library::defaults());
std::vector<bench_config> load_suite(const std::filesystem::path& config,
                                     const prompt_library& prompts =
                                         prompt_library::defaults());
const bench_config* find_bench(const std::vector<bench_config>& suite,
                               const std::string& name);

// Produces the model response for one prompt; lets mock endpoints stand in
// for the gateway.
class item_responder {
 public:
  virtual ~item_responder() = default;
  virtual std::string respond(const benchmark_item& item,
                              const std::string& prompt) = 0;
};

std::unique_ptr<item_responder> gateway_responder(gateway& gw);
// mock://gold-echo answers every item with its gold answer phrased through
// a stock indicator; mock://silent answers with unrelated prose.
std::unique_ptr<item_responder> mock_responder(const std::string& url);
bool is_mock_endpoint(const std::string& url);

std::string build_prompt(const benchmark_item& item, const bench_config& cfg);

// One instance record per item: prompt, raw response, extraction, grading.
// Per-item responder failures become failure=no_extraction and the run
// continues. A custom rule set extends the stock indicator phrases.
std::vector<instance_record> run_benchmark(
    const std::vector<benchmark_item>& items, const bench_config& cfg,
    item_responder& responder, int workers = 1,
    const extraction_rule_set* rules = nullptr);

// 100 * correct / total, half-up to two decimals. Throws empty_run on [].
double compute_metric(const std::vector<instance_record>& records);

struct suite_report {
  std::vector<std::pair<std::string, double>> per_bench;  // two-decimal scores
  // category/overall means stay full-precision; serialization rounds
  std::map<bench_category, double> category_avgs;
  double all_avg = 0.0;

  ordered_json to_json() const;
  static suite_report from_json(const ordered_json& j);
};

// Default category map mirroring the stock suite; MMLU is excluded from
// aggregation unless the exclusion list says otherwise.
extern const std::vector<std::pair<std::string, bench_category>>
    kDefaultCategoryMap;
extern const std::vector<std::string> kDefaultExclusions;

// Unweighted category means over the member benches plus the unweighted
// mean over all included benches. Throws unmapped_bench for a score whose
// bench has no category.
suite_report aggregate_report(
    const std::vector<std::pair<std::string, double>>& per_bench_scores,
    const std::vector<std::pair<std::string, bench_category>>& category_map =
        kDefaultCategoryMap,
    const std::vector<std::string>& exclusions = kDefaultExclusions);

}  // namespace sciqa
