#include <doctest.h>

#include <httplib.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <thread>

#include "sciqa/dedup.hpp"
#include "sciqa/records.hpp"
#include "support/fake_model.hpp"
#include "support/oracles.hpp"

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

// Serves the scripted model over real HTTP for CLI subprocesses.
class mock_server {
 public:
  mock_server() : handler_(full_model_endpoint()) {
    server_.Post(".*", [this](const httplib::Request& req,
                              httplib::Response& res) {
      res.set_content(handler_(req.path, req.body), "application/json");
    });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }

  ~mock_server() {
    server_.stop();
    thread_.join();
  }

  std::string base_url() const {
    return "http://127.0.0.1:" + std::to_string(port_);
  }

 private:
  handler_fn handler_;
  httplib::Server server_;
  int port_ = 0;
  std::thread thread_;
};

int run_cli(const std::string& args) {
  std::string cmd = std::string(SCIQA_CLI_PATH) + " " + args + " >/dev/null";
  int status = std::system(cmd.c_str());
  return WEXITSTATUS(status);
}

struct temp_dir {
  std::filesystem::path path;
  explicit temp_dir(const std::string& tag) {
    path = std::filesystem::temp_directory_path() / ("sciqa_cli_" + tag);
    std::filesystem::remove_all(path);
    std::filesystem::create_directories(path);
  }
  ~temp_dir() { std::filesystem::remove_all(path); }
};

}  // namespace

TEST_CASE("usage errors exit 2") {
  CHECK(run_cli("definitely-not-a-subcommand 2>/dev/null") == 2);
  CHECK(run_cli("dedup 2>/dev/null") == 2);  // missing required options
}

TEST_CASE("stage errors exit 1 with error json") {
  temp_dir dir("err");
  std::string cmd = std::string(SCIQA_CLI_PATH) +
                    " dedup --in /nonexistent.jsonl --out " +
                    (dir.path / "o.jsonl").string() + " --report " +
                    (dir.path / "r.json").string() + " 2>" +
                    (dir.path / "err.txt").string() + " >/dev/null";
  int status = std::system(cmd.c_str());
  CHECK(WEXITSTATUS(status) == 1);
  auto err = ordered_json::parse(slurp(dir.path / "err.txt"));
  CHECK(err.contains("error"));
  CHECK(err["error"].contains("message"));
}

TEST_CASE("dedup subcommand matches the checked-in golden report") {
  temp_dir dir("golden");
  auto demo = std::filesystem::path(SCIQA_DEMO_DIR);
  auto input = demo / "dedup_golden/input.qa.jsonl";
  auto out = dir.path / "out.qa.jsonl";
  auto report = dir.path / "report.json";
  CHECK(run_cli("dedup --threshold 0.6 --in " + input.string() + " --out " +
                out.string() + " --report " + report.string()) == 0);

  auto got = ordered_json::parse(slurp(report));
  auto golden =
      ordered_json::parse(slurp(demo / "dedup_golden/expected_report.json"));
  CHECK(got["report"] == golden["report"]);
  CHECK(got["counts"] == golden["counts"]);

  // the golden itself must agree with the brute-force oracle
  std::vector<std::pair<std::string, std::string>> id_questions;
  for (const auto& p : read_jsonl<qa_pair>(input)) {
    id_questions.emplace_back(p.pair_id, p.question);
  }
  auto oracle = brute_force_dedup(id_questions, 0.6, 5);
  std::vector<std::string> golden_kept;
  for (const auto& id : golden["report"]["kept_ids"]) {
    golden_kept.push_back(id.get<std::string>());
  }
  CHECK(golden_kept == oracle.kept);
}

TEST_CASE("eval against the gold-echo mock scores everything at 100") {
  temp_dir dir("eval");
  auto benches = std::filesystem::path(SCIQA_DEMO_DIR) / "benches";
  CHECK(run_cli("eval --model-endpoint mock://gold-echo --suite default "
                "--bench-dir " +
                benches.string() + " --out-dir " + (dir.path / "runs").string()) ==
        0);

  auto report =
      ordered_json::parse(slurp(dir.path / "runs/suite_report.json"));
  REQUIRE(report["per_bench"].size() == 15);
  for (const auto& item : report["per_bench"].items()) {
    CHECK(item.value().get<double>() == doctest::Approx(100.0));
  }
  CHECK(report["all_avg"].get<double>() == doctest::Approx(100.0));

  // every instance file validates on read
  for (const auto& entry :
       std::filesystem::directory_iterator(dir.path / "runs")) {
    if (entry.path().extension() != ".jsonl") continue;
    auto records = read_jsonl<instance_record>(entry.path());
    CHECK(!records.empty());
  }
}

TEST_CASE("pipeline subcommand chains stages over HTTP record then replay") {
  mock_server server;
  temp_dir dir("pipe");

  ordered_json cfg;
  cfg["out_dir"] = (dir.path / "out").string();
  cfg["input"] = (std::filesystem::path(SCIQA_DEMO_DIR) / "docs").string();
  cfg["bench_dir"] =
      (std::filesystem::path(SCIQA_DEMO_DIR) / "benches").string();
  cfg["workers"] = 2;
  cfg["gateway"] = {{"base_url", server.base_url()},
                    {"cache_dir", (dir.path / "cache").string()},
                    {"cache_mode", "record"}};
  cfg["stages"] = ordered_json::array(
      {{{"stage", "ingest"}},
       {{"stage", "extract"}, {"budget_tokens", 512}},
       {{"stage", "dedup"}, {"threshold", 0.6}},
       {{"stage", "refine"}},
       {{"stage", "filter"}},
       {{"stage", "decontam"}, {"k", 5}},
       {{"stage", "select"}, {"strategy", "difficulty"}, {"sample_count", 4}},
       {{"stage", "annotate"}}});
  auto cfg_path = dir.path / "pipeline.json";
  {
    std::ofstream out(cfg_path);
    out << cfg.dump(2) << "\n";
  }

  CHECK(run_cli("pipeline --config " + cfg_path.string() + " --cache record") ==
        0);

  // manifests chain: out of stage i equals in of stage i+1 for qa stages
  const char* chain[] = {"extract", "dedup",  "refine", "filter",
                         "decontam", "select", "annotate"};
  for (std::size_t i = 0; i + 1 < std::size(chain); ++i) {
    auto a = read_manifest(dir.path / "out" /
                           (std::string(chain[i]) + ".manifest.json"));
    auto b = read_manifest(dir.path / "out" /
                           (std::string(chain[i + 1]) + ".manifest.json"));
    CAPTURE(chain[i]);
    CHECK(a.total_out() == b.total_in());
  }

  // replay run with the recorded cache, no live endpoint required
  ordered_json replay_cfg = cfg;
  replay_cfg["out_dir"] = (dir.path / "replay_out").string();
  replay_cfg["gateway"]["base_url"] = "http://127.0.0.1:9";  // unreachable
  auto replay_path = dir.path / "replay.json";
  {
    std::ofstream out(replay_path);
    out << replay_cfg.dump(2) << "\n";
  }
  CHECK(run_cli("pipeline --config " + replay_path.string() +
                " --cache replay") == 0);
  CHECK(slurp(dir.path / "out/annotate.qa.jsonl") ==
        slurp(dir.path / "replay_out/annotate.qa.jsonl"));
}

TEST_CASE("report re-aggregation is a fixed point") {
  temp_dir dir("report");
  auto benches = std::filesystem::path(SCIQA_DEMO_DIR) / "benches";
  REQUIRE(run_cli("eval --model-endpoint mock://gold-echo --bench-dir " +
                  benches.string() + " --out-dir " +
                  (dir.path / "runs").string()) == 0);
  auto original = dir.path / "runs/suite_report.json";
  auto rederived = dir.path / "re.json";
  CHECK(run_cli("report --from-report " + original.string() + " --out " +
                rederived.string()) == 0);
  CHECK(slurp(original) == slurp(rederived));

  auto from_instances = dir.path / "from_instances.json";
  CHECK(run_cli("report --runs-dir " + (dir.path / "runs").string() +
                " --out " + from_instances.string()) == 0);
  CHECK(ordered_json::parse(slurp(from_instances))["all_avg"] ==
        ordered_json::parse(slurp(original))["all_avg"]);
}
