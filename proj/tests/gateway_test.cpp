#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "sciqa/error.hpp"
#include "sciqa/gateway.hpp"
#include "sciqa/util.hpp"
#include "support/fake_transport.hpp"

using namespace sciqa;
using namespace sciqa::testing;

namespace {

struct temp_dir {
  std::filesystem::path path;
  explicit temp_dir(const std::string& tag) {
    path = std::filesystem::temp_directory_path() / ("sciqa_" + tag);
    std::filesystem::remove_all(path);
    std::filesystem::create_directories(path);
  }
  ~temp_dir() { std::filesystem::remove_all(path); }
};

gateway_config cfg_for(const temp_dir& dir, cache_mode mode) {
  gateway_config cfg;
  cfg.cache_dir = dir.path;
  cfg.mode = mode;
  cfg.retry.base_delay_ms = 0;
  cfg.retry.jitter = false;
  return cfg;
}

}  // namespace

TEST_CASE("replayed request returns cached text with zero network calls") {
  temp_dir dir("gw_replay");
  chat_request req = chat_request::single_user("m", "hello");

  {
    auto tr = std::make_unique<scripted_transport>(echo_endpoint());
    gateway gw(cfg_for(dir, cache_mode::record), std::move(tr));
    CHECK(gw.complete_chat(req) == "echo: hello");
  }

  auto tr = std::make_unique<scripted_transport>(
      [](const std::string&, const std::string&) -> std::string {
        throw transient_error("network must not be touched in replay");
      });
  auto* raw = tr.get();
  gateway gw(cfg_for(dir, cache_mode::replay), std::move(tr));
  CHECK(gw.complete_chat(req) == "echo: hello");
  CHECK(gw.complete_chat(req) == "echo: hello");
  CHECK(raw->calls() == 0);
}

TEST_CASE("replay miss is an error, never a network call") {
  temp_dir dir("gw_miss");
  auto tr = std::make_unique<scripted_transport>(echo_endpoint());
  auto* raw = tr.get();
  gateway gw(cfg_for(dir, cache_mode::replay), std::move(tr));
  CHECK_THROWS_AS(gw.complete_chat(chat_request::single_user("m", "new")),
                  cache_miss);
  CHECK(raw->calls() == 0);
}

TEST_CASE("two transient failures then success means three attempts") {
  temp_dir dir("gw_retry");
  std::atomic<int> n{0};
  auto tr = std::make_unique<scripted_transport>(
      [&n](const std::string&, const std::string&) -> std::string {
        if (n.fetch_add(1) < 2) throw transient_error("flaky");
        return chat_body("finally");
      });
  auto* raw = tr.get();
  gateway gw(cfg_for(dir, cache_mode::passthrough), std::move(tr));
  CHECK(gw.complete_chat(chat_request::single_user("m", "x")) == "finally");
  CHECK(raw->calls() == 3);
  CHECK(gw.stats().network_attempts.load() == 3);
  CHECK(gw.stats().retries.load() == 2);
}

TEST_CASE("retries give up after the configured cap") {
  temp_dir dir("gw_cap");
  auto tr = std::make_unique<scripted_transport>(
      [](const std::string&, const std::string&) -> std::string {
        throw transient_error("always down");
      });
  auto* raw = tr.get();
  auto cfg = cfg_for(dir, cache_mode::passthrough);
  cfg.retry.max_attempts = 4;
  gateway gw(cfg, std::move(tr));
  CHECK_THROWS_AS(gw.complete_chat(chat_request::single_user("m", "x")),
                  transient_error);
  CHECK(raw->calls() == 4);
}

TEST_CASE("malformed response is not retried") {
  temp_dir dir("gw_malformed");
  auto tr = std::make_unique<scripted_transport>(
      [](const std::string&, const std::string&) { return std::string("{}"); });
  auto* raw = tr.get();
  gateway gw(cfg_for(dir, cache_mode::passthrough), std::move(tr));
  CHECK_THROWS_AS(gw.complete_chat(chat_request::single_user("m", "x")),
                  malformed_response);
  CHECK(raw->calls() == 1);
}

TEST_CASE("request validation") {
  temp_dir dir("gw_validate");
  gateway gw(cfg_for(dir, cache_mode::passthrough),
             std::make_unique<scripted_transport>(echo_endpoint()));
  chat_request req;
  req.model_tag = "m";
  CHECK_THROWS_AS(gw.complete_chat(req), invariant_violation);
  req.messages.push_back({"assistant", "nope"});
  CHECK_THROWS_AS(gw.complete_chat(req), invariant_violation);
}

TEST_CASE("identical texts embed identically and unit-normalized") {
  temp_dir dir("gw_embed");
  gateway gw(cfg_for(dir, cache_mode::record),
             std::make_unique<scripted_transport>(echo_endpoint()));
  auto vecs = gw.embed_texts({"a", "a", "b"});
  REQUIRE(vecs.size() == 3);
  CHECK(vecs[0] == vecs[1]);
  CHECK(vecs[0] != vecs[2]);
  for (const auto& v : vecs) {
    double norm = 0;
    for (double x : v) norm += x * x;
    CHECK(std::abs(std::sqrt(norm) - 1.0) <= 1e-6);
  }
}

TEST_CASE("empty embedding input is rejected") {
  temp_dir dir("gw_embed_empty");
  gateway gw(cfg_for(dir, cache_mode::record),
             std::make_unique<scripted_transport>(echo_endpoint()));
  CHECK_THROWS_AS(gw.embed_texts({}), empty_input);
}

TEST_CASE("dimension change mid-run is detected") {
  temp_dir dir("gw_dim");
  std::atomic<int> call{0};
  auto tr = std::make_unique<scripted_transport>(
      [&call](const std::string&, const std::string& body) {
        std::size_t dim = call.fetch_add(1) == 0 ? 8 : 12;
        std::vector<std::vector<double>> vecs;
        for (const auto& text : embedding_inputs(body)) {
          vecs.push_back(hash_embedding(text, dim));
        }
        return embeddings_body(vecs);
      });
  gateway gw(cfg_for(dir, cache_mode::passthrough), std::move(tr));
  CHECK(gw.embed_texts({"one"}).size() == 1);
  CHECK_THROWS_AS(gw.embed_texts({"two"}), dimension_mismatch);
}

TEST_CASE("in-flight requests never exceed the configured bound") {
  temp_dir dir("gw_bound");
  auto tr = std::make_unique<scripted_transport>(echo_endpoint());
  auto* raw = tr.get();
  auto cfg = cfg_for(dir, cache_mode::passthrough);
  cfg.max_in_flight = 2;
  gateway gw(cfg, std::move(tr));

  parallel_for(24, 8, [&](std::size_t i) {
    gw.complete_chat(chat_request::single_user("m", "req" + std::to_string(i)));
  });
  CHECK(raw->calls() == 24);
  CHECK(raw->max_concurrent() <= 2);
}

TEST_CASE("cache keys separate temperature and seed hints") {
  chat_request a = chat_request::single_user("m", "same");
  chat_request b = a;
  b.seed_hint = 5;
  chat_request c = a;
  c.temperature = 0.7;

  CHECK(chat_cache_key(a) != chat_cache_key(b));
  CHECK(chat_cache_key(a) != chat_cache_key(c));
  CHECK(chat_cache_key(b) != chat_cache_key(c));
}
