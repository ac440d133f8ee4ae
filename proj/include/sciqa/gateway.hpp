#pragma once

#include <atomic>
#include <condition_variable>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "sciqa/records.hpp"

namespace sciqa {

struct chat_message {
  std::string role;  // system | user | assistant
  std::string text;
};

struct chat_request {
  std::string model_tag;
  std::vector<chat_message> messages;
  double temperature = 0.0;
  double top_p = 1.0;
  int max_output_tokens = 4096;
  // Distinguishes repeated samples of the same prompt in the cache key.
  std::optional<std::int64_t> seed_hint;

  static chat_request single_user(std::string model_tag, std::string text);
};

// Wire/JSON form of a chat request; also the replay-cache key material.
ordered_json to_json(const chat_request& req);
std::string chat_cache_key(const chat_request& req);

enum class cache_mode { record, replay, passthrough };

cache_mode cache_mode_from_string(const std::string& s);
std::string to_string(cache_mode m);

// Keyed store of raw endpoint responses. record = consult then persist,
// replay = cache only (a miss is an error, never a network call),
// passthrough = network only.
class replay_cache {
 public:
  replay_cache(std::filesystem::path dir, cache_mode mode);

  cache_mode mode() const { return mode_; }
  std::optional<std::string> lookup(const std::string& key) const;
  // Atomic: write-temp-then-rename, safe with one writer per key.
  void store(const std::string& key, const std::string& endpoint_kind,
             const ordered_json& request, const std::string& response) const;

  static std::string key_of(const std::string& endpoint_kind,
                            const ordered_json& request);

 private:
  std::filesystem::path dir_;
  cache_mode mode_;
};

// Transport over the chat-completions / embeddings HTTP JSON shape.
// Swappable so tests can script and instrument the endpoint.
class transport {
 public:
  virtual ~transport() = default;
  // POST the JSON body; returns the raw response body.
  // Throws transient_error for retriable failures.
  virtual std::string post_json(const std::string& path,
                                const std::string& body) = 0;
};

std::unique_ptr<transport> make_http_transport(const std::string& base_url,
                                               const std::string& api_token);

struct retry_policy {
  int max_attempts = 5;
  int base_delay_ms = 200;
  int max_delay_ms = 5000;
  bool jitter = true;
};

struct gateway_config {
  std::string base_url;
  std::string api_token_env = "SCIQA_API_TOKEN";
  // role -> model tag (classifier, extractor, refiner, judge, annotator,
  // embedder, sampler, scorer)
  std::map<std::string, std::string> model_tags;
  std::filesystem::path cache_dir = ".sciqa-cache";
  cache_mode mode = cache_mode::record;
  int max_in_flight = 8;
  retry_policy retry;
};

struct gateway_stats {
  std::atomic<std::int64_t> chat_calls{0};
  std::atomic<std::int64_t> embed_calls{0};
  std::atomic<std::int64_t> cache_hits{0};
  std::atomic<std::int64_t> network_attempts{0};
  std::atomic<std::int64_t> retries{0};
};

class gateway {
 public:
  gateway(gateway_config cfg, std::unique_ptr<transport> tr = nullptr);

  // Full response text of one chat completion. Retries transient failures
  // with capped exponential backoff; replay mode never touches the network.
  std::string complete_chat(const chat_request& req);

  // One L2-normalized vector per input text, order preserved. Texts are
  // cached individually so reruns replay regardless of batching.
  std::vector<std::vector<double>> embed_texts(
      const std::vector<std::string>& texts);

  const gateway_config& config() const { return cfg_; }
  gateway_stats& stats() { return stats_; }
  std::string model_for(const std::string& role) const;

 private:
  std::string call_with_retries(const std::string& path,
                                const std::string& body);
  void acquire_slot();
  void release_slot();

  gateway_config cfg_;
  std::unique_ptr<transport> transport_;
  replay_cache cache_;
  gateway_stats stats_;

  std::mutex slot_mutex_;
  std::condition_variable slot_cv_;
  int in_flight_ = 0;

  std::mutex dim_mutex_;
  std::size_t embed_dim_ = 0;
};

}  // namespace sciqa
