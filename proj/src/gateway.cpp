#include "sciqa/gateway.hpp"

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <random>
#include <sstream>
#include <thread>

#include <httplib.h>

#include "sciqa/error.hpp"
#include "sciqa/util.hpp"

namespace sciqa {

chat_request chat_request::single_user(std::string model_tag,
                                       std::string text) {
  chat_request req;
  req.model_tag = std::move(model_tag);
  req.messages.push_back({"user", std::move(text)});
  return req;
}

cache_mode cache_mode_from_string(const std::string& s) {
  if (s == "record") return cache_mode::record;
  if (s == "replay") return cache_mode::replay;
  if (s == "passthrough") return cache_mode::passthrough;
  throw usage_error("unknown cache mode '" + s + "'");
}

std::string to_string(cache_mode m) {
  switch (m) {
    case cache_mode::record: return "record";
    case cache_mode::replay: return "replay";
    case cache_mode::passthrough: return "passthrough";
  }
  return "record";
}

// --- replay cache -------------------------------------------------------------

replay_cache::replay_cache(std::filesystem::path dir, cache_mode mode)
    : dir_(std::move(dir)), mode_(mode) {
  if (mode_ != cache_mode::passthrough) {
    std::filesystem::create_directories(dir_);
  }
}

std::string replay_cache::key_of(const std::string& endpoint_kind,
                                 const ordered_json& request) {
  std::string canon = endpoint_kind + "\x1f" + request.dump();
  std::uint64_t h1 = fnv1a64(canon);
  std::uint64_t h2 = fnv1a64(canon, 0x9ae16a3b2f90404fULL);
  return to_hex(h1) + to_hex(h2);
}

std::optional<std::string> replay_cache::lookup(const std::string& key) const {
  std::ifstream in(dir_ / (key + ".json"));
  if (!in.good()) return std::nullopt;
  std::stringstream buf;
  buf << in.rdbuf();
  try {
    auto j = ordered_json::parse(buf.str());
    return j.at("response").get<std::string>();
  } catch (const nlohmann::json::exception&) {
    return std::nullopt;  // treat a torn entry as a miss
  }
}

void replay_cache::store(const std::string& key,
                         const std::string& endpoint_kind,
                         const ordered_json& request,
                         const std::string& response) const {
  ordered_json entry;
  entry["key"] = key;
  entry["endpoint"] = endpoint_kind;
  entry["request"] = request;
  entry["response"] = response;
  auto tmp = dir_ / (key + ".json.tmp");
  auto final_path = dir_ / (key + ".json");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw error("cannot write cache entry " + tmp.string());
    out << entry.dump() << '\n';
  }
  std::filesystem::rename(tmp, final_path);
}

// --- http transport -----------------------------------------------------------

namespace {

class http_transport final : public transport {
 public:
  http_transport(std::string base_url, std::string token)
      : base_url_(std::move(base_url)), token_(std::move(token)) {}

  std::string post_json(const std::string& path,
                        const std::string& body) override {
    httplib::Client client(base_url_);
    client.set_connection_timeout(30);
    client.set_read_timeout(300);
    httplib::Headers headers;
    if (!token_.empty()) {
      headers.emplace("Authorization", "Bearer " + token_);
    }
    auto res = client.Post(path, headers, body, "application/json");
    if (!res) {
      throw transient_error("connection to " + base_url_ + " failed: " +
                            httplib::to_string(res.error()));
    }
    if (res->status == 408 || res->status == 409 || res->status == 429 ||
        res->status >= 500) {
      throw transient_error("endpoint returned HTTP " +
                            std::to_string(res->status));
    }
    if (res->status >= 400) {
      throw error("endpoint returned HTTP " + std::to_string(res->status) +
                  ": " + res->body);
    }
    return res->body;
  }

 private:
  std::string base_url_;
  std::string token_;
};

void validate_request(const chat_request& req) {
  if (req.messages.empty()) {
    throw invariant_violation("messages", "must be nonempty");
  }
  const std::string& first = req.messages.front().role;
  if (first != "system" && first != "user") {
    throw invariant_violation("messages", "first role must be system or user");
  }
  if (req.temperature < 0) {
    throw invariant_violation("temperature", "must be >= 0");
  }
  if (req.top_p <= 0 || req.top_p > 1) {
    throw invariant_violation("top_p", "must be in (0, 1]");
  }
  if (req.max_output_tokens <= 0) {
    throw invariant_violation("max_output_tokens", "must be positive");
  }
}

std::string parse_chat_response(const std::string& body) {
  ordered_json j;
  try {
    j = ordered_json::parse(body);
  } catch (const nlohmann::json::exception& ex) {
    throw malformed_response(std::string("chat response is not JSON: ") +
                             ex.what());
  }
  if (!j.contains("choices") || !j.at("choices").is_array() ||
      j.at("choices").empty()) {
    throw malformed_response("chat response has no choices");
  }
  const auto& first = j.at("choices").at(0);
  if (first.contains("message") && first.at("message").contains("content") &&
      first.at("message").at("content").is_string()) {
    return first.at("message").at("content").get<std::string>();
  }
  if (first.contains("text") && first.at("text").is_string()) {
    return first.at("text").get<std::string>();
  }
  throw malformed_response("chat response choice has no text");
}

std::vector<double> normalize_vector(std::vector<double> v) {
  double norm = 0.0;
  for (double x : v) norm += x * x;
  norm = std::sqrt(norm);
  if (!(norm > 0.0) || std::isnan(norm) || std::isinf(norm)) {
    throw malformed_response("embedding vector has no usable norm");
  }
  for (double& x : v) x /= norm;
  return v;
}

}  // namespace

std::unique_ptr<transport> make_http_transport(const std::string& base_url,
                                               const std::string& api_token) {
  return std::make_unique<http_transport>(base_url, api_token);
}

ordered_json to_json(const chat_request& req) {
  ordered_json j;
  j["model"] = req.model_tag;
  ordered_json msgs = ordered_json::array();
  for (const auto& m : req.messages) {
    ordered_json msg;
    msg["role"] = m.role;
    msg["content"] = m.text;
    msgs.push_back(std::move(msg));
  }
  j["messages"] = std::move(msgs);
  j["temperature"] = req.temperature;
  j["top_p"] = req.top_p;
  j["max_tokens"] = req.max_output_tokens;
  if (req.seed_hint) j["seed"] = *req.seed_hint;
  return j;
}

std::string chat_cache_key(const chat_request& req) {
  return replay_cache::key_of("chat", to_json(req));
}

// --- gateway -------------------------------------------------------------------

gateway::gateway(gateway_config cfg, std::unique_ptr<transport> tr)
    : cfg_(std::move(cfg)),
      transport_(std::move(tr)),
      cache_(cfg_.cache_dir, cfg_.mode) {
  if (!transport_ && cfg_.mode != cache_mode::replay) {
    const char* token = std::getenv(cfg_.api_token_env.c_str());
    transport_ = make_http_transport(cfg_.base_url, token ? token : "");
  }
}

std::string gateway::model_for(const std::string& role) const {
  auto it = cfg_.model_tags.find(role);
  if (it != cfg_.model_tags.end()) return it->second;
  auto def = cfg_.model_tags.find("default");
  if (def != cfg_.model_tags.end()) return def->second;
  return "default";
}

void gateway::acquire_slot() {
  std::unique_lock<std::mutex> lock(slot_mutex_);
  slot_cv_.wait(lock, [&] { return in_flight_ < cfg_.max_in_flight; });
  ++in_flight_;
}

void gateway::release_slot() {
  {
    std::lock_guard<std::mutex> lock(slot_mutex_);
    --in_flight_;
  }
  slot_cv_.notify_one();
}

std::string gateway::call_with_retries(const std::string& path,
                                       const std::string& body) {
  if (!transport_) {
    throw cache_miss("no transport configured and response not cached");
  }
  std::mt19937_64 rng(std::random_device{}());
  int attempt = 0;
  for (;;) {
    ++attempt;
    stats_.network_attempts.fetch_add(1);
    try {
      acquire_slot();
      struct slot_guard {
        gateway* g;
        ~slot_guard() { g->release_slot(); }
      } guard{this};
      return transport_->post_json(path, body);
    } catch (const transient_error&) {
      if (attempt >= cfg_.retry.max_attempts) throw;
      stats_.retries.fetch_add(1);
      double delay = cfg_.retry.base_delay_ms *
                     std::pow(2.0, static_cast<double>(attempt - 1));
      delay = std::min(delay, static_cast<double>(cfg_.retry.max_delay_ms));
      if (cfg_.retry.jitter && delay > 0) {
        std::uniform_real_distribution<double> dist(0.5, 1.0);
        delay *= dist(rng);
      }
      std::this_thread::sleep_for(
          std::chrono::milliseconds(static_cast<int>(delay)));
    }
  }
}

std::string gateway::complete_chat(const chat_request& req) {
  validate_request(req);
  stats_.chat_calls.fetch_add(1);
  ordered_json request_json = to_json(req);
  std::string key = replay_cache::key_of("chat", request_json);

  if (cfg_.mode != cache_mode::passthrough) {
    if (auto hit = cache_.lookup(key)) {
      stats_.cache_hits.fetch_add(1);
      return *hit;
    }
    if (cfg_.mode == cache_mode::replay) {
      throw cache_miss("replay cache has no entry for chat key " + key);
    }
  }

  std::string body = call_with_retries("/chat/completions", request_json.dump());
  std::string text = parse_chat_response(body);
  if (cfg_.mode == cache_mode::record) {
    cache_.store(key, "chat", request_json, text);
  }
  return text;
}

std::vector<std::vector<double>> gateway::embed_texts(
    const std::vector<std::string>& texts) {
  if (texts.empty()) throw empty_input("embed_texts requires at least one text");
  stats_.embed_calls.fetch_add(1);
  const std::string model = model_for("embedder");

  std::vector<std::vector<double>> out(texts.size());
  std::vector<std::size_t> misses;
  std::vector<std::string> keys(texts.size());

  for (std::size_t i = 0; i < texts.size(); ++i) {
    ordered_json request_json;
    request_json["model"] = model;
    request_json["input"] = texts[i];
    keys[i] = replay_cache::key_of("embed", request_json);
    if (cfg_.mode != cache_mode::passthrough) {
      if (auto hit = cache_.lookup(keys[i])) {
        stats_.cache_hits.fetch_add(1);
        auto j = ordered_json::parse(*hit);
        out[i] = j.get<std::vector<double>>();
        continue;
      }
      if (cfg_.mode == cache_mode::replay) {
        throw cache_miss("replay cache has no entry for embedding of text #" +
                         std::to_string(i));
      }
    }
    misses.push_back(i);
  }

  // fetch misses in batches, cache per text
  const std::size_t batch = 64;
  for (std::size_t start = 0; start < misses.size(); start += batch) {
    std::size_t stop = std::min(start + batch, misses.size());
    ordered_json request_json;
    request_json["model"] = model;
    ordered_json inputs = ordered_json::array();
    for (std::size_t k = start; k < stop; ++k) {
      inputs.push_back(texts[misses[k]]);
    }
    request_json["input"] = std::move(inputs);

    std::string body = call_with_retries("/embeddings", request_json.dump());
    ordered_json j;
    try {
      j = ordered_json::parse(body);
    } catch (const nlohmann::json::exception& ex) {
      throw malformed_response(std::string("embedding response is not JSON: ") +
                               ex.what());
    }
    if (!j.contains("data") || !j.at("data").is_array() ||
        j.at("data").size() != stop - start) {
      throw malformed_response("embedding response arity mismatch");
    }
    for (std::size_t k = start; k < stop; ++k) {
      const auto& entry = j.at("data").at(k - start);
      if (!entry.contains("embedding") || !entry.at("embedding").is_array()) {
        throw malformed_response("embedding entry has no vector");
      }
      std::vector<double> v =
          entry.at("embedding").get<std::vector<double>>();
      out[misses[k]] = normalize_vector(std::move(v));
      if (cfg_.mode == cache_mode::record) {
        ordered_json single;
        single["model"] = model;
        single["input"] = texts[misses[k]];
        cache_.store(keys[misses[k]], "embed", single,
                     ordered_json(out[misses[k]]).dump());
      }
    }
  }

  // a provider switching dimensions mid-run poisons every similarity
  std::lock_guard<std::mutex> lock(dim_mutex_);
  for (const auto& v : out) {
    if (embed_dim_ == 0) embed_dim_ = v.size();
    if (v.size() != embed_dim_) {
      throw dimension_mismatch(
          "embedding dimension changed from " + std::to_string(embed_dim_) +
          " to " + std::to_string(v.size()));
    }
  }
  return out;
}

}  // namespace sciqa
