#include <doctest.h>

#include <random>

#include "sciqa/corpus.hpp"
#include "support/fake_transport.hpp"

using namespace sciqa;
using namespace sciqa::testing;

namespace {

source_doc doc_of(std::string text) {
  source_doc d;
  d.doc_id = "doc1";
  d.subj = subject::physics;
  d.lvl = level::university;
  d.text = std::move(text);
  return d;
}

std::string join_chunks(const std::vector<chunk>& chunks) {
  std::string out;
  for (const auto& c : chunks) out += c.text;
  return out;
}

std::string random_prose(std::mt19937_64& rng, std::size_t words) {
  static const char* vocab[] = {"flux",    "energy", "cell",   "prime",
                                "orbit",   "ion",    "field",  "graph",
                                "tensor",  "wave",   "enzyme", "vector"};
  std::uniform_int_distribution<int> pick(0, 11);
  std::uniform_int_distribution<int> punct(0, 19);
  std::string text;
  for (std::size_t i = 0; i < words; ++i) {
    text += vocab[pick(rng)];
    int p = punct(rng);
    if (p == 0) {
      text += ".\n\n";
    } else if (p < 4) {
      text += ". ";
    } else {
      text += " ";
    }
  }
  return text;
}

}  // namespace

TEST_CASE("nine thousand tokens split into three bounded chunks") {
  chunk_config cfg;
  std::string text(9000 * 4, 'x');  // 9,000 tokens at 4 chars/token
  auto chunks = chunk_text(doc_of(text), cfg);
  CHECK(chunks.size() == 3);
  for (const auto& c : chunks) {
    CHECK(c.token_estimate <= cfg.budget_tokens);
  }
  CHECK(join_chunks(chunks) == text);
}

TEST_CASE("empty text yields no chunks") {
  chunk_config cfg;
  source_doc d = doc_of("x");
  d.text.clear();
  CHECK(chunk_text(d, cfg).empty());
}

TEST_CASE("exact-budget text stays one chunk") {
  chunk_config cfg;
  std::string text(4096 * 4, 'y');
  auto chunks = chunk_text(doc_of(text), cfg);
  REQUIRE(chunks.size() == 1);
  CHECK(chunks[0].token_estimate == 4096);
}

TEST_CASE("chunk ids are deterministic and ordered") {
  chunk_config cfg;
  cfg.budget_tokens = 64;
  auto chunks = chunk_text(doc_of(std::string(2000, 'z')), cfg);
  REQUIRE(chunks.size() > 1);
  CHECK(chunks[0].chunk_id == "doc1-c0000");
  CHECK(chunks[1].chunk_id == "doc1-c0001");
}

TEST_CASE("lossless partition over random prose") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 10; ++trial) {
    std::string text = random_prose(rng, 800);
    chunk_config cfg;
    cfg.budget_tokens = 64 + trial * 16;
    auto chunks = chunk_text(doc_of(text), cfg);
    CHECK(join_chunks(chunks) == text);
    for (const auto& c : chunks) {
      CHECK(c.token_estimate <= cfg.budget_tokens);
      CHECK(!c.text.empty());
    }
  }
}

TEST_CASE("bigger budgets never mean more chunks") {
  std::mt19937_64 rng(13);
  for (int trial = 0; trial < 6; ++trial) {
    std::string text = random_prose(rng, 1200);
    std::size_t prev_count = SIZE_MAX;
    for (std::int64_t budget : {64, 96, 128, 256, 512, 1024}) {
      chunk_config cfg;
      cfg.budget_tokens = budget;
      auto chunks = chunk_text(doc_of(text), cfg);
      CHECK(chunks.size() <= prev_count);
      prev_count = chunks.size();
    }
  }
}

TEST_CASE("paragraph boundaries win over mid-sentence cuts") {
  chunk_config cfg;
  cfg.budget_tokens = 64;  // 256-char window
  std::string para1(200, 'a');
  std::string para2(200, 'b');
  std::string text = para1 + "\n\n" + para2;
  auto chunks = chunk_text(doc_of(text), cfg);
  REQUIRE(chunks.size() == 2);
  CHECK(chunks[0].text == para1 + "\n\n");
  CHECK(chunks[1].text == para2);
}

TEST_CASE("classification transcript grammar") {
  subject s = subject::unknown;
  level l = level::unknown;
  CHECK(parse_classification("Subject: Physics\nLevel: University", s, l));
  CHECK(s == subject::physics);
  CHECK(l == level::university);

  s = subject::unknown;
  l = level::unknown;
  CHECK(parse_classification("Subject: Economics\nLevel: High School", s, l));
  CHECK(s == subject::economics);
  CHECK(l == level::below_university);

  s = subject::unknown;
  l = level::unknown;
  CHECK(!parse_classification("no usable lines here", s, l));

  CHECK(parse_classification("**Subject:** Computer Science\n**Level:** Graduate",
                             s, l));
  CHECK(s == subject::computer_science);
  CHECK(l == level::university);
}

TEST_CASE("classify_doc labels and excludes below-university docs") {
  auto dir = std::filesystem::temp_directory_path() / "sciqa_classify";
  std::filesystem::remove_all(dir);

  gateway_config cfg;
  cfg.cache_dir = dir;
  cfg.mode = cache_mode::passthrough;
  auto tr = std::make_unique<scripted_transport>(
      [](const std::string&, const std::string& body) {
        auto j = nlohmann::ordered_json::parse(body);
        std::string prompt =
            j.at("messages").back().at("content").get<std::string>();
        if (prompt.find("intro algebra") != std::string::npos) {
          return chat_body("Subject: Mathematics\nLevel: High School");
        }
        return chat_body("Subject: Physics\nLevel: University");
      });
  gateway gw(cfg, std::move(tr));

  auto uni = classify_doc(doc_of("quantum mechanics lecture notes"), gw);
  CHECK(uni.doc.subj == subject::physics);
  CHECK(uni.doc.lvl == level::university);
  CHECK(!uni.doc.excluded());
  CHECK(!uni.parse_warning);

  auto school = classify_doc(doc_of("intro algebra for kids"), gw);
  CHECK(school.doc.lvl == level::below_university);
  CHECK(school.doc.excluded());
  std::filesystem::remove_all(dir);
}

TEST_CASE("unparseable classification retries once then keeps the doc") {
  auto dir = std::filesystem::temp_directory_path() / "sciqa_classify2";
  std::filesystem::remove_all(dir);
  gateway_config cfg;
  cfg.cache_dir = dir;
  cfg.mode = cache_mode::passthrough;
  auto tr = std::make_unique<scripted_transport>(
      [](const std::string&, const std::string&) {
        return chat_body("complete gibberish with no labels");
      });
  auto* raw = tr.get();
  gateway gw(cfg, std::move(tr));

  auto result = classify_doc(doc_of("some text"), gw);
  CHECK(result.doc.subj == subject::unknown);
  CHECK(result.parse_warning);
  CHECK(raw->calls() == 2);  // one retry
  std::filesystem::remove_all(dir);
}
