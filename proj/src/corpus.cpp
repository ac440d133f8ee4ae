#include "sciqa/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "sciqa/error.hpp"
#include "sciqa/util.hpp"

namespace sciqa {

token_estimator chars_per_token_estimator(double chars_per_token) {
  return [chars_per_token](std::string_view text) -> std::int64_t {
    if (text.empty()) return 0;
    return static_cast<std::int64_t>(
        std::ceil(static_cast<double>(text.size()) / chars_per_token));
  };
}

void chunk_config::validate() const {
  if (budget_tokens < 64) {
    throw invariant_violation("budget_tokens", "must be >= 64");
  }
  if (chars_per_token <= 0) {
    throw invariant_violation("chars_per_token", "must be positive");
  }
}

namespace {

bool utf8_continuation(unsigned char c) { return (c & 0xC0) == 0x80; }

// Largest cut <= limit that does not split a UTF-8 sequence; falls forward
// when backing off would stall the chunker.
std::size_t utf8_safe_cut(std::string_view text, std::size_t start,
                          std::size_t limit) {
  std::size_t cut = std::min(limit, text.size());
  while (cut > start + 1 && cut < text.size() &&
         utf8_continuation(static_cast<unsigned char>(text[cut]))) {
    --cut;
  }
  if (cut <= start) {
    cut = start + 1;
    while (cut < text.size() &&
           utf8_continuation(static_cast<unsigned char>(text[cut]))) {
      ++cut;
    }
  }
  return cut;
}

// Cut position after the latest boundary of the strongest class inside
// (start, limit]. Boundary chars stay in the left chunk so concatenation is
// lossless.
std::size_t pick_cut(std::string_view text, std::size_t start,
                     std::size_t limit, boundary_preference pref) {
  if (pref == boundary_preference::paragraph) {
    // position after the latest blank-line run in the window
    for (std::size_t i = limit; i-- > start + 1;) {
      if (text[i] == '\n' && text[i - 1] == '\n') {
        return i + 1;
      }
    }
  }
  if (pref == boundary_preference::paragraph ||
      pref == boundary_preference::sentence) {
    for (std::size_t i = limit; i-- > start + 1;) {
      char c = text[i - 1];
      bool sentence_end = (c == '.' || c == '!' || c == '?') &&
                          (text[i] == ' ' || text[i] == '\n');
      if (sentence_end || text[i - 1] == '\n') {
        return i;
      }
    }
  }
  return utf8_safe_cut(text, start, limit);
}

}  // namespace

std::vector<chunk> chunk_text(const source_doc& doc, const chunk_config& cfg) {
  cfg.validate();
  const token_estimator estimate =
      cfg.estimator ? cfg.estimator : chars_per_token_estimator(cfg.chars_per_token);
  std::string_view text = doc.text;
  std::vector<chunk> chunks;
  if (text.empty()) return chunks;

  // Char window implied by the budget; exact fit is rechecked below.
  std::size_t window = static_cast<std::size_t>(std::max<double>(
      1.0, std::floor(static_cast<double>(cfg.budget_tokens) *
                      cfg.chars_per_token)));

  std::size_t start = 0;
  int ordinal = 0;
  while (start < text.size()) {
    std::string_view rest = text.substr(start);
    std::size_t take;
    if (estimate(rest) <= cfg.budget_tokens) {
      take = text.size() - start;
    } else {
      // largest prefix within budget, bisected against the estimator
      std::size_t lo = 1;
      std::size_t hi = std::min(rest.size(), window + 8);
      while (lo < hi) {
        std::size_t mid = (lo + hi + 1) / 2;
        if (estimate(rest.substr(0, mid)) <= cfg.budget_tokens) {
          lo = mid;
        } else {
          hi = mid - 1;
        }
      }
      std::size_t limit = start + lo;
      take = pick_cut(text, start, limit, cfg.boundary) - start;
    }

    chunk c;
    c.doc_id = doc.doc_id;
    c.subj = doc.subj;
    c.text = std::string(text.substr(start, take));
    c.token_estimate = estimate(c.text);
    char suffix[24];
    std::snprintf(suffix, sizeof(suffix), "-c%04d", ordinal++);
    c.chunk_id = doc.doc_id + suffix;
    chunks.push_back(std::move(c));
    start += take;
  }
  return chunks;
}

bool parse_classification(const std::string& transcript, subject& subj,
                          level& lvl) {
  bool saw_subject = false;
  bool saw_level = false;
  for (const std::string& raw : split_lines(transcript)) {
    std::string line = trim(raw);
    // tolerate markdown bold around the keyword
    while (!line.empty() && (line.front() == '*' || line.front() == '#')) {
      line.erase(line.begin());
    }
    line = trim(line);
    if (starts_with_ci(line, "subject")) {
      std::size_t colon = line.find(':');
      if (colon == std::string::npos) continue;
      std::string value = to_lower(trim(line.substr(colon + 1)));
      if (value.find("biolog") != std::string::npos) subj = subject::biology;
      else if (value.find("chemi") != std::string::npos) subj = subject::chemistry;
      else if (value.find("computer") != std::string::npos ||
               value.find("artificial intelligence") != std::string::npos)
        subj = subject::computer_science;
      else if (value.find("econom") != std::string::npos) subj = subject::economics;
      else if (value.find("math") != std::string::npos) subj = subject::mathematics;
      else if (value.find("medic") != std::string::npos) subj = subject::medicine;
      else if (value.find("physic") != std::string::npos) subj = subject::physics;
      else continue;
      saw_subject = true;
    } else if (starts_with_ci(line, "level")) {
      std::size_t colon = line.find(':');
      if (colon == std::string::npos) continue;
      std::string value = to_lower(trim(line.substr(colon + 1)));
      if (value.find("below") != std::string::npos ||
          value.find("high school") != std::string::npos ||
          value.find("secondary") != std::string::npos ||
          value.find("middle school") != std::string::npos ||
          value.find("elementary") != std::string::npos ||
          value.find("primary") != std::string::npos) {
        lvl = level::below_university;
        saw_level = true;
      } else if (value.find("university") != std::string::npos ||
                 value.find("college") != std::string::npos ||
                 value.find("graduate") != std::string::npos ||
                 value.find("undergraduate") != std::string::npos) {
        lvl = level::university;
        saw_level = true;
      }
    }
  }
  return saw_subject || saw_level;
}

classify_result classify_doc(const source_doc& doc, gateway& gw,
                             const prompt_library& prompts) {
  if (doc.text.empty()) {
    throw invariant_violation("text", "must be nonempty");
  }
  // the opening of a book identifies it; cap the excerpt for cost
  constexpr std::size_t kExcerpt = 4000;
  std::string excerpt = doc.text.substr(0, kExcerpt);
  std::string prompt =
      replace_all(prompts.doc_classification(), "<DOCUMENT>", excerpt);

  classify_result result;
  result.doc = doc;
  subject subj = subject::unknown;
  level lvl = level::unknown;
  for (int attempt = 0; attempt < 2; ++attempt) {
    chat_request req = chat_request::single_user(gw.model_for("classifier"),
                                                 prompt);
    if (attempt > 0) req.seed_hint = attempt;  // distinct cache key for retry
    std::string transcript = gw.complete_chat(req);
    if (parse_classification(transcript, subj, lvl)) {
      result.doc.subj = subj;
      result.doc.lvl = lvl;
      return result;
    }
  }
  result.doc.subj = subject::unknown;
  result.doc.lvl = level::unknown;
  result.parse_warning = true;  // retained for manual review
  return result;
}

std::vector<source_doc> load_doc_dir(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) {
    throw error("document directory not found: " + dir.string());
  }
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    auto ext = entry.path().extension();
    if (ext == ".txt" || ext == ".md") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  std::vector<source_doc> docs;
  for (const auto& file : files) {
    std::ifstream in(file, std::ios::binary);
    std::stringstream buf;
    buf << in.rdbuf();
    source_doc doc;
    doc.doc_id = file.stem().string();
    doc.text = buf.str();
    doc.provenance = file.string();
    if (doc.text.empty()) continue;  // empty files are not documents
    docs.push_back(std::move(doc));
  }
  return docs;
}

}  // namespace sciqa
