#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "sciqa/gateway.hpp"
#include "sciqa/prompts.hpp"
#include "sciqa/records.hpp"

namespace sciqa {

// Approximate token count of a text span. Must be monotone in byte length
// for the chunker's packing to behave.
using token_estimator = std::function<std::int64_t(std::string_view)>;

// ceil(bytes / chars_per_token)
token_estimator chars_per_token_estimator(double chars_per_token);

enum class boundary_preference { paragraph, sentence, hard };

struct chunk_config {
  std::int64_t budget_tokens = 4096;
  double chars_per_token = 4.0;
  boundary_preference boundary = boundary_preference::paragraph;
  token_estimator estimator;  // defaults to chars_per_token heuristic

  void validate() const;
};

// Splits doc text into budget-bounded chunks that concatenate back to the
// original bytes. Cut points prefer paragraph breaks, then sentence breaks,
// then hard cuts. Zero overlap.
std::vector<chunk> chunk_text(const source_doc& doc, const chunk_config& cfg);

struct classify_result {
  source_doc doc;
  bool parse_warning = false;  // fell back to unknown after a retry
};

// Parses "Subject:"/"Level:" lines out of a classification transcript.
// Returns false when neither line is usable.
bool parse_classification(const std::string& transcript, subject& subj,
                          level& lvl);

// Labels a document's subject and academic level through the gateway.
// Unparseable transcripts are retried once, then the doc keeps
// subject=unknown with a warning; below-university docs are excluded from
// extraction downstream.
classify_result classify_doc(const source_doc& doc, gateway& gw,
                             const prompt_library& prompts =
                                 prompt_library::defaults());

// Directory of .txt/.md files, one doc per file, doc_id = file stem.
std::vector<source_doc> load_doc_dir(const std::filesystem::path& dir);

}  // namespace sciqa
