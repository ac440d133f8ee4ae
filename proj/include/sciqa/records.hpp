#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

namespace sciqa {

using ordered_json = nlohmann::ordered_json;

// --- enums ------------------------------------------------------------------

enum class subject {
  biology,
  chemistry,
  computer_science,
  economics,
  mathematics,
  medicine,
  physics,
  unknown,
};

enum class level { below_university, university, unknown };

enum class qa_standard { high, low, external };

enum class stage_flag {
  deduped_survivor,
  decontaminated_survivor,
  has_cot,
  selected,
};

enum class question_kind { multi_choice, computational, true_false, open };

enum class failure_kind { no_extraction, mismatch };

enum class pipeline_stage {
  ingest,
  extract,
  dedup,
  refine,
  filter,
  decontam,
  select,
  annotate,
  eval,
};

const std::vector<subject>& all_subjects();  // the seven subjects + unknown

std::string to_string(subject s);
std::string to_string(level l);
std::string to_string(qa_standard s);
std::string to_string(stage_flag f);
std::string to_string(question_kind k);
std::string to_string(failure_kind f);
std::string to_string(pipeline_stage s);

subject subject_from_string(const std::string& s);
level level_from_string(const std::string& s);
qa_standard standard_from_string(const std::string& s);
stage_flag stage_flag_from_string(const std::string& s);
question_kind kind_from_string(const std::string& s);
failure_kind failure_from_string(const std::string& s);
pipeline_stage stage_from_string(const std::string& s);

// --- records ----------------------------------------------------------------

// Every record keeps unknown fields from its source line so files can pass
// through the pipeline without data loss. Extras never enter content hashes.

struct source_doc {
  std::string doc_id;
  subject subj = subject::unknown;
  level lvl = level::unknown;
  std::string text;
  std::string provenance;
  ordered_json extra = ordered_json::object();

  // Below-university material is kept in files but skipped by extraction.
  bool excluded() const { return lvl == level::below_university; }
};

struct chunk {
  std::string chunk_id;
  std::string doc_id;
  subject subj = subject::unknown;
  std::string text;
  std::int64_t token_estimate = 0;
  ordered_json extra = ordered_json::object();
};

struct qa_pair {
  std::string pair_id;
  std::optional<std::string> chunk_id;
  subject subj = subject::unknown;
  qa_standard standard = qa_standard::low;
  std::string question;
  std::optional<std::string> answer;
  bool refined = false;
  std::set<stage_flag> stage_flags;
  ordered_json extra = ordered_json::object();

  bool has_flag(stage_flag f) const { return stage_flags.count(f) > 0; }
};

struct benchmark_item {
  std::string bench;
  std::string item_id;
  std::string question;
  // Label -> text, label order preserved from the source file.
  std::vector<std::pair<std::string, std::string>> options;
  std::string gold;
  question_kind kind = question_kind::open;
  std::optional<std::string> unit;
  ordered_json extra = ordered_json::object();

  bool has_option(const std::string& label) const;
};

struct instance_record {
  std::string bench;
  std::string item_id;
  std::string prompt;
  std::string response;
  std::optional<std::string> extracted;
  std::optional<std::string> extracted_unit;
  bool correct = false;
  std::optional<failure_kind> failure;
  ordered_json extra = ordered_json::object();
};

struct stage_manifest {
  pipeline_stage stage = pipeline_stage::ingest;
  std::map<std::string, std::string> params;
  // subject -> (records in, records out); emitted in subject enum order.
  std::map<subject, std::pair<std::int64_t, std::int64_t>> counts;
  std::string content_hash;

  std::int64_t total_in() const;
  std::int64_t total_out() const;
  void bump(subject s, std::int64_t in_delta, std::int64_t out_delta);
};

// --- serialization ----------------------------------------------------------

// Canonical form: fixed key order, optionals omitted when absent, unknown
// extras appended sorted by key. serialize(parse(serialize(r))) is
// byte-identical. With include_extra=false the output feeds content hashes.
ordered_json to_json(const source_doc& r, bool include_extra = true);
ordered_json to_json(const chunk& r, bool include_extra = true);
ordered_json to_json(const qa_pair& r, bool include_extra = true);
ordered_json to_json(const benchmark_item& r, bool include_extra = true);
ordered_json to_json(const instance_record& r, bool include_extra = true);
ordered_json to_json(const stage_manifest& m);

source_doc source_doc_from_json(const ordered_json& j);
chunk chunk_from_json(const ordered_json& j);
qa_pair qa_pair_from_json(const ordered_json& j);
benchmark_item benchmark_item_from_json(const ordered_json& j);
instance_record instance_record_from_json(const ordered_json& j);
stage_manifest stage_manifest_from_json(const ordered_json& j);

template <typename Record>
std::string serialize(const Record& r, bool include_extra = true) {
  return to_json(r, include_extra).dump();
}

// --- validation -------------------------------------------------------------

// Each returns its argument when every invariant holds and throws
// invariant_violation(field, rule) otherwise.
const source_doc& validate(const source_doc& r);
const chunk& validate(const chunk& r);
const qa_pair& validate(const qa_pair& r);
const benchmark_item& validate(const benchmark_item& r);
const instance_record& validate(const instance_record& r);
const stage_manifest& validate(const stage_manifest& m);

// --- JSONL files ------------------------------------------------------------

template <typename Record>
struct parse_traits;

template <typename Record>
std::vector<Record> read_jsonl(const std::filesystem::path& path,
                               bool do_validate = true);

template <typename Record>
void write_jsonl(const std::filesystem::path& path,
                 const std::vector<Record>& records);

std::uint64_t content_hash_step(std::uint64_t h, const std::string& canonical);
std::string content_hash_finish(std::uint64_t h);

// FNV-1a over the canonical form (extras excluded) of each record plus a
// newline; stable across reruns with identical inputs.
template <typename Record>
std::string content_hash(const std::vector<Record>& records) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const auto& r : records) {
    h = content_hash_step(h, serialize(r, /*include_extra=*/false));
  }
  return content_hash_finish(h);
}

void write_manifest(const std::filesystem::path& path, const stage_manifest& m);
stage_manifest read_manifest(const std::filesystem::path& path);

}  // namespace sciqa
