#include "sciqa/records.hpp"

#include <fstream>
#include <sstream>

#include "sciqa/error.hpp"
#include "sciqa/util.hpp"

namespace sciqa {

namespace {

// Keys handled by the typed parsers; everything else lands in `extra`.
void collect_extras(const ordered_json& j,
                    const std::vector<std::string>& known,
                    ordered_json& extra) {
  for (const auto& item : j.items()) {
    bool is_known = false;
    for (const auto& k : known) {
      if (item.key() == k) {
        is_known = true;
        break;
      }
    }
    if (!is_known) extra[item.key()] = item.value();
  }
}

void append_extras_sorted(ordered_json& out, const ordered_json& extra) {
  std::vector<std::string> keys;
  for (const auto& item : extra.items()) keys.push_back(item.key());
  std::sort(keys.begin(), keys.end());
  for (const auto& k : keys) out[k] = extra.at(k);
}

std::string require_string(const ordered_json& j, const char* key) {
  if (!j.contains(key) || !j.at(key).is_string()) {
    throw invariant_violation(key, "required string field");
  }
  return j.at(key).get<std::string>();
}

std::optional<std::string> optional_string(const ordered_json& j,
                                           const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  if (!j.at(key).is_string()) {
    throw invariant_violation(key, "must be a string when present");
  }
  return j.at(key).get<std::string>();
}

}  // namespace

// --- enums ------------------------------------------------------------------

const std::vector<subject>& all_subjects() {
  static const std::vector<subject> subjects = {
      subject::biology,     subject::chemistry, subject::computer_science,
      subject::economics,   subject::mathematics, subject::medicine,
      subject::physics,     subject::unknown,
  };
  return subjects;
}

std::string to_string(subject s) {
  switch (s) {
    case subject::biology: return "biology";
    case subject::chemistry: return "chemistry";
    case subject::computer_science: return "computer_science";
    case subject::economics: return "economics";
    case subject::mathematics: return "mathematics";
    case subject::medicine: return "medicine";
    case subject::physics: return "physics";
    case subject::unknown: return "unknown";
  }
  return "unknown";
}

std::string to_string(level l) {
  switch (l) {
    case level::below_university: return "below_university";
    case level::university: return "university";
    case level::unknown: return "unknown";
  }
  return "unknown";
}

std::string to_string(qa_standard s) {
  switch (s) {
    case qa_standard::high: return "high";
    case qa_standard::low: return "low";
    case qa_standard::external: return "external";
  }
  return "low";
}

std::string to_string(stage_flag f) {
  switch (f) {
    case stage_flag::deduped_survivor: return "deduped_survivor";
    case stage_flag::decontaminated_survivor: return "decontaminated_survivor";
    case stage_flag::has_cot: return "has_cot";
    case stage_flag::selected: return "selected";
  }
  return "has_cot";
}

std::string to_string(question_kind k) {
  switch (k) {
    case question_kind::multi_choice: return "multi_choice";
    case question_kind::computational: return "computational";
    case question_kind::true_false: return "true_false";
    case question_kind::open: return "open";
  }
  return "open";
}

std::string to_string(failure_kind f) {
  switch (f) {
    case failure_kind::no_extraction: return "no_extraction";
    case failure_kind::mismatch: return "mismatch";
  }
  return "no_extraction";
}

std::string to_string(pipeline_stage s) {
  switch (s) {
    case pipeline_stage::ingest: return "ingest";
    case pipeline_stage::extract: return "extract";
    case pipeline_stage::dedup: return "dedup";
    case pipeline_stage::refine: return "refine";
    case pipeline_stage::filter: return "filter";
    case pipeline_stage::decontam: return "decontam";
    case pipeline_stage::select: return "select";
    case pipeline_stage::annotate: return "annotate";
    case pipeline_stage::eval: return "eval";
  }
  return "ingest";
}

subject subject_from_string(const std::string& s) {
  for (subject sub : all_subjects()) {
    if (to_string(sub) == s) return sub;
  }
  throw invariant_violation("subject", "unknown subject value '" + s + "'");
}

level level_from_string(const std::string& s) {
  for (level l : {level::below_university, level::university, level::unknown}) {
    if (to_string(l) == s) return l;
  }
  throw invariant_violation("level", "unknown level value '" + s + "'");
}

qa_standard standard_from_string(const std::string& s) {
  for (qa_standard st :
       {qa_standard::high, qa_standard::low, qa_standard::external}) {
    if (to_string(st) == s) return st;
  }
  throw invariant_violation("standard", "unknown standard value '" + s + "'");
}

stage_flag stage_flag_from_string(const std::string& s) {
  for (stage_flag f :
       {stage_flag::deduped_survivor, stage_flag::decontaminated_survivor,
        stage_flag::has_cot, stage_flag::selected}) {
    if (to_string(f) == s) return f;
  }
  throw invariant_violation("stage_flags", "unknown flag value '" + s + "'");
}

question_kind kind_from_string(const std::string& s) {
  for (question_kind k :
       {question_kind::multi_choice, question_kind::computational,
        question_kind::true_false, question_kind::open}) {
    if (to_string(k) == s) return k;
  }
  throw invariant_violation("kind", "unknown kind value '" + s + "'");
}

failure_kind failure_from_string(const std::string& s) {
  for (failure_kind f : {failure_kind::no_extraction, failure_kind::mismatch}) {
    if (to_string(f) == s) return f;
  }
  throw invariant_violation("failure", "unknown failure value '" + s + "'");
}

pipeline_stage stage_from_string(const std::string& s) {
  for (pipeline_stage st :
       {pipeline_stage::ingest, pipeline_stage::extract, pipeline_stage::dedup,
        pipeline_stage::refine, pipeline_stage::filter,
        pipeline_stage::decontam, pipeline_stage::select,
        pipeline_stage::annotate, pipeline_stage::eval}) {
    if (to_string(st) == s) return st;
  }
  throw invariant_violation("stage", "unknown stage value '" + s + "'");
}

// --- to_json ----------------------------------------------------------------

ordered_json to_json(const source_doc& r, bool include_extra) {
  ordered_json j;
  j["doc_id"] = r.doc_id;
  j["subject"] = to_string(r.subj);
  j["level"] = to_string(r.lvl);
  j["text"] = r.text;
  j["provenance"] = r.provenance;
  if (include_extra) append_extras_sorted(j, r.extra);
  return j;
}

ordered_json to_json(const chunk& r, bool include_extra) {
  ordered_json j;
  j["chunk_id"] = r.chunk_id;
  j["doc_id"] = r.doc_id;
  j["subject"] = to_string(r.subj);
  j["text"] = r.text;
  j["token_estimate"] = r.token_estimate;
  if (include_extra) append_extras_sorted(j, r.extra);
  return j;
}

ordered_json to_json(const qa_pair& r, bool include_extra) {
  ordered_json j;
  j["pair_id"] = r.pair_id;
  if (r.chunk_id) j["chunk_id"] = *r.chunk_id;
  j["subject"] = to_string(r.subj);
  j["standard"] = to_string(r.standard);
  j["question"] = r.question;
  if (r.answer) j["answer"] = *r.answer;
  j["refined"] = r.refined;
  ordered_json flags = ordered_json::array();
  for (stage_flag f : r.stage_flags) flags.push_back(to_string(f));
  j["stage_flags"] = std::move(flags);
  if (include_extra) append_extras_sorted(j, r.extra);
  return j;
}

ordered_json to_json(const benchmark_item& r, bool include_extra) {
  ordered_json j;
  j["bench"] = r.bench;
  j["item_id"] = r.item_id;
  j["question"] = r.question;
  if (!r.options.empty()) {
    ordered_json opts;
    for (const auto& [label, text] : r.options) opts[label] = text;
    j["options"] = std::move(opts);
  }
  j["gold"] = r.gold;
  j["kind"] = to_string(r.kind);
  if (r.unit) j["unit"] = *r.unit;
  if (include_extra) append_extras_sorted(j, r.extra);
  return j;
}

ordered_json to_json(const instance_record& r, bool include_extra) {
  ordered_json j;
  j["bench"] = r.bench;
  j["item_id"] = r.item_id;
  j["prompt"] = r.prompt;
  j["response"] = r.response;
  if (r.extracted) j["extracted"] = *r.extracted;
  if (r.extracted_unit) j["extracted_unit"] = *r.extracted_unit;
  j["correct"] = r.correct;
  if (r.failure) j["failure"] = to_string(*r.failure);
  if (include_extra) append_extras_sorted(j, r.extra);
  return j;
}

ordered_json to_json(const stage_manifest& m) {
  ordered_json j;
  j["stage"] = to_string(m.stage);
  ordered_json params;
  for (const auto& [k, v] : m.params) params[k] = v;
  j["params"] = std::move(params);
  ordered_json counts;
  for (subject s : all_subjects()) {
    auto it = m.counts.find(s);
    if (it == m.counts.end()) continue;
    counts[to_string(s)] = ordered_json::array({it->second.first,
                                                it->second.second});
  }
  j["counts"] = std::move(counts);
  j["total_in"] = m.total_in();
  j["total_out"] = m.total_out();
  j["content_hash"] = m.content_hash;
  return j;
}

// --- from_json --------------------------------------------------------------

source_doc source_doc_from_json(const ordered_json& j) {
  source_doc r;
  r.doc_id = require_string(j, "doc_id");
  r.subj = subject_from_string(require_string(j, "subject"));
  r.lvl = level_from_string(require_string(j, "level"));
  r.text = require_string(j, "text");
  r.provenance = j.contains("provenance") && j.at("provenance").is_string()
                     ? j.at("provenance").get<std::string>()
                     : "";
  collect_extras(j, {"doc_id", "subject", "level", "text", "provenance"},
                 r.extra);
  return r;
}

chunk chunk_from_json(const ordered_json& j) {
  chunk r;
  r.chunk_id = require_string(j, "chunk_id");
  r.doc_id = require_string(j, "doc_id");
  r.subj = subject_from_string(require_string(j, "subject"));
  r.text = require_string(j, "text");
  if (!j.contains("token_estimate") || !j.at("token_estimate").is_number()) {
    throw invariant_violation("token_estimate", "required integer field");
  }
  r.token_estimate = j.at("token_estimate").get<std::int64_t>();
  collect_extras(j, {"chunk_id", "doc_id", "subject", "text", "token_estimate"},
                 r.extra);
  return r;
}

qa_pair qa_pair_from_json(const ordered_json& j) {
  qa_pair r;
  r.pair_id = require_string(j, "pair_id");
  r.chunk_id = optional_string(j, "chunk_id");
  r.subj = subject_from_string(require_string(j, "subject"));
  r.standard = standard_from_string(require_string(j, "standard"));
  r.question = require_string(j, "question");
  r.answer = optional_string(j, "answer");
  if (j.contains("refined")) {
    if (!j.at("refined").is_boolean()) {
      throw invariant_violation("refined", "must be a boolean");
    }
    r.refined = j.at("refined").get<bool>();
  }
  if (j.contains("stage_flags")) {
    if (!j.at("stage_flags").is_array()) {
      throw invariant_violation("stage_flags", "must be an array");
    }
    for (const auto& f : j.at("stage_flags")) {
      r.stage_flags.insert(stage_flag_from_string(f.get<std::string>()));
    }
  }
  collect_extras(j,
                 {"pair_id", "chunk_id", "subject", "standard", "question",
                  "answer", "refined", "stage_flags"},
                 r.extra);
  return r;
}

benchmark_item benchmark_item_from_json(const ordered_json& j) {
  benchmark_item r;
  r.bench = require_string(j, "bench");
  r.item_id = require_string(j, "item_id");
  r.question = require_string(j, "question");
  if (j.contains("options")) {
    if (!j.at("options").is_object()) {
      throw invariant_violation("options", "must be an object");
    }
    for (const auto& item : j.at("options").items()) {
      r.options.emplace_back(item.key(), item.value().get<std::string>());
    }
  }
  r.gold = require_string(j, "gold");
  r.kind = kind_from_string(require_string(j, "kind"));
  r.unit = optional_string(j, "unit");
  collect_extras(
      j, {"bench", "item_id", "question", "options", "gold", "kind", "unit"},
      r.extra);
  return r;
}

instance_record instance_record_from_json(const ordered_json& j) {
  instance_record r;
  r.bench = require_string(j, "bench");
  r.item_id = require_string(j, "item_id");
  r.prompt = require_string(j, "prompt");
  r.response = require_string(j, "response");
  r.extracted = optional_string(j, "extracted");
  r.extracted_unit = optional_string(j, "extracted_unit");
  if (!j.contains("correct") || !j.at("correct").is_boolean()) {
    throw invariant_violation("correct", "required boolean field");
  }
  r.correct = j.at("correct").get<bool>();
  if (auto f = optional_string(j, "failure")) {
    r.failure = failure_from_string(*f);
  }
  collect_extras(j,
                 {"bench", "item_id", "prompt", "response", "extracted",
                  "extracted_unit", "correct", "failure"},
                 r.extra);
  return r;
}

stage_manifest stage_manifest_from_json(const ordered_json& j) {
  stage_manifest m;
  m.stage = stage_from_string(require_string(j, "stage"));
  if (j.contains("params")) {
    for (const auto& item : j.at("params").items()) {
      m.params[item.key()] = item.value().get<std::string>();
    }
  }
  if (j.contains("counts")) {
    for (const auto& item : j.at("counts").items()) {
      subject s = subject_from_string(item.key());
      const auto& pair = item.value();
      if (!pair.is_array() || pair.size() != 2) {
        throw invariant_violation("counts", "each entry must be [in, out]");
      }
      m.counts[s] = {pair[0].get<std::int64_t>(), pair[1].get<std::int64_t>()};
    }
  }
  m.content_hash = j.contains("content_hash")
                       ? j.at("content_hash").get<std::string>()
                       : "";
  return m;
}

// --- manifest helpers -------------------------------------------------------

std::int64_t stage_manifest::total_in() const {
  std::int64_t total = 0;
  for (const auto& [_, io] : counts) total += io.first;
  return total;
}

std::int64_t stage_manifest::total_out() const {
  std::int64_t total = 0;
  for (const auto& [_, io] : counts) total += io.second;
  return total;
}

void stage_manifest::bump(subject s, std::int64_t in_delta,
                          std::int64_t out_delta) {
  auto& io = counts[s];
  io.first += in_delta;
  io.second += out_delta;
}

// --- validation -------------------------------------------------------------

const source_doc& validate(const source_doc& r) {
  if (r.doc_id.empty()) throw invariant_violation("doc_id", "must be nonempty");
  if (r.text.empty()) throw invariant_violation("text", "must be nonempty");
  return r;
}

const chunk& validate(const chunk& r) {
  if (r.chunk_id.empty()) {
    throw invariant_violation("chunk_id", "must be nonempty");
  }
  if (r.doc_id.empty()) throw invariant_violation("doc_id", "must be nonempty");
  if (r.token_estimate < 0) {
    throw invariant_violation("token_estimate", "must be nonnegative");
  }
  return r;
}

const qa_pair& validate(const qa_pair& r) {
  if (r.pair_id.empty()) {
    throw invariant_violation("pair_id", "must be nonempty");
  }
  if (r.question.empty()) {
    throw invariant_violation("question", "must be nonempty");
  }
  if (r.refined && (!r.answer || r.answer->empty())) {
    throw invariant_violation("answer", "refined pair must carry an answer");
  }
  return r;
}

bool benchmark_item::has_option(const std::string& label) const {
  for (const auto& [l, _] : options) {
    if (l == label) return true;
  }
  return false;
}

const benchmark_item& validate(const benchmark_item& r) {
  if (r.bench.empty()) throw invariant_violation("bench", "must be nonempty");
  if (r.item_id.empty()) {
    throw invariant_violation("item_id", "must be nonempty");
  }
  if (r.question.empty()) {
    throw invariant_violation("question", "must be nonempty");
  }
  if (r.gold.empty()) throw invariant_violation("gold", "must be nonempty");
  if (r.kind == question_kind::multi_choice) {
    if (r.options.empty()) {
      throw invariant_violation("options",
                                "multi_choice item must carry options");
    }
    if (!r.has_option(r.gold)) {
      throw invariant_violation("gold", "must be one of the option labels");
    }
  }
  return r;
}

const instance_record& validate(const instance_record& r) {
  if (r.bench.empty()) throw invariant_violation("bench", "must be nonempty");
  if (r.item_id.empty()) {
    throw invariant_violation("item_id", "must be nonempty");
  }
  if (r.correct && !r.extracted) {
    throw invariant_violation("extracted",
                              "correct record must carry an extraction");
  }
  if (r.correct == r.failure.has_value()) {
    throw invariant_violation("failure",
                              "must be set exactly when correct=false");
  }
  return r;
}

const stage_manifest& validate(const stage_manifest& m) {
  for (const auto& [s, io] : m.counts) {
    if (io.first < 0 || io.second < 0) {
      throw invariant_violation("counts", "counts must be nonnegative for " +
                                              to_string(s));
    }
  }
  return m;
}

// --- files ------------------------------------------------------------------

template <>
struct parse_traits<source_doc> {
  static source_doc parse(const ordered_json& j) {
    return source_doc_from_json(j);
  }
};
template <>
struct parse_traits<chunk> {
  static chunk parse(const ordered_json& j) { return chunk_from_json(j); }
};
template <>
struct parse_traits<qa_pair> {
  static qa_pair parse(const ordered_json& j) { return qa_pair_from_json(j); }
};
template <>
struct parse_traits<benchmark_item> {
  static benchmark_item parse(const ordered_json& j) {
    return benchmark_item_from_json(j);
  }
};
template <>
struct parse_traits<instance_record> {
  static instance_record parse(const ordered_json& j) {
    return instance_record_from_json(j);
  }
};

template <typename Record>
std::vector<Record> read_jsonl(const std::filesystem::path& path,
                               bool do_validate) {
  std::ifstream in(path);
  if (!in) throw error("cannot open " + path.string());
  std::vector<Record> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    ordered_json j;
    try {
      j = ordered_json::parse(line);
    } catch (const nlohmann::json::exception& ex) {
      throw error(path.string() + ":" + std::to_string(line_no) +
                  ": bad JSON: " + ex.what());
    }
    Record r = parse_traits<Record>::parse(j);
    if (do_validate) validate(r);
    out.push_back(std::move(r));
  }
  return out;
}

template <typename Record>
void write_jsonl(const std::filesystem::path& path,
                 const std::vector<Record>& records) {
  if (path.has_parent_path()) {
    std::filesystem::create_directories(path.parent_path());
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw error("cannot write " + path.string());
  for (const auto& r : records) {
    out << serialize(r) << '\n';
  }
  if (!out) throw error("write failed for " + path.string());
}

template std::vector<source_doc> read_jsonl<source_doc>(
    const std::filesystem::path&, bool);
template std::vector<chunk> read_jsonl<chunk>(const std::filesystem::path&,
                                              bool);
template std::vector<qa_pair> read_jsonl<qa_pair>(const std::filesystem::path&,
                                                  bool);
template std::vector<benchmark_item> read_jsonl<benchmark_item>(
    const std::filesystem::path&, bool);
template std::vector<instance_record> read_jsonl<instance_record>(
    const std::filesystem::path&, bool);

template void write_jsonl<source_doc>(const std::filesystem::path&,
                                      const std::vector<source_doc>&);
template void write_jsonl<chunk>(const std::filesystem::path&,
                                 const std::vector<chunk>&);
template void write_jsonl<qa_pair>(const std::filesystem::path&,
                                   const std::vector<qa_pair>&);
template void write_jsonl<benchmark_item>(const std::filesystem::path&,
                                          const std::vector<benchmark_item>&);
template void write_jsonl<instance_record>(const std::filesystem::path&,
                                           const std::vector<instance_record>&);

std::uint64_t content_hash_step(std::uint64_t h, const std::string& canonical) {
  h = fnv1a64(canonical, h);
  return fnv1a64("\n", h);
}

std::string content_hash_finish(std::uint64_t h) { return to_hex(h); }

void write_manifest(const std::filesystem::path& path,
                    const stage_manifest& m) {
  if (path.has_parent_path()) {
    std::filesystem::create_directories(path.parent_path());
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw error("cannot write " + path.string());
  out << to_json(m).dump(2) << '\n';
}

stage_manifest read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw error("cannot open " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return stage_manifest_from_json(ordered_json::parse(buf.str()));
}

}  // namespace sciqa
