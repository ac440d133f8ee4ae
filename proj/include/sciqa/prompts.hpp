#pragma once

#include <filesystem>
#include <map>
#include <string>

#include "sciqa/records.hpp"

namespace sciqa {

// Named prompt templates with literal placeholders (<DOCUMENT>, <PROBLEM>,
// <ANSWER>, <ORIGINAL_PROBLEM>, <CANDIDATE_PROBLEM>, <REFERENCE_ANSWER>,
// <STUDENT_ANSWER>, <QUESTION>, <OPTIONS>). Defaults are compiled in; any
// template can be overridden by a <name>.txt file in an override directory.
class prompt_library {
 public:
  static const prompt_library& defaults();
  static prompt_library with_overrides(const std::filesystem::path& dir);

  const std::string& get(const std::string& name) const;
  bool has(const std::string& name) const;

  // extract_{high|low}_{subject} for the seven subjects
  static std::string extraction_name(subject s, qa_standard st);
  const std::string& extraction(subject s, qa_standard st) const;

  const std::string& qa_refinement() const { return get("qa_refinement"); }
  const std::string& identify_missing_cot() const {
    return get("identify_no_cot_qa");
  }
  const std::string& filter_defective() const {
    return get("filter_defective_qa");
  }
  const std::string& decontam_judge() const {
    return get("llm_judge_for_decontamination");
  }
  const std::string& reference_annotation() const {
    return get("annotate_reference_answer");
  }
  const std::string& student_scoring() const {
    return get("evaluating_student_answer_with_reference");
  }
  const std::string& doc_classification() const {
    return get("doc_classification");
  }
  const std::string& solution_annotation() const {
    return get("solution_annotation");
  }

  // Harness prompt per question kind; unit toggles the boxed-unit wording
  // for computational items.
  const std::string& eval_template(question_kind kind, bool unit) const;

  const std::map<std::string, std::string>& all() const { return prompts_; }

 private:
  std::map<std::string, std::string> prompts_;
};

}  // namespace sciqa
