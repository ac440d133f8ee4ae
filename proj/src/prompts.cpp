#include "sciqa/prompts.hpp"

#include <fstream>
#include <sstream>

#include "sciqa/error.hpp"

namespace sciqa {

namespace {

// --- extraction, one high/low pair per subject ------------------------------

const char* kExtractHighBiology = R"__(Below is a biology document extract. Assess whether it contains a biology question-and-answer pair that requires reasoning:

- If the document extract does not contain a biology question-and-answer pair that involves reasoning, return the explicit symbol `[NO QA]`.
- If the document only contains simple factual or conceptual questions without deeper reasoning, return `[NO QA]`.
- If a biology reasoning question-and-answer pair is found, extract it in the following format:
    Question: <question text with complete problem statement and all necessary biological information>
    Answer: <complete solution with all necessary reasoning steps, processes, and explanations included> (only if an answer is provided, otherwise do not generate this line)
- The extracted pair must:
  1. Require logical or scientific reasoning beyond simple recall
  2. Be self-contained and biologically precise
  3. Include all necessary context for independent solving
  4. May involve mechanisms, pathways, evolutionary principles, genetic analysis, experimental design, or systems-level understanding

Do NOT extract simple definitional questions or basic concept recall questions.

#### The extract:
`<DOCUMENT>`

Now process the extract and return the result.)__";

const char* kExtractLowBiology = R"__(Below is a book document extract.

# Extraction Task
Extract complete, independently solvable biology questions and answers from the document while following these guidelines:

## For Questions:
- Extract any explicit biology questions with their associated answers
- For implicit biology concepts, mechanisms, processes, or principles presented as statements, convert them to well-formed questions ONLY if they can stand alone
- Ensure each extracted question contains ALL necessary information to be solved independently without requiring additional context
- Include any relevant biological diagrams, pathways, or figures mentioned (describe them if not visible)
- Extract multiple questions separately if they exist
- If no biological content can be meaningfully extracted as a question, return `[NO QA]`

## For Answers:
- Include the answer provided in the extract
- Answers should capture the essential explanation of the biological concept
- If the source material contains a description of a mechanism or pathway, include this in the answer
- For biological processes, the answer should explain the function, steps, or significance as presented in the text

## Format:
Format each question-answer pair as:
Question: [Complete biology question with all context needed to understand]
Answer: [Corresponding answer from the text]

The extract is as follows:
`<DOCUMENT>`

Now process the extract and return the result.)__";

const char* kExtractHighChemistry = R"__(Below is a chemistry document extract. Assess whether it contains a chemistry question-and-answer pair requiring significant reasoning:

- If the document extract does not contain a chemistry reasoning question-and-answer pair, return the explicit symbol`[NO QA]`.
- If a chemistry question-and-answer pair requiring reasoning is found, extract it in the following format:
    Question: <question text with complete problem statement and all necessary chemical information>
    Answer: <complete solution with all necessary steps, equations, calculations, and reasoning included> (only if an answer is provided, otherwise do not generate this line)
- The extracted pair must:
  1. Require chemical reasoning or multi-step problem-solving (not simple definition or concept recall)
  2. Be self-contained and chemically precise, allowing independent solving without additional context
  3. Involve topics such as: reaction mechanisms, thermodynamics, equilibrium calculations, acid-base chemistry, electrochemistry, kinetics, spectroscopic analysis, or other areas requiring deductive reasoning
- Do NOT extract simple definitional questions, basic concept recalls, or single-step calculations.

#### The extract:
`<DOCUMENT>`

Now process the extract and return the result.)__";

const char* kExtractLowChemistry = R"__(Below is a book document extract.

# Extraction Task
Extract complete, independently solvable chemistry questions and answers from the document while following these guidelines:

## For Questions/Problems:
- Extract any explicit chemistry questions with their answers
- Extract ONLY questions that are completely self-contained and can be solved independently
- For implicit problems (chemical principles, reactions, or concepts presented as statements), convert them to well-formed questions ONLY if they can stand alone
- Ensure each extracted problem contains ALL necessary information to be solved independently
- Include any relevant diagrams, figures, or charts mentioned (describe them if not visible)
- Extract multiple problems separately if they exist
- If no mathematical content can be extracted, return `[NO QA]`

## For Answers:
- Include the complete answer if provided in the extract
- Answers should contain the main solution or explanation
- If a detailed step-by-step solution is available, include it
- For reaction mechanisms, include all steps and intermediates

## Format:
Format each question-answer pair as:
Question: [Complete chemistry question with all context needed to solve]
Answer: [Complete answer]

The extract is as follows:
`<DOCUMENT>`

Now process the extract and return the result.)__";

const char* kExtractHighCs = R"__(Below is a document extract. Assess whether it contains a computer science or artificial intelligence question-and-answer pair that requires significant reasoning:

- If the document extract does not contain a computer science or artificial intelligence question-and-answer pair requiring reasoning, return the explicit symbol `[NO QA]`.
- If the extract contains only simple definitional or conceptual questions without reasoning, return the explicit symbol `[NO QA]`.
- If a reasoning-based computer science or artificial intelligence question-and-answer pair is found, extract it in the following format:
    Question: <complete problem statement including all necessary information, constraints, and requirements>
    Answer: <complete solution with all necessary reasoning steps, algorithms, code snippets, or formal proofs> (only if an answer is provided, otherwise do not generate this line)
- The extracted pair must be self-contained and technically precise, allowing independent solving without additional context.
- Prioritize questions that involve algorithm design, computational complexity analysis, system architecture decisions, AI model reasoning, optimization problems, or formal proofs.
- Do not extract simple factual questions about technology history, basic definitions, or conceptual explanations that don't require problem-solving.

#### The extract:
`<DOCUMENT>`

Now process the extract and return the result.)__";

const char* kExtractLowCs = R"__(Below is a book document extract.

# Extraction Task
Extract complete, independently solvable computer science and artificial intelligence questions and answers from the document while following these guidelines:

## For Questions/Problems:
- Extract any explicit computer science or AI questions with their provided answers
- For implicit problems (algorithms, data structures, programming concepts, AI theories, computational theorems, or technical definitions presented as statements), convert them to well-formed questions ONLY if they can stand alone as complete problems
- Ensure each extracted problem contains ALL necessary information to be solved independently without requiring additional context
- Include all context, requirements, constraints, and examples needed to understand the problem
- For computational problems, make sure the question includes all necessary inputs, expected outputs, and constraints
- Extract multiple problems separately if they exist
- If no computer science or AI content can be extracted as complete questions, return `[NO QA]`

## For Answers:
- Include the complete answer as provided in the extract
- Answers should contain the main solution or explanation
- If available, include:
  * Code implementations
  * Time/space complexity analysis
  * Step-by-step explanations
  * Proofs for computational theorems
  * Practical implementation details for AI concepts

## Format:
Format each question-answer pair as:
Question: [Complete computer science/AI question with all context needed to solve]
Answer: [Complete answer]

The extract is as follows:
`<DOCUMENT>`

Now process the extract and return the result.)__";

const char* kExtractHighEconomics = R"__(Below is a document extract on economics. Assess whether it contains a challenging economics question-and-answer pair that requires reasoning:

- If the document extract does not contain a challenging economics question-and-answer pair requiring reasoning, return the explicit symbol `[NO QA]`.
- If the document extract contains only simple conceptual definitions or basic knowledge, return `[NO QA]`.
- If a challenging economics question-and-answer pair requiring reasoning is found, extract it in the following format:
    Question: <question text with complete problem statement and all necessary economic information>
    Answer: <complete solution with all necessary reasoning steps, economic analysis, and calculations included> (only if an answer is provided, otherwise do not generate this line)
- The extracted pair must be self-contained and economically precise, allowing independent solving without additional context.

#### The extract:
`<DOCUMENT>`

Now process the extract and return the result.)__";

const char* kExtractLowEconomics = R"__(Below is a book document extract.

# Extraction Task
Extract complete, independently solvable economics questions and answers from the document while following these guidelines:

## For Questions/Problems:
- Extract any explicit economics questions with their answers
- Extract ONLY questions that are completely self-contained and can be solved independently
- For implicit problems (economic principles, models, theorems, or concepts presented as statements), convert them to well-formed questions ONLY if they can stand alone
- Ensure each extracted problem contains ALL necessary information to be solved independently
- For computational problems (supply/demand analysis, equilibrium pricing, cost-benefit calculations, elasticity, utility maximization, game theory payoffs, etc.), include all required data and parameters
- Include any relevant diagrams, figures, graphs, or tables mentioned (describe them if not visible)
- Extract multiple problems separately if they exist
- If no economics content can be extracted, return `[NO QA]`

## For Answers:
- Include the complete answer if provided in the extract
- Answers should contain the main solution or explanation
- If a detailed step-by-step solution is available, include it
- For model derivations or theoretical proofs, include all steps and reasoning

## Format:
Format each question-answer pair as:
Question: [Complete economics question with all context needed to solve]
Answer: [Complete answer]

The extract is as follows:
`<DOCUMENT>`

Now process the extract and return the result.)__";

const char* kExtractHighMathematics = R"__(Below is a math document extract. Assess whether it contains a mathematical question-and-answer pair:

- If the document extract does not contain a mathematical question-and-answer pair, return the explicit symbol`[NO QA]`.
- If a mathematical question-and-answer pair is found, extract it in the following format:
    Question: <question text with complete problem statement and all necessary mathematical information>
    Answer: <complete solution with all necessary steps and calculations included> (only if an answer is provided, otherwise do not generate this line)
- The extracted pair must be self-contained and mathematically precise, allowing independent solving without additional context.

#### The extract:
`<DOCUMENT>`

Now process the extract and return the result.)__";

const char* kExtractLowMathematics = R"__(Below is a book document extract.

# Extraction Task
Extract complete, independently solvable mathematical content following these guidelines:

## For Questions/Problems:
- Extract any explicit mathematical questions with their answers
- Convert mathematical theorems, propositions, definitions, or problems without explicit questions into well-formed questions
- Ensure each extracted problem contains ALL necessary information to be solved independently
- Include any relevant diagrams, figures, or charts mentioned (describe them if not visible)
- Extract multiple problems separately if they exist
- If no mathematical content can be extracted, return `[NO QA]`

## For Answers:
- Include the provided solution, proof, or explanation when available
- Brief answers are acceptable if that's all the source provides
- For theorems/propositions, the question should ask to prove the statement

## Format:
Question: <Complete mathematical problem with all context needed to solve>
Answer: <Solution as provided in the extract>

The extract is as follows:
`<DOCUMENT>`

Now process the extract and return the result.)__";

const char* kExtractHighMedicine = R"__(Below is a medical document extract. Assess whether it contains a medical question-and-answer pair that requires clinical reasoning:

- If the document extract does not contain a medical reasoning question-and-answer pair, return the explicit symbol `[NO QA]`.
- If a medical reasoning question-and-answer pair is found, extract it in the following format:
    Question: <question text with complete clinical scenario and all necessary patient information>
    Answer: <complete solution with diagnostic reasoning, differential diagnoses, management plan, and treatment rationale> (only if an answer is provided, otherwise do not generate this line)
- Only extract complex questions requiring clinical reasoning, diagnosis, or treatment planning. Do not extract simple factual or concept-based questions.
- The extracted pair must be self-contained and medically precise, allowing independent assessment without additional context.
- Focus on cases requiring differential diagnosis, interpretation of lab results, management decisions, or therapeutic reasoning.

#### The extract:
`<DOCUMENT>`

Now process the extract and return the result.)__";

const char* kExtractLowMedicine = R"__(Below is a medical document extract.

# Extraction Task
Extract complete, independently solvable medical questions and answers from the document while following these guidelines:

## For Questions:
- Extract any explicit medical questions with their corresponding answers
- For implicit medical cases, conditions, diagnoses, or treatment protocols, convert them into well-formed questions ONLY if they can stand alone
- Ensure each extracted question contains ALL necessary clinical information to be understood and answered independently
- Include any relevant patient data, symptoms, test results, or clinical observations needed to fully understand the case
- Extract multiple questions separately if they exist
- If no medical question content can be extracted, return `[NO QA]`

## For Answers:
- Include the complete answer if provided in the extract
- Focus on capturing the main diagnosis, treatment plan, or clinical explanation
- Answers should be self-contained but don't need to be exhaustive
- Include key points from any detailed explanations or management plans provided

## Format:
Format each question-answer pair as:
Question: [Complete medical question with all context needed to understand the case]
Answer: [Complete answer with diagnosis, treatment, or explanation]

The extract is as follows:
`<DOCUMENT>`

Now process the extract and return the result.)__";

const char* kExtractHighPhysics = R"__(Below is a physics document extract. Assess whether it contains a physics question-and-answer pair that requires significant reasoning:

- If the document extract does not contain a physics question-and-answer pair requiring substantial reasoning, return the explicit symbol `[NO QA]`.
- If the document extract contains only simple conceptual definitions or basic physics facts without reasoning steps, return `[NO QA]`.
- If a physics question-and-answer pair requiring reasoning is found, extract it in the following format:
    Question: <question text with complete problem statement and all necessary physics information, including any relevant diagrams, equations, or quantities>
    Answer: <complete solution with all necessary reasoning steps, calculations, and physical principles applied> (only if an answer is provided, otherwise do not generate this line)
- The extracted pair must be self-contained and physically precise, allowing independent solving without additional context.

#### The extract:
`<DOCUMENT>`

Now process the extract and return the result.)__";

const char* kExtractLowPhysics = R"__(Below is a book document extract.

# Extraction Task
Extract complete, independently solvable physics questions and answers from the document while following these guidelines:

## For Questions/Problems:
- Extract any explicit physics questions with their answers
- Extract ONLY questions that are completely self-contained and can be solved independently
- For implicit problems (physics principles, laws, theorems, or concepts presented as statements), convert them to well-formed questions ONLY if they can stand alone
- Ensure each extracted problem contains ALL necessary information to be solved independently
- Include any relevant diagrams, figures, or charts mentioned (describe them if not visible)
- Extract multiple problems separately if they exist
- If no physics content can be extracted, return `[NO QA]`

## For Answers:
- Include the complete answer if provided in the extract
- Answers should contain the key solution or explanation with minimal detail
- For calculation problems, include the relevant formulas, key steps, and final answer with units
- For derivations, include the main steps of the derivation

## Format:
Format each question-answer pair as:
Question: [Complete physics question with all context needed to solve]
Answer: [Complete answer]

The extract is as follows:
`<DOCUMENT>`

Now process the extract and return the result.)__";

// --- refinement and filtering -------------------------------------------------

const char* kQaRefinement = R"__(Below is a question-and-answer pair and a reference document. Your task is to refine the question to make it clear and self-contained, then verify and refine the answer to ensure it's correct and well-explained.

For the question:
- Ensure it contains sufficient information to be understood independently
- Add necessary context from the reference document if the question is unclear
- Maintain the original question's intent

For the answer:
- Verify correctness against the reference document
- If incorrect, provide the correct answer based on the document
- If the answer lacks explanation, add necessary intermediate reasoning process leading to the given answer as a teacher would
- Ensure the added steps are logical, clear, and provide necessary explanation of the solution process
- If the answer already has explanation, reorganize the solution into a clear and well-structured format for better readability and understanding
- For final answers that need exact matching (multiple-choice, calculations, fill-in-the-blank, true/false), use $\boxed{}$ notation

Requirements:
- The refined question should include all necessary information
- The refined answer should be accurate and well-explained
- Both question and answer should stand alone (no references to documents or original materials)

Output format:
First provide your reasoning for the refinements, then output the final results in this exact format without any notes:

Refined Question: <refined question>
Refined Answer: <refined solution>

I will provide you with the reference document, original question and its answer. Please analyze them carefully before refinement.

The reference document:
`<DOCUMENT>`

The question:
`<PROBLEM>`

The answer:
`<ANSWER>`)__";

const char* kIdentifyNoCotQa = R"__(You are an expert evaluator tasked with determining whether an answer contains detailed reasoning processes or explanations of reasons.

**Task**: Given a question and its corresponding answer, analyze whether the answer includes:
- Step-by-step reasoning or logical progression
- Detailed explanations of why something is the case
- Cause-and-effect relationships
- Evidence or justifications for conclusions
- Problem-solving methodology or thought processes

**Instructions**:
1. Carefully read both the question and answer
2. Look for explicit reasoning indicators such as:
   - "Because..." / "Since..." / "Therefore..."
   - Sequential steps (First, Second, Then...)
   - Explanatory phrases ("This is due to...", "The reason is...")
   - Logical connectors and transitions
   - Supporting evidence or examples that explain the reasoning
3. Distinguish between mere factual statements and explanatory reasoning
4. Consider the depth and detail of any reasoning provided

**Output Format**:
Analysis: [Provide your detailed analysis of whether and how the answer demonstrates reasoning or explanation]
Decision: [YES/NO]

**Examples**:

**Example 1:**
Question: Why does ice float on water?
Answer: Ice floats because it is less dense than water. When water freezes, its molecules form a crystalline structure that takes up more space, making ice about 9

Analysis: The answer provides a clear causal explanation with scientific reasoning. It explains the mechanism (molecular structure change) and quantifies the density difference, showing detailed reasoning about why the phenomenon occurs.
Decision: YES

**Example 2:**
Question: What is the capital of France?
Answer: Paris.

Analysis: This is a simple factual answer without any reasoning process or explanation. It directly states the fact but provides no reasoning about why Paris is the capital or any explanatory context.
Decision: NO

Now analyze the following:
Question:
`<PROBLEM>`

Answer:
`<ANSWER>`)__";

const char* kFilterDefectiveQa = R"__(You are tasked with filtering QA (Question-Answer) data to identify problematic entries that should be excluded from a dataset. Please evaluate the provided question and answer pair and determine if it should be filtered out.

## Filtering Criteria

Filter out (mark as NO) any QA pairs that have the following issues:

### 1. Contradictory Answers
The answer contains internal contradictions or conflicting statements.
**Example:**
- Question: What is 2 + 2?
- Answer: First, 2 + 2 = 4. However, using a different method, 2 + 2 = 5. The correct answer is 4.

### 2. External References
The question references external materials that are not provided, such as:
- Specific equations by number (e.g., "equation (8.75)")
- Figures or diagrams (e.g., "as shown in Fig. 4-16")
- External documents or sources not included in the context
**Examples:**
- Question: Solve equation (3.14) using the given parameters.
- Question: Based on Figure 2.1, calculate the area of the triangle.

### 3. Missing or Invalid Answers
The answer does not provide a substantive response to the question, such as:
- Only stating "None of the above" without proper explanation
- Providing no actual answer to the question asked
- Giving completely irrelevant responses
**Example:**
- Question: What is the capital of France?
- Answer: The correct answer is None of the above. This question cannot be answered properly.

## Output Format

After evaluating the question and answer pair, provide your analysis and decision in the following format:

Analysis:
<Provide a brief explanation of your evaluation, noting any issues found or confirming the QA pair is acceptable>

Decision:
<YES/NO>

- YES: Keep this QA pair (it passes the filtering criteria)
- NO: Filter out this QA pair (it has one or more of the issues listed above)

The question:
`<PROBLEM>`

The answer:
`<ANSWER>`)__";

// --- decontamination ------------------------------------------------------------

const char* kLlmJudgeForDecontamination = R"__(I will now give you two questions: Original question and Candidate question. Please help me determine if the following two questions are the same.

Original question:
`<ORIGINAL_PROBLEM>`

Candidate question:
`<CANDIDATE_PROBLEM>`

Disregard the names and minor changes in word order that appear within.
If their question prompts are very similar and, without considering the solution process, they produce the same answer, we consider them to be the same question.

Output Format:
Analysis: [Provide a detailed analysis evaluating the similarity between these questions]
Decision: [YES/NO])__";

// --- difficulty selection --------------------------------------------------------

const char* kAnnotateReferenceAnswer = R"__(## Task Description
You are tasked with extracting the final reference answer from a detailed solution that contains both reasoning steps and the final answer. The reference answer should be concise and represent the definitive conclusion that can be used as a standard solution.

## Input Format
You will receive:
1. A question that was asked
2. A detailed answer that includes reasoning steps and the final answer

## Output Requirements
- Extract ONLY the final reference answer without the reasoning steps
- Ensure the reference answer is complete and can stand alone
- Format the reference answer clearly and concisely
- Do not add any additional explanations or reasoning not present in the original answer
- If multiple possible answers are given, identify the one marked as final or preferred

## Example
### Question:
What is the area of a circle with radius 5 cm?

### Detailed Answer:
To find the area of a circle, I need to use the formula A = πr².
Given information: radius = 5 cm
Substituting values: A = π × 5² = π × 25 = 78.54 cm²
Therefore, the area of the circle with radius 5 cm is 78.54 cm².

### Reference Answer:
78.54 cm²

## Instructions
1. Read the question carefully to understand what is being asked
2. Analyze the detailed answer to identify where the final conclusion is stated
3. Extract only the reference answer without any additional reasoning
4. Format the reference answer clearly so it can be used for checking solutions

## Question:
`<PROBLEM>`

## Detailed Answer:
`<ANSWER>`

Now process and return the result.)__";

const char* kEvaluatingStudentAnswer = R"__(You are an experienced education evaluator tasked with assessing student responses to academic questions. Your goal is to analyze each student answer in relation to the reference answer and provide both detailed feedback and a numerical score.

Evaluation Process:
1. Carefully read the question to understand the specific requirements and expected knowledge being tested.
2. Compare the student's response to the reference answer, focusing on:
   - Conceptual understanding
   - Accuracy of information
   - Completeness of the answer
   - Use of appropriate terminology
   - Logical reasoning and structure
   - Mathematical correctness (where applicable)

3. Provide a thorough analysis that:
   - Identifies specific strengths in the student's response
   - Points out any errors, misconceptions, or omissions
   - Evaluates how well the answer addresses all parts of the question
   - Considers whether the student demonstrated the required knowledge and skills

4. Assign a score on a scale of 0-10 where:
   - 0: No relevant content or completely incorrect
   - 1-3: Major conceptual errors or significant omissions
   - 4-5: Partial understanding with notable gaps
   - 6-7: Good understanding with minor errors or omissions
   - 8-9: Strong grasp of concepts with minimal errors
   - 10: Complete and perfect answer matching the reference answer

Special Considerations:
- For intervals/ranges: The student's answer must cover the EXACT SAME range as the reference answer
- For multiple solutions: If the reference answer contains multiple solutions (connected by "or"/"and"), all must be present in the student's answer
- For mathematical proofs or procedural questions: Evaluate both the final answer and the method used
- For conceptual questions: Focus on the depth of understanding and clarity of explanation

Your response must always follow this format:
Reasoning: <Provide detailed analysis of the student's answer in relation to the reference answer>
Score: <numerical score between 0 and 10>

The question:
`<PROBLEM>`

The reference answer:
`<REFERENCE_ANSWER>`

The student's answer:
`<STUDENT_ANSWER>`)__";

// --- toolkit-defined templates ---------------------------------------------------

const char* kDocClassification = R"__(You will be shown the opening portion of a book or long document. Classify its primary subject area and its academic level.

Pick the subject from this list (answer with the name only):
Biology, Chemistry, Computer Science, Economics, Mathematics, Medicine, Physics, Unknown

Pick the level from this list:
University (undergraduate level or above)
Below University (high school level or lower)

Reply with exactly two lines in this format:
Subject: <subject>
Level: <level>

The document begins:
`<DOCUMENT>`)__";

const char* kSolutionAnnotation = R"__(Provide a clear, step-by-step solution to the question below. Explain the reasoning behind each step so a student could follow it. If the final answer is a number, an expression, a choice, or a short phrase that allows exact matching, finish by placing it in $\boxed{}$ notation.

The question:
`<PROBLEM>`)__";

const char* kEvalMultiChoice = R"__(Answer the following multiple-choice question. Think through the problem step by step before deciding.

<QUESTION>

Options:
<OPTIONS>

After your reasoning, finish with a single line in exactly this form:
The correct answer is (X).
where X is the letter of your chosen option.)__";

const char* kEvalComputational = R"__(Solve the following problem. Reason step by step, and put your final answer in \boxed{}.

<QUESTION>)__";

const char* kEvalComputationalUnit = R"__(Solve the following problem. Reason step by step. Put your final answer in \boxed{}, including its unit inside the box, like \boxed{42 m/s}.

<QUESTION>)__";

const char* kEvalTrueFalse = R"__(Decide whether the following statement is true or false. Explain your reasoning step by step, then finish with a single line in exactly this form:
The correct answer is True.
or
The correct answer is False.

<QUESTION>)__";

const char* kEvalOpen = R"__(Answer the following question. Think step by step, then state your final answer on its own line in the form:
Answer: <your final answer>

<QUESTION>)__";

std::map<std::string, std::string> builtin_prompts() {
  std::map<std::string, std::string> p;
  p["extract_high_biology"] = kExtractHighBiology;
  p["extract_low_biology"] = kExtractLowBiology;
  p["extract_high_chemistry"] = kExtractHighChemistry;
  p["extract_low_chemistry"] = kExtractLowChemistry;
  p["extract_high_computer_science"] = kExtractHighCs;
  p["extract_low_computer_science"] = kExtractLowCs;
  p["extract_high_economics"] = kExtractHighEconomics;
  p["extract_low_economics"] = kExtractLowEconomics;
  p["extract_high_mathematics"] = kExtractHighMathematics;
  p["extract_low_mathematics"] = kExtractLowMathematics;
  p["extract_high_medicine"] = kExtractHighMedicine;
  p["extract_low_medicine"] = kExtractLowMedicine;
  p["extract_high_physics"] = kExtractHighPhysics;
  p["extract_low_physics"] = kExtractLowPhysics;
  p["qa_refinement"] = kQaRefinement;
  p["identify_no_cot_qa"] = kIdentifyNoCotQa;
  p["filter_defective_qa"] = kFilterDefectiveQa;
  p["llm_judge_for_decontamination"] = kLlmJudgeForDecontamination;
  p["annotate_reference_answer"] = kAnnotateReferenceAnswer;
  p["evaluating_student_answer_with_reference"] = kEvaluatingStudentAnswer;
  p["doc_classification"] = kDocClassification;
  p["solution_annotation"] = kSolutionAnnotation;
  p["eval_multi_choice"] = kEvalMultiChoice;
  p["eval_computational"] = kEvalComputational;
  p["eval_computational_unit"] = kEvalComputationalUnit;
  p["eval_true_false"] = kEvalTrueFalse;
  p["eval_open"] = kEvalOpen;
  return p;
}

}  // namespace

const prompt_library& prompt_library::defaults() {
  static const prompt_library lib = [] {
    prompt_library l;
    l.prompts_ = builtin_prompts();
    return l;
  }();
  return lib;
}

prompt_library prompt_library::with_overrides(
    const std::filesystem::path& dir) {
  prompt_library lib = defaults();
  if (dir.empty()) return lib;
  if (!std::filesystem::is_directory(dir)) {
    throw error("prompt override directory not found: " + dir.string());
  }
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.path().extension() != ".txt") continue;
    std::ifstream in(entry.path());
    std::stringstream buf;
    buf << in.rdbuf();
    std::string text = buf.str();
    // trim one trailing newline that editors append
    if (!text.empty() && text.back() == '\n') text.pop_back();
    lib.prompts_[entry.path().stem().string()] = text;
  }
  return lib;
}

const std::string& prompt_library::get(const std::string& name) const {
  auto it = prompts_.find(name);
  if (it == prompts_.end()) throw error("unknown prompt '" + name + "'");
  return it->second;
}

bool prompt_library::has(const std::string& name) const {
  return prompts_.count(name) > 0;
}

std::string prompt_library::extraction_name(subject s, qa_standard st) {
  if (st == qa_standard::external) {
    throw error("no extraction prompt for external-standard pairs");
  }
  return std::string("extract_") +
         (st == qa_standard::high ? "high_" : "low_") + to_string(s);
}

const std::string& prompt_library::extraction(subject s,
                                              qa_standard st) const {
  return get(extraction_name(s, st));
}

const std::string& prompt_library::eval_template(question_kind kind,
                                                 bool unit) const {
  switch (kind) {
    case question_kind::multi_choice: return get("eval_multi_choice");
    case question_kind::computational:
      return unit ? get("eval_computational_unit") : get("eval_computational");
    case question_kind::true_false: return get("eval_true_false");
    case question_kind::open: return get("eval_open");
  }
  return get("eval_open");
}

}  // namespace sciqa
