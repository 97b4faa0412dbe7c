// Copyright 2026 The slidekit Authors
// SPDX-License-Identifier: Apache-2.0

// Fixed prompt texts shared by dataset generation, instruction tuning, and
// evaluation. These strings are reproduced verbatim; do not reflow them.

#pragma once

#include <array>
#include <map>
#include <string>
#include <string_view>

namespace slidekit::prompts {

/// System prompt for answer generation from report context.
inline constexpr std::string_view kRaider =
    "You are a pathology lab assistant. You are given an unstructured pathology report "
    "describing a tissue sample of whole slide image. Follow these instructions carefully: "
    "1. Extract a detailed summary of the diagnosis and the examined tissue from the report in "
    "a sentence under 10 words. 2. Do not mention any cm or mm measurements. 3. Do not mention "
    "any arabic or roman numerals. 4. Please give a complete and concise answer for the "
    "question. Answer the question based only on the provided context:";

/// Appended to kRaider; {context} and {question} are substituted.
inline constexpr std::string_view kRaiderSuffix = " {context} Question: {question}";

/// Separator between retrieved chunks inside {context}.
inline constexpr std::string_view kContextSeparator = "\n---\n";

/// System prompt used for instruction tuning and for candidate generation.
inline constexpr std::string_view kInstructionTuning =
    "You are a specialized AI assistant in a pathology lab. Your primary role is to analyze "
    "tissue samples from images and provide concise diagnostic summaries. Please follow these "
    "instructions carefully: 1. Identify Tissue Type: If possible, specify the type of tissue "
    "visible in the image. 2. Diagnostic Summary: Provide a single-sentence diagnosis based on "
    "the image. 3. Length Restriction: Keep the summary under 20 words. 4. Exclusions: Do not "
    "include numerical measurements, units (cm, mm), or extraneous details. 5. Clarity and "
    "Brevity: Use clear, precise language and minimize unnecessary words.\n"
    "Your response should be focused, relevant, and contain only the essential diagnostic "
    "information.";

/// Seven-criteria judge prompt; {question}, {answer} and {llm answer} are substituted.
inline constexpr std::string_view kEvaluation =
    "As an experienced pathologist with extensive expertise in the field, your role is to "
    "evaluate the quality of AI-generated answers in the context of medical inquiries. We aim to "
    "ensure that the AI model provides responses that are not only accurate but also "
    "contextually appropriate and professionally acceptable. Your evaluation should be based on "
    "the following detailed criteria: \n"
    "Please provide only the words “accept” or “reject” as your response.\n"
    "1. Accuracy: \n"
    "- Verify whether the AI-generated answer accurately reflects the medical facts and "
    "knowledge provided in the reference answer.\n"
    "- Check for any factual errors, misleading information, or incorrect interpretations that "
    "deviate from established medical knowledge.\n"
    "2. Relevance: \n"
    "- Assess whether the AI-generated answer directly addresses the specific question asked. \n"
    "- Ensure that the answer remains focused on the core topic without deviating into "
    "unrelated areas or including extraneous information. \n"
    "3. Completeness:\n"
    "- Evaluate whether the AI-generated answer thoroughly covers all aspects of the question as "
    "addressed in the reference answer.\n"
    "- Determine if any critical elements or important details are missing from the response, "
    "and whether the answer provides a comprehensive view.\n"
    "4. Clarity:\n"
    "- Judge the clarity and coherence of the AI-generated answer. \n"
    "- Ensure that the language used is precise, easy to understand, and free of jargon or "
    "ambiguous terms that could confuse the reader.\n"
    "5. Appropriateness:\n"
    "- Assess the professionalism and tone of the AI-generated answer. \n"
    "- Confirm that the response is suitable for a professional medical context, with a "
    "respectful and appropriate style for the audience.\n"
    "6. Consistency:\n"
    "- Compare the AI-generated answer with the reference answer for consistency in content and "
    "style.\n"
    "- Evaluate whether the AI's response aligns with standard medical practices and "
    "terminologies.\n"
    "7. Presentation:\n"
    "- Consider the overall presentation of the AI-generated answer, including formatting, "
    "grammar, and punctuation.\n"
    "- Ensure that the answer is well-organized and visually easy to follow, contributing to an "
    "overall polished appearance.\n"
    "Based on your thorough evaluation using the criteria above, please determine the "
    "acceptability of the AI-generated answer. Respond with “accept” if the "
    "AI-generated answer meets the standards of accuracy, relevance, completeness, clarity, "
    "appropriateness, consistency, and presentation. If the answer fails to meet any of these "
    "criteria or shows significant deficiencies, respond with “reject.” \n"
    "Question: {question}\n"
    "Reference Answer: {answer}\n"
    "AI-generated Answer: {llm answer}";

inline constexpr std::array<std::string_view, 7> kCriteria = {
    "1. Accuracy:",          "2. Relevance:",   "3. Completeness:", "4. Clarity:",
    "5. Appropriateness:",   "6. Consistency:", "7. Presentation:"};

/// Diagnosis questions used to expand each report into instruction pairs.
inline constexpr std::array<std::string_view, 8> kQuestions = {
    "What is a major diagnosis?",
    "What is the crucial diagnosis?",
    "What is the key diagnosis?",
    "What is the primary diagnosis?",
    "What is the key histopathological feature observed?",
    "What is the main diagnosis?",
    "What is the major diagnosis?",
    "What is the most likely diagnosis?"};

/// Replaces each "{name}" whose name is a key of `values` in one left-to-right
/// pass, so substituted text is never rescanned. Unknown placeholders stay.
inline std::string fill(std::string_view tmpl,
                        const std::map<std::string, std::string, std::less<>>& values) {
  std::string out;
  out.reserve(tmpl.size());
  std::size_t i = 0;
  while (i < tmpl.size()) {
    const auto open = tmpl.find('{', i);
    if (open == std::string_view::npos) break;
    const auto close = tmpl.find('}', open + 1);
    if (close == std::string_view::npos) break;
    out.append(tmpl.substr(i, open - i));
    const auto it = values.find(tmpl.substr(open + 1, close - open - 1));
    if (it != values.end()) {
      out += it->second;
      i = close + 1;
    } else {
      out += '{';
      i = open + 1;
    }
  }
  out.append(tmpl.substr(i));
  return out;
}

}  // namespace slidekit::prompts
