#pragma once

// Description synthesis from a campaign and repeated rubric grading.

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cdd/campaign/campaign.hpp"
#include "cdd/judge/chat_client.hpp"
#include "cdd/judge/rubric.hpp"

namespace cdd {

struct Synthesis {
  std::string description;
  ChatExchange exchange;
  std::size_t generations = 0;

  Json to_json() const;
};

// "### Sample i (prefill "X")" headers followed by each full text.
std::string format_generations(std::span<const CampaignResult> results);

// Exactly one agent call. Throws Precondition when there is no successful
// generation to describe.
Synthesis synthesize_description(std::span<const CampaignResult> results, const ChatClient& agent,
                                 const PromptTemplate& prompt);

// Trimmed reply must be a bare integer inside the rubric's levels.
std::optional<int> parse_grade(const std::string& reply, const Rubric& rubric);

struct GradePass {
  std::optional<int> grade;  // nullopt: grading failure
  std::string failure;
  ChatExchange exchange;
};

struct JudgeVerdict {
  std::string organism;
  std::string model_label;
  std::string description;
  std::string rubric;
  std::string judge_model;
  std::vector<GradePass> passes;

  std::vector<std::optional<int>> grades() const;
  Json to_json() const;
  static JudgeVerdict from_json(const Json& j);
};

// n_passes independent grader conversations, optionally concurrent.
JudgeVerdict grade_description(const std::string& description, const KeyFactSet& facts,
                               const Rubric& rubric, const ChatClient& grader,
                               const PromptTemplate& prompt, int n_passes = 3,
                               std::size_t parallelism = 1);

// Writes synthesis.json and verdict.json into dir.
void write_judge_outputs(const std::filesystem::path& dir, const Synthesis& synthesis,
                         const JudgeVerdict& verdict);

struct ScoreEntry {
  std::string organism;
  std::string model;
  JudgeVerdict verdict;
};

// "a / b / c" per cell, level-5 grades as **5**, failed passes as "–".
std::string format_grade_cell(const JudgeVerdict& verdict, int top_level = 5);

// Organism | Model | <column>; organisms grouped in first-seen order with
// the name on the group's first row and a rule between groups.
std::string score_table(std::span<const ScoreEntry> entries, const std::string& column = "CDD");

}  // namespace cdd
