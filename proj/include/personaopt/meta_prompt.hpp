#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "personaopt/domain.hpp"
#include "personaopt/rng.hpp"

namespace personaopt {

inline constexpr std::string_view kPersonaOpen = "<persona>";
inline constexpr std::string_view kPersonaClose = "</persona>";

struct TrajectoryLine {
  std::string prompt_id;
  std::string text;
  double score = 0.0;
};

struct ProblemExample {
  std::string item_id;
  char option_label = 'A';
  std::string text;  // scenario followed by the drawn option's text
};

struct MetaPrompt {
  std::string task_instruct;
  std::vector<TrajectoryLine> trajectory;  // ascending by score
  std::vector<ProblemExample> problem_examples;
  std::string format_directive;
  std::string text;                   // the rendered meta-prompt
  std::size_t dropped_for_budget = 0;  // trajectory entries removed to fit the budget
};

// Buffer entries ranked best first: s_ps descending, then earlier step, then
// id. Duplicate ids keep their best-ranked occurrence.
std::vector<ScoredPrompt> rank_entries(std::span<const ScoredPrompt> entries);
std::vector<ScoredPrompt> top_n(std::span<const ScoredPrompt> entries, std::size_t n);

std::string task_instruction(Trait trait, bool invert_keying);
const std::string& format_directive();

// Scenario plus the text of one uniformly drawn option.
ProblemExample open_ended_example(const QuestionItem& item, Rng& rng);

std::string render_trajectory(std::span<const TrajectoryLine> lines);
std::string render_examples(std::span<const ProblemExample> examples);

// Builds the optimizer's meta-prompt from the top-n buffer entries and the
// step's sampled items. When the rendering exceeds the token budget, trajectory
// entries are dropped lowest score first; a prompt that does not fit even
// without trajectory is a config error. An empty buffer is a state error.
MetaPrompt build_meta_prompt(std::span<const ScoredPrompt> buffer, const RunConfig& config,
                             std::span<const QuestionItem> sampled_items, Rng& rng);

// The first non-empty <persona>...</persona> block, trimmed.
std::optional<std::string> extract_candidate(const std::string& completion);

}  // namespace personaopt
