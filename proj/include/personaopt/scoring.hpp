#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "personaopt/backend.hpp"
#include "personaopt/dataset.hpp"
#include "personaopt/domain.hpp"

namespace personaopt {

// ---------------------------------------------------------------------------
// Situational multiple-choice path

enum class Form { origin, paraphrase };

// One evaluation of the target on one item under one prompt.
struct Administration {
  std::string prompt_id;
  std::string item_id;    // the administered item (the twin's own id for paraphrases)
  std::string source_id;  // the source item; S^aug is keyed by this id
  Form form = Form::origin;
  std::vector<char> presented_order;  // stable option labels in display order
  std::string raw_response;
  std::optional<char> parsed_choice;  // stable label
  std::optional<bool> is_target_keyed;

  // The binary item score: 1 iff the choice is keyed toward the target.
  int f() const { return is_target_keyed.value_or(false) ? 1 : 0; }

  bool operator==(const Administration&) const = default;
};

void to_json(json& j, const Administration& a);
void from_json(const json& j, Administration& a);

struct ScoringOptions {
  std::string model_id = "target";
  std::string instruction;  // empty -> default_administration_instruction()
  int max_tokens = 64;
  int max_in_flight = 8;
  bool invert_keying = false;  // count low-keyed choices as target-keyed
};

const std::string& default_administration_instruction();

// Seeded permutation of the item's option labels. Seeds for administrations
// come from administration_seed(), which depends on the run seed and the
// administered item only, so every prompt sees the same presentation.
std::vector<char> presentation_order(const QuestionItem& item, std::uint64_t rng_seed);
std::uint64_t administration_seed(std::uint64_t seed, const std::string& item_id);

std::string render_item(const QuestionItem& item, std::span<const char> order,
                        const std::string& instruction);
ChatRequest administration_request(const PersonaPrompt& prompt, const QuestionItem& item,
                                   std::span<const char> order, const ScoringOptions& options);

// Maps a free-text reply to a stable option label:
//   1. a display letter at the very start, alone or followed by punctuation
//      ("B", "B.", "(B)", "**B**: ...");
//   2. exactly one distinct standalone display letter anywhere;
//   3. exactly one option text contained in the reply (case and whitespace
//      insensitive);
// otherwise no choice. Never throws.
std::optional<char> parse_choice(const std::string& response, const QuestionItem& item,
                                 std::span<const char> order);

// Builds the Administration record for a reply. Pure.
Administration record_administration(const PersonaPrompt& prompt, const QuestionItem& item,
                                     Form form, const std::string& source_id,
                                     std::vector<char> order, std::string response,
                                     bool invert_keying);

Administration administer(const PersonaPrompt& prompt, const QuestionItem& item,
                          ChatBackend& target, std::uint64_t rng_seed,
                          const ScoringOptions& options = {});

struct TraitScoreSet {
  Trait trait = Trait::openness;
  std::set<std::string> administered;    // source ids
  std::set<std::string> origin_correct;  // S^origin
  std::set<std::string> aug_correct;     // S^aug, keyed by source id
  std::size_t n_items = 0;               // |D_p|
};

struct TraitScores {
  double s_origin = 0.0;
  double s_consist = 0.0;  // 0 when S^origin is empty
  double s_ps = 0.0;
};

// Folds administrations (both forms) into the score sets. Pure.
TraitScoreSet collect_score_sets(Trait trait, std::span<const Administration> log);
TraitScores scores_from_sets(const TraitScoreSet& sets);

struct ScoringOutcome {
  ScoredPrompt scored;
  TraitScoreSet sets;
  std::vector<Administration> log;
  std::vector<std::string> excluded_items;  // sources without a twin
};

// Administers every twinned item in both forms and computes
//   s_origin  = |S^origin| / |D_p|
//   s_consist = |S^origin ∩ S^aug| / |S^origin|
//   s_ps      = |S^origin ∩ S^aug| / |D_p|
// Items without twins are left out of all three terms and listed in
// excluded_items. Items of another trait are a data error; transport errors
// propagate.
ScoringOutcome trait_scores(const PersonaPrompt& prompt, std::span<const TwinnedItem> items,
                            Trait trait, ChatBackend& target, std::uint64_t seed,
                            const ScoringOptions& options = {}, int step = 0);

// Scores several prompts over the same items in one fanned-out batch.
std::vector<ScoringOutcome> score_prompts(std::span<const PersonaPrompt> prompts,
                                          std::span<const TwinnedItem> items, Trait trait,
                                          ChatBackend& target, std::uint64_t seed,
                                          const ScoringOptions& options = {}, int step = 0);

// ---------------------------------------------------------------------------
// Likert (MPI-style) path

struct LikertOptions {
  std::string model_id = "target";
  std::string instruction;  // empty -> default_likert_instruction()
  int trials = 15;
  // Statements per request. 0 sends the whole questionnaire in one request,
  // so statement order is visible to the model.
  int items_per_request = 0;
  int max_tokens = 2048;
  int max_in_flight = 8;
  double max_skip_fraction = 0.2;  // trials skipping more are invalid
};

const std::string& default_likert_instruction();

struct LikertAnswer {
  int trial = 0;
  int position = 0;  // 0-based position within the trial's ordering
  std::string item_id;
  Trait trait = Trait::openness;
  LikertKeying keying = LikertKeying::positive;
  std::optional<int> raw;  // absent when the rating could not be parsed

  bool operator==(const LikertAnswer&) const = default;
};

void to_json(json& j, const LikertAnswer& a);
void from_json(const json& j, LikertAnswer& a);

struct LikertTrial {
  int index = 0;
  std::map<Trait, double> trait_means;
  std::size_t answered = 0;
  std::size_t skipped = 0;
  bool valid = true;
};

struct LikertTraitStats {
  double mean = 0.0;  // mean of per-trial means
  double std = 0.0;   // sample standard deviation across valid trials
  std::size_t trials = 0;
};

struct LikertReport {
  std::map<Trait, LikertTraitStats> per_trait;
  double grand_mean = 0.0;  // average of per-trait means
  double grand_std = 0.0;   // average of per-trait standard deviations
  std::vector<LikertTrial> trials;
  std::size_t invalid_trials = 0;
  std::vector<LikertAnswer> answers;
};

// Parses "<position>: <rating>" lines (also "3. 4", "(3) 4", "3 - 4").
// Positions are 1-based. When expected == 1 and no numbered line is found, a
// lone rating digit anywhere in the reply is accepted.
std::map<int, int> parse_ratings(const std::string& response, int expected);

std::string render_questionnaire(std::span<const LikertItem> items, const std::string& instruction);

// Aggregates answers into trial means and cross-trial statistics. Pure.
LikertReport likert_report_from_answers(std::vector<LikertAnswer> answers, int trials,
                                        double max_skip_fraction);

// Administers the questionnaire `trials` times, each in a fresh seeded order;
// reverse-keys negatively keyed statements before averaging.
LikertReport likert_assess(const PersonaPrompt& prompt, std::span<const LikertItem> items,
                           ChatBackend& target, std::uint64_t seed,
                           const LikertOptions& options = {});

}  // namespace personaopt
