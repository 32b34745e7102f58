#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "personaopt/backend.hpp"
#include "personaopt/dataset.hpp"
#include "personaopt/domain.hpp"
#include "personaopt/optimizer.hpp"
#include "personaopt/scoring.hpp"
#include "personaopt/trajectory.hpp"

namespace personaopt {

enum class ConditionKind { origin, description_prompt, p2, profile, profile_star, naive, inline_text };

std::string_view to_string(ConditionKind kind);

// A prompt condition. Condition names are the CLI spellings:
//   origin, dp, p2, profile, profile_star, naive:choose,
//   naive:assistant:<prefix>, custom:<label>, checkpoint:<path>
struct Condition {
  ConditionKind kind = ConditionKind::origin;
  std::string name;
  std::string naive_template;  // "choose" or "assistant"
  std::string prefix;          // naive:assistant prefix
  std::string text;          // inline_text prompt
  // profile / profile_star: optimized prompt per trait and the model each
  // was optimized against.
  std::map<Trait, PersonaPrompt> prompts;
  std::map<Trait, std::string> source_models;

  // The persona for `trait`; empty for origin. Profiles without a prompt for
  // the trait are a lookup error.
  PersonaPrompt prompt_for(Trait trait) const;
};

Condition origin_condition();
Condition description_condition();
Condition p2_condition();
Condition naive_condition(const std::string& tmpl, const std::string& prefix = "");
Condition inline_condition(const std::string& label, const std::string& text);
// Parses origin, dp, p2, naive:* and checkpoint:<path> names. Profile conditions need run
// directories; see profile_condition().
Condition parse_condition(const std::string& name);

// Reads Q* (and the target model) from completed run directories.
Condition profile_condition(ConditionKind kind, const std::vector<std::string>& run_dirs);
void register_run(Condition& condition, Trait trait, const PersonaPrompt& prompt,
                  const std::string& source_model);

// An exported checkpoint as a profile-like condition named
// "checkpoint:<step>". Only the checkpoint's trait has a prompt.
Condition checkpoint_condition(const Checkpoint& checkpoint);
// The checkpoint's recorded question sample looked up in `pool`, in sample
// order. A missing id is a lookup error.
std::vector<TwinnedItem> checkpoint_sample(const Checkpoint& checkpoint,
                                           std::span<const TwinnedItem> pool);

std::string description_prompt(Trait trait);
std::string p2_prompt(Trait trait);
std::string naive_prompt(const std::string& tmpl, const std::string& prefix, Trait trait);

struct LikertSummary {
  std::map<Trait, LikertTraitStats> per_trait;
  double grand_mean = 0.0;
  double grand_std = 0.0;
  std::size_t invalid_trials = 0;
};

struct EvaluationReport {
  std::string model_id;
  std::string condition;
  Trait trait = Trait::openness;
  std::string prompt_id;
  std::size_t n_items = 0;
  // Exactly one of the two families is set.
  std::optional<TraitScores> scores;
  std::optional<LikertSummary> likert;
  std::vector<std::string> excluded_items;
  std::string log_path;  // empty when logs are not persisted
};

void to_json(json& j, const EvaluationReport& report);
void from_json(const json& j, EvaluationReport& report);

struct EvaluationOptions {
  ScoringOptions scoring;
  LikertOptions likert;
  std::string log_dir;  // receives administrations.jsonl and report.json
};

// TRAIT path: scores the condition's prompt on twinned test items. Items
// without twins are a data error since s_ps needs the paraphrase set.
EvaluationReport evaluate(const Condition& condition, Trait trait, const std::string& model_id,
                          ChatBackend& backend, std::span<const TwinnedItem> test_items,
                          std::uint64_t seed, const EvaluationOptions& options = {});

// MPI path.
EvaluationReport evaluate_likert(const Condition& condition, Trait trait,
                                 const std::string& model_id, ChatBackend& backend,
                                 std::span<const LikertItem> items, std::uint64_t seed,
                                 const EvaluationOptions& options = {});

// Recomputes a TRAIT report from a persisted administration log.
TraitScores scores_from_log(Trait trait, std::span<const Administration> log);
std::vector<Administration> load_administration_log(const std::string& path);

struct ModelHandle {
  std::string name;
  BackendPtr backend;
};

struct CellResult {
  std::string model;
  std::string condition;
  Trait trait = Trait::openness;
  bool ok = false;
  bool self_transfer = false;  // profile evaluated on its own source model
  std::optional<EvaluationReport> report;
  std::optional<ErrorKind> error_kind;
  std::string error;
};

struct TransferOptions {
  EvaluationOptions evaluation;
  std::string out_dir;  // report.json, report.txt and cells/<model>/<condition>/<trait>/
  int max_parallel_cells = 4;
};

struct TransferMatrix {
  std::vector<std::string> models;
  std::vector<std::string> conditions;
  std::vector<Trait> traits;
  std::vector<CellResult> cells;  // model-major, then trait, then condition

  const CellResult& cell(const std::string& model, const std::string& condition, Trait trait) const;
  std::size_t ok_count() const;
  std::size_t failed_count() const;
  std::string render_text() const;
};

void to_json(json& j, const TransferMatrix& matrix);

// Evaluates every (model, condition, trait) cell. Failures are recorded in
// the cell and never abort the matrix.
TransferMatrix transfer_matrix(std::span<const Condition> conditions, std::span<const Trait> traits,
                               std::span<const ModelHandle> models,
                               const std::map<Trait, std::vector<TwinnedItem>>& test_items,
                               std::uint64_t seed, const TransferOptions& options = {});

struct ProfileStarResult {
  OptimizationResult result;
  Condition condition;
};

// Re-optimizes with `model` as both optimizer and target and registers Q*
// under a profile_star condition (adding to `existing` when given).
ProfileStarResult profile_star(Trait trait, const ModelHandle& model, RunConfig config,
                               const Split& split, const RunOptions& options = {},
                               std::optional<Condition> existing = std::nullopt);

}  // namespace personaopt
