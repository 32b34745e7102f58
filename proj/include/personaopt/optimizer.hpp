#pragma once

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "personaopt/backend.hpp"
#include "personaopt/dataset.hpp"
#include "personaopt/domain.hpp"
#include "personaopt/meta_prompt.hpp"
#include "personaopt/scoring.hpp"

namespace personaopt {

// Append-only record of every scored prompt, grouped by step.
class TrajectoryBuffer {
 public:
  TrajectoryBuffer() = default;

  const std::vector<ScoredPrompt>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }

  // The next step to run. Advances past every appended step, including steps
  // that produced no candidates.
  int step_counter() const { return step_counter_; }

  // Appends one step's entries; every entry must carry `step`, and `step`
  // must not precede the counter (state error otherwise).
  void append_step(int step, std::vector<ScoredPrompt> entries);

  std::vector<ScoredPrompt> at_step(int step) const;
  std::vector<int> steps() const;  // distinct steps with entries, ascending

  // Q*: highest s_ps, ties to the earliest step, then the smaller id.
  // State error when empty.
  const ScoredPrompt& best() const;
  std::vector<ScoredPrompt> top(std::size_t n) const;

  // Best-so-far s_ps after each step in steps().
  std::vector<std::pair<int, double>> best_so_far() const;

  static std::string encode_line(const ScoredPrompt& entry);
  std::string to_jsonl() const;
  static TrajectoryBuffer from_jsonl(const std::string& content);
  // Loads buffer.jsonl (format error with line number on a bad record).
  static TrajectoryBuffer load(const std::string& path);

  bool operator==(const TrajectoryBuffer&) const = default;

 private:
  std::vector<ScoredPrompt> entries_;
  int step_counter_ = 0;
};

// Optimizer and target may be the same model.
struct OptimizerBackends {
  BackendPtr optimizer;
  BackendPtr target;
};

struct StepReport {
  int step = 0;
  std::vector<std::string> question_ids;
  MetaPrompt meta;
  std::size_t requested = 0;
  std::size_t dropped = 0;  // completions without a sentinel block
  std::vector<ScoredPrompt> candidates;
  std::vector<Administration> log;
};

ScoringOptions scoring_options(const RunConfig& config);

// The q item indices sampled for `step`. Every candidate of a step is scored
// on the same sample.
std::vector<std::size_t> sample_questions(const RunConfig& config, std::size_t train_size,
                                          int step);

// Scores the empty Origin persona as the step-0 anchor.
StepReport seed_buffer(TrajectoryBuffer& buffer, const RunConfig& config,
                       const OptimizerBackends& backends, std::span<const TwinnedItem> train);

// One optimization step at buffer.step_counter(): sample q questions, build
// the meta-prompt, request k candidates, extract and score them, append.
StepReport step(TrajectoryBuffer& buffer, const RunConfig& config,
                const OptimizerBackends& backends, std::span<const TwinnedItem> train);

struct RunOptions {
  // Empty keeps everything in memory. Otherwise the directory receives
  // config.json, split-manifest.json, buffer.jsonl, state.json, result.json,
  // logs/step-<n>.jsonl and transcript/.
  std::string run_dir;
  bool resume = false;
  // Called after each persisted step; returning false stops the run there,
  // as if the process had been killed.
  std::function<bool(const StepReport&, const TrajectoryBuffer&)> after_step;
};

struct OptimizationResult {
  ScoredPrompt best;
  TrajectoryBuffer buffer;
  int steps_completed = 0;  // generated steps, excluding the step-0 anchor
  bool interrupted = false;
  std::size_t dropped_candidates = 0;
  // Present when rescore_top_m > 0: the top-m entries re-scored on the full
  // train set; best is then chosen from these.
  std::vector<ScoredPrompt> rescored;
};

void to_json(json& j, const OptimizationResult& result);

// Runs (or resumes) an optimization to config.max_steps. Train items must all
// have twins (data error otherwise). Resuming with a config whose fingerprint
// differs from the stored one is an integrity error.
OptimizationResult run(const RunConfig& config, const OptimizerBackends& backends,
                       const Split& split, const RunOptions& options = {});

// Loads a finished or interrupted run directory.
struct RunDirectory {
  RunConfig config;
  TrajectoryBuffer buffer;
  json manifest;
  std::optional<json> result;
};
RunDirectory load_run(const std::string& run_dir);

}  // namespace personaopt
