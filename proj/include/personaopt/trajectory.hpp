#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "personaopt/backend.hpp"
#include "personaopt/optimizer.hpp"

namespace personaopt {

enum class CurveStat { mean, max };

struct CurvePoint {
  int step = 0;
  double value = 0.0;

  bool operator==(const CurvePoint&) const = default;
};

struct Curve {
  Trait trait = Trait::openness;
  CurveStat stat = CurveStat::mean;
  int window = 8;
  std::vector<CurvePoint> points;    // per-step statistic of the candidates' s_ps
  std::vector<CurvePoint> smoothed;  // trailing moving average

  bool operator==(const Curve&) const = default;
};

// Trailing moving average: out[i] = mean(values[max(0, i - window + 1) .. i]).
// window < 1 is a domain error.
std::vector<double> trailing_average(std::span<const double> values, int window);

// One point per step present in the buffer (the step-0 anchor included).
// An empty buffer is a state error; window < 1 a domain error.
Curve curve(const TrajectoryBuffer& buffer, Trait trait, int window = 8,
            CurveStat stat = CurveStat::mean);

void to_json(json& j, const Curve& curve);
std::string render_svg(const Curve& curve);

struct Checkpoint {
  int step = 0;
  ScoredPrompt entry;              // the sampled prompt with its recorded scores
  std::uint64_t selection_seed = 0;
  std::size_t candidates_at_step = 0;
  std::uint64_t scoring_seed = 0;  // the run seed used for administrations
  std::string target_model;
  std::optional<std::string> summary;
  std::optional<std::string> summary_error;
};

void to_json(json& j, const Checkpoint& checkpoint);
void from_json(const json& j, Checkpoint& checkpoint);

// One uniformly sampled entry per requested step, seeded by (seed, step).
// A step absent from the buffer is a lookup error naming it.
std::vector<Checkpoint> checkpoints(const TrajectoryBuffer& buffer, std::span<const int> steps,
                                    std::uint64_t seed);

// The checkpoint steps for a run length: {6, 16, 24} for 25-step runs and
// {5, 10, 15} for 15-step runs; otherwise three evenly spread steps.
std::vector<int> default_checkpoint_steps(int max_steps);

std::string checkpoint_path(const std::string& dir, int step);
void export_checkpoint(const std::string& dir, const Checkpoint& checkpoint);
Checkpoint load_checkpoint(const std::string& path);

struct SummaryOptions {
  std::string model_id = "summarizer";
  std::string summary_template;  // empty -> summarize_checkpoint.txt
  int max_tokens = 128;
  int max_in_flight = 4;
};

// Fills summary (or summary_error) on each checkpoint; a failing request
// affects only its own checkpoint.
void summarize_checkpoints(std::span<Checkpoint> checkpoints, ChatBackend& summarizer,
                           const SummaryOptions& options = {});

}  // namespace personaopt
