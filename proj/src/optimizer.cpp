#include "personaopt/optimizer.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include <spdlog/spdlog.h>

#include "personaopt/cache.hpp"
#include "personaopt/rng.hpp"
#include "personaopt/text.hpp"

namespace personaopt {

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// TrajectoryBuffer

void TrajectoryBuffer::append_step(int step, std::vector<ScoredPrompt> entries) {
  if (step < step_counter_) {
    fail(ErrorKind::state, "step " + std::to_string(step) + " already recorded (next is " +
                               std::to_string(step_counter_) + ")");
  }
  for (const auto& entry : entries) {
    if (entry.step != step) fail(ErrorKind::state, "entry step does not match appended step");
  }
  for (auto& entry : entries) entries_.push_back(std::move(entry));
  step_counter_ = step + 1;
}

std::vector<ScoredPrompt> TrajectoryBuffer::at_step(int step) const {
  std::vector<ScoredPrompt> out;
  for (const auto& entry : entries_) {
    if (entry.step == step) out.push_back(entry);
  }
  return out;
}

std::vector<int> TrajectoryBuffer::steps() const {
  std::set<int> steps;
  for (const auto& entry : entries_) steps.insert(entry.step);
  return {steps.begin(), steps.end()};
}

const ScoredPrompt& TrajectoryBuffer::best() const {
  if (entries_.empty()) fail(ErrorKind::state, "buffer is empty");
  const ScoredPrompt* best = &entries_.front();
  for (const auto& entry : entries_) {
    const bool better =
        entry.s_ps > best->s_ps ||
        (entry.s_ps == best->s_ps &&
         (entry.step < best->step ||
          (entry.step == best->step && entry.prompt.id() < best->prompt.id())));
    if (better) best = &entry;
  }
  return *best;
}

std::vector<ScoredPrompt> TrajectoryBuffer::top(std::size_t n) const { return top_n(entries_, n); }

std::vector<std::pair<int, double>> TrajectoryBuffer::best_so_far() const {
  std::vector<std::pair<int, double>> out;
  double best = 0.0;
  bool any = false;
  for (int step : steps()) {
    for (const auto& entry : entries_) {
      if (entry.step != step) continue;
      best = any ? std::max(best, entry.s_ps) : entry.s_ps;
      any = true;
    }
    out.emplace_back(step, best);
  }
  return out;
}

std::string TrajectoryBuffer::encode_line(const ScoredPrompt& entry) {
  return json(entry).dump() + "\n";
}

std::string TrajectoryBuffer::to_jsonl() const {
  std::string out;
  for (const auto& entry : entries_) out += encode_line(entry);
  return out;
}

TrajectoryBuffer TrajectoryBuffer::from_jsonl(const std::string& content) {
  TrajectoryBuffer buffer;
  std::istringstream in(content);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    ScoredPrompt entry;
    try {
      entry = json::parse(line).get<ScoredPrompt>();
    } catch (const json::exception& e) {
      fail(ErrorKind::format, "buffer line " + std::to_string(line_no) + ": " + e.what());
    }
    if (entry.step < buffer.step_counter_ - 1) {
      fail(ErrorKind::integrity, "buffer line " + std::to_string(line_no) + " goes back in steps");
    }
    buffer.step_counter_ = entry.step + 1;
    buffer.entries_.push_back(std::move(entry));
  }
  return buffer;
}

TrajectoryBuffer TrajectoryBuffer::load(const std::string& path) {
  return from_jsonl(read_file(path));
}

// ---------------------------------------------------------------------------
// Steps

ScoringOptions scoring_options(const RunConfig& config) {
  ScoringOptions options;
  options.model_id = config.target_model;
  options.instruction = config.administration_instruction;
  options.max_tokens = config.target_max_tokens;
  options.max_in_flight = config.max_in_flight;
  options.invert_keying = config.invert_keying;
  return options;
}

std::vector<std::size_t> sample_questions(const RunConfig& config, std::size_t train_size,
                                          int step) {
  Rng rng(derive_seed(config.seed, "questions", {static_cast<std::uint64_t>(step)}));
  return rng.sample_indices(train_size, static_cast<std::size_t>(config.questions_per_step));
}

namespace {

std::vector<TwinnedItem> pick(std::span<const TwinnedItem> train,
                              const std::vector<std::size_t>& indices) {
  std::vector<TwinnedItem> out;
  out.reserve(indices.size());
  for (auto i : indices) out.push_back(train[i]);
  return out;
}

void require_twins(std::span<const TwinnedItem> items) {
  for (const auto& item : items) {
    if (!item.twin) {
      fail(ErrorKind::data, "item '" + item.source.id +
                                "' has no paraphrase twin; run `dataset augment` first");
    }
  }
}

void collect(StepReport& report, std::vector<ScoringOutcome> outcomes) {
  for (auto& outcome : outcomes) {
    report.candidates.push_back(std::move(outcome.scored));
    for (auto& a : outcome.log) report.log.push_back(std::move(a));
  }
}

}  // namespace

StepReport seed_buffer(TrajectoryBuffer& buffer, const RunConfig& config,
                       const OptimizerBackends& backends, std::span<const TwinnedItem> train) {
  if (!buffer.empty() || buffer.step_counter() != 0) {
    fail(ErrorKind::state, "buffer is already seeded");
  }
  StepReport report;
  report.step = 0;
  const auto sample = pick(train, sample_questions(config, train.size(), 0));
  for (const auto& item : sample) report.question_ids.push_back(item.source.id);
  const PersonaPrompt origin = PersonaPrompt::empty_origin();
  collect(report, score_prompts(std::span<const PersonaPrompt>(&origin, 1), sample, config.trait,
                                *backends.target, config.seed, scoring_options(config), 0));
  buffer.append_step(0, report.candidates);
  return report;
}

StepReport step(TrajectoryBuffer& buffer, const RunConfig& config,
                const OptimizerBackends& backends, std::span<const TwinnedItem> train) {
  if (buffer.empty()) fail(ErrorKind::state, "buffer must be seeded before optimizing");
  StepReport report;
  report.step = buffer.step_counter();
  const auto t = static_cast<std::uint64_t>(report.step);

  const auto sample = pick(train, sample_questions(config, train.size(), report.step));
  std::vector<QuestionItem> sources;
  for (const auto& item : sample) {
    report.question_ids.push_back(item.source.id);
    sources.push_back(item.source);
  }
  Rng meta_rng(derive_seed(config.seed, "meta", {t}));
  report.meta = build_meta_prompt(buffer.entries(), config, sources, meta_rng);

  std::vector<ChatRequest> requests;
  for (int j = 0; j < config.candidates_per_step; ++j) {
    ChatRequest request;
    request.model_id = config.optimizer_model;
    request.user = report.meta.text;
    request.temperature = config.optimizer_temperature;
    request.max_tokens = config.optimizer_max_tokens;
    request.seed_hint = derive_seed(config.seed, "candidate", {t, static_cast<std::uint64_t>(j)});
    requests.push_back(std::move(request));
  }
  report.requested = requests.size();
  const auto outcomes = complete_batch(*backends.optimizer, requests, config.max_in_flight);
  throw_first_error(outcomes);

  std::vector<PersonaPrompt> prompts;
  for (const auto& outcome : outcomes) {
    auto text = extract_candidate(outcome.response->text);
    if (!text) {
      ++report.dropped;
      continue;
    }
    prompts.emplace_back(std::move(*text), PromptOrigin::generated(report.step));
  }
  if (report.dropped > 0) {
    spdlog::warn("step {}: dropped {} of {} completions without a {} block", report.step,
                 report.dropped, report.requested, kPersonaOpen);
  }
  if (prompts.empty()) spdlog::warn("step {}: no usable candidates", report.step);

  collect(report, score_prompts(prompts, sample, config.trait, *backends.target, config.seed,
                                scoring_options(config), report.step));
  buffer.append_step(report.step, report.candidates);
  return report;
}

// ---------------------------------------------------------------------------
// Runs

void to_json(json& j, const OptimizationResult& result) {
  j = json{{"best", result.best},
           {"steps_completed", result.steps_completed},
           {"interrupted", result.interrupted},
           {"buffer_size", result.buffer.size()},
           {"dropped_candidates", result.dropped_candidates},
           {"rescored", result.rescored}};
}

namespace {

struct RunPaths {
  fs::path root;
  fs::path config() const { return root / "config.json"; }
  fs::path manifest() const { return root / "split-manifest.json"; }
  fs::path buffer() const { return root / "buffer.jsonl"; }
  fs::path state() const { return root / "state.json"; }
  fs::path result() const { return root / "result.json"; }
  fs::path transcript() const { return root / "transcript"; }
  fs::path log(int step) const { return root / "logs" / ("step-" + std::to_string(step) + ".jsonl"); }
};

json parse_json_file(const fs::path& path) {
  try {
    return json::parse(read_file(path.string()));
  } catch (const json::exception& e) {
    fail(ErrorKind::integrity, path.string() + ": " + e.what());
  }
}

void append_lines(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::app);
  if (!out) fail(ErrorKind::state, "cannot append to " + path.string());
  out << content;
  out.flush();
  if (!out) fail(ErrorKind::state, "write to " + path.string() + " failed");
}

void persist_step(const RunPaths& paths, const StepReport& report, const RunConfig& config,
                  std::size_t dropped_total) {
  std::string lines;
  for (const auto& entry : report.candidates) lines += TrajectoryBuffer::encode_line(entry);
  append_lines(paths.buffer(), lines);
  std::string log;
  for (const auto& a : report.log) log += json(a).dump() + "\n";
  write_file_atomic(paths.log(report.step).string(), log);
  write_file_atomic(paths.state().string(),
                    json{{"next_step", report.step + 1},
                         {"fingerprint", config.fingerprint()},
                         {"dropped_candidates", dropped_total}}
                            .dump(2) + "\n");
}

}  // namespace

OptimizationResult run(const RunConfig& config, const OptimizerBackends& backends,
                       const Split& split, const RunOptions& options) {
  config.validate();
  if (!backends.optimizer || !backends.target) fail(ErrorKind::config, "optimizer and target backends are required");
  if (split.spec.trait != config.trait) {
    fail(ErrorKind::config, "split trait does not match the run trait");
  }
  require_twins(split.train);
  if (split.train.size() < static_cast<std::size_t>(config.questions_per_step)) {
    fail(ErrorKind::capacity, "train set is smaller than questions_per_step");
  }

  const bool persistent = !options.run_dir.empty();
  const RunPaths paths{options.run_dir};
  TrajectoryBuffer buffer;
  OptimizationResult result;

  if (persistent) {
    fs::create_directories(paths.root);
    if (options.resume) {
      if (!fs::exists(paths.config())) {
        fail(ErrorKind::lookup, "no run to resume in " + paths.root.string());
      }
      const auto stored = parse_json_file(paths.config());
      if (stored.value("fingerprint", std::string{}) != config.fingerprint()) {
        fail(ErrorKind::integrity, "run directory " + paths.root.string() +
                                       " was created with a different configuration");
      }
      int next_step = 0;
      if (fs::exists(paths.state())) {
        const auto state = parse_json_file(paths.state());
        next_step = state.at("next_step").get<int>();
        result.dropped_candidates = state.value("dropped_candidates", std::size_t{0});
      }
      TrajectoryBuffer stored_buffer;
      if (fs::exists(paths.buffer())) stored_buffer = TrajectoryBuffer::load(paths.buffer().string());
      // Entries past the last completed step come from an interrupted write.
      for (int s : stored_buffer.steps()) {
        if (s < next_step) buffer.append_step(s, stored_buffer.at_step(s));
      }
      if (next_step > 0 && buffer.step_counter() < next_step) buffer.append_step(next_step - 1, {});
      write_file_atomic(paths.buffer().string(), buffer.to_jsonl());
      spdlog::info("resuming {} at step {}", paths.root.string(), next_step);
    } else {
      if (fs::exists(paths.state()) || fs::exists(paths.buffer())) {
        fail(ErrorKind::state, "run directory " + paths.root.string() +
                                   " already holds a run; pass --resume to continue it");
      }
      write_file_atomic(paths.config().string(),
                        json{{"config", config}, {"fingerprint", config.fingerprint()}}.dump(2) + "\n");
      write_file_atomic(paths.manifest().string(), split_manifest(split).dump(2) + "\n");
      write_file_atomic(paths.buffer().string(), "");
    }
  }

  const std::string cache_dir = persistent ? paths.transcript().string() : std::string{};
  OptimizerBackends cached{
      std::make_shared<CachingBackend>(backends.optimizer, cache_dir,
                                       CachePolicy{config.cache_optimizer_calls, true}),
      std::make_shared<CachingBackend>(backends.target, cache_dir, CachePolicy{})};

  auto finish_step = [&](const StepReport& report) {
    result.dropped_candidates += report.dropped;
    if (persistent) persist_step(paths, report, config, result.dropped_candidates);
    const auto best = buffer.best().s_ps;
    spdlog::info("step {}: {} candidate(s), best s_ps so far {:.3f}", report.step,
                 report.candidates.size(), best);
    if (options.after_step && !options.after_step(report, buffer)) {
      result.interrupted = true;
    }
  };

  if (buffer.step_counter() == 0) finish_step(seed_buffer(buffer, config, cached, split.train));
  while (!result.interrupted && buffer.step_counter() <= config.max_steps) {
    finish_step(step(buffer, config, cached, split.train));
  }

  result.steps_completed = std::max(0, buffer.step_counter() - 1);
  result.best = buffer.best();
  if (!result.interrupted && config.rescore_top_m > 0) {
    const auto top = buffer.top(static_cast<std::size_t>(config.rescore_top_m));
    std::vector<PersonaPrompt> prompts;
    for (const auto& entry : top) prompts.push_back(entry.prompt);
    auto outcomes = score_prompts(prompts, split.train, config.trait, *cached.target, config.seed,
                                  scoring_options(config), 0);
    for (std::size_t i = 0; i < outcomes.size(); ++i) {
      auto scored = std::move(outcomes[i].scored);
      scored.step = top[i].step;
      result.rescored.push_back(std::move(scored));
    }
    result.best = rank_entries(result.rescored).front();
  }
  result.buffer = std::move(buffer);
  if (persistent && !result.interrupted) {
    write_file_atomic(paths.result().string(), json(result).dump(2) + "\n");
  }
  return result;
}

RunDirectory load_run(const std::string& run_dir) {
  const RunPaths paths{run_dir};
  if (!fs::exists(paths.config())) fail(ErrorKind::lookup, "no run in " + run_dir);
  RunDirectory out;
  const auto stored = parse_json_file(paths.config());
  try {
    out.config = stored.at("config").get<RunConfig>();
  } catch (const json::exception& e) {
    fail(ErrorKind::integrity, paths.config().string() + ": " + e.what());
  }
  if (stored.value("fingerprint", std::string{}) != out.config.fingerprint()) {
    fail(ErrorKind::integrity, paths.config().string() + ": fingerprint does not match its config");
  }
  if (fs::exists(paths.manifest())) out.manifest = parse_json_file(paths.manifest());
  if (fs::exists(paths.buffer())) out.buffer = TrajectoryBuffer::load(paths.buffer().string());
  if (fs::exists(paths.result())) out.result = parse_json_file(paths.result());
  return out;
}

}  // namespace personaopt
