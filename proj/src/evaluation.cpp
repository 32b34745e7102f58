#include "personaopt/evaluation.hpp"

#include <algorithm>
#include <cctype>
#include <filesystem>
#include <mutex>
#include <sstream>

#include <spdlog/spdlog.h>

#include "personaopt/templates.hpp"
#include "personaopt/text.hpp"

namespace personaopt {

namespace fs = std::filesystem;

std::string_view to_string(ConditionKind kind) {
  switch (kind) {
    case ConditionKind::origin: return "origin";
    case ConditionKind::description_prompt: return "dp";
    case ConditionKind::p2: return "p2";
    case ConditionKind::profile: return "profile";
    case ConditionKind::profile_star: return "profile_star";
    case ConditionKind::naive: return "naive";
    case ConditionKind::inline_text: return "custom";
  }
  return "origin";
}

namespace {

Condition make_condition(ConditionKind kind, std::string name) {
  Condition c;
  c.kind = kind;
  c.name = std::move(name);
  return c;
}

std::string trait_word(Trait trait) { return to_lower(full_name(trait)); }

const json& template_json(std::string_view name) {
  static std::mutex mutex;
  static std::map<std::string, json, std::less<>> parsed;
  std::lock_guard lock(mutex);
  if (auto it = parsed.find(name); it != parsed.end()) return it->second;
  return parsed.emplace(std::string(name), json::parse(embedded_template(name))).first->second;
}

std::string per_trait_text(std::string_view file, Trait trait) {
  const auto& table = template_json(file);
  const std::string key(full_name(trait));
  if (!table.contains(key)) fail(ErrorKind::lookup, std::string(file) + " has no entry for " + key);
  return table.at(key).get<std::string>();
}

// Condition names may contain ':' and spaces; keep cell paths portable.
std::string path_component(const std::string& name) {
  std::string out;
  for (char c : name) {
    const bool keep = std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.';
    out += keep ? c : '_';
  }
  return out.empty() ? "_" : out;
}

}  // namespace

PersonaPrompt Condition::prompt_for(Trait trait) const {
  switch (kind) {
    case ConditionKind::origin:
      return PersonaPrompt::empty_origin();
    case ConditionKind::description_prompt:
      return {description_prompt(trait), PromptOrigin::baseline("dp")};
    case ConditionKind::p2:
      return {p2_prompt(trait), PromptOrigin::baseline("p2")};
    case ConditionKind::naive:
      return {naive_prompt(naive_template, prefix, trait), PromptOrigin::baseline(name)};
    case ConditionKind::inline_text:
      return {text, PromptOrigin::baseline(name)};
    case ConditionKind::profile:
    case ConditionKind::profile_star: {
      const auto it = prompts.find(trait);
      if (it == prompts.end()) {
        fail(ErrorKind::lookup, "condition '" + name + "' has no optimized prompt for " +
                                    std::string(full_name(trait)));
      }
      return it->second;
    }
  }
  return PersonaPrompt::empty_origin();
}

Condition origin_condition() { return make_condition(ConditionKind::origin, "origin"); }
Condition description_condition() { return make_condition(ConditionKind::description_prompt, "dp"); }
Condition p2_condition() { return make_condition(ConditionKind::p2, "p2"); }

Condition naive_condition(const std::string& tmpl, const std::string& prefix) {
  if (tmpl != "choose" && tmpl != "assistant") {
    fail(ErrorKind::config, "unknown naive template '" + tmpl + "' (expected choose or assistant)");
  }
  Condition c = make_condition(ConditionKind::naive, tmpl == "choose" ? "naive:choose" : "naive:assistant:" + prefix);
  c.naive_template = tmpl;
  c.prefix = prefix;
  return c;
}

Condition inline_condition(const std::string& label, const std::string& text) {
  Condition c = make_condition(ConditionKind::inline_text, "custom:" + label);
  c.text = text;
  return c;
}

Condition parse_condition(const std::string& name) {
  if (name == "origin") return origin_condition();
  if (name == "dp" || name == "description_prompt") return description_condition();
  if (name == "p2") return p2_condition();
  if (name == "naive" || name == "naive:choose") return naive_condition("choose");
  if (name.rfind("naive:assistant", 0) == 0) {
    const auto rest = name.substr(std::string("naive:assistant").size());
    return naive_condition("assistant", rest.empty() ? "" : rest.substr(1));
  }
  if (name.rfind("checkpoint:", 0) == 0) {
    return checkpoint_condition(load_checkpoint(name.substr(std::string("checkpoint:").size())));
  }
  if (name == "profile" || name == "profile_star") {
    fail(ErrorKind::config, "condition '" + name + "' needs optimized run directories");
  }
  fail(ErrorKind::config, "unknown condition '" + name + "'");
}

void register_run(Condition& condition, Trait trait, const PersonaPrompt& prompt,
                  const std::string& source_model) {
  condition.prompts.insert_or_assign(trait, prompt);
  condition.source_models.insert_or_assign(trait, source_model);
}

Condition profile_condition(ConditionKind kind, const std::vector<std::string>& run_dirs) {
  if (kind != ConditionKind::profile && kind != ConditionKind::profile_star) {
    fail(ErrorKind::config, "profile_condition needs profile or profile_star");
  }
  Condition condition = make_condition(kind, std::string(to_string(kind)));
  for (const auto& dir : run_dirs) {
    const auto run = load_run(dir);
    if (!run.result) fail(ErrorKind::state, "run " + dir + " has not finished");
    try {
      const auto best = run.result->at("best").get<ScoredPrompt>();
      register_run(condition, run.config.trait, best.prompt, run.config.target_model);
    } catch (const json::exception& e) {
      fail(ErrorKind::integrity, dir + "/result.json: " + e.what());
    }
  }
  return condition;
}

Condition checkpoint_condition(const Checkpoint& checkpoint) {
  Condition condition = make_condition(ConditionKind::profile, "checkpoint:" + std::to_string(checkpoint.step));
  register_run(condition, checkpoint.entry.trait, checkpoint.entry.prompt, checkpoint.target_model);
  return condition;
}

std::vector<TwinnedItem> checkpoint_sample(const Checkpoint& checkpoint,
                                           std::span<const TwinnedItem> pool) {
  std::vector<TwinnedItem> out;
  for (const auto& id : checkpoint.entry.question_sample) {
    const auto it = std::find_if(pool.begin(), pool.end(), [&](const TwinnedItem& t) { return t.source.id == id; });
    if (it == pool.end()) fail(ErrorKind::lookup, "checkpoint sample item '" + id + "' is not in the item pool");
    out.push_back(*it);
  }
  return out;
}

std::string description_prompt(Trait trait) {
  const std::string text =
      render_template(embedded_template("description_prompt.txt"),
                      {{"trait", trait_word(trait)},
                       {"description", per_trait_text("trait_descriptions.json", trait)}});
  return trim(text);
}

std::string p2_prompt(Trait trait) { return trim(per_trait_text("p2_prompts.json", trait)); }

std::string naive_prompt(const std::string& tmpl, const std::string& prefix, Trait trait) {
  std::string text;
  if (tmpl == "choose") {
    text = "Choose the option that shows " + trait_word(trait) + ".";
  } else if (tmpl == "assistant") {
    text = "You are an assistant with " + prefix + " " + trait_word(trait);
  } else {
    fail(ErrorKind::config, "unknown naive template '" + tmpl + "'");
  }
  // Collapse the double space an empty prefix leaves behind.
  std::string out;
  for (char c : text) {
    if (c == ' ' && !out.empty() && out.back() == ' ') continue;
    out += c;
  }
  return trim(out);
}

// ---------------------------------------------------------------------------
// Reports

void to_json(json& j, const EvaluationReport& report) {
  j = json{{"model_id", report.model_id},
           {"condition", report.condition},
           {"trait", report.trait},
           {"prompt_id", report.prompt_id},
           {"n_items", report.n_items},
           {"excluded_items", report.excluded_items},
           {"log_path", report.log_path}};
  if (report.scores) {
    j["scores"] = {{"s_origin", report.scores->s_origin},
                   {"s_consist", report.scores->s_consist},
                   {"s_ps", report.scores->s_ps}};
  } else {
    j["scores"] = nullptr;
  }
  if (report.likert) {
    json per_trait = json::object();
    for (const auto& [trait, stats] : report.likert->per_trait) {
      per_trait[std::string(full_name(trait))] = {
          {"mean", stats.mean}, {"std", stats.std}, {"trials", stats.trials}};
    }
    j["likert"] = {{"per_trait", per_trait},
                   {"grand_mean", report.likert->grand_mean},
                   {"grand_std", report.likert->grand_std},
                   {"invalid_trials", report.likert->invalid_trials}};
  } else {
    j["likert"] = nullptr;
  }
}

void from_json(const json& j, EvaluationReport& report) {
  report.model_id = j.at("model_id").get<std::string>();
  report.condition = j.at("condition").get<std::string>();
  report.trait = j.at("trait").get<Trait>();
  report.prompt_id = j.at("prompt_id").get<std::string>();
  report.n_items = j.at("n_items").get<std::size_t>();
  report.excluded_items = j.at("excluded_items").get<std::vector<std::string>>();
  report.log_path = j.at("log_path").get<std::string>();
  report.scores.reset();
  report.likert.reset();
  if (!j.at("scores").is_null()) {
    const auto& s = j.at("scores");
    report.scores = TraitScores{s.at("s_origin").get<double>(), s.at("s_consist").get<double>(),
                                s.at("s_ps").get<double>()};
  }
  if (!j.at("likert").is_null()) {
    const auto& l = j.at("likert");
    LikertSummary summary;
    for (const auto& [name, stats] : l.at("per_trait").items()) {
      summary.per_trait[parse_trait(name)] = {stats.at("mean").get<double>(),
                                              stats.at("std").get<double>(),
                                              stats.at("trials").get<std::size_t>()};
    }
    summary.grand_mean = l.at("grand_mean").get<double>();
    summary.grand_std = l.at("grand_std").get<double>();
    summary.invalid_trials = l.at("invalid_trials").get<std::size_t>();
    report.likert = summary;
  }
}

TraitScores scores_from_log(Trait trait, std::span<const Administration> log) {
  return scores_from_sets(collect_score_sets(trait, log));
}

std::vector<Administration> load_administration_log(const std::string& path) {
  std::vector<Administration> log;
  std::istringstream in(read_file(path));
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    try {
      log.push_back(json::parse(line).get<Administration>());
    } catch (const json::exception& e) {
      fail(ErrorKind::format, path + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return log;
}

namespace {

void persist_report(const std::string& dir, EvaluationReport& report, const std::string& log) {
  if (dir.empty()) return;
  const auto log_path = (fs::path(dir) / "administrations.jsonl").string();
  write_file_atomic(log_path, log);
  report.log_path = log_path;
  write_file_atomic((fs::path(dir) / "report.json").string(), json(report).dump(2) + "\n");
}

}  // namespace

EvaluationReport evaluate(const Condition& condition, Trait trait, const std::string& model_id,
                          ChatBackend& backend, std::span<const TwinnedItem> test_items,
                          std::uint64_t seed, const EvaluationOptions& options) {
  for (const auto& item : test_items) {
    if (!item.twin) {
      fail(ErrorKind::data, "test item '" + item.source.id +
                                "' has no paraphrase twin; s_ps is undefined without it");
    }
  }
  const auto prompt = condition.prompt_for(trait);
  auto scoring = options.scoring;
  scoring.model_id = model_id;
  auto outcome = trait_scores(prompt, test_items, trait, backend, seed, scoring);

  EvaluationReport report;
  report.model_id = model_id;
  report.condition = condition.name;
  report.trait = trait;
  report.prompt_id = prompt.id();
  report.n_items = outcome.sets.n_items;
  report.scores = scores_from_sets(outcome.sets);
  report.excluded_items = outcome.excluded_items;
  std::string log;
  for (const auto& a : outcome.log) log += json(a).dump() + "\n";
  persist_report(options.log_dir, report, log);
  return report;
}

EvaluationReport evaluate_likert(const Condition& condition, Trait trait,
                                 const std::string& model_id, ChatBackend& backend,
                                 std::span<const LikertItem> items, std::uint64_t seed,
                                 const EvaluationOptions& options) {
  const auto prompt = condition.prompt_for(trait);
  auto likert = options.likert;
  likert.model_id = model_id;
  const auto assessed = likert_assess(prompt, items, backend, seed, likert);

  EvaluationReport report;
  report.model_id = model_id;
  report.condition = condition.name;
  report.trait = trait;
  report.prompt_id = prompt.id();
  report.n_items = items.size();
  report.likert = LikertSummary{assessed.per_trait, assessed.grand_mean, assessed.grand_std,
                                assessed.invalid_trials};
  std::string log;
  for (const auto& a : assessed.answers) log += json(a).dump() + "\n";
  persist_report(options.log_dir, report, log);
  return report;
}

// ---------------------------------------------------------------------------
// Transfer matrix

const CellResult& TransferMatrix::cell(const std::string& model, const std::string& condition,
                                       Trait trait) const {
  for (const auto& c : cells) {
    if (c.model == model && c.condition == condition && c.trait == trait) return c;
  }
  fail(ErrorKind::lookup, "no cell " + model + "/" + condition + "/" + std::string(short_code(trait)));
}

std::size_t TransferMatrix::ok_count() const {
  return static_cast<std::size_t>(std::count_if(cells.begin(), cells.end(), [](const auto& c) { return c.ok; }));
}

std::size_t TransferMatrix::failed_count() const { return cells.size() - ok_count(); }

std::string TransferMatrix::render_text() const {
  constexpr std::size_t kTraitWidth = 11;
  std::string out;
  for (const auto& model : models) {
    if (!out.empty()) out += "\n";
    out += "Model: " + model + "\n";
    std::vector<std::size_t> widths;
    for (const auto& condition : conditions) widths.push_back(std::max<std::size_t>(condition.size(), 6));
    auto pad = [](std::string text, std::size_t width) {
      // "—" is three bytes but one column.
      const std::size_t columns = text == "—" ? 1 : text.size();
      if (columns < width) text.insert(0, width - columns, ' ');
      return text;
    };
    std::string header = "Personality";
    header.resize(kTraitWidth, ' ');
    for (std::size_t i = 0; i < conditions.size(); ++i) header += "  " + pad(conditions[i], widths[i]);
    out += header + "\n";
    for (Trait trait : traits) {
      std::string row(short_code(trait));
      row.resize(kTraitWidth, ' ');
      for (std::size_t i = 0; i < conditions.size(); ++i) {
        const auto& c = cell(model, conditions[i], trait);
        std::string value;
        if (!c.ok) {
          value = "failed";
        } else if (c.self_transfer) {
          value = "—";
        } else if (c.report->scores) {
          value = format_fixed(c.report->scores->s_ps, 3);
        } else {
          value = format_fixed(c.report->likert->grand_mean, 3);
        }
        row += "  " + pad(value, widths[i]);
      }
      out += row + "\n";
    }
  }
  return out;
}

void to_json(json& j, const TransferMatrix& matrix) {
  json traits = json::array();
  for (Trait t : matrix.traits) traits.push_back(t);
  json cells = json::array();
  for (const auto& c : matrix.cells) {
    json cell = {{"model", c.model},
                 {"condition", c.condition},
                 {"trait", c.trait},
                 {"status", c.ok ? "ok" : "failed"},
                 {"self_transfer", c.self_transfer}};
    if (c.ok) {
      cell["display"] = c.self_transfer ? "—" : "";
      cell["report"] = *c.report;
    } else {
      cell["error"] = c.error;
      cell["error_kind"] = std::string(to_string(*c.error_kind));
    }
    cells.push_back(std::move(cell));
  }
  j = json{{"models", matrix.models}, {"conditions", matrix.conditions},
           {"traits", traits}, {"cells", cells}};
}

TransferMatrix transfer_matrix(std::span<const Condition> conditions, std::span<const Trait> traits,
                               std::span<const ModelHandle> models,
                               const std::map<Trait, std::vector<TwinnedItem>>& test_items,
                               std::uint64_t seed, const TransferOptions& options) {
  if (models.empty()) fail(ErrorKind::config, "transfer matrix needs at least one model");
  if (conditions.empty()) fail(ErrorKind::config, "transfer matrix needs at least one condition");

  TransferMatrix matrix;
  for (const auto& m : models) matrix.models.push_back(m.name);
  for (const auto& c : conditions) matrix.conditions.push_back(c.name);
  matrix.traits.assign(traits.begin(), traits.end());

  struct Job {
    const ModelHandle* model;
    const Condition* condition;
    Trait trait;
  };
  std::vector<Job> jobs;
  for (const auto& model : models) {
    for (Trait trait : traits) {
      for (const auto& condition : conditions) jobs.push_back({&model, &condition, trait});
    }
  }
  matrix.cells.resize(jobs.size());

  parallel_for(jobs.size(), options.max_parallel_cells, [&](std::size_t i) {
    const auto& job = jobs[i];
    auto& cell = matrix.cells[i];
    cell.model = job.model->name;
    cell.condition = job.condition->name;
    cell.trait = job.trait;
    if (job.condition->kind == ConditionKind::profile) {
      const auto it = job.condition->source_models.find(job.trait);
      cell.self_transfer = it != job.condition->source_models.end() && it->second == job.model->name;
    }
    try {
      const auto items = test_items.find(job.trait);
      if (items == test_items.end()) {
        fail(ErrorKind::data, "no test items for " + std::string(full_name(job.trait)));
      }
      auto evaluation = options.evaluation;
      if (!options.out_dir.empty()) {
        evaluation.log_dir = (fs::path(options.out_dir) / "cells" / path_component(job.model->name) /
                              path_component(job.condition->name) / std::string(short_code(job.trait)))
                                 .string();
      }
      cell.report = evaluate(*job.condition, job.trait, job.model->name, *job.model->backend,
                             items->second, seed, evaluation);
      cell.ok = true;
    } catch (const Error& e) {
      cell.error_kind = e.kind();
      cell.error = e.what();
    } catch (const std::exception& e) {
      cell.error_kind = ErrorKind::state;
      cell.error = e.what();
    }
    if (!cell.ok) {
      spdlog::warn("cell {}/{}/{} failed: {}", cell.model, cell.condition, short_code(cell.trait),
                   cell.error);
    }
  });

  if (!options.out_dir.empty()) {
    write_file_atomic((fs::path(options.out_dir) / "report.json").string(), json(matrix).dump(2) + "\n");
    write_file_atomic((fs::path(options.out_dir) / "report.txt").string(), matrix.render_text());
  }
  return matrix;
}

ProfileStarResult profile_star(Trait trait, const ModelHandle& model, RunConfig config,
                               const Split& split, const RunOptions& options,
                               std::optional<Condition> existing) {
  for (const auto& item : split.train) {
    if (!item.twin) {
      fail(ErrorKind::data, "Profile* needs a twinned train set; '" + item.source.id + "' has no twin");
    }
  }
  config.trait = trait;
  config.optimizer_model = model.name;
  config.target_model = model.name;
  ProfileStarResult out;
  out.result = run(config, {model.backend, model.backend}, split, options);
  out.condition = existing ? std::move(*existing) : make_condition(ConditionKind::profile_star, "profile_star");
  register_run(out.condition, trait, out.result.best.prompt, model.name);
  return out;
}

}  // namespace personaopt
