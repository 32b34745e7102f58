#include "cli.hpp"

#include <cstdlib>
#include <filesystem>
#include <map>
#include <optional>

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "personaopt/backend_registry.hpp"
#include "personaopt/cache.hpp"
#include "personaopt/dataset.hpp"
#include "personaopt/evaluation.hpp"
#include "personaopt/optimizer.hpp"
#include "personaopt/text.hpp"
#include "personaopt/trajectory.hpp"

namespace personaopt::cli {

namespace fs = std::filesystem;

namespace {

// Environment variables consulted between the config file and the flags.
constexpr const char* kEnvBackends = "PERSONAOPT_BACKENDS";
constexpr const char* kEnvTrait = "PERSONAOPT_TRAIT";
constexpr const char* kEnvSeed = "PERSONAOPT_SEED";
constexpr const char* kEnvOptimizer = "PERSONAOPT_OPTIMIZER_MODEL";
constexpr const char* kEnvTarget = "PERSONAOPT_TARGET_MODEL";
constexpr const char* kEnvMaxInFlight = "PERSONAOPT_MAX_IN_FLIGHT";

std::optional<std::string> env(const char* name) {
  const char* value = std::getenv(name);
  if (value == nullptr || *value == '\0') return std::nullopt;
  return std::string(value);
}

json parse_json_text(const std::string& text, const std::string& what) {
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    fail(ErrorKind::config, what + ": " + e.what());
  }
}

std::vector<int> parse_steps(const std::string& text) {
  std::vector<int> steps;
  for (const auto& part : split(text, ',')) {
    const auto t = trim(part);
    if (t.empty()) continue;
    try {
      std::size_t used = 0;
      steps.push_back(std::stoi(t, &used));
      if (used != t.size()) throw std::invalid_argument(t);
    } catch (const std::exception&) {
      fail(ErrorKind::config, "bad step '" + t + "'");
    }
  }
  return steps;
}

std::vector<Trait> parse_traits(const std::vector<std::string>& names) {
  if (names.empty()) return {kAllTraits.begin(), kAllTraits.end()};
  std::vector<Trait> traits;
  for (const auto& name : names) {
    const auto t = try_parse_trait(name);
    if (!t) fail(ErrorKind::config, "unknown trait '" + name + "'");
    traits.push_back(*t);
  }
  return traits;
}

Trait trait_flag(const std::string& name) {
  const auto t = try_parse_trait(name);
  if (!t) fail(ErrorKind::config, "unknown trait '" + name + "'");
  return *t;
}

struct Shared {
  std::string backends_file;
  int max_in_flight = 0;  // 0: keep the config value
  bool verbose = false;
};

BackendRegistry make_registry(const Shared& shared) {
  std::string path = shared.backends_file;
  if (path.empty()) path = env(kEnvBackends).value_or("");
  return path.empty() ? BackendRegistry{} : BackendRegistry::load(path);
}

// Source items of one trait split by a persisted manifest or by sizes.
Split resolve_split(const std::vector<QuestionItem>& items, Trait trait, const std::string& manifest,
                    int train_size, int test_size, std::uint64_t seed) {
  if (!manifest.empty()) {
    auto s = split_from_manifest(items, parse_json_text(read_file(manifest), manifest));
    if (s.spec.trait != trait) fail(ErrorKind::config, "manifest " + manifest + " is for another trait");
    return s;
  }
  return split(items, SplitSpec{trait, train_size, test_size, seed});
}

void print_validation(std::ostream& out, const std::string& path, const ValidationReport& report) {
  out << path << ": " << report.source_count << " source item(s), " << report.twin_count
      << " twin(s), paraphrase coverage " << format_fixed(report.paraphrase_coverage, 3) << "\n";
  for (const auto& [trait, count] : report.per_trait_counts) {
    out << "  " << short_code(trait) << ": " << count << "\n";
  }
  for (const auto& v : report.violations) out << "  violation " << v.item_id << ": " << v.message << "\n";
  out << (report.valid() ? "valid" : std::to_string(report.violations.size()) + " violation(s)") << "\n";
}

// ---------------------------------------------------------------------------
// dataset

int cmd_validate(const std::string& bank, std::ostream& out) {
  const Bank loaded = load_bank_unvalidated(bank);
  if (const auto* questions = std::get_if<QuestionBank>(&loaded)) {
    const auto report = validate_item_bank(questions->items);
    if (questions->dark_triad_filtered > 0) {
      out << "filtered " << questions->dark_triad_filtered << " Dark Triad item(s)\n";
    }
    print_validation(out, bank, report);
    return report.valid() ? 0 : exit_code(ErrorKind::data);
  }
  const auto& statements = std::get<LikertBank>(loaded);
  const auto report = validate_likert_bank(statements.items);
  print_validation(out, bank, report);
  return report.valid() ? 0 : exit_code(ErrorKind::data);
}

struct AugmentArgs {
  std::string bank;
  std::string backend;
  std::string out_path;
  std::string cache_dir;
  std::string template_file;
};

int cmd_augment(const AugmentArgs& args, const Shared& shared, std::ostream& out) {
  auto registry = make_registry(shared);
  const auto bank = load_question_bank(args.bank);
  const std::string cache_dir =
      args.cache_dir.empty() ? args.out_path + ".cache" : args.cache_dir;
  auto backend = std::make_shared<CachingBackend>(registry.resolve(args.backend), cache_dir);
  AugmentOptions options;
  options.model_id = args.backend;
  if (!args.template_file.empty()) options.paraphrase_template = read_file(args.template_file);
  if (shared.max_in_flight > 0) options.max_in_flight = shared.max_in_flight;
  const auto result = augment(bank.items, *backend, options);
  const auto report = validate_item_bank(result.items);
  if (!report.valid()) print_validation(out, args.out_path, report);
  write_bank(args.out_path, result.items);
  out << "wrote " << args.out_path << ": " << result.twins_created << " twin(s) created, "
      << result.errors.size() << " augmentation error(s)\n";
  for (const auto& e : result.errors) out << "  " << e.item_id << ": " << e.reason << "\n";
  return report.valid() ? 0 : exit_code(ErrorKind::data);
}

struct SplitArgs {
  std::string bank;
  std::string trait;
  int train_size = 200;
  int test_size = 800;
  std::uint64_t seed = 0;
  std::string out_path;
};

int cmd_split(const SplitArgs& args, std::ostream& out) {
  const auto bank = load_question_bank(args.bank);
  const auto s = split(bank.items, SplitSpec{trait_flag(args.trait), args.train_size, args.test_size, args.seed});
  const auto manifest = split_manifest(s).dump(2) + "\n";
  if (args.out_path.empty()) {
    out << manifest;
  } else {
    write_file_atomic(args.out_path, manifest);
    out << "wrote " << args.out_path << ": " << s.train.size() << " train / " << s.test.size()
        << " test\n";
  }
  return 0;
}

// ---------------------------------------------------------------------------
// optimize

struct OptimizeArgs {
  std::string run_dir;
  std::string bank;
  std::string config_file;
  bool resume = false;
  std::optional<std::string> trait;
  std::optional<int> steps;
  std::optional<int> k;
  std::optional<int> n;
  std::optional<int> q;
  std::optional<double> temperature;
  std::optional<std::uint64_t> seed;
  std::optional<int> train_size;
  std::optional<int> test_size;
  std::optional<std::string> optimizer;
  std::optional<std::string> target;
  std::optional<int> rescore_top_m;
  std::optional<int> optimizer_max_tokens;
  std::optional<int> target_max_tokens;
  std::optional<std::size_t> token_budget;
  bool invert_keying = false;
  bool cache_optimizer_calls = false;
  std::string instruction_file;
  std::string meta_template_file;
};

// File < env < flags. On resume the stored configuration is the base.
RunConfig resolve_config(const OptimizeArgs& args, const Shared& shared) {
  json file = json::object();
  if (!args.config_file.empty()) {
    file = parse_json_text(read_file(args.config_file), args.config_file);
    if (!file.is_object()) fail(ErrorKind::config, args.config_file + ": expected a JSON object");
  }
  std::optional<RunConfig> stored;
  const auto stored_path = fs::path(args.run_dir) / "config.json";
  if (args.resume && fs::exists(stored_path)) stored = load_run(args.run_dir).config;

  std::optional<Trait> trait;
  if (file.contains("trait")) trait = file.at("trait").get<Trait>();
  if (auto e = env(kEnvTrait)) trait = trait_flag(*e);
  if (args.trait) trait = trait_flag(*args.trait);
  if (!trait && stored) trait = stored->trait;
  if (!trait) fail(ErrorKind::config, "no trait given (use --trait, " + std::string(kEnvTrait) + " or the config file)");

  const RunConfig base = stored && stored->trait == *trait ? *stored : RunConfig::defaults_for(*trait);
  json j = base;
  for (const auto& [key, value] : file.items()) {
    if (key != "trait") j[key] = value;
  }
  if (auto e = env(kEnvSeed)) j["seed"] = std::stoull(*e);
  if (auto e = env(kEnvOptimizer)) j["optimizer_model"] = *e;
  if (auto e = env(kEnvTarget)) j["target_model"] = *e;
  if (auto e = env(kEnvMaxInFlight)) j["max_in_flight"] = std::stoi(*e);

  auto set = [&j](const char* key, const auto& flag) {
    if (flag) j[key] = *flag;
  };
  set("max_steps", args.steps);
  set("candidates_per_step", args.k);
  set("trajectory_top_n", args.n);
  set("questions_per_step", args.q);
  set("optimizer_temperature", args.temperature);
  set("seed", args.seed);
  set("train_size", args.train_size);
  set("test_size", args.test_size);
  set("optimizer_model", args.optimizer);
  set("target_model", args.target);
  set("rescore_top_m", args.rescore_top_m);
  set("optimizer_max_tokens", args.optimizer_max_tokens);
  set("target_max_tokens", args.target_max_tokens);
  set("meta_prompt_token_budget", args.token_budget);
  if (shared.max_in_flight > 0) j["max_in_flight"] = shared.max_in_flight;
  if (args.invert_keying) j["invert_keying"] = true;
  if (args.cache_optimizer_calls) j["cache_optimizer_calls"] = true;
  if (!args.instruction_file.empty()) j["administration_instruction"] = read_file(args.instruction_file);
  if (!args.meta_template_file.empty()) j["meta_prompt_template"] = read_file(args.meta_template_file);
  j["trait"] = *trait;

  RunConfig config;
  try {
    config = j.get<RunConfig>();
  } catch (const json::exception& e) {
    fail(ErrorKind::config, std::string("bad configuration: ") + e.what());
  }
  config.validate();
  return config;
}

int cmd_optimize(OptimizeArgs args, const Shared& shared, std::ostream& out) {
  // Re-running on a finished or partial run with the same configuration
  // continues it; a different configuration is refused by the fingerprint
  // check.
  if (!args.resume && fs::exists(fs::path(args.run_dir) / "config.json")) args.resume = true;
  const auto config = resolve_config(args, shared);
  out << "resolved configuration:\n" << json(config).dump(2) << "\n";

  auto registry = make_registry(shared);
  const auto bank = load_question_bank(args.bank);
  const auto manifest = fs::path(args.run_dir) / "split-manifest.json";
  const Split s = args.resume && fs::exists(manifest)
                      ? resolve_split(bank.items, config.trait, manifest.string(), 0, 0, 0)
                      : split(bank.items, SplitSpec{config.trait, config.train_size, config.test_size, config.seed});

  const OptimizerBackends backends{registry.resolve(config.optimizer_model),
                                   registry.resolve(config.target_model)};
  RunOptions options;
  options.run_dir = args.run_dir;
  options.resume = args.resume;
  const auto result = run(config, backends, s, options);
  out << "steps completed: " << result.steps_completed << ", buffer entries: " << result.buffer.size()
      << ", dropped candidates: " << result.dropped_candidates << "\n";
  out << "Q* (step " << result.best.step << ", s_ps " << format_fixed(result.best.s_ps, 3)
      << "):\n" << result.best.prompt.text() << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// evaluate / transfer

struct EvalArgs {
  std::string condition = "origin";
  std::vector<std::string> profile_runs;
  std::string model;
  std::string bank;
  std::string likert_bank;
  std::string trait;
  std::string manifest;
  int train_size = 200;
  int test_size = 800;
  std::uint64_t seed = 0;
  int trials = 15;
  std::string out_dir;
  std::string instruction_file;
  bool checkpoint_sample = false;
};

Condition resolve_condition(const std::string& name, const std::vector<std::string>& profile_runs,
                            const std::vector<std::string>& star_runs) {
  if (name == "profile") return profile_condition(ConditionKind::profile, profile_runs);
  if (name == "profile_star") return profile_condition(ConditionKind::profile_star, star_runs);
  return parse_condition(name);
}

int cmd_evaluate(const EvalArgs& args, const Shared& shared, std::ostream& out) {
  auto registry = make_registry(shared);
  const Trait trait = trait_flag(args.trait);
  const auto condition = resolve_condition(args.condition, args.profile_runs, args.profile_runs);
  auto backend = std::make_shared<CachingBackend>(registry.resolve(args.model),
                                                  args.out_dir.empty() ? "" : (fs::path(args.out_dir) / "transcript").string());
  EvaluationOptions options;
  options.log_dir = args.out_dir;
  if (!args.instruction_file.empty()) options.scoring.instruction = read_file(args.instruction_file);
  if (shared.max_in_flight > 0) {
    options.scoring.max_in_flight = shared.max_in_flight;
    options.likert.max_in_flight = shared.max_in_flight;
  }
  EvaluationReport report;
  if (!args.likert_bank.empty()) {
    const auto bank = load_likert_bank(args.likert_bank);
    options.likert.trials = args.trials;
    report = evaluate_likert(condition, trait, args.model, *backend, bank.items, args.seed, options);
  } else {
    if (args.bank.empty()) fail(ErrorKind::config, "evaluate needs --bank or --likert-bank");
    const auto bank = load_question_bank(args.bank);
    const auto s = resolve_split(bank.items, trait, args.manifest, args.train_size, args.test_size, args.seed);
    if (args.checkpoint_sample) {
      // Replays the administrations the optimizer scored this checkpoint on.
      if (args.condition.rfind("checkpoint:", 0) != 0) {
        fail(ErrorKind::config, "--checkpoint-sample needs a checkpoint:<path> condition");
      }
      const auto checkpoint = load_checkpoint(args.condition.substr(std::string("checkpoint:").size()));
      report = evaluate(condition, trait, args.model, *backend, checkpoint_sample(checkpoint, s.train),
                        checkpoint.scoring_seed, options);
    } else {
      report = evaluate(condition, trait, args.model, *backend, s.test, args.seed, options);
    }
  }
  out << json(report).dump(2) << "\n";
  return 0;
}

struct TransferArgs {
  std::vector<std::string> models;
  std::vector<std::string> conditions;
  std::vector<std::string> traits;
  std::vector<std::string> profile_runs;
  std::vector<std::string> star_runs;
  std::string bank;
  std::string manifest_dir;
  int train_size = 200;
  int test_size = 800;
  std::uint64_t seed = 0;
  std::string out_dir;
  int max_parallel_cells = 4;
};

int cmd_transfer(const TransferArgs& args, const Shared& shared, std::ostream& out) {
  auto registry = make_registry(shared);
  const auto traits = parse_traits(args.traits);
  std::vector<Condition> conditions;
  for (const auto& name : args.conditions) {
    conditions.push_back(resolve_condition(name, args.profile_runs, args.star_runs));
  }
  std::vector<ModelHandle> models;
  for (const auto& ref : args.models) {
    BackendPtr backend;
    try {
      backend = registry.resolve(ref);
    } catch (const Error& e) {
      // An unresolvable model fails its own cells only.
      struct Unreachable final : ChatBackend {
        std::string ref, message;
        ChatResponse complete(const ChatRequest&) override { fail(ErrorKind::transport, message); }
        std::string name() const override { return ref; }
      };
      auto unreachable = std::make_shared<Unreachable>();
      unreachable->ref = ref;
      unreachable->message = e.what();
      backend = unreachable;
    }
    const std::string transcript =
        args.out_dir.empty() ? "" : (fs::path(args.out_dir) / "transcript").string();
    models.push_back({ref, std::make_shared<CachingBackend>(backend, transcript)});
  }
  const auto bank = load_question_bank(args.bank);
  std::map<Trait, std::vector<TwinnedItem>> test_items;
  for (Trait t : traits) {
    const std::string manifest =
        args.manifest_dir.empty()
            ? ""
            : (fs::path(args.manifest_dir) / (std::string(short_code(t)) + ".json")).string();
    test_items[t] = resolve_split(bank.items, t, manifest, args.train_size, args.test_size, args.seed).test;
  }
  TransferOptions options;
  options.out_dir = args.out_dir;
  options.max_parallel_cells = args.max_parallel_cells;
  if (shared.max_in_flight > 0) options.evaluation.scoring.max_in_flight = shared.max_in_flight;
  const auto matrix = transfer_matrix(conditions, traits, models, test_items, args.seed, options);
  out << matrix.render_text();
  out << matrix.ok_count() << " cell(s) ok, " << matrix.failed_count() << " failed\n";
  return 0;
}

// ---------------------------------------------------------------------------
// curve / checkpoint

int cmd_curve(const std::string& run_dir, int window, const std::string& stat, std::string out_dir,
              std::ostream& out) {
  if (stat != "mean" && stat != "max") fail(ErrorKind::config, "--stat must be mean or max");
  const auto loaded = load_run(run_dir);
  const auto c = curve(loaded.buffer, loaded.config.trait, window,
                       stat == "mean" ? CurveStat::mean : CurveStat::max);
  if (out_dir.empty()) out_dir = run_dir;
  write_file_atomic((fs::path(out_dir) / "curve.json").string(), json(c).dump(2) + "\n");
  write_file_atomic((fs::path(out_dir) / "curve.svg").string(), render_svg(c));
  out << "wrote " << (fs::path(out_dir) / "curve.json").string() << " and curve.svg ("
      << c.points.size() << " step(s))\n";
  return 0;
}

struct CheckpointArgs {
  std::string run_dir;
  std::string steps;
  std::optional<std::uint64_t> seed;
  std::string out_dir;
  std::string summarizer;
};

int cmd_checkpoint(const CheckpointArgs& args, const Shared& shared, std::ostream& out) {
  const auto loaded = load_run(args.run_dir);
  const auto steps =
      args.steps.empty() ? default_checkpoint_steps(loaded.config.max_steps) : parse_steps(args.steps);
  auto selected = checkpoints(loaded.buffer, steps, args.seed.value_or(loaded.config.seed));
  for (auto& c : selected) {
    c.scoring_seed = loaded.config.seed;
    c.target_model = loaded.config.target_model;
  }
  if (!args.summarizer.empty()) {
    auto registry = make_registry(shared);
    SummaryOptions options;
    options.model_id = args.summarizer;
    summarize_checkpoints(selected, *registry.resolve(args.summarizer), options);
  }
  const std::string dir =
      args.out_dir.empty() ? (fs::path(args.run_dir) / "checkpoints").string() : args.out_dir;
  for (const auto& c : selected) {
    export_checkpoint(dir, c);
    out << checkpoint_path(dir, c.step) << ": s_ps " << format_fixed(c.entry.s_ps, 3);
    if (c.summary) out << " - " << *c.summary;
    if (c.summary_error) out << " (summary failed: " << *c.summary_error << ")";
    out << "\n";
  }
  return 0;
}

void configure_logging(bool verbose) {
  static bool configured = false;
  if (!configured) {
    spdlog::set_default_logger(spdlog::stderr_color_mt("personaopt"));
    configured = true;
  }
  spdlog::set_level(verbose ? spdlog::level::debug : spdlog::level::info);
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Optimize persona prompts toward a Big-Five trait and evaluate them.", "personaopt"};
  app.require_subcommand(1);
  Shared shared;
  app.add_option("--backends", shared.backends_file,
                 "JSON file declaring named models (also " + std::string(kEnvBackends) + ")");
  app.add_option("--max-in-flight", shared.max_in_flight, "Concurrent requests per batch");
  app.add_flag("-v,--verbose", shared.verbose, "Debug logging");

  int status = 0;

  // dataset
  auto* dataset = app.add_subcommand("dataset", "Validate, augment or split item banks");
  dataset->require_subcommand(1);
  std::string validate_bank;
  auto* validate = dataset->add_subcommand("validate", "Check a bank against the item schema");
  validate->add_option("bank", validate_bank, "JSON-lines bank")->required();
  AugmentArgs augment_args;
  auto* augment_cmd = dataset->add_subcommand("augment", "Create paraphrase twins");
  augment_cmd->add_option("bank", augment_args.bank, "JSON-lines bank")->required();
  augment_cmd->add_option("--backend", augment_args.backend, "Augmenter model reference")->required();
  augment_cmd->add_option("--out", augment_args.out_path, "Output bank")->required();
  augment_cmd->add_option("--cache-dir", augment_args.cache_dir, "Response cache (default <out>.cache)");
  augment_cmd->add_option("--template", augment_args.template_file, "Paraphrase template file ({{text}} slot)");
  SplitArgs split_args;
  auto* split_cmd = dataset->add_subcommand("split", "Write a seeded train/test manifest");
  split_cmd->add_option("bank", split_args.bank, "JSON-lines bank")->required();
  split_cmd->add_option("--trait", split_args.trait, "Trait (OPE, CON, EXT, AGR, NEU)")->required();
  split_cmd->add_option("--train", split_args.train_size, "Train size")->capture_default_str();
  split_cmd->add_option("--test", split_args.test_size, "Test size")->capture_default_str();
  split_cmd->add_option("--seed", split_args.seed, "Seed")->capture_default_str();
  split_cmd->add_option("--out", split_args.out_path, "Manifest path (stdout when omitted)");

  // optimize
  OptimizeArgs opt;
  auto* optimize = app.add_subcommand("optimize", "Run or resume a persona optimization");
  optimize->add_option("--run-dir", opt.run_dir, "Run directory")->required();
  optimize->add_option("--bank", opt.bank, "Twinned JSON-lines bank")->required();
  optimize->add_option("--config", opt.config_file, "JSON config file (lowest precedence)");
  optimize->add_flag("--resume", opt.resume, "Continue the run in --run-dir");
  optimize->add_option("--trait", opt.trait, "Trait; AGR and CON default to 15 steps");
  optimize->add_option("--steps", opt.steps, "Number of optimization steps");
  optimize->add_option("-k,--candidates", opt.k, "Candidates per step");
  optimize->add_option("-n,--top-n", opt.n, "Trajectory size in the meta-prompt");
  optimize->add_option("-q,--questions", opt.q, "Questions sampled per step");
  optimize->add_option("--temperature", opt.temperature, "Optimizer temperature");
  optimize->add_option("--seed", opt.seed, "Base seed for every random choice");
  optimize->add_option("--train-size", opt.train_size, "Train split size");
  optimize->add_option("--test-size", opt.test_size, "Test split size");
  optimize->add_option("--optimizer", opt.optimizer, "Optimizer model reference");
  optimize->add_option("--target", opt.target, "Target model reference");
  optimize->add_option("--rescore-top-m", opt.rescore_top_m, "Re-score the top m prompts on the full train set");
  optimize->add_option("--optimizer-max-tokens", opt.optimizer_max_tokens, "Optimizer completion limit");
  optimize->add_option("--target-max-tokens", opt.target_max_tokens, "Target completion limit");
  optimize->add_option("--token-budget", opt.token_budget, "Meta-prompt token budget");
  optimize->add_flag("--invert-keying", opt.invert_keying, "Optimize toward low trait expression");
  optimize->add_flag("--cache-optimizer-calls", opt.cache_optimizer_calls, "Replay sampled optimizer calls from cache");
  optimize->add_option("--instruction-file", opt.instruction_file, "Administration instruction text");
  optimize->add_option("--meta-template", opt.meta_template_file, "Meta-prompt template file");

  // evaluate
  EvalArgs eval;
  auto* evaluate_cmd = app.add_subcommand("evaluate", "Score one condition on one model");
  evaluate_cmd->add_option("--condition", eval.condition,
                           "origin, dp, p2, profile, profile_star, naive:choose, naive:assistant:<prefix>, checkpoint:<path>")
      ->capture_default_str();
  evaluate_cmd->add_option("--profile-run", eval.profile_runs, "Run directory holding Q* (repeatable)");
  evaluate_cmd->add_option("--model", eval.model, "Model reference")->required();
  evaluate_cmd->add_option("--trait", eval.trait, "Trait")->required();
  evaluate_cmd->add_option("--bank", eval.bank, "Twinned JSON-lines bank (situational path)");
  evaluate_cmd->add_option("--likert-bank", eval.likert_bank, "Likert bank (questionnaire path)");
  evaluate_cmd->add_option("--manifest", eval.manifest, "Split manifest; its test ids are evaluated");
  evaluate_cmd->add_option("--train-size", eval.train_size, "Train size when splitting")->capture_default_str();
  evaluate_cmd->add_option("--test-size", eval.test_size, "Test size when splitting")->capture_default_str();
  evaluate_cmd->add_option("--seed", eval.seed, "Seed")->capture_default_str();
  evaluate_cmd->add_option("--trials", eval.trials, "Likert trials")->capture_default_str();
  evaluate_cmd->add_option("--out", eval.out_dir, "Directory for report.json and the administration log");
  evaluate_cmd->add_option("--instruction-file", eval.instruction_file, "Administration instruction text");
  evaluate_cmd->add_flag("--checkpoint-sample", eval.checkpoint_sample,
                         "Score a checkpoint condition on its recorded train sample and seed");

  // transfer
  TransferArgs transfer;
  auto* transfer_cmd = app.add_subcommand("transfer", "Evaluate a models x conditions x traits grid");
  transfer_cmd->add_option("--models", transfer.models, "Model references")->delimiter(',')->required();
  transfer_cmd->add_option("--conditions", transfer.conditions, "Conditions")->delimiter(',')->required();
  transfer_cmd->add_option("--traits", transfer.traits, "Traits (default all five)")->delimiter(',');
  transfer_cmd->add_option("--profile-run", transfer.profile_runs, "Run directory for the profile condition (repeatable)");
  transfer_cmd->add_option("--profile-star-run", transfer.star_runs, "Run directory for profile_star (repeatable)");
  transfer_cmd->add_option("--bank", transfer.bank, "Twinned JSON-lines bank")->required();
  transfer_cmd->add_option("--manifest-dir", transfer.manifest_dir, "Directory of <TRAIT>.json split manifests");
  transfer_cmd->add_option("--train-size", transfer.train_size, "Train size when splitting")->capture_default_str();
  transfer_cmd->add_option("--test-size", transfer.test_size, "Test size when splitting")->capture_default_str();
  transfer_cmd->add_option("--seed", transfer.seed, "Seed")->capture_default_str();
  transfer_cmd->add_option("--out", transfer.out_dir, "Directory for report.json, report.txt and cells/");
  transfer_cmd->add_option("--max-parallel-cells", transfer.max_parallel_cells, "Cells evaluated at once")->capture_default_str();

  // curve
  std::string curve_run, curve_stat = "mean", curve_out;
  int curve_window = 8;
  auto* curve_cmd = app.add_subcommand("curve", "Write curve.json and curve.svg for a run");
  curve_cmd->add_option("run", curve_run, "Run directory")->required();
  curve_cmd->add_option("--window", curve_window, "Trailing smoothing window")->capture_default_str();
  curve_cmd->add_option("--stat", curve_stat, "Per-step statistic: mean or max")->capture_default_str();
  curve_cmd->add_option("--out", curve_out, "Output directory (default: the run directory)");

  // checkpoint
  CheckpointArgs ckpt;
  auto* checkpoint_cmd = app.add_subcommand("checkpoint", "Export sampled prompts from chosen steps");
  checkpoint_cmd->add_option("run", ckpt.run_dir, "Run directory")->required();
  checkpoint_cmd->add_option("--steps", ckpt.steps, "Comma-separated steps (default 6,16,24 or 5,10,15)");
  checkpoint_cmd->add_option("--seed", ckpt.seed, "Selection seed (default: the run seed)");
  checkpoint_cmd->add_option("--out", ckpt.out_dir, "Output directory (default <run>/checkpoints)");
  checkpoint_cmd->add_option("--summarizer", ckpt.summarizer, "Model that writes one-sentence summaries");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : exit_code(ErrorKind::config);
  }

  configure_logging(shared.verbose);
  try {
    if (validate->parsed()) {
      status = cmd_validate(validate_bank, out);
    } else if (augment_cmd->parsed()) {
      status = cmd_augment(augment_args, shared, out);
    } else if (split_cmd->parsed()) {
      status = cmd_split(split_args, out);
    } else if (optimize->parsed()) {
      status = cmd_optimize(opt, shared, out);
    } else if (evaluate_cmd->parsed()) {
      status = cmd_evaluate(eval, shared, out);
    } else if (transfer_cmd->parsed()) {
      status = cmd_transfer(transfer, shared, out);
    } else if (curve_cmd->parsed()) {
      status = cmd_curve(curve_run, curve_window, curve_stat, curve_out, out);
    } else if (checkpoint_cmd->parsed()) {
      status = cmd_checkpoint(ckpt, shared, out);
    }
  } catch (const Error& e) {
    err << "error (" << to_string(e.kind()) << "): " << e.what() << "\n";
    return exit_code(e.kind());
  } catch (const json::exception& e) {
    err << "error (format): " << e.what() << "\n";
    return exit_code(ErrorKind::format);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return status;
}

}  // namespace personaopt::cli
