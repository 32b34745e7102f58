#include "personaopt/domain.hpp"

#include <set>

#include "personaopt/errors.hpp"
#include "personaopt/text.hpp"

namespace personaopt {

namespace {

struct TraitNames {
  Trait trait;
  std::string_view code;
  std::string_view name;
};

constexpr std::array<TraitNames, 5> kTraitNames = {{
    {Trait::openness, "OPE", "Openness"},
    {Trait::conscientiousness, "CON", "Conscientiousness"},
    {Trait::extraversion, "EXT", "Extraversion"},
    {Trait::agreeableness, "AGR", "Agreeableness"},
    {Trait::neuroticism, "NEU", "Neuroticism"},
}};

std::string_view keyed_name(Keyed keyed) { return keyed == Keyed::high ? "high" : "low"; }

Keyed parse_keyed(std::string_view text) {
  if (iequals(text, "high")) return Keyed::high;
  if (iequals(text, "low")) return Keyed::low;
  fail(ErrorKind::format, "option keying must be 'high' or 'low', got '" + std::string(text) + "'");
}

std::string_view keying_name(LikertKeying keying) {
  return keying == LikertKeying::positive ? "positive" : "negative";
}

LikertKeying parse_keying(std::string_view text) {
  if (iequals(text, "positive") || text == "+") return LikertKeying::positive;
  if (iequals(text, "negative") || text == "-") return LikertKeying::negative;
  fail(ErrorKind::format, "likert keying must be 'positive' or 'negative', got '" +
                              std::string(text) + "'");
}

std::string_view origin_kind_name(OriginKind kind) {
  switch (kind) {
    case OriginKind::seed: return "seed";
    case OriginKind::generated: return "generated";
    case OriginKind::baseline: return "baseline";
  }
  return "seed";
}

OriginKind parse_origin_kind(std::string_view text) {
  if (text == "seed") return OriginKind::seed;
  if (text == "generated") return OriginKind::generated;
  if (text == "baseline") return OriginKind::baseline;
  fail(ErrorKind::format, "unknown prompt origin '" + std::string(text) + "'");
}

}  // namespace

std::string_view short_code(Trait trait) { return kTraitNames[trait_index(trait)].code; }

std::string_view full_name(Trait trait) { return kTraitNames[trait_index(trait)].name; }

std::size_t trait_index(Trait trait) { return static_cast<std::size_t>(trait); }

std::optional<Trait> try_parse_trait(std::string_view text) {
  for (const auto& entry : kTraitNames) {
    if (iequals(text, entry.code) || iequals(text, entry.name)) return entry.trait;
  }
  return std::nullopt;
}

Trait parse_trait(std::string_view text) {
  if (auto trait = try_parse_trait(text)) return *trait;
  fail(ErrorKind::domain, "unknown trait '" + std::string(text) + "'");
}

bool is_dark_triad_label(std::string_view text) {
  const std::string lower = to_lower(text);
  return lower == "machiavellianism" || lower == "narcissism" || lower == "psychopathy" ||
         lower == "mac" || lower == "nar" || lower == "psy";
}

const Option* QuestionItem::find_option(char label) const {
  for (const auto& option : options) {
    if (option.label == label) return &option;
  }
  return nullptr;
}

void assign_option_labels(QuestionItem& item) {
  char label = 'A';
  for (auto& option : item.options) option.label = label++;
}

int reverse_score(int raw, LikertKeying keying) {
  if (raw < 1 || raw > 5) {
    fail(ErrorKind::domain, "likert rating " + std::to_string(raw) + " outside 1..5");
  }
  return keying == LikertKeying::positive ? raw : 6 - raw;
}

ValidationReport validate_item_bank(std::span<const QuestionItem> items) {
  ValidationReport report;
  std::map<std::string, const QuestionItem*> by_id;
  for (const auto& item : items) {
    if (item.id.empty()) {
      report.violations.push_back({item.id, "empty item id"});
      continue;
    }
    if (!by_id.emplace(item.id, &item).second) {
      report.violations.push_back({item.id, "duplicate item id"});
    }
  }

  std::set<std::string> twinned_sources;
  for (const auto& item : items) {
    auto violate = [&](std::string message) {
      report.violations.push_back({item.id, std::move(message)});
    };
    if (item.scenario.empty()) violate("empty scenario");
    if (item.options.size() != 4) {
      violate("option count " + std::to_string(item.options.size()) + " ≠ 4");
    }
    std::size_t high = 0;
    std::set<char> labels;
    for (const auto& option : item.options) {
      if (option.keyed == Keyed::high) ++high;
      if (option.text.empty()) violate("empty option text");
      if (!labels.insert(option.label).second) violate("duplicate option label");
    }
    const std::size_t low = item.options.size() - high;
    if (item.options.size() == 4 && (high != 2 || low != 2)) {
      violate("keying " + std::to_string(high) + " high / " + std::to_string(low) +
              " low ≠ 2/2");
    }

    if (item.paraphrase_of) {
      ++report.twin_count;
      const auto it = by_id.find(*item.paraphrase_of);
      if (it == by_id.end()) {
        violate("paraphrase of unknown item '" + *item.paraphrase_of + "'");
      } else if (it->second->trait != item.trait) {
        violate("cross-trait paraphrase");
      } else if (it->second->is_twin()) {
        violate("paraphrase of a paraphrase");
      } else if (!twinned_sources.insert(*item.paraphrase_of).second) {
        violate("second paraphrase of '" + *item.paraphrase_of + "'");
      }
      if (*item.paraphrase_of == item.id) violate("item paraphrases itself");
    } else {
      ++report.source_count;
      ++report.per_trait_counts[item.trait];
    }
  }

  std::size_t covered = 0;
  for (const auto& item : items) {
    if (!item.is_twin() && twinned_sources.count(item.id) > 0) ++covered;
  }
  report.paraphrase_coverage =
      report.source_count == 0
          ? 0.0
          : static_cast<double>(covered) / static_cast<double>(report.source_count);
  return report;
}

ValidationReport validate_likert_bank(std::span<const LikertItem> items) {
  ValidationReport report;
  std::set<std::string> ids;
  for (const auto& item : items) {
    if (item.id.empty()) report.violations.push_back({item.id, "empty item id"});
    if (!ids.insert(item.id).second) report.violations.push_back({item.id, "duplicate item id"});
    if (trim(item.statement).empty()) {
      report.violations.push_back({item.id, "empty statement"});
    }
    ++report.source_count;
    ++report.per_trait_counts[item.trait];
  }
  return report;
}

// ---------------------------------------------------------------------------

PersonaPrompt::PersonaPrompt(std::string text, PromptOrigin origin)
    : text_(std::move(text)), origin_(std::move(origin)) {
  if (text_.empty()) fail(ErrorKind::domain, "persona prompt text must be non-empty");
  id_ = id_for(text_);
}

PersonaPrompt PersonaPrompt::empty_origin() {
  PersonaPrompt prompt;
  prompt.origin_ = PromptOrigin::seed();
  prompt.id_ = id_for("");
  return prompt;
}

std::string PersonaPrompt::id_for(std::string_view text) { return sha256_hex(text).substr(0, 16); }

// ---------------------------------------------------------------------------

RunConfig RunConfig::defaults_for(Trait trait) {
  RunConfig config;
  config.trait = trait;
  config.max_steps =
      (trait == Trait::agreeableness || trait == Trait::conscientiousness) ? 15 : 25;
  return config;
}

void RunConfig::validate() const {
  auto require = [](bool ok, const char* message) {
    if (!ok) fail(ErrorKind::config, message);
  };
  require(max_steps >= 1, "max_steps must be >= 1");
  require(candidates_per_step >= 1, "candidates_per_step (k) must be >= 1");
  require(trajectory_top_n >= 1, "trajectory_top_n (n) must be >= 1");
  require(questions_per_step >= 1, "questions_per_step (q) must be >= 1");
  require(optimizer_temperature > 0.0, "optimizer_temperature must be > 0");
  require(train_size >= 1, "train_size must be >= 1");
  require(test_size >= 0, "test_size must be >= 0");
  require(questions_per_step <= train_size, "questions_per_step exceeds train_size");
  require(optimizer_max_tokens >= 1 && target_max_tokens >= 1, "max token limits must be >= 1");
  require(max_in_flight >= 1, "max_in_flight must be >= 1");
  require(rescore_top_m >= 0, "rescore_top_m must be >= 0");
  require(meta_prompt_token_budget >= 1, "meta_prompt_token_budget must be >= 1");
}

std::string RunConfig::fingerprint() const {
  json j = *this;
  j.erase("max_steps");
  return sha256_hex(j.dump());
}

// ---------------------------------------------------------------------------
// JSON

void to_json(json& j, Trait trait) { j = std::string(full_name(trait)); }

void from_json(const json& j, Trait& trait) {
  const auto text = j.get<std::string>();
  const auto parsed = try_parse_trait(text);
  if (!parsed) fail(ErrorKind::format, "unknown trait '" + text + "'");
  trait = *parsed;
}

void to_json(json& j, const Option& option) {
  j = json{{"label", std::string(1, option.label)},
           {"text", option.text},
           {"keyed", std::string(keyed_name(option.keyed))}};
}

void from_json(const json& j, Option& option) {
  option.text = j.at("text").get<std::string>();
  option.keyed = parse_keyed(j.at("keyed").get<std::string>());
  if (j.contains("label")) {
    const auto label = j.at("label").get<std::string>();
    if (label.size() != 1) fail(ErrorKind::format, "option label must be one character");
    option.label = label[0];
  }
}

void to_json(json& j, const QuestionItem& item) {
  j = json{{"id", item.id},
           {"trait", item.trait},
           {"scenario", item.scenario},
           {"question", item.question},
           {"options", item.options}};
  if (item.paraphrase_of) j["paraphrase_of"] = *item.paraphrase_of;
}

void from_json(const json& j, QuestionItem& item) {
  item.id = j.at("id").get<std::string>();
  item.trait = j.at("trait").get<Trait>();
  item.scenario = j.at("scenario").get<std::string>();
  item.question = j.value("question", std::string{});
  item.options = j.at("options").get<std::vector<Option>>();
  if (j.contains("paraphrase_of") && !j.at("paraphrase_of").is_null()) {
    item.paraphrase_of = j.at("paraphrase_of").get<std::string>();
  } else {
    item.paraphrase_of.reset();
  }
}

void to_json(json& j, const LikertItem& item) {
  j = json{{"id", item.id},
           {"trait", item.trait},
           {"statement", item.statement},
           {"keying", std::string(keying_name(item.keying))}};
}

void from_json(const json& j, LikertItem& item) {
  item.id = j.at("id").get<std::string>();
  item.trait = j.at("trait").get<Trait>();
  item.statement = j.at("statement").get<std::string>();
  if (!j.contains("keying")) fail(ErrorKind::format, "likert item '" + item.id + "' lacks keying");
  item.keying = parse_keying(j.at("keying").get<std::string>());
}

void to_json(json& j, const PromptOrigin& origin) {
  j = json{{"kind", std::string(origin_kind_name(origin.kind))}};
  if (origin.kind == OriginKind::generated) j["step"] = origin.step;
  if (origin.kind == OriginKind::baseline) j["baseline"] = origin.baseline_kind;
}

void from_json(const json& j, PromptOrigin& origin) {
  origin.kind = parse_origin_kind(j.at("kind").get<std::string>());
  origin.step = j.value("step", 0);
  origin.baseline_kind = j.value("baseline", std::string{});
}

json prompt_to_json(const PersonaPrompt& prompt) {
  return json{{"id", prompt.id()}, {"text", prompt.text()}, {"origin", prompt.origin()}};
}

PersonaPrompt prompt_from_json(const json& j) {
  const auto text = j.at("text").get<std::string>();
  const auto origin = j.at("origin").get<PromptOrigin>();
  PersonaPrompt prompt = text.empty() ? PersonaPrompt::empty_origin()
                                      : PersonaPrompt(text, origin);
  if (j.contains("id") && j.at("id").get<std::string>() != prompt.id()) {
    fail(ErrorKind::integrity, "prompt id does not match its text");
  }
  return prompt;
}

void to_json(json& j, const ScoredPrompt& scored) {
  j = json{{"prompt", scored.prompt},
           {"trait", scored.trait},
           {"s_ps", scored.s_ps},
           {"s_consist", scored.s_consist},
           {"s_origin", scored.s_origin},
           {"step", scored.step},
           {"question_sample", scored.question_sample}};
}

void from_json(const json& j, ScoredPrompt& scored) {
  scored.prompt = j.at("prompt").get<PersonaPrompt>();
  scored.trait = j.at("trait").get<Trait>();
  scored.s_ps = j.at("s_ps").get<double>();
  scored.s_consist = j.at("s_consist").get<double>();
  scored.s_origin = j.at("s_origin").get<double>();
  scored.step = j.at("step").get<int>();
  scored.question_sample = j.at("question_sample").get<std::vector<std::string>>();
}

void to_json(json& j, const RunConfig& c) {
  j = json{{"trait", c.trait},
           {"max_steps", c.max_steps},
           {"candidates_per_step", c.candidates_per_step},
           {"trajectory_top_n", c.trajectory_top_n},
           {"questions_per_step", c.questions_per_step},
           {"optimizer_temperature", c.optimizer_temperature},
           {"target_sampling", "greedy"},
           {"seed", c.seed},
           {"train_size", c.train_size},
           {"test_size", c.test_size},
           {"optimizer_model", c.optimizer_model},
           {"target_model", c.target_model},
           {"augmenter_model", c.augmenter_model},
           {"optimizer_max_tokens", c.optimizer_max_tokens},
           {"target_max_tokens", c.target_max_tokens},
           {"meta_prompt_token_budget", c.meta_prompt_token_budget},
           {"max_in_flight", c.max_in_flight},
           {"cache_optimizer_calls", c.cache_optimizer_calls},
           {"rescore_top_m", c.rescore_top_m},
           {"invert_keying", c.invert_keying},
           {"administration_instruction", c.administration_instruction},
           {"meta_prompt_template", c.meta_prompt_template}};
}

void from_json(const json& j, RunConfig& c) {
  // Missing fields keep their defaults so partial config files work.
  if (j.contains("trait")) {
    c = RunConfig::defaults_for(j.at("trait").get<Trait>());
  }
  auto read = [&j](const char* key, auto& field) {
    if (j.contains(key)) j.at(key).get_to(field);
  };
  read("max_steps", c.max_steps);
  read("candidates_per_step", c.candidates_per_step);
  read("trajectory_top_n", c.trajectory_top_n);
  read("questions_per_step", c.questions_per_step);
  read("optimizer_temperature", c.optimizer_temperature);
  if (j.contains("target_sampling") && j.at("target_sampling").get<std::string>() != "greedy") {
    fail(ErrorKind::config, "only greedy target sampling is supported");
  }
  read("seed", c.seed);
  read("train_size", c.train_size);
  read("test_size", c.test_size);
  read("optimizer_model", c.optimizer_model);
  read("target_model", c.target_model);
  read("augmenter_model", c.augmenter_model);
  read("optimizer_max_tokens", c.optimizer_max_tokens);
  read("target_max_tokens", c.target_max_tokens);
  read("meta_prompt_token_budget", c.meta_prompt_token_budget);
  read("max_in_flight", c.max_in_flight);
  read("cache_optimizer_calls", c.cache_optimizer_calls);
  read("rescore_top_m", c.rescore_top_m);
  read("invert_keying", c.invert_keying);
  read("administration_instruction", c.administration_instruction);
  read("meta_prompt_template", c.meta_prompt_template);
}

void to_json(json& j, const Violation& violation) {
  j = json{{"item_id", violation.item_id}, {"message", violation.message}};
}

void to_json(json& j, const ValidationReport& report) {
  json counts = json::object();
  for (const auto& [trait, count] : report.per_trait_counts) {
    counts[std::string(full_name(trait))] = count;
  }
  j = json{{"valid", report.valid()},
           {"per_trait_counts", counts},
           {"source_count", report.source_count},
           {"twin_count", report.twin_count},
           {"paraphrase_coverage", report.paraphrase_coverage},
           {"violations", report.violations}};
}

}  // namespace personaopt
