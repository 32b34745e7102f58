#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace personaopt {

using json = nlohmann::json;

// ---------------------------------------------------------------------------
// Traits

enum class Trait { openness, conscientiousness, extraversion, agreeableness, neuroticism };

inline constexpr std::array<Trait, 5> kAllTraits = {
    Trait::openness, Trait::conscientiousness, Trait::extraversion,
    Trait::agreeableness, Trait::neuroticism};

std::string_view short_code(Trait trait);  // "OPE", "CON", ...
std::string_view full_name(Trait trait);   // "Openness", ...
std::size_t trait_index(Trait trait);

// Accepts short codes and full names, case-insensitively.
std::optional<Trait> try_parse_trait(std::string_view text);
Trait parse_trait(std::string_view text);

// Machiavellianism / narcissism / psychopathy labels found in mixed banks.
bool is_dark_triad_label(std::string_view text);

// ---------------------------------------------------------------------------
// Items

enum class Keyed { high, low };

struct Option {
  char label = 'A';  // stable identity, assigned at load time
  std::string text;
  Keyed keyed = Keyed::low;

  bool operator==(const Option&) const = default;
};

struct QuestionItem {
  std::string id;
  Trait trait = Trait::openness;
  std::string scenario;
  std::string question;
  std::vector<Option> options;
  std::optional<std::string> paraphrase_of;

  bool is_twin() const { return paraphrase_of.has_value(); }
  const Option* find_option(char label) const;

  bool operator==(const QuestionItem&) const = default;
};

// Assigns labels A, B, C, ... in list order.
void assign_option_labels(QuestionItem& item);

enum class LikertKeying { positive, negative };

struct LikertItem {
  std::string id;
  Trait trait = Trait::openness;
  std::string statement;
  LikertKeying keying = LikertKeying::positive;

  bool operator==(const LikertItem&) const = default;
};

// Positive keying is the identity; negative keying maps raw to 6 - raw.
int reverse_score(int raw, LikertKeying keying);

struct Violation {
  std::string item_id;
  std::string message;

  bool operator==(const Violation&) const = default;
};

struct ValidationReport {
  std::map<Trait, std::size_t> per_trait_counts;  // source items only
  std::size_t source_count = 0;
  std::size_t twin_count = 0;
  double paraphrase_coverage = 0.0;  // sources that have a twin / sources
  std::vector<Violation> violations;

  bool valid() const { return violations.empty(); }
};

ValidationReport validate_item_bank(std::span<const QuestionItem> items);
ValidationReport validate_likert_bank(std::span<const LikertItem> items);

// ---------------------------------------------------------------------------
// Prompts

enum class OriginKind { seed, generated, baseline };

struct PromptOrigin {
  OriginKind kind = OriginKind::seed;
  int step = 0;               // meaningful for generated prompts
  std::string baseline_kind;  // meaningful for baseline prompts

  static PromptOrigin seed() { return {}; }
  static PromptOrigin generated(int step) { return {OriginKind::generated, step, {}}; }
  static PromptOrigin baseline(std::string kind) {
    return {OriginKind::baseline, 0, std::move(kind)};
  }

  bool operator==(const PromptOrigin&) const = default;
};

// A persona profile. The id is a content hash of the text, so equal texts
// share an id regardless of where they came from.
class PersonaPrompt {
 public:
  // Throws a domain error for empty text; use empty_origin() for the
  // no-persona anchor.
  PersonaPrompt(std::string text, PromptOrigin origin);

  // The "Origin" condition: the target receives no persona at all.
  static PersonaPrompt empty_origin();

  const std::string& text() const { return text_; }
  const PromptOrigin& origin() const { return origin_; }
  const std::string& id() const { return id_; }
  bool empty() const { return text_.empty(); }

  static std::string id_for(std::string_view text);

  bool operator==(const PersonaPrompt&) const = default;

 private:
  PersonaPrompt() = default;

  std::string text_;
  PromptOrigin origin_;
  std::string id_;
};

struct ScoredPrompt {
  PersonaPrompt prompt = PersonaPrompt::empty_origin();
  Trait trait = Trait::openness;
  double s_ps = 0.0;
  double s_consist = 0.0;
  double s_origin = 0.0;
  int step = 0;
  std::vector<std::string> question_sample;

  bool operator==(const ScoredPrompt&) const = default;
};

// ---------------------------------------------------------------------------
// Run configuration

enum class TargetSampling { greedy };

struct RunConfig {
  Trait trait = Trait::openness;
  int max_steps = 25;
  int candidates_per_step = 8;   // k
  int trajectory_top_n = 3;      // n
  int questions_per_step = 3;    // q
  double optimizer_temperature = 1.2;
  TargetSampling target_sampling = TargetSampling::greedy;
  std::uint64_t seed = 0;

  int train_size = 200;
  int test_size = 800;

  std::string optimizer_model = "optimizer";
  std::string target_model = "target";
  std::string augmenter_model = "augmenter";

  int optimizer_max_tokens = 1024;
  int target_max_tokens = 64;
  std::size_t meta_prompt_token_budget = 8000;
  int max_in_flight = 8;
  bool cache_optimizer_calls = false;
  int rescore_top_m = 0;        // 0 disables the final full-train re-scoring
  bool invert_keying = false;   // optimize toward low trait expression

  std::string administration_instruction;  // empty -> built-in default
  std::string meta_prompt_template;        // empty -> built-in default

  // Defaults for a trait: 15 steps for agreeableness and conscientiousness,
  // which saturate early; 25 otherwise.
  static RunConfig defaults_for(Trait trait);

  // Throws a config error when a field is out of range.
  void validate() const;

  // SHA-256 over the canonical JSON of every field except max_steps (which
  // only decides where a run stops, not what any step produces).
  std::string fingerprint() const;

  bool operator==(const RunConfig&) const = default;
};

// ---------------------------------------------------------------------------
// JSON encoding

void to_json(json& j, Trait trait);
void from_json(const json& j, Trait& trait);
void to_json(json& j, const Option& option);
void from_json(const json& j, Option& option);
void to_json(json& j, const QuestionItem& item);
void from_json(const json& j, QuestionItem& item);
void to_json(json& j, const LikertItem& item);
void from_json(const json& j, LikertItem& item);
void to_json(json& j, const PromptOrigin& origin);
void from_json(const json& j, PromptOrigin& origin);
void to_json(json& j, const ScoredPrompt& scored);
void from_json(const json& j, ScoredPrompt& scored);
void to_json(json& j, const RunConfig& config);
void from_json(const json& j, RunConfig& config);
void to_json(json& j, const Violation& violation);
void to_json(json& j, const ValidationReport& report);

json prompt_to_json(const PersonaPrompt& prompt);
// Verifies the stored id against the text; a mismatch is an integrity error.
PersonaPrompt prompt_from_json(const json& j);

}  // namespace personaopt

namespace nlohmann {
template <>
struct adl_serializer<personaopt::PersonaPrompt> {
  static void to_json(json& j, const personaopt::PersonaPrompt& p) {
    j = personaopt::prompt_to_json(p);
  }
  static personaopt::PersonaPrompt from_json(const json& j) {
    return personaopt::prompt_from_json(j);
  }
};
}  // namespace nlohmann
