#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "personaopt/backend.hpp"
#include "personaopt/domain.hpp"

namespace personaopt {

// A source item together with its paraphrase twin, when one exists.
struct TwinnedItem {
  QuestionItem source;
  std::optional<QuestionItem> twin;

  bool operator==(const TwinnedItem&) const = default;
};

struct QuestionBank {
  std::vector<QuestionItem> items;
  std::size_t dark_triad_filtered = 0;
};

struct LikertBank {
  std::vector<LikertItem> items;
  std::size_t dark_triad_filtered = 0;
};

using Bank = std::variant<QuestionBank, LikertBank>;

// Loads a JSON-lines bank. The record shape decides the bank type: records
// with "scenario" are situational multiple-choice items, records with
// "statement" are Likert items. Blank lines are ignored. Dark Triad items are
// dropped and counted. Option labels are reassigned A-D in file order.
//
// Errors: format (with 1-based line number) for unparseable records or an
// empty file; data when the loaded bank fails validation.
Bank load_bank(const std::string& path);
QuestionBank load_question_bank(const std::string& path);
LikertBank load_likert_bank(const std::string& path);

// Same as load_bank but skips validation; used by `dataset validate`, which
// reports violations instead of failing on them.
Bank load_bank_unvalidated(const std::string& path);

std::string encode_jsonl(std::span<const QuestionItem> items);
std::string encode_jsonl(std::span<const LikertItem> items);
void write_bank(const std::string& path, std::span<const QuestionItem> items);
void write_bank(const std::string& path, std::span<const LikertItem> items);

// Source items (optionally of one trait) in bank order, each paired with its
// twin.
std::vector<TwinnedItem> pair_twins(std::span<const QuestionItem> items,
                                    std::optional<Trait> trait = std::nullopt);

struct SplitSpec {
  Trait trait = Trait::openness;
  int train_size = 200;
  int test_size = 800;
  std::uint64_t seed = 0;
};

struct Split {
  SplitSpec spec;
  std::vector<TwinnedItem> train;
  std::vector<TwinnedItem> test;
};

// Deterministic, disjoint train/test partition of the trait's source items.
// The partition is a pure function of (sorted item ids, spec): ids are
// sorted, then shuffled with a generator seeded by (seed, trait).
// Errors: capacity when the trait has fewer than train_size + test_size items.
Split split(std::span<const QuestionItem> items, const SplitSpec& spec);

json split_manifest(const Split& split);
// Rebuilds a split from a persisted manifest; missing ids are a lookup error.
Split split_from_manifest(std::span<const QuestionItem> items, const json& manifest);

struct AugmentOptions {
  std::string model_id = "augmenter";
  // {{text}} receives the scenario or question being paraphrased.
  std::string paraphrase_template;  // empty -> default_paraphrase_template()
  double temperature = 0.0;
  int max_tokens = 512;
  int max_in_flight = 8;
  std::string twin_suffix = "-aug";
};

const std::string& default_paraphrase_template();

struct AugmentError {
  std::string item_id;
  std::string reason;
};

struct AugmentResult {
  std::vector<QuestionItem> items;  // every input item, each new twin right after its source
  std::size_t twins_created = 0;
  std::vector<AugmentError> errors;
};

// Creates one paraphrase twin for every source item that lacks one. Options
// are copied verbatim; only scenario and question are paraphrased. Replies
// shorter than 10 characters or identical to the source leave the item
// twin-less and are reported in errors.
AugmentResult augment(std::span<const QuestionItem> items, ChatBackend& augmenter,
                      const AugmentOptions& options = {});

}  // namespace personaopt
