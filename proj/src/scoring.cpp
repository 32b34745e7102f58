#include "personaopt/scoring.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numeric>
#include <regex>

#include "personaopt/rng.hpp"
#include "personaopt/text.hpp"

namespace personaopt {

namespace {

char display_letter(std::size_t position) { return static_cast<char>('A' + position); }

bool is_word_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0; }

// Rung 1: a display letter at the start, alone or followed by punctuation.
std::optional<std::size_t> leading_letter(const std::string& response, std::size_t count) {
  std::size_t i = 0;
  const std::string_view openers = " \t\r\n([*\"'`";
  while (i < response.size() && openers.find(response[i]) != std::string_view::npos) ++i;
  if (i >= response.size()) return std::nullopt;
  const char c = response[i];
  if (c < 'A' || c >= display_letter(count)) return std::nullopt;
  const std::size_t next = i + 1;
  if (next == response.size()) return static_cast<std::size_t>(c - 'A');
  const std::string_view closers = ")]:,*\"'`\r\n";
  if (closers.find(response[next]) != std::string_view::npos) {
    return static_cast<std::size_t>(c - 'A');
  }
  // "B." counts, but "B.C." style initialisms do not start an answer.
  if (response[next] == '.' && (next + 1 == response.size() || !is_word_char(response[next + 1]))) {
    return static_cast<std::size_t>(c - 'A');
  }
  return std::nullopt;
}

// Rung 2: exactly one distinct standalone display letter.
std::optional<std::size_t> unique_letter(const std::string& response, std::size_t count) {
  std::set<std::size_t> seen;
  for (std::size_t i = 0; i < response.size(); ++i) {
    const char c = response[i];
    if (c < 'A' || c >= display_letter(count)) continue;
    const bool left_ok = i == 0 || !is_word_char(response[i - 1]);
    const bool right_ok = i + 1 == response.size() || !is_word_char(response[i + 1]);
    if (left_ok && right_ok) seen.insert(static_cast<std::size_t>(c - 'A'));
  }
  if (seen.size() == 1) return *seen.begin();
  return std::nullopt;
}

std::string strip_trailing_punct(std::string text) {
  while (!text.empty() && std::ispunct(static_cast<unsigned char>(text.back()))) text.pop_back();
  return text;
}

std::string_view form_name(Form form) { return form == Form::origin ? "origin" : "paraphrase"; }

}  // namespace

void to_json(json& j, const Administration& a) {
  std::string order(a.presented_order.begin(), a.presented_order.end());
  j = json{{"prompt_id", a.prompt_id},
           {"item_id", a.item_id},
           {"source_id", a.source_id},
           {"form", std::string(form_name(a.form))},
           {"presented_order", order},
           {"raw_response", a.raw_response},
           {"parsed_choice", a.parsed_choice ? json(std::string(1, *a.parsed_choice)) : json(nullptr)},
           {"is_target_keyed", a.is_target_keyed ? json(*a.is_target_keyed) : json(nullptr)}};
}

void from_json(const json& j, Administration& a) {
  a.prompt_id = j.at("prompt_id").get<std::string>();
  a.item_id = j.at("item_id").get<std::string>();
  a.source_id = j.at("source_id").get<std::string>();
  const auto form = j.at("form").get<std::string>();
  if (form != "origin" && form != "paraphrase") {
    fail(ErrorKind::format, "unknown administration form '" + form + "'");
  }
  a.form = form == "origin" ? Form::origin : Form::paraphrase;
  const auto order = j.at("presented_order").get<std::string>();
  a.presented_order.assign(order.begin(), order.end());
  a.raw_response = j.at("raw_response").get<std::string>();
  if (j.at("parsed_choice").is_null()) {
    a.parsed_choice.reset();
  } else {
    a.parsed_choice = j.at("parsed_choice").get<std::string>().at(0);
  }
  if (j.at("is_target_keyed").is_null()) {
    a.is_target_keyed.reset();
  } else {
    a.is_target_keyed = j.at("is_target_keyed").get<bool>();
  }
}

const std::string& default_administration_instruction() {
  static const std::string kInstruction =
      "Read the situation below and decide what you would do. Choose exactly one of the "
      "options and reply with its letter only.";
  return kInstruction;
}

std::uint64_t administration_seed(std::uint64_t seed, const std::string& item_id) {
  return derive_seed(seed, "present", item_id);
}

std::vector<char> presentation_order(const QuestionItem& item, std::uint64_t rng_seed) {
  std::vector<char> order;
  order.reserve(item.options.size());
  for (const auto& option : item.options) order.push_back(option.label);
  Rng rng(rng_seed);
  rng.shuffle(order);
  return order;
}

std::string render_item(const QuestionItem& item, std::span<const char> order,
                        const std::string& instruction) {
  std::string out = instruction.empty() ? default_administration_instruction() : instruction;
  out += "\n\nSituation: " + item.scenario;
  if (!trim(item.question).empty()) out += "\nQuestion: " + item.question;
  out += "\n";
  for (std::size_t pos = 0; pos < order.size(); ++pos) {
    const Option* option = item.find_option(order[pos]);
    out += "\n";
    out += display_letter(pos);
    out += ". ";
    out += option != nullptr ? option->text : std::string{};
  }
  return out;
}

ChatRequest administration_request(const PersonaPrompt& prompt, const QuestionItem& item,
                                   std::span<const char> order, const ScoringOptions& options) {
  ChatRequest request;
  request.model_id = options.model_id;
  if (!prompt.empty()) request.system = prompt.text();
  request.user = render_item(item, order, options.instruction);
  request.temperature = 0.0;
  request.max_tokens = options.max_tokens;
  return request;
}

std::optional<char> parse_choice(const std::string& response, const QuestionItem& item,
                                 std::span<const char> order) {
  const std::size_t count = order.size();
  if (count == 0) return std::nullopt;
  if (auto pos = leading_letter(response, count)) return order[*pos];
  if (auto pos = unique_letter(response, count)) return order[*pos];

  const std::string reply = normalize_space(response);
  std::optional<char> match;
  std::size_t matches = 0;
  for (char label : order) {
    const Option* option = item.find_option(label);
    if (option == nullptr) continue;
    const std::string text = strip_trailing_punct(normalize_space(option->text));
    if (!text.empty() && contains(reply, text)) {
      ++matches;
      match = label;
    }
  }
  if (matches == 1) return match;
  return std::nullopt;
}

Administration record_administration(const PersonaPrompt& prompt, const QuestionItem& item,
                                     Form form, const std::string& source_id,
                                     std::vector<char> order, std::string response,
                                     bool invert_keying) {
  Administration a;
  a.prompt_id = prompt.id();
  a.item_id = item.id;
  a.source_id = source_id;
  a.form = form;
  a.parsed_choice = parse_choice(response, item, order);
  a.presented_order = std::move(order);
  a.raw_response = std::move(response);
  if (a.parsed_choice) {
    const Option* option = item.find_option(*a.parsed_choice);
    const bool high = option != nullptr && option->keyed == Keyed::high;
    a.is_target_keyed = invert_keying ? !high : high;
  }
  return a;
}

Administration administer(const PersonaPrompt& prompt, const QuestionItem& item,
                          ChatBackend& target, std::uint64_t rng_seed,
                          const ScoringOptions& options) {
  auto order = presentation_order(item, rng_seed);
  const auto response = target.complete(administration_request(prompt, item, order, options));
  const Form form = item.is_twin() ? Form::paraphrase : Form::origin;
  const std::string source = item.paraphrase_of.value_or(item.id);
  return record_administration(prompt, item, form, source, std::move(order), response.text,
                               options.invert_keying);
}

TraitScoreSet collect_score_sets(Trait trait, std::span<const Administration> log) {
  TraitScoreSet sets;
  sets.trait = trait;
  for (const auto& a : log) {
    sets.administered.insert(a.source_id);
    if (a.f() == 1) {
      (a.form == Form::origin ? sets.origin_correct : sets.aug_correct).insert(a.source_id);
    }
  }
  sets.n_items = sets.administered.size();
  return sets;
}

TraitScores scores_from_sets(const TraitScoreSet& sets) {
  TraitScores scores;
  if (sets.n_items == 0) return scores;
  std::size_t both = 0;
  for (const auto& id : sets.origin_correct) both += sets.aug_correct.count(id);
  const auto n = static_cast<double>(sets.n_items);
  scores.s_origin = static_cast<double>(sets.origin_correct.size()) / n;
  scores.s_consist = sets.origin_correct.empty()
                         ? 0.0
                         : static_cast<double>(both) /
                               static_cast<double>(sets.origin_correct.size());
  scores.s_ps = static_cast<double>(both) / n;
  return scores;
}

std::vector<ScoringOutcome> score_prompts(std::span<const PersonaPrompt> prompts,
                                          std::span<const TwinnedItem> items, Trait trait,
                                          ChatBackend& target, std::uint64_t seed,
                                          const ScoringOptions& options, int step) {
  std::vector<const TwinnedItem*> twinned;
  std::vector<std::string> excluded;
  for (const auto& item : items) {
    if (item.source.trait != trait || (item.twin && item.twin->trait != trait)) {
      fail(ErrorKind::data, "item '" + item.source.id + "' is not a " +
                                std::string(full_name(trait)) + " item");
    }
    if (item.twin) {
      twinned.push_back(&item);
    } else {
      excluded.push_back(item.source.id);
    }
  }

  std::vector<std::vector<char>> origin_orders;
  std::vector<std::vector<char>> twin_orders;
  std::vector<std::string> sample;
  for (const auto* item : twinned) {
    origin_orders.push_back(presentation_order(item->source, administration_seed(seed, item->source.id)));
    twin_orders.push_back(presentation_order(*item->twin, administration_seed(seed, item->twin->id)));
    sample.push_back(item->source.id);
  }

  std::vector<ChatRequest> requests;
  requests.reserve(prompts.size() * twinned.size() * 2);
  for (const auto& prompt : prompts) {
    for (std::size_t i = 0; i < twinned.size(); ++i) {
      requests.push_back(administration_request(prompt, twinned[i]->source, origin_orders[i], options));
      requests.push_back(administration_request(prompt, *twinned[i]->twin, twin_orders[i], options));
    }
  }
  const auto outcomes = complete_batch(target, requests, options.max_in_flight);
  throw_first_error(outcomes);

  std::vector<ScoringOutcome> results;
  results.reserve(prompts.size());
  std::size_t r = 0;
  for (const auto& prompt : prompts) {
    ScoringOutcome outcome;
    outcome.excluded_items = excluded;
    for (std::size_t i = 0; i < twinned.size(); ++i) {
      const auto& item = *twinned[i];
      outcome.log.push_back(record_administration(prompt, item.source, Form::origin, item.source.id,
                                                  origin_orders[i], outcomes[r++].response->text,
                                                  options.invert_keying));
      outcome.log.push_back(record_administration(prompt, *item.twin, Form::paraphrase,
                                                  item.source.id, twin_orders[i],
                                                  outcomes[r++].response->text,
                                                  options.invert_keying));
    }
    outcome.sets = collect_score_sets(trait, outcome.log);
    const auto scores = scores_from_sets(outcome.sets);
    outcome.scored = ScoredPrompt{prompt, trait, scores.s_ps, scores.s_consist, scores.s_origin,
                                  step, sample};
    results.push_back(std::move(outcome));
  }
  return results;
}

ScoringOutcome trait_scores(const PersonaPrompt& prompt, std::span<const TwinnedItem> items,
                            Trait trait, ChatBackend& target, std::uint64_t seed,
                            const ScoringOptions& options, int step) {
  auto results = score_prompts(std::span<const PersonaPrompt>(&prompt, 1), items, trait, target,
                               seed, options, step);
  return std::move(results.front());
}

// ---------------------------------------------------------------------------
// Likert

const std::string& default_likert_instruction() {
  static const std::string kInstruction =
      "Below are statements that may or may not describe you. Rate how accurately each "
      "statement describes you on a scale from 1 to 5:\n"
      "1 = very inaccurate, 2 = moderately inaccurate, 3 = neither accurate nor inaccurate, "
      "4 = moderately accurate, 5 = very accurate.\n"
      "Reply with one line per statement in the form \"<number>: <rating>\".";
  return kInstruction;
}

void to_json(json& j, const LikertAnswer& a) {
  j = json{{"trial", a.trial},
           {"position", a.position},
           {"item_id", a.item_id},
           {"trait", a.trait},
           {"keying", a.keying == LikertKeying::positive ? "positive" : "negative"},
           {"raw", a.raw ? json(*a.raw) : json(nullptr)}};
}

void from_json(const json& j, LikertAnswer& a) {
  a.trial = j.at("trial").get<int>();
  a.position = j.at("position").get<int>();
  a.item_id = j.at("item_id").get<std::string>();
  a.trait = j.at("trait").get<Trait>();
  a.keying = j.at("keying").get<std::string>() == "negative" ? LikertKeying::negative
                                                              : LikertKeying::positive;
  if (j.at("raw").is_null()) {
    a.raw.reset();
  } else {
    a.raw = j.at("raw").get<int>();
  }
}

std::map<int, int> parse_ratings(const std::string& response, int expected) {
  static const std::regex kLine(R"(^\s*[\(\[]?(\d+)[\)\]]?\s*[\.\):\-=]?\s*[\(\[]?([1-5])(?![0-9]))");
  std::map<int, int> ratings;
  std::set<int> conflicting;
  for (const auto& raw_line : split(response, '\n')) {
    std::smatch m;
    const std::string line = raw_line;
    if (!std::regex_search(line, m, kLine)) continue;
    const int position = std::stoi(m[1].str());
    const int rating = std::stoi(m[2].str());
    if (position < 1 || position > expected) continue;
    const auto [it, inserted] = ratings.emplace(position, rating);
    if (!inserted && it->second != rating) conflicting.insert(position);
  }
  for (int position : conflicting) ratings.erase(position);

  if (ratings.empty() && expected == 1) {
    std::optional<int> lone;
    for (std::size_t i = 0; i < response.size(); ++i) {
      const char c = response[i];
      if (c < '1' || c > '5') continue;
      const bool left_ok = i == 0 || !std::isdigit(static_cast<unsigned char>(response[i - 1]));
      const bool right_ok =
          i + 1 == response.size() || !std::isdigit(static_cast<unsigned char>(response[i + 1]));
      if (!left_ok || !right_ok) continue;
      if (lone && *lone != c - '0') return {};
      lone = c - '0';
    }
    if (lone) ratings.emplace(1, *lone);
  }
  return ratings;
}

std::string render_questionnaire(std::span<const LikertItem> items, const std::string& instruction) {
  std::string out = instruction.empty() ? default_likert_instruction() : instruction;
  out += "\n";
  for (std::size_t i = 0; i < items.size(); ++i) {
    out += "\n" + std::to_string(i + 1) + ". " + items[i].statement;
  }
  return out;
}

LikertReport likert_report_from_answers(std::vector<LikertAnswer> answers, int trials,
                                        double max_skip_fraction) {
  LikertReport report;
  report.trials.resize(static_cast<std::size_t>(trials));
  // Integer sums keep trial means independent of answer order.
  std::vector<std::map<Trait, std::pair<long, std::size_t>>> sums(report.trials.size());
  std::vector<std::size_t> totals(report.trials.size(), 0);
  for (const auto& a : answers) {
    if (a.trial < 0 || a.trial >= trials) fail(ErrorKind::data, "answer with out-of-range trial");
    const auto t = static_cast<std::size_t>(a.trial);
    ++totals[t];
    if (!a.raw) {
      ++report.trials[t].skipped;
      continue;
    }
    ++report.trials[t].answered;
    auto& [sum, count] = sums[t][a.trait];
    sum += reverse_score(*a.raw, a.keying);
    ++count;
  }

  std::map<Trait, std::vector<double>> per_trait_means;
  for (std::size_t t = 0; t < report.trials.size(); ++t) {
    auto& trial = report.trials[t];
    trial.index = static_cast<int>(t);
    for (const auto& [trait, acc] : sums[t]) {
      trial.trait_means[trait] = static_cast<double>(acc.first) / static_cast<double>(acc.second);
    }
    trial.valid = totals[t] > 0 && static_cast<double>(trial.skipped) <=
                                       max_skip_fraction * static_cast<double>(totals[t]);
    if (!trial.valid) {
      ++report.invalid_trials;
      continue;
    }
    for (const auto& [trait, mean] : trial.trait_means) per_trait_means[trait].push_back(mean);
  }

  double mean_sum = 0.0;
  double std_sum = 0.0;
  for (const auto& [trait, means] : per_trait_means) {
    LikertTraitStats stats;
    stats.trials = means.size();
    // Shifted by the first value so identical trial means give exactly zero spread.
    const double shift = means.front();
    const auto n = static_cast<double>(means.size());
    double sum = 0.0;
    double sum_sq = 0.0;
    for (double m : means) {
      sum += m - shift;
      sum_sq += (m - shift) * (m - shift);
    }
    stats.mean = shift + sum / n;
    if (means.size() > 1) {
      stats.std = std::sqrt(std::max(0.0, (sum_sq - sum * sum / n) / (n - 1.0)));
    }
    mean_sum += stats.mean;
    std_sum += stats.std;
    report.per_trait[trait] = stats;
  }
  if (!report.per_trait.empty()) {
    report.grand_mean = mean_sum / static_cast<double>(report.per_trait.size());
    report.grand_std = std_sum / static_cast<double>(report.per_trait.size());
  }
  report.answers = std::move(answers);
  return report;
}

LikertReport likert_assess(const PersonaPrompt& prompt, std::span<const LikertItem> items,
                           ChatBackend& target, std::uint64_t seed, const LikertOptions& options) {
  if (options.trials < 1) fail(ErrorKind::domain, "likert_assess needs at least one trial");
  if (items.empty()) fail(ErrorKind::data, "likert_assess needs at least one item");
  const std::size_t chunk = options.items_per_request <= 0
                                ? items.size()
                                : static_cast<std::size_t>(options.items_per_request);

  struct Chunk {
    int trial;
    std::size_t begin;  // position within the trial ordering
    std::vector<const LikertItem*> items;
  };
  std::vector<Chunk> chunks;
  std::vector<ChatRequest> requests;
  for (int trial = 0; trial < options.trials; ++trial) {
    std::vector<const LikertItem*> order;
    for (const auto& item : items) order.push_back(&item);
    Rng rng(derive_seed(seed, "likert-order", {static_cast<std::uint64_t>(trial)}));
    rng.shuffle(order);
    for (std::size_t begin = 0; begin < order.size(); begin += chunk) {
      Chunk c{trial, begin, {}};
      std::vector<LikertItem> shown;
      for (std::size_t i = begin; i < std::min(order.size(), begin + chunk); ++i) {
        c.items.push_back(order[i]);
        shown.push_back(*order[i]);
      }
      ChatRequest request;
      request.model_id = options.model_id;
      if (!prompt.empty()) request.system = prompt.text();
      request.user = render_questionnaire(shown, options.instruction);
      request.temperature = 0.0;
      request.max_tokens = options.max_tokens;
      requests.push_back(std::move(request));
      chunks.push_back(std::move(c));
    }
  }

  const auto outcomes = complete_batch(target, requests, options.max_in_flight);
  throw_first_error(outcomes);

  std::vector<LikertAnswer> answers;
  for (std::size_t c = 0; c < chunks.size(); ++c) {
    const auto& current = chunks[c];
    const auto ratings =
        parse_ratings(outcomes[c].response->text, static_cast<int>(current.items.size()));
    for (std::size_t i = 0; i < current.items.size(); ++i) {
      const auto* item = current.items[i];
      LikertAnswer answer{current.trial, static_cast<int>(current.begin + i), item->id,
                          item->trait, item->keying, std::nullopt};
      if (const auto it = ratings.find(static_cast<int>(i + 1)); it != ratings.end()) {
        answer.raw = it->second;
      }
      answers.push_back(std::move(answer));
    }
  }
  return likert_report_from_answers(std::move(answers), options.trials, options.max_skip_fraction);
}

}  // namespace personaopt
