#include "personaopt/dataset.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <sstream>

#include <spdlog/spdlog.h>

#include "personaopt/rng.hpp"
#include "personaopt/text.hpp"

namespace personaopt {

namespace {

constexpr std::size_t kMaxListedViolations = 20;

Bank parse_bank(const std::string& path) {
  const std::string content = read_file(path);
  std::istringstream in(content);
  std::string line;
  std::size_t line_no = 0;
  std::optional<bool> likert;
  QuestionBank questions;
  LikertBank statements;

  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    auto where = [&] { return path + ":" + std::to_string(line_no); };
    json record;
    try {
      record = json::parse(line);
    } catch (const json::exception& e) {
      fail(ErrorKind::format, where() + ": " + e.what());
    }
    if (!record.is_object()) fail(ErrorKind::format, where() + ": record is not an object");
    const bool is_likert = record.contains("statement");
    if (!is_likert && !record.contains("scenario")) {
      fail(ErrorKind::format, where() + ": record has neither 'scenario' nor 'statement'");
    }
    if (likert && *likert != is_likert) {
      fail(ErrorKind::format, where() + ": bank mixes Likert and multiple-choice records");
    }
    likert = is_likert;

    if (record.contains("trait") && record.at("trait").is_string() &&
        is_dark_triad_label(record.at("trait").get<std::string>())) {
      ++(is_likert ? statements.dark_triad_filtered : questions.dark_triad_filtered);
      continue;
    }
    try {
      if (is_likert) {
        statements.items.push_back(record.get<LikertItem>());
      } else {
        auto item = record.get<QuestionItem>();
        assign_option_labels(item);
        questions.items.push_back(std::move(item));
      }
    } catch (const json::exception& e) {
      fail(ErrorKind::format, where() + ": " + e.what());
    } catch (const Error& e) {
      fail(ErrorKind::format, where() + ": " + e.what());
    }
  }
  if (!likert) fail(ErrorKind::format, path + ": bank is empty");

  const std::size_t filtered =
      *likert ? statements.dark_triad_filtered : questions.dark_triad_filtered;
  if (filtered > 0) spdlog::info("{}: filtered {} Dark Triad item(s)", path, filtered);
  if (*likert) return statements;
  return questions;
}

void throw_if_invalid(const std::string& path, const ValidationReport& report) {
  if (report.valid()) return;
  std::string message = path + ": " + std::to_string(report.violations.size()) + " violation(s)";
  for (std::size_t i = 0; i < report.violations.size() && i < kMaxListedViolations; ++i) {
    message += "\n  " + report.violations[i].item_id + ": " + report.violations[i].message;
  }
  fail(ErrorKind::data, message);
}

template <typename Item>
std::string encode_items(std::span<const Item> items) {
  std::string out;
  for (const auto& item : items) {
    out += json(item).dump();
    out += '\n';
  }
  return out;
}

std::string extract_paraphrase(const std::string& reply) {
  const auto open = reply.find("<text>");
  const auto close = reply.rfind("</text>");
  if (open != std::string::npos && close != std::string::npos && close > open) {
    return trim(std::string_view(reply).substr(open + 6, close - open - 6));
  }
  return trim(reply);
}

std::optional<std::string> degenerate_reason(const std::string& paraphrase,
                                             const std::string& source) {
  if (paraphrase.size() < 10) return "paraphrase shorter than 10 characters";
  if (paraphrase == trim(source)) return "paraphrase identical to source";
  return std::nullopt;
}

}  // namespace

Bank load_bank_unvalidated(const std::string& path) { return parse_bank(path); }

Bank load_bank(const std::string& path) {
  Bank bank = parse_bank(path);
  if (auto* questions = std::get_if<QuestionBank>(&bank)) {
    throw_if_invalid(path, validate_item_bank(questions->items));
  } else {
    throw_if_invalid(path, validate_likert_bank(std::get<LikertBank>(bank).items));
  }
  return bank;
}

QuestionBank load_question_bank(const std::string& path) {
  Bank bank = load_bank(path);
  if (auto* questions = std::get_if<QuestionBank>(&bank)) return std::move(*questions);
  fail(ErrorKind::format, path + ": expected a multiple-choice bank, found Likert items");
}

LikertBank load_likert_bank(const std::string& path) {
  Bank bank = load_bank(path);
  if (auto* statements = std::get_if<LikertBank>(&bank)) return std::move(*statements);
  fail(ErrorKind::format, path + ": expected a Likert bank, found multiple-choice items");
}

std::string encode_jsonl(std::span<const QuestionItem> items) { return encode_items(items); }
std::string encode_jsonl(std::span<const LikertItem> items) { return encode_items(items); }

void write_bank(const std::string& path, std::span<const QuestionItem> items) {
  write_file_atomic(path, encode_jsonl(items));
}

void write_bank(const std::string& path, std::span<const LikertItem> items) {
  write_file_atomic(path, encode_jsonl(items));
}

std::vector<TwinnedItem> pair_twins(std::span<const QuestionItem> items,
                                    std::optional<Trait> trait) {
  std::map<std::string, const QuestionItem*> twin_of;
  for (const auto& item : items) {
    if (item.paraphrase_of) twin_of.emplace(*item.paraphrase_of, &item);
  }
  std::vector<TwinnedItem> out;
  for (const auto& item : items) {
    if (item.is_twin() || (trait && item.trait != *trait)) continue;
    TwinnedItem pair{item, std::nullopt};
    if (const auto it = twin_of.find(item.id); it != twin_of.end()) pair.twin = *it->second;
    out.push_back(std::move(pair));
  }
  return out;
}

Split split(std::span<const QuestionItem> items, const SplitSpec& spec) {
  if (spec.train_size < 0 || spec.test_size < 0) {
    fail(ErrorKind::domain, "split sizes must be non-negative");
  }
  auto pool = pair_twins(items, spec.trait);
  const auto needed = static_cast<std::size_t>(spec.train_size) +
                      static_cast<std::size_t>(spec.test_size);
  if (pool.size() < needed) {
    fail(ErrorKind::capacity, std::string(full_name(spec.trait)) + " has " +
                                  std::to_string(pool.size()) + " items; split needs " +
                                  std::to_string(needed));
  }
  std::sort(pool.begin(), pool.end(),
            [](const TwinnedItem& a, const TwinnedItem& b) { return a.source.id < b.source.id; });
  Rng rng(derive_seed(spec.seed, "split", {trait_index(spec.trait)}));
  rng.shuffle(pool);

  Split result;
  result.spec = spec;
  const auto train_end = pool.begin() + spec.train_size;
  result.train.assign(pool.begin(), train_end);
  result.test.assign(train_end, train_end + spec.test_size);
  return result;
}

json split_manifest(const Split& split) {
  auto ids = [](const std::vector<TwinnedItem>& part) {
    std::vector<std::string> out;
    out.reserve(part.size());
    for (const auto& item : part) out.push_back(item.source.id);
    return out;
  };
  return json{{"trait", split.spec.trait},
              {"train_size", split.spec.train_size},
              {"test_size", split.spec.test_size},
              {"seed", split.spec.seed},
              {"train", ids(split.train)},
              {"test", ids(split.test)}};
}

Split split_from_manifest(std::span<const QuestionItem> items, const json& manifest) {
  Split result;
  try {
    result.spec.trait = manifest.at("trait").get<Trait>();
    result.spec.train_size = manifest.at("train_size").get<int>();
    result.spec.test_size = manifest.at("test_size").get<int>();
    result.spec.seed = manifest.at("seed").get<std::uint64_t>();
    const auto pairs = pair_twins(items, result.spec.trait);
    std::map<std::string, const TwinnedItem*> by_id;
    for (const auto& pair : pairs) by_id.emplace(pair.source.id, &pair);
    auto fill = [&](const char* key, std::vector<TwinnedItem>& out) {
      for (const auto& id : manifest.at(key).get<std::vector<std::string>>()) {
        const auto it = by_id.find(id);
        if (it == by_id.end()) fail(ErrorKind::lookup, "manifest item '" + id + "' not in bank");
        out.push_back(*it->second);
      }
    };
    fill("train", result.train);
    fill("test", result.test);
  } catch (const json::exception& e) {
    fail(ErrorKind::format, std::string("malformed split manifest: ") + e.what());
  }
  return result;
}

const std::string& default_paraphrase_template() {
  static const std::string kTemplate =
      "Rewrite the text below so that it keeps exactly the same meaning but uses different "
      "wording. Preserve every detail of the situation; do not add, remove or judge anything, "
      "and do not alter the options that will follow it. Reply with the rewritten text only, "
      "between <text> and </text>.\n\n<text>\n{{text}}\n</text>";
  return kTemplate;
}

AugmentResult augment(std::span<const QuestionItem> items, ChatBackend& augmenter,
                      const AugmentOptions& options) {
  const std::string& tmpl =
      options.paraphrase_template.empty() ? default_paraphrase_template() : options.paraphrase_template;

  std::set<std::string> ids;
  std::set<std::string> already_twinned;
  for (const auto& item : items) {
    ids.insert(item.id);
    if (item.paraphrase_of) already_twinned.insert(*item.paraphrase_of);
  }

  // Two requests per source needing a twin: scenario, then question (when
  // present).
  struct Job {
    std::size_t item_index;
    std::optional<std::size_t> scenario_request;
    std::optional<std::size_t> question_request;
  };
  std::vector<Job> jobs;
  std::vector<ChatRequest> requests;
  auto make_request = [&](const std::string& text) {
    ChatRequest request;
    request.model_id = options.model_id;
    request.user = render_template(tmpl, {{"text", text}});
    request.temperature = options.temperature;
    request.max_tokens = options.max_tokens;
    requests.push_back(std::move(request));
    return requests.size() - 1;
  };
  for (std::size_t i = 0; i < items.size(); ++i) {
    const auto& item = items[i];
    if (item.is_twin() || already_twinned.count(item.id) > 0) continue;
    Job job{i, make_request(item.scenario), std::nullopt};
    if (!trim(item.question).empty()) job.question_request = make_request(item.question);
    jobs.push_back(job);
  }

  const auto outcomes = complete_batch(augmenter, requests, options.max_in_flight);

  AugmentResult result;
  std::map<std::size_t, QuestionItem> twins;
  for (const auto& job : jobs) {
    const auto& source = items[job.item_index];
    auto paraphrase = [&](std::size_t request_index,
                          const std::string& original) -> std::optional<std::string> {
      const auto& outcome = outcomes[request_index];
      if (!outcome.ok()) {
        result.errors.push_back({source.id, "augmenter error: " + outcome.error->message});
        return std::nullopt;
      }
      auto text = extract_paraphrase(outcome.response->text);
      if (auto reason = degenerate_reason(text, original)) {
        result.errors.push_back({source.id, *reason});
        return std::nullopt;
      }
      return text;
    };
    const auto scenario = paraphrase(*job.scenario_request, source.scenario);
    if (!scenario) continue;
    std::optional<std::string> question = source.question;
    if (job.question_request) {
      question = paraphrase(*job.question_request, source.question);
      if (!question) continue;
    }

    QuestionItem twin = source;
    twin.id = source.id + options.twin_suffix;
    if (ids.count(twin.id) > 0) {
      result.errors.push_back({source.id, "twin id '" + twin.id + "' already exists"});
      continue;
    }
    twin.scenario = *scenario;
    twin.question = *question;
    twin.paraphrase_of = source.id;
    ids.insert(twin.id);
    twins.emplace(job.item_index, std::move(twin));
  }

  for (std::size_t i = 0; i < items.size(); ++i) {
    result.items.push_back(items[i]);
    if (const auto it = twins.find(i); it != twins.end()) {
      result.items.push_back(it->second);
      ++result.twins_created;
    }
  }
  return result;
}

}  // namespace personaopt
