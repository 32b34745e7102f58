#include "doctest.h"
#include "fixtures.hpp"

#include <algorithm>
#include <set>

#include "personaopt/dataset.hpp"
#include "personaopt/errors.hpp"
#include "personaopt/mock_backend.hpp"
#include "personaopt/text.hpp"

using namespace personaopt;

namespace {

ErrorKind load_error(const std::string& path) {
  try {
    (void)load_bank(path);
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("expected load to fail");
  return ErrorKind::state;
}

std::set<std::string> ids(const std::vector<TwinnedItem>& part) {
  std::set<std::string> out;
  for (const auto& t : part) out.insert(t.source.id);
  return out;
}

}  // namespace

TEST_CASE("bank round-trips through JSON lines") {
  fixtures::TempDir dir;
  const auto bank = fixtures::synthetic_bank(kAllTraits, 4, true);
  write_bank(dir.file("bank.jsonl"), bank);
  const auto loaded = load_question_bank(dir.file("bank.jsonl"));
  CHECK(loaded.items == bank);
  CHECK(loaded.dark_triad_filtered == 0);

  const auto likert = fixtures::likert_bank(3, true);
  write_bank(dir.file("mpi.jsonl"), likert);
  CHECK(load_likert_bank(dir.file("mpi.jsonl")).items == likert);
  CHECK(std::holds_alternative<LikertBank>(load_bank(dir.file("mpi.jsonl"))));
}

TEST_CASE("labels are reassigned in file order") {
  fixtures::TempDir dir;
  write_file_atomic(dir.file("b.jsonl"),
                    R"({"id":"x","trait":"OPE","scenario":"S","options":[)"
                    R"({"label":"Z","text":"a","keyed":"high"},{"text":"b","keyed":"low"},)"
                    R"({"text":"c","keyed":"high"},{"text":"d","keyed":"low"}]})"
                    "\n\n");
  const auto bank = load_question_bank(dir.file("b.jsonl"));
  REQUIRE(bank.items.size() == 1);
  std::string labels;
  for (const auto& o : bank.items[0].options) labels += o.label;
  CHECK(labels == "ABCD");
}

TEST_CASE("dark triad records are filtered and counted") {
  fixtures::TempDir dir;
  auto bank = fixtures::synthetic_bank(Trait::openness, 2, false);
  std::string content = encode_jsonl(bank);
  json dark = bank[0];
  dark["id"] = "dt-1";
  dark["trait"] = "Machiavellianism";
  content += dark.dump() + "\n";
  dark["id"] = "dt-2";
  dark["trait"] = "psychopathy";
  content += dark.dump() + "\n";
  write_file_atomic(dir.file("b.jsonl"), content);
  const auto loaded = load_question_bank(dir.file("b.jsonl"));
  CHECK(loaded.items.size() == 2);
  CHECK(loaded.dark_triad_filtered == 2);
}

TEST_CASE("load errors carry kinds and line numbers") {
  fixtures::TempDir dir;
  const auto good = encode_jsonl(fixtures::synthetic_bank(Trait::openness, 1, false));

  write_file_atomic(dir.file("empty.jsonl"), "\n\n");
  CHECK(load_error(dir.file("empty.jsonl")) == ErrorKind::format);

  write_file_atomic(dir.file("garbled.jsonl"), good + "{nope\n");
  try {
    (void)load_bank(dir.file("garbled.jsonl"));
    FAIL("expected format error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::format);
    CHECK(contains(e.what(), "garbled.jsonl:2"));
  }

  write_file_atomic(dir.file("mixed.jsonl"),
                    good + R"({"id":"m","trait":"OPE","statement":"s","keying":"positive"})" + "\n");
  CHECK(load_error(dir.file("mixed.jsonl")) == ErrorKind::format);

  write_file_atomic(dir.file("bad-trait.jsonl"),
                    R"({"id":"m","trait":"grit","statement":"s","keying":"positive"})"
                    "\n");
  CHECK(load_error(dir.file("bad-trait.jsonl")) == ErrorKind::format);

  auto bad = fixtures::synthetic_bank(Trait::openness, 1, false);
  bad[0].options[0].keyed = bad[0].options[0].keyed == Keyed::high ? Keyed::low : Keyed::high;
  write_bank(dir.file("invalid.jsonl"), bad);
  CHECK(load_error(dir.file("invalid.jsonl")) == ErrorKind::data);
  CHECK_FALSE(std::get<QuestionBank>(load_bank_unvalidated(dir.file("invalid.jsonl"))).items.empty());

  CHECK(load_error(dir.file("missing.jsonl")) == ErrorKind::lookup);
}

TEST_CASE("pair_twins pairs sources with twins in bank order") {
  auto bank = fixtures::synthetic_bank(Trait::openness, 3, true);
  bank.erase(bank.begin() + 3);  // drop the twin of OPE-1
  const auto pairs = pair_twins(bank);
  REQUIRE(pairs.size() == 3);
  CHECK(pairs[0].twin.has_value());
  CHECK_FALSE(pairs[1].twin.has_value());
  CHECK(pairs[2].twin->id == "OPE-2-aug");
  CHECK(pair_twins(bank, Trait::neuroticism).empty());
}

TEST_CASE("split is deterministic, disjoint and sized") {
  const auto bank = fixtures::synthetic_bank(kAllTraits, 30, true);
  const SplitSpec spec{Trait::extraversion, 10, 15, 5};
  const auto a = split(bank, spec);
  const auto b = split(bank, spec);
  CHECK(ids(a.train) == ids(b.train));
  CHECK(a.train.size() == 10);
  CHECK(a.test.size() == 15);
  for (const auto& id : ids(a.train)) CHECK(ids(a.test).count(id) == 0);
  for (const auto& t : a.train) CHECK(t.source.trait == Trait::extraversion);

  auto different = spec;
  different.seed = 6;
  CHECK(ids(split(bank, different).train) != ids(a.train));
}

TEST_CASE("property: split does not depend on bank order") {
  Rng gen(77);
  auto bank = fixtures::synthetic_bank(Trait::agreeableness, 25, true);
  const SplitSpec spec{Trait::agreeableness, 7, 9, 13};
  const auto reference = split(bank, spec);
  for (int trial = 0; trial < 20; ++trial) {
    // Shuffle source/twin pairs as units.
    std::vector<std::pair<QuestionItem, QuestionItem>> pairs;
    for (std::size_t i = 0; i < bank.size(); i += 2) pairs.emplace_back(bank[i], bank[i + 1]);
    Rng rng(gen.next());
    rng.shuffle(pairs);
    std::vector<QuestionItem> shuffled;
    for (auto& [s, t] : pairs) {
      shuffled.push_back(s);
      shuffled.push_back(t);
    }
    const auto s = split(shuffled, spec);
    std::vector<std::string> ra, sa;
    for (const auto& t : reference.train) ra.push_back(t.source.id);
    for (const auto& t : s.train) sa.push_back(t.source.id);
    CHECK(ra == sa);
  }
}

TEST_CASE("split capacity errors") {
  const auto bank = fixtures::synthetic_bank(Trait::openness, 5, true);
  try {
    (void)split(bank, SplitSpec{Trait::openness, 4, 2, 0});
    FAIL("expected capacity error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::capacity);
  }
}

TEST_CASE("split manifests rebuild the same partition") {
  const auto bank = fixtures::synthetic_bank(Trait::neuroticism, 12, true);
  const auto s = split(bank, SplitSpec{Trait::neuroticism, 4, 6, 2});
  const auto manifest = split_manifest(s);
  const auto back = split_from_manifest(bank, json::parse(manifest.dump()));
  CHECK(back.train == s.train);
  CHECK(back.test == s.test);
  CHECK(back.spec.seed == 2);

  auto broken = manifest;
  broken["train"][0] = "ghost";
  try {
    (void)split_from_manifest(bank, broken);
    FAIL("expected lookup error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::lookup);
  }
}

TEST_CASE("augment creates twins and reports degenerate paraphrases") {
  auto bank = fixtures::synthetic_bank(Trait::openness, 4, false);
  bank[2].question.clear();
  FunctionBackend augmenter("aug", [](const ChatRequest& r) -> std::string {
    if (contains(r.user, "OPE-1")) return "<text>short</text>";
    if (contains(r.user, "OPE-3")) fail(ErrorKind::transport, "down");
    const auto open = r.user.find("<text>\n") + 7;
    const auto close = r.user.rfind("\n</text>");
    return "<text>Reworded: " + r.user.substr(open, close - open) + "</text>";
  });
  const auto result = augment(bank, augmenter);
  CHECK(result.twins_created == 2);
  CHECK(result.items.size() == 6);
  CHECK(result.items[1].id == "OPE-0-aug");
  CHECK(result.items[1].paraphrase_of == "OPE-0");
  CHECK(result.items[1].options == bank[0].options);
  CHECK(result.items[1].scenario.rfind("Reworded: ", 0) == 0);
  CHECK(result.items[4].question.empty());
  CHECK(result.errors.size() == 2);
  CHECK(validate_item_bank(result.items).valid());

  // A second pass only touches the still twin-less items.
  std::size_t calls = 0;
  FunctionBackend counting("aug2", [&calls](const ChatRequest& r) {
    ++calls;
    return "<text>Another way: " + r.user.substr(r.user.find("<text>") + 7, 40) + "</text>";
  });
  AugmentOptions sequential;
  sequential.max_in_flight = 1;
  const auto second = augment(result.items, counting, sequential);
  CHECK(second.twins_created == 2);
  CHECK(calls == 4);
  CHECK(pair_twins(second.items).size() == 4);
}

TEST_CASE("the shipped schema covers every serialized field") {
  const auto schema = json::parse(read_file(std::string(PERSONAOPT_SOURCE_DIR) + "/schemas/item-bank.schema.json"));
  const auto& defs = schema.at("$defs");
  auto question = fixtures::synthetic_bank(Trait::openness, 1, true)[1];
  const json q = question;
  for (const auto& [key, value] : q.items()) CHECK_MESSAGE(defs["question_item"]["properties"].contains(key), key);
  for (const auto& [key, value] : q["options"][0].items()) CHECK_MESSAGE(defs["option"]["properties"].contains(key), key);
  for (const auto& key : defs["question_item"]["required"]) CHECK(q.contains(key.get<std::string>()));
  const json l = fixtures::likert_bank(1, true)[1];
  for (const auto& [key, value] : l.items()) CHECK_MESSAGE(defs["likert_item"]["properties"].contains(key), key);
  for (const auto& key : defs["likert_item"]["required"]) CHECK(l.contains(key.get<std::string>()));
  CHECK(defs["likert_item"]["properties"]["keying"]["enum"] == json::array({"positive", "negative"}));
}
