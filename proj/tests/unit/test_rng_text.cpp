#include "doctest.h"
#include "fixtures.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "personaopt/errors.hpp"
#include "personaopt/rng.hpp"
#include "personaopt/templates.hpp"
#include "personaopt/text.hpp"

using namespace personaopt;

TEST_CASE("fnv1a64 reference values") {
  // Published FNV-1a test vectors.
  CHECK(fnv1a64("") == 0xcbf29ce484222325ULL);
  CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cULL);
  CHECK(fnv1a64("foobar") == 0x85944171f73967e8ULL);
}

TEST_CASE("splitmix64 reference value") {
  // First output of the reference generator seeded with 0 is mix(0x9e3779b97f4a7c15).
  CHECK(splitmix64(0) == 0xe220a8397b1dcdafULL);
}

TEST_CASE("derive_seed separates purposes and coordinates") {
  const auto a = derive_seed(1, "split", {0});
  CHECK(a == derive_seed(1, "split", {0}));
  CHECK(a != derive_seed(1, "split", {1}));
  CHECK(a != derive_seed(1, "questions", {0}));
  CHECK(a != derive_seed(2, "split", {0}));
  CHECK(derive_seed(1, "candidate", {1, 2}) != derive_seed(1, "candidate", {2, 1}));
  CHECK(derive_seed(5, "present", "item-1") != derive_seed(5, "present", "item-2"));
}

TEST_CASE("rng is reproducible and uniform enough") {
  Rng a(42), b(42);
  for (int i = 0; i < 100; ++i) CHECK(a.next() == b.next());

  Rng rng(7);
  std::array<int, 4> counts{};
  const int draws = 40000;
  for (int i = 0; i < draws; ++i) ++counts[rng.uniform(4)];
  for (int c : counts) CHECK(std::abs(c - draws / 4) < 600);  // ~7 sigma

  double sum = 0.0;
  for (int i = 0; i < draws; ++i) {
    const double u = rng.uniform_real();
    CHECK_UNARY(u >= 0.0);
    CHECK_UNARY(u < 1.0);
    sum += u;
  }
  CHECK(sum / draws == doctest::Approx(0.5).epsilon(0.01));
}

TEST_CASE("property: sample_indices gives k distinct in-range indices") {
  Rng gen(11);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t n = 1 + gen.uniform(60);
    const std::size_t k = gen.uniform(n + 1);
    Rng rng(gen.next());
    const auto idx = rng.sample_indices(n, k);
    CHECK(idx.size() == k);
    std::set<std::size_t> distinct(idx.begin(), idx.end());
    CHECK(distinct.size() == k);
    for (auto i : idx) CHECK(i < n);
  }
}

TEST_CASE("property: shuffle is a permutation") {
  Rng gen(3);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<int> v(gen.uniform(30));
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = static_cast<int>(i);
    auto w = v;
    Rng rng(gen.next());
    rng.shuffle(w);
    std::sort(w.begin(), w.end());
    CHECK(w == v);
  }
}

TEST_CASE("sha256") {
  CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  CHECK(sha256_hex("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
}

TEST_CASE("string helpers") {
  CHECK(trim("  a b \n") == "a b");
  CHECK(to_lower("AbC") == "abc");
  CHECK(iequals("Openness", "OPENNESS"));
  CHECK(normalize_space("  Hello \t  World\n") == "hello world");
  CHECK(split("a,b,,c", ',') == std::vector<std::string>{"a", "b", "", "c"});
  CHECK(join({"x", "y", "z"}, "-") == "x-y-z");
  CHECK(estimate_tokens("") == 0);
  CHECK(estimate_tokens("abcd") == 1);
  CHECK(estimate_tokens("abcde") == 2);
  CHECK(format_fixed(0.1234, 3) == "0.123");
  CHECK(format_fixed(1.0, 2) == "1.00");
}

TEST_CASE("render_template") {
  CHECK(render_template("Hi {{name}}, {{name}}!", {{"name", "Ada"}}) == "Hi Ada, Ada!");
  try {
    render_template("{{missing}}", {});
    FAIL("expected a config error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::config);
  }
}

TEST_CASE("atomic file writes") {
  fixtures::TempDir dir;
  const auto path = dir.file("a.txt");
  write_file_atomic(path, "one");
  CHECK(read_file(path) == "one");
  write_file_atomic(path, "two");
  CHECK(read_file(path) == "two");
}

TEST_CASE("embedded templates") {
  CHECK(contains(embedded_template("meta_prompt.txt"), "{{trajectory}}"));
  CHECK(contains(embedded_template("description_prompt.txt"), "{{trait}}"));
  try {
    embedded_template("nope.txt");
    FAIL("expected a lookup error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::lookup);
  }
  fixtures::TempDir dir;
  write_file_atomic(dir.file("t.txt"), "custom");
  CHECK(load_template(dir.file("t.txt"), "meta_prompt.txt") == "custom");
  CHECK(load_template("", "meta_prompt.txt") == embedded_template("meta_prompt.txt"));
}
