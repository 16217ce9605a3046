#include <map>
#include <set>

#include "doctest.h"
#include "fc/corpus.hpp"
#include "fc/error.hpp"
#include "fc/synthetic.hpp"
#include "test_helpers.hpp"

using namespace fc;

namespace {

std::filesystem::path make_manifest(const TempDir& dir) {
  write_text(dir / "a.txt", "abc");
  write_text(dir / "b.jsonl", "{\"text\": \"de\"}\n{\"text\": \"f\"}\n");
  write_text(dir / "m.json", R"({"pool_label": "tiny", "documents": [
    {"id": "a", "path": "a.txt", "format": "txt"},
    {"id": "b", "path": "b.jsonl", "format": "jsonl", "text_field": "text"}]})");
  return dir / "m.json";
}

}  // namespace

TEST_CASE("manifest loading resolves paths and splits jsonl records") {
  TempDir dir;
  const Corpus c = load_corpus(make_manifest(dir));
  CHECK(c.pool_label == "tiny");
  REQUIRE(c.documents.size() == 3);
  CHECK(c.documents[0].id == "a");
  CHECK(c.documents[0].text == "abc");
  CHECK(c.documents[1].id == "b:0");
  CHECK(c.documents[2].id == "b:1");
  CHECK(c.documents[2].text == "f");
  CHECK_NOTHROW(validate(c));
}

TEST_CASE("manifest errors") {
  TempDir dir;
  CHECK_THROWS_AS(load_corpus(dir / "absent.json"), ConfigError);

  write_text(dir / "m.json", R"({"documents": [{"id": "x", "path": "nope.txt", "format": "txt"}]})");
  CHECK_THROWS_WITH_AS(load_corpus(dir / "m.json"), doctest::Contains("document not found"), DataError);

  write_text(dir / "bad.txt", std::string("ok \xff\xfe", 5));
  write_text(dir / "m2.json", R"({"documents": [{"id": "x", "path": "bad.txt", "format": "txt"}]})");
  CHECK_THROWS_WITH_AS(load_corpus(dir / "m2.json"), doctest::Contains("UTF-8"), DataError);

  write_text(dir / "trunc.txt", std::string("caf\xc3", 4));
  write_text(dir / "m3.json", R"({"documents": [{"id": "x", "path": "trunc.txt", "format": "txt"}]})");
  CHECK_THROWS_AS(load_corpus(dir / "m3.json"), DataError);

  Corpus dup{{{"a", "x"}, {"a", "y"}}, "dup"};
  CHECK_THROWS_AS(validate(dup), DataError);
  Corpus empty_text{{{"a", ""}}, "e"};
  CHECK_THROWS_AS(validate(empty_text), DataError);
}

TEST_CASE("token pool concatenates per-document tokenizations") {
  TempDir dir;
  const Corpus c = load_corpus(make_manifest(dir));
  OracleBackend oracle(OracleSpec{});
  const TokenPool pool = build_token_pool(c, oracle);
  // Oracle tokenizer: one id per byte, id = byte + 3.
  const std::vector<TokenId> expected = {'a' + 3, 'b' + 3, 'c' + 3, 'd' + 3, 'e' + 3, 'f' + 3};
  CHECK(pool.ids == expected);
  REQUIRE(pool.doc_offsets.size() == 3);
  CHECK(pool.doc_offsets[1].doc_id == "b:0");
  CHECK(pool.doc_offsets[1].start == 3);
  CHECK(pool.doc_offsets[2].start == 5);
  CHECK(pool.tokenizer_fingerprint == "induction");
  CHECK(pool.label == "tiny");
}

TEST_CASE("random pool avoids reserved ids and is seeded") {
  const std::vector<TokenId> reserved = {0, 1, 2};
  const TokenPool a = random_token_pool(5000, 10, 3, reserved);
  const TokenPool b = random_token_pool(5000, 10, 3, reserved);
  CHECK(a.ids == b.ids);
  CHECK(a.label == "random:n=5000,vocab=10,seed=3");
  std::set<TokenId> values(a.ids.begin(), a.ids.end());
  CHECK(values == std::set<TokenId>{3, 4, 5, 6, 7, 8, 9});
  CHECK(random_token_pool(5000, 10, 4, reserved).ids != a.ids);
  CHECK_THROWS_AS(random_token_pool(10, 3, 1, reserved), ConfigError);
}

TEST_CASE("copy and irrelevant spans are disjoint and come from the pool") {
  const TokenPool pool = random_token_pool(1000, 50, 1, {});
  SplitMix64 rng(9);
  for (int k = 0; k < 500; ++k) {
    const SampledSpans s = sample_copy_and_irrelevant(pool, 100, 120, rng);
    REQUIRE(!s.copy_span.overlaps(s.irrelevant_span));
    REQUIRE(s.copy_span.length == 100);
    REQUIRE(s.irrelevant_span.length == 120);
    REQUIRE(s.irrelevant_span.end() <= pool.size());
    REQUIRE(std::equal(s.copy.begin(), s.copy.end(), pool.ids.begin() + s.copy_span.start));
    REQUIRE(std::equal(s.irrelevant.begin(), s.irrelevant.end(), pool.ids.begin() + s.irrelevant_span.start));
  }
}

TEST_CASE("span sampling distribution matches enumeration") {
  // N = 10, |S| = 3, |I| = 2. S may start anywhere leaving room for a disjoint
  // I: starts 0..5 (I after) or 2..7 (I before), i.e. 0..7, each equally likely.
  const TokenPool pool = random_token_pool(10, 100, 2, {});
  SplitMix64 rng(5);
  std::map<std::size_t, int> s_counts;
  std::map<std::pair<std::size_t, std::size_t>, int> pair_counts;
  const int n = 80000;
  for (int k = 0; k < n; ++k) {
    const SampledSpans s = sample_copy_and_irrelevant(pool, 3, 2, rng);
    ++s_counts[s.copy_span.start];
    ++pair_counts[{s.copy_span.start, s.irrelevant_span.start}];
  }
  REQUIRE(s_counts.size() == 8);
  for (const auto& [start, c] : s_counts) CHECK(std::abs(c - n / 8) < 450);
  // Given S, every disjoint I start is equally likely.
  for (const auto& [key, c] : pair_counts) {
    std::size_t options = 0;
    for (std::size_t i = 0; i + 2 <= 10; ++i) options += (i + 2 <= key.first || i >= key.first + 3);
    CHECK(std::abs(c - s_counts[key.first] / static_cast<int>(options)) < 200);
  }
}

TEST_CASE("exhausted pool") {
  const TokenPool pool = random_token_pool(10, 100, 2, {});
  SplitMix64 rng(1);
  CHECK_NOTHROW(sample_copy_and_irrelevant(pool, 5, 5, rng));
  CHECK_THROWS_WITH_AS(sample_copy_and_irrelevant(pool, 6, 5, rng), doctest::Contains("pool exhausted"), DataError);
  CHECK_THROWS_AS(sample_span(pool, 11, rng), DataError);
  CHECK(sample_span(pool, 10, rng).start == 0);
}

TEST_CASE("pool cache round trip and corruption") {
  TempDir dir;
  TokenPool pool = random_token_pool(1234, 70000, 8, {});
  pool.tokenizer_fingerprint = "tok/1.2";
  save_pool(pool, dir / "p.bin");
  const TokenPool back = load_pool(dir / "p.bin");
  CHECK(back.ids == pool.ids);
  CHECK(back.tokenizer_fingerprint == "tok/1.2");
  CHECK(std::filesystem::file_size(dir / "p.bin") == 7 + 4 + 7 + 8 + 4 * 1234);

  std::string bytes = read_text_file(dir / "p.bin");
  write_text(dir / "short.bin", bytes.substr(0, bytes.size() - 2));
  CHECK_THROWS_AS(load_pool(dir / "short.bin"), DataError);
  write_text(dir / "magic.bin", "NOTPOOL" + bytes.substr(7));
  CHECK_THROWS_AS(load_pool(dir / "magic.bin"), DataError);
}
