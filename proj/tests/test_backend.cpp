#include <mutex>

#include "doctest.h"
#include "fc/backend.hpp"
#include "fc/error.hpp"

using namespace fc;

namespace {

// Byte tokenizer that records every request and rejects broken UTF-8.
class RecordingBackend : public Backend {
 public:
  BackendInfo hello() override { return BackendInfo{"rec", "", 64, 1, 2, false, false}; }
  std::vector<TokenId> tokenize(std::string_view text) override {
    requests.emplace_back(text);
    for (std::size_t i = 0; i < text.size();) {
      const auto c = static_cast<unsigned char>(text[i]);
      const std::size_t n = c < 0x80 ? 1 : c < 0xE0 ? 2 : c < 0xF0 ? 3 : 4;
      if (c >= 0x80 && c < 0xC0) throw std::runtime_error("chunk starts inside a code point");
      if (i + n > text.size()) throw std::runtime_error("chunk ends inside a code point");
      i += n;
    }
    std::vector<TokenId> out;
    for (unsigned char c : text) out.push_back(c);
    return out;
  }
  ScoreResult score(std::span<const TokenId>, std::span<const std::size_t> positions, bool) override {
    return ScoreResult{std::vector<std::uint8_t>(positions.size(), 1), std::nullopt};
  }
  std::vector<std::string> requests;
};

}  // namespace

TEST_CASE("descriptor fingerprint") {
  BackendInfo a{"m", "", std::nullopt, std::nullopt, std::nullopt, false, false};
  CHECK(a.tokenizer_fingerprint() == "m");
  a.version = "2";
  CHECK(a.tokenizer_fingerprint() == "m/2");
}

TEST_CASE("score request preconditions") {
  const std::vector<TokenId> ids = {1, 5, 6};
  auto check = [&](std::vector<std::size_t> p, std::optional<std::size_t> max) {
    validate_score_request(ids, p, max);
  };
  CHECK_NOTHROW(check({1, 2}, std::nullopt));
  CHECK_THROWS_AS(check({0}, std::nullopt), std::invalid_argument);
  CHECK_THROWS_AS(check({3}, std::nullopt), std::invalid_argument);
  CHECK_THROWS_AS(check({2, 1}, std::nullopt), std::invalid_argument);
  CHECK_THROWS_AS(check({1, 1}, std::nullopt), std::invalid_argument);
  CHECK_NOTHROW(check({2}, 3));
  CHECK_THROWS_WITH_AS(check({2}, 2), doctest::Contains("context overflow"), BackendError);
}

TEST_CASE("score result invariants") {
  ScoreResult ok{{1, 0}, std::nullopt};
  CHECK_NOTHROW(validate_score_result(ok, 2, false, false));
  CHECK_NOTHROW(validate_score_result(ok, 2, true, false));  // not supported: absent is right
  CHECK_THROWS_AS(validate_score_result(ok, 3, false, false), ProtocolError);
  CHECK_THROWS_AS(validate_score_result(ok, 2, true, true), ProtocolError);
  ScoreResult flag{{2}, std::nullopt};
  CHECK_THROWS_AS(validate_score_result(flag, 1, false, false), ProtocolError);
  ScoreResult lp{{1}, std::vector<double>{0.5}};
  CHECK_THROWS_AS(validate_score_result(lp, 1, true, true), ProtocolError);
  lp.logprob = std::vector<double>{-0.5};
  CHECK_NOTHROW(validate_score_result(lp, 1, true, true));
  CHECK_THROWS_AS(validate_score_result(lp, 1, false, true), ProtocolError);
}

TEST_CASE("chunked tokenization splits on safe boundaries") {
  std::string text;
  for (int k = 0; k < 300; ++k) text += "word\xC3\xA9\xE6\x97\xA5\xF0\x9F\x98\x80";  // no spaces at all
  RecordingBackend b;
  const auto ids = tokenize_chunked(b, text, 64);
  CHECK(ids.size() == text.size());
  CHECK(b.requests.size() > 10);
  for (const auto& r : b.requests) CHECK(r.size() <= 64);

  RecordingBackend spaced;
  std::string words;
  for (int k = 0; k < 200; ++k) words += "alpha beta ";
  tokenize_chunked(spaced, words, 100);
  for (std::size_t k = 0; k + 1 < spaced.requests.size(); ++k) CHECK(spaced.requests[k].back() == ' ');

  RecordingBackend empty;
  CHECK(tokenize_chunked(empty, "", 64).empty());
  CHECK(empty.requests.empty());
  CHECK(tokenize_chunked(empty, "short", 64).size() == 5);
  CHECK(empty.requests.size() == 1);
}

TEST_CASE("info is cached") {
  struct Counting : RecordingBackend {
    int hellos = 0;
    BackendInfo hello() override {
      ++hellos;
      return RecordingBackend::hello();
    }
  } b;
  b.info();
  b.info();
  CHECK(b.hellos == 1);
  CHECK(b.info().max_context == 64u);
}
