#include <cmath>

#include "doctest.h"
#include "fc/backend.hpp"
#include "fc/error.hpp"
#include "fc/rng.hpp"
#include "fc/synthetic.hpp"

using namespace fc;

namespace {

OracleSpec induction(std::size_t w, double p, std::size_t m) {
  OracleSpec s;
  s.kind = OracleKind::induction;
  s.window = w;
  s.lm_acc = p;
  s.min_match = m;
  return s;
}

std::vector<std::uint8_t> score_all(OracleBackend& b, const std::vector<TokenId>& ids,
                                    const std::vector<std::size_t>& pos) {
  return b.score(ids, pos, false).correct;
}

// Direct transcription of the recall rule: scan every distance, measure the
// common suffix by walking backwards, keep the longest (nearest on ties).
struct Naive {
  bool found = false;
  std::size_t distance = 0;
  TokenId predicted = 0;
};

Naive naive_match(const std::vector<TokenId>& ids, std::size_t i, std::size_t w, std::size_t m) {
  Naive best;
  std::size_t best_len = 0;
  for (std::size_t d = 1; d <= w && d <= i - 1; ++d) {
    std::size_t len = 0;
    while (len + d <= i - 1 && ids[i - 1 - len] == ids[i - 1 - d - len]) ++len;
    if (len > best_len) {
      best_len = len;
      best = {true, d, ids[i - d]};
    }
  }
  if (best_len < m) best.found = false;
  return best;
}

}  // namespace

TEST_CASE("hand-traced suffix match") {
  const std::vector<TokenId> ids = {1, 5, 6, 7, 8, 1, 5, 6, 7, 8, 2};
  // Position 8 (true token 7): suffix [.., 5, 6] recurs at indices 1..2, distance 5.
  OracleBackend near(induction(64, 0.0, 2));
  CHECK(score_all(near, ids, {8}) == std::vector<std::uint8_t>{1});
  // w = 4 < 5: no usable match, and the p = 0 fallback is never right.
  OracleBackend far(induction(4, 0.0, 2));
  CHECK(score_all(far, ids, {8}) == std::vector<std::uint8_t>{0});
  // With p = 1 the fallback is always right.
  OracleBackend lucky(induction(4, 1.0, 2));
  CHECK(score_all(lucky, ids, {8}) == std::vector<std::uint8_t>{1});
}

namespace {

// Always predicts the previous token.
class RepeatPrevious : public Backend {
 public:
  BackendInfo hello() override { return BackendInfo{"repeat", "", std::nullopt, 1, 2, false, true}; }
  std::vector<TokenId> tokenize(std::string_view) override { return {}; }
  ScoreResult score(std::span<const TokenId> ids, std::span<const std::size_t> pos, bool) override {
    validate_score_request(ids, pos, std::nullopt);
    ScoreResult r;
    for (auto p : pos) r.correct.push_back(ids[p] == ids[p - 1]);
    return r;
  }
};

}  // namespace

TEST_CASE("repeat-previous-token example") {
  RepeatPrevious b;
  CHECK(b.score(std::vector<TokenId>{1, 5, 5, 5}, std::vector<std::size_t>{2, 3}, false).correct ==
        std::vector<std::uint8_t>{1, 1});
  CHECK_THROWS_AS(b.score(std::vector<TokenId>{1, 5, 6}, std::vector<std::size_t>{0}, false), std::invalid_argument);

  // The induction oracle only sees the repeat at position 3: at position 2
  // the one-token suffix [5] has not occurred before.
  OracleBackend o(induction(64, 0.0, 1));
  CHECK(score_all(o, {1, 5, 5, 5}, {2, 3}) == std::vector<std::uint8_t>{0, 1});
  CHECK_THROWS_AS(o.score(std::vector<TokenId>{1, 5, 6}, std::vector<std::size_t>{0}, false), std::invalid_argument);
}

TEST_CASE("suffix-match oracle agrees with brute force") {
  SplitMix64 rng(11);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t n = 20 + uniform_index(rng, 60);
    const std::uint64_t alphabet = 2 + uniform_index(rng, 3);
    std::vector<TokenId> ids(n);
    for (auto& t : ids) t = static_cast<TokenId>(3 + uniform_index(rng, alphabet));
    const std::size_t w = 1 + uniform_index(rng, 30);
    const std::size_t m = 1 + uniform_index(rng, 4);
    std::vector<std::size_t> positions;
    for (std::size_t i = 1; i < n; ++i)
      if (uniform_index(rng, 3) == 0) positions.push_back(i);
    if (positions.empty()) positions.push_back(n - 1);

    OracleBackend b(induction(w, 0.0, m));
    const auto got = score_all(b, ids, positions);
    for (std::size_t k = 0; k < positions.size(); ++k) {
      const std::size_t i = positions[k];
      const Naive nv = naive_match(ids, i, w, m);
      const std::uint8_t want = nv.found && nv.predicted == ids[i] ? 1 : 0;
      REQUIRE_MESSAGE(got[k] == want, "trial " << trial << " position " << i);
    }
    // Set semantics: scoring one position alone gives the same flag.
    const std::size_t pick = positions[positions.size() / 2];
    CHECK(score_all(b, ids, {pick})[0] == got[positions.size() / 2]);
  }
}

TEST_CASE("copy accuracy is exactly 1 iff |S| + 1 <= w") {
  SplitMix64 rng(3);
  const std::size_t w = 40;
  for (std::size_t s : {20u, 38u, 39u, 40u, 41u, 60u}) {
    std::vector<TokenId> seq(s);
    for (auto& t : seq) t = static_cast<TokenId>(3 + uniform_index(rng, 30000));
    std::vector<TokenId> ids = {kOracleBos};
    ids.insert(ids.end(), seq.begin(), seq.end());
    ids.push_back(kOracleBos);
    ids.insert(ids.end(), seq.begin(), seq.end());
    ids.push_back(kOracleEos);
    std::vector<std::size_t> positions;
    for (std::size_t i = 2 + s + s / 2; i <= 1 + 2 * s; ++i) positions.push_back(i);
    OracleBackend b(induction(w, 0.0, 8));
    const auto got = score_all(b, ids, positions);
    const bool all = std::all_of(got.begin(), got.end(), [](auto c) { return c == 1; });
    const bool none = std::all_of(got.begin(), got.end(), [](auto c) { return c == 0; });
    if (s + 1 <= w) {
      CHECK_MESSAGE(all, "s=" << s);
    } else {
      CHECK_MESSAGE(none, "s=" << s);
    }
  }
}

TEST_CASE("decay recall probability") {
  OracleSpec s;
  s.kind = OracleKind::decay;
  s.window_lo = 100;
  s.window_hi = 300;
  s.lm_acc = 0.2;
  OracleBackend b(s);
  CHECK(b.recall_probability(1) == 1.0);
  CHECK(b.recall_probability(100) == 1.0);
  CHECK(b.recall_probability(200) == doctest::Approx(0.6).epsilon(1e-15));
  CHECK(b.recall_probability(300) == 0.2);
  CHECK(b.recall_probability(5000) == 0.2);
}

TEST_CASE("decay oracle honours matches at the ramp rate") {
  // Copy instances at distance d = |S| + 1 = 200, midway on a 100..300 ramp.
  OracleSpec s;
  s.kind = OracleKind::decay;
  s.window_lo = 100;
  s.window_hi = 300;
  s.lm_acc = 0.2;
  OracleBackend b(s);
  SplitMix64 rng(17);
  std::size_t hits = 0, total = 0;
  for (int rep = 0; rep < 40; ++rep) {
    std::vector<TokenId> seq(199);
    for (auto& t : seq) t = static_cast<TokenId>(3 + uniform_index(rng, 30000));
    std::vector<TokenId> ids = {kOracleBos};
    ids.insert(ids.end(), seq.begin(), seq.end());
    ids.push_back(kOracleBos);
    ids.insert(ids.end(), seq.begin(), seq.end());
    std::vector<std::size_t> positions;
    for (std::size_t i = 201 + 8; i < ids.size(); ++i) positions.push_back(i);
    for (auto c : b.score(ids, positions, false).correct) hits += c;
    total += positions.size();
  }
  const double rate = static_cast<double>(hits) / static_cast<double>(total);
  CHECK(std::fabs(rate - 0.6) < 0.02);  // ~7600 draws, sd ~ 0.006
}

TEST_CASE("pure_lm accuracy") {
  OracleSpec s;
  s.kind = OracleKind::pure_lm;
  SplitMix64 rng(23);
  std::vector<TokenId> ids(10001);
  for (auto& t : ids) t = static_cast<TokenId>(3 + uniform_index(rng, 30000));
  std::vector<std::size_t> positions;
  for (std::size_t i = 1; i < ids.size(); ++i) positions.push_back(i);
  for (double p : {0.0, 1.0, 0.3}) {
    s.lm_acc = p;
    OracleBackend b(s);
    const auto c = b.score(ids, positions, false).correct;
    const double acc = static_cast<double>(std::count(c.begin(), c.end(), 1)) / static_cast<double>(c.size());
    if (p == 0.3) {
      CHECK(std::fabs(acc - 0.3) < 0.02);
    } else {
      CHECK(acc == p);
    }
  }
}

TEST_CASE("coins are deterministic and seed-dependent") {
  OracleSpec s;
  s.kind = OracleKind::pure_lm;
  s.lm_acc = 0.5;
  std::vector<TokenId> ids(300, 7);
  for (std::size_t i = 0; i < ids.size(); ++i) ids[i] = static_cast<TokenId>(3 + (i * 7919) % 251);
  std::vector<std::size_t> positions;
  for (std::size_t i = 1; i < ids.size(); ++i) positions.push_back(i);
  OracleBackend a(s), a2(s);
  s.seed = 99;
  OracleBackend b(s);
  CHECK(a.score(ids, positions, false).correct == a2.score(ids, positions, false).correct);
  CHECK(a.score(ids, positions, false).correct != b.score(ids, positions, false).correct);
}

TEST_CASE("logprob emission") {
  OracleSpec s = induction(64, 0.3, 2);
  s.emit_logprob = true;
  OracleBackend b(s);
  CHECK(b.info().supports_logprob);
  const std::vector<TokenId> ids = {1, 5, 6, 7, 8, 1, 5, 6, 7, 8, 2};
  const ScoreResult r = b.score(ids, std::vector<std::size_t>{2, 8}, true);
  REQUIRE(r.logprob);
  CHECK(r.logprob->at(0) == doctest::Approx(std::log(0.3)));  // no match yet
  CHECK(r.logprob->at(1) == 0.0);                              // recalled, right
  CHECK_FALSE(b.score(ids, std::vector<std::size_t>{8}, false).logprob);
}

TEST_CASE("spec parsing") {
  const OracleSpec a = parse_oracle_spec("induction:w=512,p=0.3,m=8");
  CHECK(a.kind == OracleKind::induction);
  CHECK(a.window == 512);
  CHECK(a.lm_acc == 0.3);
  CHECK(a.min_match == 8);
  const OracleSpec d = parse_oracle_spec("decay:w1=256,w2=1024,p=0.3,seed=5,logprob=1");
  CHECK(d.window_lo == 256);
  CHECK(d.window_hi == 1024);
  CHECK(d.seed == 5);
  CHECK(d.emit_logprob);
  CHECK(parse_oracle_spec(to_string(d)).window_hi == 1024);
  CHECK(parse_oracle_spec("pure_lm:p=0.3").kind == OracleKind::pure_lm);
  CHECK_THROWS_AS(parse_oracle_spec("decay:w1=5,w2=5"), ConfigError);
  CHECK_THROWS_AS(parse_oracle_spec("induction:p=1.5"), ConfigError);
  CHECK_THROWS_AS(parse_oracle_spec("induction:m=0"), ConfigError);
  CHECK_THROWS_AS(parse_oracle_spec("bogus:p=0.1"), ConfigError);
  CHECK_THROWS_AS(parse_oracle_spec("induction:q=1"), ConfigError);
}

TEST_CASE("hello descriptor") {
  OracleSpec s;
  s.kind = OracleKind::pure_lm;
  OracleBackend b(s);
  const BackendInfo& info = b.info();
  CHECK(info.name == "pure_lm");
  CHECK_FALSE(info.max_context);
  CHECK(info.bos_id == 1u);
  CHECK(info.eos_id == 2u);
  CHECK_FALSE(info.supports_logprob);
  CHECK(b.tokenize("").empty());
  CHECK(b.tokenize("A") == std::vector<TokenId>{'A' + 3});
}
