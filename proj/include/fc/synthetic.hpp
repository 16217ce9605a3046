#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>

#include "fc/backend.hpp"

namespace fc {

// In-process backends with analytically known memory behaviour.
//
// All three share a byte-level tokenizer (id = byte + 3, bos = 1, eos = 2) and
// a counter-based coin: the outcome at position i is a deterministic hash of
// (seed, i, the min_match tokens preceding i). Copy and LM instances have the
// same tokens in front of every scored position, so wherever an oracle ignores
// long-range context the two instances flip the same coin.

enum class OracleKind { induction, decay, pure_lm };

struct OracleSpec {
  OracleKind kind = OracleKind::induction;
  std::size_t window = 512;      // induction: max match distance
  std::size_t window_lo = 256;   // decay: full recall up to this distance
  std::size_t window_hi = 1024;  // decay: recall equals lm_acc from this distance
  double lm_acc = 0.3;
  std::size_t min_match = 8;
  std::uint64_t seed = 0;
  bool emit_logprob = false;
};

/// Parses "induction:w=512,p=0.3,m=8", "decay:w1=256,w2=1024,p=0.3",
/// "pure_lm:p=0.3". Optional keys: seed, logprob (0/1). Throws ConfigError.
OracleSpec parse_oracle_spec(std::string_view text);
std::string to_string(const OracleSpec& spec);
void validate(const OracleSpec& spec);

inline constexpr TokenId kOracleBos = 1;
inline constexpr TokenId kOracleEos = 2;
inline constexpr TokenId kOracleByteOffset = 3;
inline constexpr std::size_t kOracleVocab = 256 + kOracleByteOffset;

struct SuffixMatch {
  std::size_t distance = 0;  // i - 1 - j, where j ends the earlier occurrence
  std::size_t length = 0;
  TokenId predicted = 0;     // ids[j + 1]
};

/// Copy-style recall with matches of length >= min_match ending within
/// `window` tokens of the scored position; the longest match wins, nearest on
/// ties.
class OracleBackend : public Backend {
 public:
  explicit OracleBackend(OracleSpec spec);

  BackendInfo hello() override;
  std::vector<TokenId> tokenize(std::string_view text) override;
  ScoreResult score(std::span<const TokenId> ids, std::span<const std::size_t> positions,
                    bool want_logprob) override;

  const OracleSpec& spec() const { return spec_; }

  /// Probability that a match at `distance` is acted on.
  double recall_probability(std::size_t distance) const;

 private:
  std::size_t search_window() const;
  double coin(std::span<const TokenId> ids, std::size_t position) const;

  OracleSpec spec_;
};

std::unique_ptr<Backend> induction_oracle(OracleSpec spec);
std::unique_ptr<Backend> decay_oracle(OracleSpec spec);
std::unique_ptr<Backend> pure_lm(OracleSpec spec);
std::unique_ptr<Backend> make_oracle(const OracleSpec& spec);

}  // namespace fc
