#pragma once

#include <cstddef>
#include <cstdint>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace fc {

using TokenId = std::uint32_t;

/// Static descriptor returned by the handshake.
struct BackendInfo {
  std::string name;
  std::string version;
  std::optional<std::size_t> max_context;  // nullopt: unbounded
  std::optional<TokenId> bos_id;
  std::optional<TokenId> eos_id;
  bool supports_logprob = false;
  bool supports_concurrent = false;

  /// "name" or "name/version"; stamped on token pools built through this backend.
  std::string tokenizer_fingerprint() const;
};

struct ScoreResult {
  std::vector<std::uint8_t> correct;  // 0/1 per requested position
  std::optional<std::vector<double>> logprob;
};

/// A language model seen through the harness: it tokenizes text and scores
/// teacher-forced greedy predictions at requested positions.
class Backend {
 public:
  virtual ~Backend() = default;

  /// Cached handshake result. Thread-safe.
  const BackendInfo& info();

  virtual BackendInfo hello() = 0;
  virtual std::vector<TokenId> tokenize(std::string_view text) = 0;

  /// correct[j] is 1 iff argmax P(. | ids[0..positions[j]-1]) == ids[positions[j]].
  virtual ScoreResult score(std::span<const TokenId> ids, std::span<const std::size_t> positions,
                            bool want_logprob) = 0;

 private:
  std::mutex info_mutex_;
  std::optional<BackendInfo> info_;
};

/// Throws std::invalid_argument unless positions are strictly increasing with
/// 1 <= p < ids.size(); throws BackendError on context overflow.
void validate_score_request(std::span<const TokenId> ids, std::span<const std::size_t> positions,
                            const std::optional<std::size_t>& max_context);

/// Throws ProtocolError when a result breaks the ScoreResult invariants.
void validate_score_result(const ScoreResult& result, std::size_t n_positions, bool want_logprob,
                           bool supports_logprob);

inline constexpr std::size_t kTokenizeChunkBytes = std::size_t{1} << 20;

/// Tokenizes in requests of at most chunk_bytes, split on UTF-8 boundaries
/// (preferring whitespace), and concatenates the ids.
std::vector<TokenId> tokenize_chunked(Backend& backend, std::string_view text,
                                      std::size_t chunk_bytes = kTokenizeChunkBytes);

}  // namespace fc
