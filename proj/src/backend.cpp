#include "fc/backend.hpp"

#include <cmath>
#include <stdexcept>

#include "fc/error.hpp"

namespace fc {

std::string BackendInfo::tokenizer_fingerprint() const {
  return version.empty() ? name : name + "/" + version;
}

const BackendInfo& Backend::info() {
  std::lock_guard lock(info_mutex_);
  if (!info_) {
    BackendInfo got = hello();
    if (got.name.empty()) throw ProtocolError("backend descriptor has an empty name", "");
    if (got.max_context && *got.max_context == 0)
      throw ProtocolError("backend descriptor has max_context 0", "");
    info_ = std::move(got);
  }
  return *info_;
}

void validate_score_request(std::span<const TokenId> ids, std::span<const std::size_t> positions,
                            const std::optional<std::size_t>& max_context) {
  std::size_t previous = 0;
  for (std::size_t p : positions) {
    if (p < 1 || p >= ids.size())
      throw std::invalid_argument("score position " + std::to_string(p) +
                                  " outside [1, " + std::to_string(ids.size()) + ")");
    if (p <= previous && previous != 0)
      throw std::invalid_argument("score positions must be strictly increasing");
    previous = p;
  }
  if (max_context && ids.size() > *max_context)
    throw BackendError("context overflow: " + std::to_string(ids.size()) + " tokens > max_context " +
                       std::to_string(*max_context));
}

void validate_score_result(const ScoreResult& result, std::size_t n_positions, bool want_logprob,
                           bool supports_logprob) {
  if (result.correct.size() != n_positions)
    throw ProtocolError("score reply has " + std::to_string(result.correct.size()) +
                            " flags for " + std::to_string(n_positions) + " positions",
                        "");
  for (auto flag : result.correct)
    if (flag > 1) throw ProtocolError("score reply flag is not 0/1", "");
  const bool expect_logprob = want_logprob && supports_logprob;
  if (expect_logprob != result.logprob.has_value())
    throw ProtocolError(expect_logprob ? "score reply lacks requested logprob"
                                       : "score reply carries unrequested logprob",
                        "");
  if (result.logprob) {
    if (result.logprob->size() != n_positions)
      throw ProtocolError("score reply logprob length mismatch", "");
    for (double lp : *result.logprob)
      if (!(lp <= 0.0) || std::isinf(lp))
        throw ProtocolError("score reply logprob must be finite and <= 0", "");
  }
}

namespace {

bool is_continuation(unsigned char c) { return (c & 0xC0) == 0x80; }

std::size_t chunk_end(std::string_view text, std::size_t begin, std::size_t chunk_bytes) {
  if (text.size() - begin <= chunk_bytes) return text.size();
  std::size_t end = begin + chunk_bytes;
  // Prefer a whitespace boundary in the tail of the chunk.
  const std::size_t floor = end - std::min<std::size_t>(chunk_bytes / 16, 4096);
  for (std::size_t k = end; k > floor && k > begin; --k) {
    const char c = text[k - 1];
    if (c == ' ' || c == '\n' || c == '\t' || c == '\r') return k;
  }
  while (end > begin + 1 && is_continuation(static_cast<unsigned char>(text[end]))) --end;
  return end;
}

}  // namespace

std::vector<TokenId> tokenize_chunked(Backend& backend, std::string_view text,
                                      std::size_t chunk_bytes) {
  if (chunk_bytes == 0) throw std::invalid_argument("tokenize chunk size must be positive");
  std::vector<TokenId> out;
  std::size_t begin = 0;
  while (begin < text.size()) {
    const std::size_t end = chunk_end(text, begin, chunk_bytes);
    auto ids = backend.tokenize(text.substr(begin, end - begin));
    out.insert(out.end(), ids.begin(), ids.end());
    begin = end;
  }
  return out;
}

}  // namespace fc
