#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "fc/backend.hpp"
#include "fc/rng.hpp"

namespace fc {

struct Document {
  std::string id;
  std::string text;
};

struct Corpus {
  std::vector<Document> documents;
  std::string pool_label;
};

/// Reads a manifest:
///   {"pool_label": "...",
///    "documents": [{"id": "...", "path": "...", "format": "txt"|"jsonl", "text_field": "text"}]}
/// Relative paths resolve against the manifest's directory. A jsonl entry
/// yields one document per record, with ids "<id>:<record index>".
Corpus load_corpus(const std::filesystem::path& manifest);

/// Checks the Corpus invariants (non-empty, unique ids, non-empty texts).
void validate(const Corpus& corpus);

struct DocOffset {
  std::string doc_id;
  std::size_t start = 0;
};

/// Concatenated per-document tokenizations; immutable once built.
struct TokenPool {
  std::vector<TokenId> ids;
  std::vector<DocOffset> doc_offsets;
  std::string tokenizer_fingerprint;
  std::string label;

  std::size_t size() const { return ids.size(); }
};

struct Span {
  std::size_t start = 0;
  std::size_t length = 0;

  std::size_t end() const { return start + length; }
  bool overlaps(const Span& other) const { return start < other.end() && other.start < end(); }
  friend bool operator==(const Span&, const Span&) = default;
};

/// Tokenizes every document on its own and concatenates in corpus order.
TokenPool build_token_pool(const Corpus& corpus, Backend& backend);

/// Uniform random ids in [0, vocab), skipping `reserved` (delimiters).
TokenPool random_token_pool(std::size_t count, std::uint32_t vocab, std::uint64_t seed,
                            std::span<const TokenId> reserved);

struct SampledSpans {
  std::vector<TokenId> copy;
  std::vector<TokenId> irrelevant;
  Span copy_span;
  Span irrelevant_span;
};

/// Draws the copy target S uniformly among starts that leave room for a
/// disjoint irrelevant span, then I uniformly among the disjoint starts.
/// Throws DataError("pool exhausted") when s_len + i_len > pool size.
SampledSpans sample_copy_and_irrelevant(const TokenPool& pool, std::size_t s_len, std::size_t i_len,
                                        SplitMix64& rng);

/// Uniform contiguous span of `length` tokens.
Span sample_span(const TokenPool& pool, std::size_t length, SplitMix64& rng);

/// Binary cache: "FCPOOL1", u32 LE fingerprint length, fingerprint bytes,
/// u64 LE count, then count u32 LE token ids.
void save_pool(const TokenPool& pool, const std::filesystem::path& path);
TokenPool load_pool(const std::filesystem::path& path);

}  // namespace fc
