#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fc/backend.hpp"
#include "fc/corpus.hpp"
#include "json.hpp"

namespace fc {

enum class TaskKind { copy, lm };

const char* to_string(TaskKind kind);

struct InstanceMeta {
  std::size_t test_length = 0;  // 0: the instance's own length
  std::size_t repeat_index = 0;
  std::uint64_t seed = 0;
  Span copy_span;
  std::optional<Span> irrelevant_span;
};

/// One scored sequence: [bos] S [bos] S [eos] (copy) or [bos] I [bos] S [eos] (lm).
struct TaskInstance {
  TaskKind kind = TaskKind::copy;
  std::vector<TokenId> ids;
  std::vector<std::size_t> scored_positions;
  std::size_t test_length = 0;
  std::size_t s_len = 0;
  std::size_t repeat_index = 0;
  std::uint64_t seed = 0;
  Span copy_span;
  std::optional<Span> irrelevant_span;
};

/// Grid lengths floor(max_len * j / points) for j = 1..points.
std::vector<std::size_t> plan_grid(std::size_t max_len, std::size_t points);

/// Largest |S| whose instance (2|S| + 3 tokens) fits in test_length.
std::size_t target_len_for(std::size_t test_length);

/// The last ceil(s_len/2) positions of the second copy of S.
std::vector<std::size_t> scored_positions_for(std::size_t s_len);

TaskInstance build_copy_instance(std::span<const TokenId> target, TokenId bos, TokenId eos,
                                 const InstanceMeta& meta = {});
TaskInstance build_lm_instance(std::span<const TokenId> irrelevant, std::span<const TokenId> target,
                               TokenId bos, TokenId eos, const InstanceMeta& meta = {});

nlohmann::json instance_to_json(const TaskInstance& instance);

}  // namespace fc
