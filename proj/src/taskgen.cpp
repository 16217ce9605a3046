#include "fc/taskgen.hpp"

#include <stdexcept>

#include "fc/error.hpp"

namespace fc {

using nlohmann::json;

const char* to_string(TaskKind kind) { return kind == TaskKind::copy ? "copy" : "lm"; }

std::vector<std::size_t> plan_grid(std::size_t max_len, std::size_t points) {
  if (points < 1) throw ConfigError("grid needs at least one point");
  if (max_len < points) throw ConfigError("max length " + std::to_string(max_len) + " is shorter than the point count");
  if (max_len / points < 7)
    throw ConfigError("grid too fine: smallest length " + std::to_string(max_len / points) +
                      " cannot hold a 2-token copy target (needs >= 7)");
  std::vector<std::size_t> grid;
  grid.reserve(points);
  for (std::size_t j = 1; j <= points; ++j) grid.push_back(max_len * j / points);
  return grid;
}

std::size_t target_len_for(std::size_t test_length) {
  if (test_length < 7) throw std::invalid_argument("test length must be at least 7");
  return (test_length - 3) / 2;
}

std::vector<std::size_t> scored_positions_for(std::size_t s_len) {
  std::vector<std::size_t> out;
  out.reserve(s_len - s_len / 2);
  for (std::size_t p = 2 + s_len + s_len / 2; p <= 1 + 2 * s_len; ++p) out.push_back(p);
  return out;
}

namespace {

TaskInstance assemble(TaskKind kind, std::span<const TokenId> first, std::span<const TokenId> target,
                      TokenId bos, TokenId eos, const InstanceMeta& meta) {
  if (target.size() < 2) throw std::invalid_argument("copy target needs at least 2 tokens");
  TaskInstance inst;
  inst.kind = kind;
  inst.s_len = target.size();
  inst.ids.reserve(2 * target.size() + 3);
  inst.ids.push_back(bos);
  inst.ids.insert(inst.ids.end(), first.begin(), first.end());
  inst.ids.push_back(bos);
  inst.ids.insert(inst.ids.end(), target.begin(), target.end());
  inst.ids.push_back(eos);
  inst.scored_positions = scored_positions_for(inst.s_len);
  inst.test_length = meta.test_length == 0 ? inst.ids.size() : meta.test_length;
  if (inst.ids.size() > inst.test_length)
    throw std::invalid_argument("instance of " + std::to_string(inst.ids.size()) + " tokens exceeds test length " +
                                std::to_string(inst.test_length));
  inst.repeat_index = meta.repeat_index;
  inst.seed = meta.seed;
  inst.copy_span = meta.copy_span;
  inst.irrelevant_span = meta.irrelevant_span;
  return inst;
}

json span_json(const Span& s) { return json{{"start", s.start}, {"length", s.length}}; }

}  // namespace

TaskInstance build_copy_instance(std::span<const TokenId> target, TokenId bos, TokenId eos,
                                 const InstanceMeta& meta) {
  TaskInstance inst = assemble(TaskKind::copy, target, target, bos, eos, meta);
  inst.irrelevant_span.reset();
  return inst;
}

TaskInstance build_lm_instance(std::span<const TokenId> irrelevant, std::span<const TokenId> target,
                               TokenId bos, TokenId eos, const InstanceMeta& meta) {
  if (irrelevant.size() != target.size())
    throw std::invalid_argument("irrelevant prefix has " + std::to_string(irrelevant.size()) +
                                " tokens but the copy target has " + std::to_string(target.size()));
  return assemble(TaskKind::lm, irrelevant, target, bos, eos, meta);
}

json instance_to_json(const TaskInstance& inst) {
  json meta{{"test_length", inst.test_length},
            {"s_len", inst.s_len},
            {"repeat_index", inst.repeat_index},
            {"seed", inst.seed},
            {"copy_span", span_json(inst.copy_span)}};
  meta["irrelevant_span"] = inst.irrelevant_span ? span_json(*inst.irrelevant_span) : json(nullptr);
  return json{{"kind", to_string(inst.kind)}, {"ids", inst.ids}, {"scored_positions", inst.scored_positions},
              {"meta", meta}};
}

}  // namespace fc
