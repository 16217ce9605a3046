#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "fc/backend.hpp"
#include "fc/corpus.hpp"
#include "fc/taskgen.hpp"

namespace fc {

struct SweepConfig {
  std::size_t max_len = 0;
  std::size_t points = 32;
  std::size_t repeats = 10;
  std::uint64_t master_seed = 0;
  bool collect_logprob = false;
  std::string copy_pool;
  std::string irrelevant_pool;
  std::optional<TokenId> separator;  // stands in for an absent bos/eos
  std::size_t jobs = 1;              // execution only; never affects results
};

struct AccuracySample {
  std::size_t grid_length = 0;
  TaskKind kind = TaskKind::copy;
  std::size_t repeat_index = 0;
  std::size_t n_scored = 0;
  std::size_t n_correct = 0;
  double accuracy = 0.0;
  std::optional<double> mean_nll;
};

struct CurvePoint {
  std::size_t grid_length = 0;
  std::size_t s_len = 0;
  std::size_t n_scored = 0;
  bool failed = false;
  std::string error;
  double copy_mean = 0.0;
  double copy_std = 0.0;
  double lm_mean = 0.0;
  double lm_std = 0.0;
  std::vector<double> copy_samples;
  std::vector<double> lm_samples;
  std::vector<double> lm_nll;  // per repeat; empty unless logprobs were collected
  std::optional<double> lm_perplexity;
};

struct ForgettingCurve {
  BackendInfo backend;
  SweepConfig config;
  std::vector<CurvePoint> points;  // sorted by grid_length
};

struct SweepPools {
  const TokenPool* copy = nullptr;
  const TokenPool* irrelevant = nullptr;  // null: draw I from the copy pool, disjoint from S
};

struct SweepHooks {
  /// Called once per (grid, repeat) with the paired instances, serialized.
  std::function<void(const TaskInstance& copy, const TaskInstance& lm)> on_pair;
  /// Receives "len=<l> rep=<r> kind=<copy|lm> acc=<a>" lines.
  std::ostream* progress = nullptr;
};

struct Delimiters {
  TokenId bos = 0;
  TokenId eos = 0;
};

/// Backend bos/eos, with the separator standing in for either when absent.
Delimiters resolve_delimiters(const BackendInfo& info, const std::optional<TokenId>& separator);

/// Seed of the (grid, repeat) draw; depends only on the indices.
std::uint64_t instance_seed(std::uint64_t master_seed, std::size_t grid_index, std::size_t repeat);

/// Builds the copy/LM pair for one grid cell.
std::pair<TaskInstance, TaskInstance> make_instance_pair(const SweepConfig& config, const SweepPools& pools,
                                                         const Delimiters& delimiters, std::size_t grid_index,
                                                         std::size_t grid_length, std::size_t repeat);

ForgettingCurve run_sweep(const SweepConfig& config, Backend& backend, const SweepPools& pools,
                          const SweepHooks& hooks = {});

/// Mean of the 0/1 flags; throws std::invalid_argument when empty.
double accuracy_of(const ScoreResult& result);

/// (grid_length, exp(mean over repeats of LM mean NLL)) for every valid point.
std::vector<std::pair<std::size_t, double>> perplexity_series(const ForgettingCurve& curve);

double sample_mean(const std::vector<double>& xs);
/// Sample standard deviation (divisor n - 1); 0 for fewer than two values.
double sample_std(const std::vector<double>& xs);

}  // namespace fc
