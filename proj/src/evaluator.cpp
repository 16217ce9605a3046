#include "fc/evaluator.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <mutex>
#include <ostream>
#include <stdexcept>
#include <thread>

#include "fc/error.hpp"
#include "fc/rng.hpp"

namespace fc {

Delimiters resolve_delimiters(const BackendInfo& info, const std::optional<TokenId>& separator) {
  Delimiters d;
  if (info.bos_id) {
    d.bos = *info.bos_id;
  } else if (separator) {
    d.bos = *separator;
  } else {
    throw ConfigError("backend '" + info.name + "' declares no bos token; pass --separator-token");
  }
  if (info.eos_id) {
    d.eos = *info.eos_id;
  } else if (separator) {
    d.eos = *separator;
  } else {
    throw ConfigError("backend '" + info.name + "' declares no eos token; pass --separator-token");
  }
  return d;
}

std::uint64_t instance_seed(std::uint64_t master_seed, std::size_t grid_index, std::size_t repeat) {
  return derive_seed(master_seed, grid_index, repeat);
}

std::pair<TaskInstance, TaskInstance> make_instance_pair(const SweepConfig& config, const SweepPools& pools,
                                                         const Delimiters& delimiters, std::size_t grid_index,
                                                         std::size_t grid_length, std::size_t repeat) {
  const std::uint64_t seed = instance_seed(config.master_seed, grid_index, repeat);
  SplitMix64 rng(seed);
  const std::size_t s_len = target_len_for(grid_length);

  InstanceMeta meta;
  meta.test_length = grid_length;
  meta.repeat_index = repeat;
  meta.seed = seed;

  std::vector<TokenId> target;
  std::vector<TokenId> irrelevant;
  if (pools.irrelevant == nullptr || pools.irrelevant == pools.copy) {
    SampledSpans spans = sample_copy_and_irrelevant(*pools.copy, s_len, s_len, rng);
    meta.copy_span = spans.copy_span;
    meta.irrelevant_span = spans.irrelevant_span;
    target = std::move(spans.copy);
    irrelevant = std::move(spans.irrelevant);
  } else {
    meta.copy_span = sample_span(*pools.copy, s_len, rng);
    meta.irrelevant_span = sample_span(*pools.irrelevant, s_len, rng);
    const auto& c = pools.copy->ids;
    const auto& i = pools.irrelevant->ids;
    target.assign(c.begin() + static_cast<std::ptrdiff_t>(meta.copy_span.start),
                  c.begin() + static_cast<std::ptrdiff_t>(meta.copy_span.end()));
    irrelevant.assign(i.begin() + static_cast<std::ptrdiff_t>(meta.irrelevant_span->start),
                      i.begin() + static_cast<std::ptrdiff_t>(meta.irrelevant_span->end()));
  }
  TaskInstance copy = build_copy_instance(target, delimiters.bos, delimiters.eos, meta);
  TaskInstance lm = build_lm_instance(irrelevant, target, delimiters.bos, delimiters.eos, meta);
  return {std::move(copy), std::move(lm)};
}

double accuracy_of(const ScoreResult& result) {
  if (result.correct.empty()) throw std::invalid_argument("accuracy of an empty scored set");
  std::size_t hits = 0;
  for (auto c : result.correct) hits += c;
  return static_cast<double>(hits) / static_cast<double>(result.correct.size());
}

double sample_mean(const std::vector<double>& xs) {
  if (xs.empty()) return 0.0;
  double sum = 0.0;
  for (double x : xs) sum += x;
  return sum / static_cast<double>(xs.size());
}

double sample_std(const std::vector<double>& xs) {
  if (xs.size() < 2) return 0.0;
  const double mean = sample_mean(xs);
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  return std::sqrt(ss / static_cast<double>(xs.size() - 1));
}

namespace {

AccuracySample score_instance(Backend& backend, const TaskInstance& inst, bool want_logprob) {
  ScoreResult r = backend.score(inst.ids, inst.scored_positions, want_logprob);
  AccuracySample s;
  s.grid_length = inst.test_length;
  s.kind = inst.kind;
  s.repeat_index = inst.repeat_index;
  s.n_scored = r.correct.size();
  for (auto c : r.correct) s.n_correct += c;
  s.accuracy = accuracy_of(r);
  if (r.logprob) {
    double nll = 0.0;
    for (double lp : *r.logprob) nll -= lp;
    s.mean_nll = nll / static_cast<double>(r.logprob->size());
  }
  return s;
}

struct CellResult {
  bool done = false;
  std::string error;
  AccuracySample copy;
  AccuracySample lm;
};

}  // namespace

ForgettingCurve run_sweep(const SweepConfig& config, Backend& backend, const SweepPools& pools,
                          const SweepHooks& hooks) {
  if (pools.copy == nullptr) throw std::invalid_argument("run_sweep needs a copy pool");
  if (config.repeats < 1) throw ConfigError("repeats must be >= 1");
  const BackendInfo& info = backend.info();
  if (info.max_context && config.max_len > *info.max_context)
    throw ConfigError("max length " + std::to_string(config.max_len) + " exceeds the backend's max_context " +
                      std::to_string(*info.max_context));
  if (config.collect_logprob && !info.supports_logprob)
    throw ConfigError("backend '" + info.name + "' does not support logprob collection");
  const Delimiters delimiters = resolve_delimiters(info, config.separator);
  const std::vector<std::size_t> grid = plan_grid(config.max_len, config.points);

  const std::size_t n_cells = grid.size() * config.repeats;
  std::vector<CellResult> cells(n_cells);
  std::mutex collector;
  std::atomic<std::size_t> next{0};
  std::exception_ptr fatal;

  auto worker = [&] {
    for (;;) {
      const std::size_t cell = next.fetch_add(1);
      if (cell >= n_cells) return;
      const std::size_t g = cell / config.repeats;
      const std::size_t r = cell % config.repeats;
      {
        std::lock_guard lock(collector);
        if (fatal) return;
      }
      try {
        auto [copy, lm] = make_instance_pair(config, pools, delimiters, g, grid[g], r);
        CellResult result;
        try {
          result.copy = score_instance(backend, copy, config.collect_logprob);
          result.lm = score_instance(backend, lm, config.collect_logprob);
        } catch (const BackendError& e) {
          result.error = e.what();
        }
        result.done = true;
        std::lock_guard lock(collector);
        if (hooks.on_pair) hooks.on_pair(copy, lm);
        if (hooks.progress != nullptr) {
          if (result.error.empty()) {
            for (const auto* s : {&result.copy, &result.lm}) {
              char line[128];
              std::snprintf(line, sizeof line, "len=%zu rep=%zu kind=%s acc=%.6f\n", grid[g], r,
                            to_string(s->kind), s->accuracy);
              *hooks.progress << line;
            }
          } else {
            *hooks.progress << "len=" << grid[g] << " rep=" << r << " failed: " << result.error << "\n";
          }
        }
        cells[cell] = std::move(result);
      } catch (...) {
        std::lock_guard lock(collector);
        if (!fatal) fatal = std::current_exception();
        return;
      }
    }
  };

  const std::size_t jobs = info.supports_concurrent ? std::max<std::size_t>(1, config.jobs) : 1;
  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::thread> threads;
    for (std::size_t k = 0; k < std::min(jobs, n_cells); ++k) threads.emplace_back(worker);
    for (auto& t : threads) t.join();
  }
  if (fatal) std::rethrow_exception(fatal);

  ForgettingCurve curve;
  curve.backend = info;
  curve.config = config;
  for (std::size_t g = 0; g < grid.size(); ++g) {
    CurvePoint point;
    point.grid_length = grid[g];
    point.s_len = target_len_for(grid[g]);
    point.n_scored = point.s_len - point.s_len / 2;
    for (std::size_t r = 0; r < config.repeats; ++r) {
      const CellResult& cell = cells[g * config.repeats + r];
      if (!cell.error.empty() && !point.failed) {
        point.failed = true;
        point.error = cell.error;
      }
      if (point.failed) continue;
      point.copy_samples.push_back(cell.copy.accuracy);
      point.lm_samples.push_back(cell.lm.accuracy);
      if (cell.lm.mean_nll) point.lm_nll.push_back(*cell.lm.mean_nll);
    }
    if (point.failed) {
      point.copy_samples.clear();
      point.lm_samples.clear();
      point.lm_nll.clear();
    } else {
      point.copy_mean = sample_mean(point.copy_samples);
      point.copy_std = sample_std(point.copy_samples);
      point.lm_mean = sample_mean(point.lm_samples);
      point.lm_std = sample_std(point.lm_samples);
      if (config.collect_logprob && point.lm_nll.size() == config.repeats)
        point.lm_perplexity = std::exp(sample_mean(point.lm_nll));
    }
    curve.points.push_back(std::move(point));
  }
  return curve;
}

std::vector<std::pair<std::size_t, double>> perplexity_series(const ForgettingCurve& curve) {
  std::vector<std::pair<std::size_t, double>> out;
  for (const auto& p : curve.points) {
    if (p.failed) continue;
    if (p.lm_nll.empty()) throw DataError("curve carries no log-probabilities at length " + std::to_string(p.grid_length));
    out.emplace_back(p.grid_length, std::exp(sample_mean(p.lm_nll)));
  }
  if (out.empty()) throw DataError("curve carries no log-probabilities");
  return out;
}

}  // namespace fc
