#include "fc/synthetic.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <cmath>
#include <vector>

#include "fc/error.hpp"
#include "fc/rng.hpp"

namespace fc {

namespace {

constexpr double kLogprobFloor = -27.631021115928547;  // ln(1e-12)

const char* kind_name(OracleKind kind) {
  switch (kind) {
    case OracleKind::induction: return "induction";
    case OracleKind::decay: return "decay";
    case OracleKind::pure_lm: return "pure_lm";
  }
  return "?";
}

std::size_t parse_count(std::string_view key, std::string_view value) {
  std::size_t out = 0;
  auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
  if (ec != std::errc() || ptr != value.data() + value.size())
    throw ConfigError("oracle parameter " + std::string(key) + " expects an integer, got '" + std::string(value) + "'");
  return out;
}

double parse_real(std::string_view key, std::string_view value) {
  try {
    std::size_t used = 0;
    const double out = std::stod(std::string(value), &used);
    if (used == value.size()) return out;
  } catch (const std::exception&) {
  }
  throw ConfigError("oracle parameter " + std::string(key) + " expects a number, got '" + std::string(value) + "'");
}

}  // namespace

OracleSpec parse_oracle_spec(std::string_view text) {
  const auto colon = text.find(':');
  const std::string_view kind = text.substr(0, colon);
  OracleSpec spec;
  if (kind == "induction") {
    spec.kind = OracleKind::induction;
  } else if (kind == "decay") {
    spec.kind = OracleKind::decay;
  } else if (kind == "pure_lm") {
    spec.kind = OracleKind::pure_lm;
  } else {
    throw ConfigError("unknown oracle kind '" + std::string(kind) + "' (induction, decay, pure_lm)");
  }
  std::string_view rest = colon == std::string_view::npos ? std::string_view() : text.substr(colon + 1);
  while (!rest.empty()) {
    const auto comma = rest.find(',');
    const std::string_view item = rest.substr(0, comma);
    rest = comma == std::string_view::npos ? std::string_view() : rest.substr(comma + 1);
    const auto eq = item.find('=');
    if (eq == std::string_view::npos) throw ConfigError("oracle parameter '" + std::string(item) + "' lacks '='");
    const std::string_view key = item.substr(0, eq);
    const std::string_view value = item.substr(eq + 1);
    if (key == "w") {
      spec.window = parse_count(key, value);
    } else if (key == "w1") {
      spec.window_lo = parse_count(key, value);
    } else if (key == "w2") {
      spec.window_hi = parse_count(key, value);
    } else if (key == "p") {
      spec.lm_acc = parse_real(key, value);
    } else if (key == "m") {
      spec.min_match = parse_count(key, value);
    } else if (key == "seed") {
      spec.seed = parse_count(key, value);
    } else if (key == "logprob") {
      spec.emit_logprob = parse_count(key, value) != 0;
    } else {
      throw ConfigError("unknown oracle parameter '" + std::string(key) + "'");
    }
  }
  validate(spec);
  return spec;
}

std::string to_string(const OracleSpec& spec) {
  char p[32];
  std::snprintf(p, sizeof p, "%.9g", spec.lm_acc);
  std::string out = kind_name(spec.kind);
  switch (spec.kind) {
    case OracleKind::induction:
      out += ":w=" + std::to_string(spec.window) + ",p=" + p + ",m=" + std::to_string(spec.min_match);
      break;
    case OracleKind::decay:
      out += ":w1=" + std::to_string(spec.window_lo) + ",w2=" + std::to_string(spec.window_hi) + ",p=" + p +
             ",m=" + std::to_string(spec.min_match);
      break;
    case OracleKind::pure_lm:
      out += std::string(":p=") + p + ",m=" + std::to_string(spec.min_match);
      break;
  }
  out += ",seed=" + std::to_string(spec.seed);
  if (spec.emit_logprob) out += ",logprob=1";
  return out;
}

void validate(const OracleSpec& spec) {
  if (!(spec.lm_acc >= 0.0 && spec.lm_acc <= 1.0)) throw ConfigError("oracle p must lie in [0, 1]");
  if (spec.min_match < 1) throw ConfigError("oracle m must be >= 1");
  if (spec.kind == OracleKind::induction && spec.window < 1) throw ConfigError("oracle w must be >= 1");
  if (spec.kind == OracleKind::decay && !(spec.window_lo < spec.window_hi))
    throw ConfigError("oracle needs w1 < w2");
}

OracleBackend::OracleBackend(OracleSpec spec) : spec_(spec) { validate(spec_); }

BackendInfo OracleBackend::hello() {
  BackendInfo info;
  info.name = kind_name(spec_.kind);
  info.max_context = std::nullopt;
  info.bos_id = kOracleBos;
  info.eos_id = kOracleEos;
  info.supports_logprob = spec_.emit_logprob;
  info.supports_concurrent = true;
  return info;
}

std::vector<TokenId> OracleBackend::tokenize(std::string_view text) {
  std::vector<TokenId> ids;
  ids.reserve(text.size());
  for (unsigned char c : text) ids.push_back(static_cast<TokenId>(c) + kOracleByteOffset);
  return ids;
}

std::size_t OracleBackend::search_window() const {
  switch (spec_.kind) {
    case OracleKind::induction: return spec_.window;
    case OracleKind::decay: return spec_.window_hi;
    case OracleKind::pure_lm: return 0;
  }
  return 0;
}

double OracleBackend::recall_probability(std::size_t distance) const {
  if (spec_.kind != OracleKind::decay) return 1.0;
  if (distance <= spec_.window_lo) return 1.0;
  if (distance >= spec_.window_hi) return spec_.lm_acc;
  const double t = static_cast<double>(distance - spec_.window_lo) /
                   static_cast<double>(spec_.window_hi - spec_.window_lo);
  return 1.0 - (1.0 - spec_.lm_acc) * t;
}

double OracleBackend::coin(std::span<const TokenId> ids, std::size_t position) const {
  const std::size_t from = position > spec_.min_match ? position - spec_.min_match : 0;
  const std::uint64_t context = digest_tokens(ids.subspan(from, position - from));
  return to_unit_interval(derive_seed(spec_.seed, position, context));
}

ScoreResult OracleBackend::score(std::span<const TokenId> ids, std::span<const std::size_t> positions,
                                 bool want_logprob) {
  validate_score_request(ids, positions, std::nullopt);
  ScoreResult result;
  result.correct.reserve(positions.size());
  const bool emit = want_logprob && spec_.emit_logprob;
  if (emit) result.logprob.emplace().reserve(positions.size());
  const double fallback_logprob = spec_.lm_acc > 0.0 ? std::max(std::log(spec_.lm_acc), kLogprobFloor)
                                                     : kLogprobFloor;

  // suffix[d] = length of the common suffix of ids[..t] and ids[..t-d], rolled
  // forward one t at a time.
  const std::size_t window = search_window();
  std::vector<std::size_t> suffix(window + 1, 0);
  std::size_t t_done = 0;  // suffix reflects ids[..t_done - 1]; 0 = nothing yet

  for (std::size_t position : positions) {
    const std::size_t last = position - 1;
    for (std::size_t t = t_done; t <= last && window > 0; ++t) {
      const std::size_t reach = std::min(window, t);
      for (std::size_t d = 1; d <= reach; ++d) suffix[d] = ids[t] == ids[t - d] ? suffix[d] + 1 : 0;
    }
    t_done = last + 1;

    SuffixMatch best;
    const std::size_t reach = std::min(window, last);
    for (std::size_t d = 1; d <= reach; ++d) {
      if (suffix[d] > best.length) best = {d, suffix[d], ids[position - d]};
    }

    const double u = coin(ids, position);
    bool correct = false;
    bool recalled = false;
    if (best.length >= spec_.min_match) {
      recalled = u < recall_probability(best.distance);
      correct = recalled && best.predicted == ids[position];
    } else {
      correct = u < spec_.lm_acc;
    }
    result.correct.push_back(correct ? 1 : 0);
    if (emit) result.logprob->push_back(recalled && correct ? 0.0 : fallback_logprob);
  }
  return result;
}

std::unique_ptr<Backend> induction_oracle(OracleSpec spec) {
  if (spec.kind != OracleKind::induction) throw ConfigError("induction_oracle needs kind=induction");
  return std::make_unique<OracleBackend>(spec);
}

std::unique_ptr<Backend> decay_oracle(OracleSpec spec) {
  if (spec.kind != OracleKind::decay) throw ConfigError("decay_oracle needs kind=decay");
  return std::make_unique<OracleBackend>(spec);
}

std::unique_ptr<Backend> pure_lm(OracleSpec spec) {
  if (spec.kind != OracleKind::pure_lm) throw ConfigError("pure_lm needs kind=pure_lm");
  return std::make_unique<OracleBackend>(spec);
}

std::unique_ptr<Backend> make_oracle(const OracleSpec& spec) { return std::make_unique<OracleBackend>(spec); }

}  // namespace fc
