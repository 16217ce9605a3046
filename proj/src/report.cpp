#include "fc/report.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <map>
#include <set>

#include "fc/error.hpp"
#include "fc/rng.hpp"

namespace fc {

using nlohmann::json;

double round_sig(double value, int digits) {
  if (!std::isfinite(value) || value == 0.0) return value;
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", digits, value);
  return std::strtod(buf, nullptr);
}

namespace {

json config_json(const SweepConfig& c) {
  json j{{"max_len", c.max_len},
         {"points", c.points},
         {"repeats", c.repeats},
         {"master_seed", c.master_seed},
         {"collect_logprob", c.collect_logprob},
         {"copy_pool", c.copy_pool},
         {"irrelevant_pool", c.irrelevant_pool}};
  j["separator"] = c.separator ? json(*c.separator) : json(nullptr);
  return j;
}

json rounded(const std::vector<double>& xs) {
  json a = json::array();
  for (double x : xs) a.push_back(round_sig(x));
  return a;
}

std::vector<double> reals(const json& j, const char* field) {
  std::vector<double> out;
  if (!j.contains(field)) return out;
  if (!j[field].is_array()) throw DataError(std::string("report field '") + field + "' must be an array");
  for (const auto& v : j[field]) {
    if (!v.is_number()) throw DataError(std::string("report field '") + field + "' must hold numbers");
    out.push_back(v.get<double>());
  }
  return out;
}

template <typename T>
T required(const json& j, const char* field) {
  if (!j.contains(field)) throw DataError(std::string("report lacks field '") + field + "'");
  try {
    return j[field].get<T>();
  } catch (const json::exception&) {
    throw DataError(std::string("report field '") + field + "' has the wrong type");
  }
}

json estimate_json(const LengthEstimate& e) {
  json j{{"length", reported_length(e)},
         {"grid_length", e.length},
         {"censored", e.censored},
         {"indeterminate", e.indeterminate},
         {"display", display_length(e)}};
  j["interpolated"] = e.interpolated ? json(round_sig(*e.interpolated)) : json(nullptr);
  return j;
}

std::string format_sig(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

}  // namespace

std::string config_hash(const SweepConfig& config) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(fnv1a64(config_json(config).dump())));
  return buf;
}

json curve_to_json(const ForgettingCurve& curve) {
  json backend = {{"name", curve.backend.name},
                  {"version", curve.backend.version},
                  {"supports_logprob", curve.backend.supports_logprob},
                  {"supports_concurrent", curve.backend.supports_concurrent}};
  backend["max_context"] = curve.backend.max_context ? json(*curve.backend.max_context) : json("unbounded");
  backend["bos_id"] = curve.backend.bos_id ? json(*curve.backend.bos_id) : json(nullptr);
  backend["eos_id"] = curve.backend.eos_id ? json(*curve.backend.eos_id) : json(nullptr);

  json points = json::array();
  for (const auto& p : curve.points) {
    json jp{{"grid_length", p.grid_length}, {"s_len", p.s_len}, {"n_scored", p.n_scored}};
    if (p.failed) {
      jp["status"] = "failed";
      jp["error"] = p.error;
    } else {
      jp["status"] = "ok";
      jp["copy_mean"] = round_sig(p.copy_mean);
      jp["copy_std"] = round_sig(p.copy_std);
      jp["lm_mean"] = round_sig(p.lm_mean);
      jp["lm_std"] = round_sig(p.lm_std);
      jp["copy_samples"] = rounded(p.copy_samples);
      jp["lm_samples"] = rounded(p.lm_samples);
      if (!p.lm_nll.empty()) jp["lm_nll"] = rounded(p.lm_nll);
      jp["lm_perplexity"] = p.lm_perplexity ? json(round_sig(*p.lm_perplexity)) : json(nullptr);
    }
    points.push_back(std::move(jp));
  }
  return json{{"backend", backend},
              {"config", config_json(curve.config)},
              {"config_hash", config_hash(curve.config)},
              {"aggregation", "mean_of_sample_accuracies"},
              {"spread", "sample_std"},
              {"length_unit", "total_input_tokens"},
              {"points", points}};
}

ForgettingCurve curve_from_json(const json& j) {
  if (!j.is_object()) throw DataError("report 'curve' must be an object");
  ForgettingCurve c;
  const json& b = j.contains("backend") ? j["backend"] : throw DataError("report lacks 'curve.backend'");
  c.backend.name = required<std::string>(b, "name");
  c.backend.version = b.value("version", "");
  if (b.contains("max_context") && b["max_context"].is_number_unsigned())
    c.backend.max_context = b["max_context"].get<std::size_t>();
  if (b.contains("bos_id") && b["bos_id"].is_number_unsigned()) c.backend.bos_id = b["bos_id"].get<TokenId>();
  if (b.contains("eos_id") && b["eos_id"].is_number_unsigned()) c.backend.eos_id = b["eos_id"].get<TokenId>();
  c.backend.supports_logprob = b.value("supports_logprob", false);
  c.backend.supports_concurrent = b.value("supports_concurrent", false);

  const json& cfg = j.contains("config") ? j["config"] : throw DataError("report lacks 'curve.config'");
  c.config.max_len = required<std::size_t>(cfg, "max_len");
  c.config.points = required<std::size_t>(cfg, "points");
  c.config.repeats = required<std::size_t>(cfg, "repeats");
  c.config.master_seed = required<std::uint64_t>(cfg, "master_seed");
  c.config.collect_logprob = cfg.value("collect_logprob", false);
  c.config.copy_pool = cfg.value("copy_pool", "");
  c.config.irrelevant_pool = cfg.value("irrelevant_pool", "");
  if (cfg.contains("separator") && cfg["separator"].is_number_unsigned())
    c.config.separator = cfg["separator"].get<TokenId>();

  if (!j.contains("points") || !j["points"].is_array()) throw DataError("report lacks 'curve.points'");
  std::size_t previous = 0;
  for (const auto& jp : j["points"]) {
    CurvePoint p;
    p.grid_length = required<std::size_t>(jp, "grid_length");
    if (p.grid_length <= previous) throw DataError("report points are not sorted by grid length");
    previous = p.grid_length;
    p.s_len = jp.value("s_len", std::size_t{0});
    p.n_scored = jp.value("n_scored", std::size_t{0});
    const std::string status = jp.value("status", "ok");
    if (status == "failed") {
      p.failed = true;
      p.error = jp.value("error", "");
    } else if (status == "ok") {
      p.copy_mean = required<double>(jp, "copy_mean");
      p.copy_std = required<double>(jp, "copy_std");
      p.lm_mean = required<double>(jp, "lm_mean");
      p.lm_std = required<double>(jp, "lm_std");
      p.copy_samples = reals(jp, "copy_samples");
      p.lm_samples = reals(jp, "lm_samples");
      p.lm_nll = reals(jp, "lm_nll");
      if (jp.contains("lm_perplexity") && jp["lm_perplexity"].is_number())
        p.lm_perplexity = jp["lm_perplexity"].get<double>();
      for (double a : {p.copy_mean, p.lm_mean})
        if (!(a >= 0.0 && a <= 1.0)) throw DataError("report accuracy outside [0, 1]");
    } else {
      throw DataError("report point has unknown status '" + status + "'");
    }
    c.points.push_back(std::move(p));
  }
  return c;
}

json analysis_to_json(const MemoryLengths& m) {
  json j{{"config_hash", m.config_hash},
         {"fine", reported_length(m.fine)},
         {"fine_censored", m.fine.censored},
         {"coarse", reported_length(m.coarse)},
         {"coarse_censored", m.coarse.censored},
         {"fine_detail", estimate_json(m.fine)},
         {"coarse_detail", estimate_json(m.coarse)},
         {"thresholds",
          {{"fine_acc", m.options.fine_threshold},
           {"coarse_margin", m.options.coarse_margin},
           {"inclusive", true},
           {"interpolate", m.options.interpolate},
           {"leading_violations_forgiven", true}}},
         {"warnings", m.warnings}};
  j["status"] = m.fine.indeterminate || m.coarse.indeterminate ? "indeterminate" : "ok";
  return j;
}

json stat_to_json(const StatTestResult& r) {
  json j{{"method", r.method}, {"df1", r.df1}};
  j["df2"] = r.df2 ? json(*r.df2) : json(nullptr);
  if (r.defined) {
    j["status"] = "ok";
    j["statistic"] = round_sig(r.statistic);
    j["p_value"] = round_sig(r.p_value);
  } else {
    j["status"] = "undefined statistic";
    j["statistic"] = nullptr;
    j["p_value"] = nullptr;
  }
  return j;
}

std::string to_json(const ReportBundle& bundle) {
  json j{{"schema", kReportSchema},
         {"created_with", bundle.created_with},
         {"notes", bundle.notes},
         {"curve", curve_to_json(bundle.curve)},
         {"analysis", analysis_to_json(bundle.analysis)}};
  if (!bundle.stat_tests.empty()) {
    json tests = json::array();
    for (const auto& t : bundle.stat_tests) tests.push_back(stat_to_json(t));
    j["stat_tests"] = tests;
  }
  return j.dump(2) + "\n";
}

ReportBundle bundle_from_json(std::string_view text) {
  json j = json::parse(text, nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw DataError("report is not a JSON object");
  if (j.value("schema", "") != kReportSchema) throw DataError(std::string("report schema is not ") + kReportSchema);
  ReportBundle b;
  b.created_with = j.value("created_with", "");
  b.notes = j.value("notes", "");
  if (!j.contains("curve")) throw DataError("report lacks 'curve'");
  b.curve = curve_from_json(j["curve"]);
  ExtractionOptions opts;
  if (j.contains("analysis") && j["analysis"].contains("thresholds")) {
    const auto& t = j["analysis"]["thresholds"];
    opts.fine_threshold = t.value("fine_acc", kFineThreshold);
    opts.coarse_margin = t.value("coarse_margin", kCoarseMargin);
    opts.interpolate = t.value("interpolate", false);
  }
  b.analysis = extract_memory_lengths(b.curve, opts);
  if (j.contains("analysis") && j["analysis"].value("config_hash", b.analysis.config_hash) != b.analysis.config_hash)
    throw DataError("report analysis and curve refer to different sweeps (config hash mismatch)");
  return b;
}

ReportBundle read_report(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open report: " + path);
  const std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  try {
    return bundle_from_json(text);
  } catch (const DataError& e) {
    throw DataError(path + ": " + e.what());
  }
}

std::string to_csv(const ForgettingCurve& curve) {
  std::string out = "grid_length,copy_mean,copy_std,lm_mean,lm_std,lm_ppl\n";
  for (const auto& p : curve.points) {
    out += std::to_string(p.grid_length);
    if (p.failed) {
      out += ",,,,,\n";
      continue;
    }
    for (double v : {p.copy_mean, p.copy_std, p.lm_mean, p.lm_std}) out += "," + format_sig(v);
    out += ",";
    if (p.lm_perplexity) out += format_sig(*p.lm_perplexity);
    out += "\n";
  }
  return out;
}

Comparison compare_report(const std::vector<ReportBundle>& bundles, const std::vector<std::string>& labels,
                          const PlotOptions& options) {
  if (bundles.size() < 2) throw ConfigError("comparison needs at least two reports");
  if (labels.size() != bundles.size()) throw ConfigError("comparison needs one label per report");
  const auto& ref = bundles.front().curve.points;
  for (const auto& b : bundles) {
    const auto& pts = b.curve.points;
    bool same = pts.size() == ref.size();
    for (std::size_t k = 0; same && k < pts.size(); ++k) same = pts[k].grid_length == ref[k].grid_length;
    if (!same) throw DataError("reports do not share a grid");
  }

  Comparison cmp;
  std::map<std::string, std::size_t> group_of;
  for (const auto& l : labels) {
    if (group_of.emplace(l, cmp.labels.size()).second) cmp.labels.push_back(l);
  }
  if (cmp.labels.size() < 2) throw ConfigError("comparison needs at least two distinct labels");

  for (std::size_t k = 0; k < ref.size(); ++k) {
    ComparisonRow row;
    row.grid_length = ref[k].grid_length;
    std::vector<std::vector<double>> groups(cmp.labels.size());
    for (std::size_t b = 0; b < bundles.size(); ++b) {
      const auto& p = bundles[b].curve.points[k];
      if (p.failed) {
        row.complete = false;
        continue;
      }
      auto& g = groups[group_of[labels[b]]];
      g.insert(g.end(), p.lm_samples.begin(), p.lm_samples.end());
    }
    row.anova.method = "anova_oneway";
    row.kruskal.method = "kruskal_wallis";
    if (row.complete) {
      bool anova_ok = true;
      std::size_t total = 0;
      for (const auto& g : groups) {
        anova_ok = anova_ok && g.size() >= 2;
        total += g.size();
      }
      if (anova_ok) {
        row.anova = anova_oneway(groups);
      } else {
        row.anova.defined = false;
      }
      if (total >= 3) {
        row.kruskal = kruskal_wallis(groups);
      } else {
        row.kruskal.defined = false;
      }
    } else {
      row.anova.defined = false;
      row.kruskal.defined = false;
    }
    cmp.rows.push_back(std::move(row));
  }
  cmp.overlay_svg = overlay_svg(bundles, labels, options);
  return cmp;
}

std::string comparison_to_json(const Comparison& c) {
  json rows = json::array();
  for (const auto& r : c.rows) {
    json jr{{"grid_length", r.grid_length},
            {"status", r.complete ? "ok" : "missing"},
            {"anova", stat_to_json(r.anova)},
            {"kruskal_wallis", stat_to_json(r.kruskal)}};
    rows.push_back(std::move(jr));
  }
  json j{{"schema", "fc-compare-v1"},
         {"created_with", kToolVersion},
         {"metric", "lm_accuracy_per_repeat"},
         {"groups", c.labels},
         {"rows", rows}};
  return j.dump(2) + "\n";
}

}  // namespace fc
