#include "fc/selftest.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <iterator>
#include <ostream>

#include "fc/cli.hpp"
#include "fc/error.hpp"
#include "fc/rng.hpp"
#include "fc/stats.hpp"
#include "fc/synthetic.hpp"

namespace fc {

namespace fs = std::filesystem;

namespace {

constexpr std::size_t kMaxLen = 4096;
constexpr std::size_t kPoints = 16;
constexpr std::size_t kRepeats = 10;
constexpr std::size_t kGridStep = kMaxLen / kPoints;
constexpr std::size_t kPoolTokens = 200000;
constexpr std::uint64_t kSeed = 7;

MeasureOptions oracle_sweep(const std::string& oracle, std::uint64_t seed = kSeed) {
  MeasureOptions o;
  o.backend = "oracle:" + oracle;
  o.random_pool = kPoolTokens;
  o.sweep.max_len = kMaxLen;
  o.sweep.points = kPoints;
  o.sweep.repeats = kRepeats;
  o.sweep.master_seed = seed;
  return o;
}

std::string fmt(const char* f, double a) {
  char buf[96];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

bool within(const LengthEstimate& e, double target, double tol) {
  return !e.indeterminate && std::fabs(static_cast<double>(reported_length(e)) - target) <= tol;
}

template <typename F>
CheckResult timed(const std::string& name, F&& body) {
  CheckResult r;
  r.name = name;
  const auto t0 = std::chrono::steady_clock::now();
  try {
    body(r);
  } catch (const std::exception& e) {
    r.passed = false;
    r.detail = std::string("error: ") + e.what();
  }
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return r;
}

std::string read_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

CheckResult check_step_recovery() {
  return timed("oracle recovery (step memory)", [](CheckResult& r) {
    const auto t0 = std::chrono::steady_clock::now();
    const ReportBundle b = measure(oracle_sweep("induction:w=512,p=0.3,m=8"));
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const double target = 2 * 512 + 3;
    const bool fine_ok = within(b.analysis.fine, target, kGridStep);
    const bool coarse_ok = within(b.analysis.coarse, target, kGridStep);
    r.passed = fine_ok && coarse_ok && secs < 60.0;
    r.detail = "fine=" + display_length(b.analysis.fine) + " coarse=" + display_length(b.analysis.coarse) +
               " target=1027+-256 sweep=" + fmt("%.2fs", secs) + " (limit 60s)";
  });
}

CheckResult check_graded_recovery() {
  return timed("oracle recovery (graded memory)", [](CheckResult& r) {
    const ReportBundle b = measure(oracle_sweep("decay:w1=256,w2=1024,p=0.3"));
    const double fine_target = 2 * 256 + 3, coarse_target = 2 * 1024 + 3;
    const bool fine_ok = within(b.analysis.fine, fine_target, kGridStep);
    const bool coarse_ok = within(b.analysis.coarse, coarse_target, kGridStep);

    // Across the ramp, each point may sit at most 0.03 above its predecessor.
    bool decreasing = true;
    const CurvePoint* prev = nullptr;
    std::size_t ramp_points = 0;
    for (const auto& p : b.curve.points) {
      if (p.grid_length < fine_target || p.grid_length > coarse_target) continue;
      if (p.failed) {
        decreasing = false;
        continue;
      }
      ++ramp_points;
      if (prev != nullptr && !(p.copy_mean < prev->copy_mean + 0.03)) decreasing = false;
      prev = &p;
    }
    decreasing = decreasing && ramp_points >= 2;

    ExtractionOptions interp;
    interp.interpolate = true;
    const MemoryLengths sub = extract_memory_lengths(b.curve, interp);
    r.passed = fine_ok && coarse_ok && decreasing;
    r.detail = "fine=" + display_length(b.analysis.fine) + " (target 515+-256) coarse=" +
               display_length(b.analysis.coarse) + " (target 2051+-256) ramp " +
               (decreasing ? "decreasing" : "NOT decreasing") + " over " + std::to_string(ramp_points) +
               " points; interpolated coarse=" +
               (sub.coarse.interpolated ? fmt("%.1f", *sub.coarse.interpolated) : std::string("n/a"));
  });
}

CheckResult check_amnesia_baseline() {
  return timed("amnesia baseline", [](CheckResult& r) {
    const ReportBundle b = measure(oracle_sweep("pure_lm:p=0.3"));
    const auto& f = b.analysis.fine;
    const auto& c = b.analysis.coarse;
    const bool zero = reported_length(f) == 0 && reported_length(c) == 0 && !f.censored && !c.censored &&
                      !f.indeterminate && !c.indeterminate;
    double worst = 0.0;
    bool all_valid = true;
    for (const auto& p : b.curve.points) {
      if (p.failed) all_valid = false;
      worst = std::max({worst, std::fabs(p.copy_mean - 0.3), std::fabs(p.lm_mean - 0.3)});
    }
    r.passed = zero && all_valid && worst <= 0.10;
    r.detail = "fine=" + display_length(f) + " coarse=" + display_length(c) + " max|mean-0.3|=" + fmt("%.4f", worst) +
               " (limit 0.10)";
  });
}

CheckResult check_paired_alignment() {
  return timed("paired-alignment invariant", [](CheckResult& r) {
    OracleSpec spec = parse_oracle_spec("induction:w=512,p=0.3,m=8");
    auto backend = make_oracle(spec);
    const TokenPool pool =
        random_token_pool(kPoolTokens, 32000, derive_seed(kSeed, 1), std::vector<TokenId>{kOracleBos, kOracleEos});
    SweepConfig config;
    config.max_len = kMaxLen;
    config.points = kPoints;
    config.repeats = kRepeats;
    config.master_seed = kSeed;
    std::size_t pairs = 0, bad = 0;
    std::string first_bad;
    SweepHooks hooks;
    hooks.on_pair = [&](const TaskInstance& copy, const TaskInstance& lm) {
      ++pairs;
      bool ok = copy.kind == TaskKind::copy && lm.kind == TaskKind::lm && copy.ids.size() == lm.ids.size() &&
                copy.scored_positions == lm.scored_positions && !copy.scored_positions.empty();
      for (std::size_t k = 0; ok && k < copy.scored_positions.size(); ++k) {
        const std::size_t pos = copy.scored_positions[k];
        ok = pos < copy.ids.size() && copy.ids[pos] == lm.ids[pos];
      }
      if (!ok && bad++ == 0)
        first_bad = "len=" + std::to_string(copy.test_length) + " rep=" + std::to_string(copy.repeat_index);
    };
    run_sweep(config, *backend, SweepPools{&pool, nullptr}, hooks);
    const std::size_t expected = kPoints * kRepeats;
    r.passed = pairs == expected && bad == 0;
    r.detail = std::to_string(pairs) + "/" + std::to_string(expected) + " pairs checked, " + std::to_string(bad) +
               " misaligned" + (first_bad.empty() ? "" : " (first: " + first_bad + ")");
  });
}

CheckResult check_statistics_exactness() {
  return timed("statistics exactness", [](CheckResult& r) {
    double worst_stat = 0.0, worst_p = 0.0, worst_sf = 0.0;
    const auto a = anova_oneway({{1, 2, 3}, {2, 3, 4}, {3, 4, 5}});
    worst_stat = std::max(worst_stat, std::fabs(a.statistic - 3.0));
    worst_p = std::max(worst_p, std::fabs(a.p_value - 0.125));
    const auto k = kruskal_wallis({{1, 2, 3}, {4, 5, 6}, {7, 8, 9}});
    worst_stat = std::max(worst_stat, std::fabs(k.statistic - 7.2));
    worst_p = std::max(worst_p, std::fabs(k.p_value - std::exp(-3.6)));
    for (double x : {0.5, 1.0, 2.0, 5.0, 10.0, 50.0}) {
      worst_sf = std::max(worst_sf, std::fabs(chi2_sf(x, 2) - std::exp(-x / 2)));
      for (double nu : {1.0, 3.0, 10.0, 57.0}) {
        worst_sf = std::max(worst_sf, std::fabs(f_sf(x, 2, nu) - std::pow(1 + 2 * x / nu, -nu / 2)));
      }
    }
    r.passed = a.defined && k.defined && worst_stat <= 1e-12 && worst_p <= 1e-10 && worst_sf <= 1e-10;
    char buf[160];
    std::snprintf(buf, sizeof buf, "F=%.15g H=%.15g |dstat|=%.2e |dp|=%.2e |dsf|=%.2e", a.statistic, k.statistic,
                  worst_stat, worst_p, worst_sf);
    r.detail = buf;
  });
}

CheckResult check_null_calibration() {
  return timed("null calibration", [](CheckResult& r) {
    std::vector<ReportBundle> bundles;
    std::vector<std::string> labels;
    for (std::uint64_t k = 0; k < 20; ++k) {
      bundles.push_back(measure(oracle_sweep("pure_lm:p=0.3,seed=" + std::to_string(1000 + k), 1000 + k)));
      labels.push_back("group" + std::to_string(k % 4));
    }
    const Comparison cmp = compare_report(bundles, labels);
    std::size_t above = 0;
    for (const auto& row : cmp.rows)
      if (row.anova.defined && row.anova.p_value > 0.05) ++above;
    const double frac = static_cast<double>(above) / static_cast<double>(cmp.rows.size());
    r.passed = frac >= 0.8;
    r.detail = std::to_string(above) + "/" + std::to_string(cmp.rows.size()) +
               " grid points with ANOVA p > 0.05 (need >= 80%)";
  });
}

CheckResult check_determinism(const fs::path& scratch_dir) {
  return timed("determinism", [&](CheckResult& r) {
    const char* files[] = {"report.json", "curve.csv", "curve.svg"};
    for (int run = 0; run < 2; ++run) {
      MeasureOptions o = oracle_sweep("induction:w=512,p=0.3,m=8");
      o.sweep.points = 8;
      o.sweep.jobs = run == 0 ? 1 : 4;  // scheduling must not leak into the artifacts
      o.out_dir = scratch_dir / ("run" + std::to_string(run));
      write_artifacts(measure(o), o.out_dir, o.plot);
    }
    std::string differing;
    for (const char* f : files) {
      const std::string a = read_bytes(scratch_dir / "run0" / f);
      const std::string b = read_bytes(scratch_dir / "run1" / f);
      if (a.empty() || a != b) differing += std::string(differing.empty() ? "" : ", ") + f;
    }
    r.passed = differing.empty();
    r.detail = differing.empty() ? "report.json, curve.csv, curve.svg byte-identical across two runs"
                                 : "differs: " + differing;
  });
}

CheckResult check_perplexity_decoupling() {
  return timed("perplexity decoupling", [](CheckResult& r) {
    MeasureOptions o = oracle_sweep("induction:w=512,p=0.3,m=8,logprob=1");
    o.sweep.collect_logprob = true;
    const ReportBundle b = measure(o);
    const auto series = perplexity_series(b.curve);
    const double target = 2 * 512 + 3;

    bool sane = series.size() == b.curve.points.size();
    bool improving = sane;
    for (std::size_t k = 0; k < series.size(); ++k) {
      sane = sane && std::isfinite(series[k].second) && series[k].second >= 1.0;
      if (k > 0) improving = improving && series[k].second <= series[k - 1].second * (1.0 + 1e-9);
    }
    const std::size_t coarse = reported_length(b.analysis.coarse);
    const bool pinned = within(b.analysis.coarse, target, kGridStep) && !b.analysis.coarse.censored;

    double ppl_at_coarse = 0.0, ppl_last = series.empty() ? 0.0 : series.back().second;
    for (const auto& [len, ppl] : series)
      if (len <= coarse) ppl_at_coarse = ppl;
    bool collapsed = true;
    for (const auto& p : b.curve.points)
      if (p.grid_length > coarse && !p.failed) collapsed = collapsed && p.copy_mean < p.lm_mean + 0.01;

    r.passed = sane && improving && pinned && collapsed && ppl_at_coarse > 0.0 &&
               ppl_last <= ppl_at_coarse * (1.0 + 1e-9);
    r.detail = "ppl " + fmt("%.4f", series.empty() ? 0.0 : series.front().second) + " -> " + fmt("%.4f", ppl_last) +
               (improving ? " non-increasing" : " INCREASES") + ", coarse=" + display_length(b.analysis.coarse) +
               " (target 1027+-256), copy " + (collapsed ? "collapsed" : "NOT collapsed") + " beyond coarse";
  });
}

CheckResult check_wire_path(const std::string& serve_command) {
  return timed("wire path (oracle behind the protocol)", [&](CheckResult& r) {
    if (serve_command.empty()) throw ConfigError("no serve command configured");
    const std::string oracle = "induction:w=64,p=0.3,m=8";
    MeasureOptions in_process = oracle_sweep(oracle);
    in_process.sweep.max_len = 512;
    in_process.sweep.points = 8;
    in_process.sweep.repeats = 4;
    MeasureOptions wire = in_process;
    wire.backend = "exec:" + serve_command + " --oracle '" + oracle + "'";
    const ReportBundle a = measure(in_process);
    const ReportBundle b = measure(wire);
    const bool same_curve = curve_to_json(a.curve)["points"] == curve_to_json(b.curve)["points"];
    const bool same_lengths = analysis_to_json(a.analysis) == analysis_to_json(b.analysis);
    r.passed = same_curve && same_lengths;
    r.detail = std::string("curve ") + (same_curve ? "identical" : "DIFFERS") + ", lengths " +
               (same_lengths ? "identical" : "DIFFER") + " (fine=" + display_length(b.analysis.fine) + ")";
  });
}

std::vector<CheckResult> run_selftest(const SelftestOptions& options) {
  std::vector<CheckResult> out;
  auto run = [&](auto&& check) {
    out.push_back(check());
    if (options.log != nullptr)
      *options.log << (out.back().passed ? "pass " : "FAIL ") << out.back().name << " (" << std::fixed
                   << std::setprecision(2) << out.back().seconds << "s)\n"
                   << std::defaultfloat;
  };
  run(check_step_recovery);
  run(check_graded_recovery);
  run(check_amnesia_baseline);
  run(check_paired_alignment);
  run(check_statistics_exactness);
  run(check_null_calibration);
  run([&] { return check_determinism(options.scratch_dir); });
  run(check_perplexity_decoupling);
  run([&] { return check_wire_path(options.serve_command); });
  return out;
}

void print_table(std::ostream& out, const std::vector<CheckResult>& results) {
  std::size_t width = 5;
  for (const auto& r : results) width = std::max(width, r.name.size());
  std::size_t passed = 0;
  for (const auto& r : results) {
    out << (r.passed ? "PASS  " : "FAIL  ") << std::left << std::setw(static_cast<int>(width)) << r.name << "  "
        << std::right << std::fixed << std::setprecision(2) << std::setw(7) << r.seconds << "s  " << r.detail
        << "\n"
        << std::defaultfloat;
    passed += r.passed;
  }
  out << passed << "/" << results.size() << " checks passed\n";
}

}  // namespace fc
