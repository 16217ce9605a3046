#include "fc/cli.hpp"

#include <unistd.h>

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <iterator>
#include <map>
#include <set>
#include <sstream>

#include "CLI11.hpp"
#include "fc/conformance.hpp"
#include "fc/error.hpp"
#include "fc/rng.hpp"
#include "fc/selftest.hpp"
#include "fc/synthetic.hpp"

#ifndef FC_DEFAULT_FIXTURES
#define FC_DEFAULT_FIXTURES "tests/fixtures/conformance.jsonl"
#endif

namespace fc {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr std::uint64_t kPoolStream = 0x706f6f6c;  // "pool"

void write_file(const fs::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << bytes;
  if (!out) throw ConfigError("write failed: " + path.string());
}

TokenPool corpus_pool(const fs::path& manifest, Backend& backend, const std::optional<fs::path>& cache) {
  const std::string fingerprint = backend.info().tokenizer_fingerprint();
  if (cache && fs::exists(*cache)) {
    TokenPool pool = load_pool(*cache);
    if (pool.tokenizer_fingerprint != fingerprint)
      throw DataError("pool cache " + cache->string() + " was built with tokenizer '" + pool.tokenizer_fingerprint +
                      "', backend is '" + fingerprint + "'");
    return pool;
  }
  Corpus corpus = load_corpus(manifest);
  validate(corpus);
  TokenPool pool = build_token_pool(corpus, backend);
  if (cache) save_pool(pool, *cache);
  return pool;
}

Palette parse_palette(const std::string& name) {
  if (name == "paper") return Palette::paper;
  if (name == "colorblind") return Palette::colorblind;
  throw ConfigError("unknown palette '" + name + "' (paper|colorblind)");
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::string self_executable() {
  std::error_code ec;
  fs::path p = fs::read_symlink("/proc/self/exe", ec);
  return ec ? std::string("fc") : p.string();
}

std::string shell_quote(const std::string& s) {
  std::string out = "'";
  for (char c : s) out += c == '\'' ? std::string("'\\''") : std::string(1, c);
  return out + "'";
}

// Flags shared by every subcommand that talks to a backend.
struct BackendFlags {
  std::string exec, tcp, oracle;
  std::optional<std::string> resolve(const json& config) const {
    int given = !exec.empty() + !tcp.empty() + !oracle.empty();
    if (given > 1) throw ConfigError("give exactly one of --backend-exec, --backend-tcp, --oracle");
    if (!exec.empty()) return "exec:" + exec;
    if (!tcp.empty()) return "tcp:" + tcp;
    if (!oracle.empty()) return "oracle:" + oracle;
    given = config.contains("backend_exec") + config.contains("backend_tcp") + config.contains("oracle");
    if (given > 1) throw ConfigError("config gives more than one backend");
    if (config.contains("backend_exec")) return "exec:" + config["backend_exec"].get<std::string>();
    if (config.contains("backend_tcp")) return "tcp:" + config["backend_tcp"].get<std::string>();
    if (config.contains("oracle")) return "oracle:" + config["oracle"].get<std::string>();
    if (const char* env = std::getenv("FC_BACKEND"); env != nullptr && *env != '\0') return std::string(env);
    return std::nullopt;
  }
  void add(CLI::App* app) {
    app->add_option("--backend-exec", exec, "Backend command speaking the JSON-lines protocol on stdio");
    app->add_option("--backend-tcp", tcp, "Backend listening at host:port");
    app->add_option("--oracle", oracle, "Built-in oracle, e.g. induction:w=512,p=0.3,m=8");
  }
};

json load_config(const std::string& path) {
  if (path.empty()) return json::object();
  json j = json::parse(read_text(path), nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw ConfigError("config " + path + " is not a JSON object");
  static const std::set<std::string> known = {
      "backend_exec", "backend_tcp", "oracle", "corpus", "irrelevant_corpus", "random_pool", "vocab",
      "pool_cache", "max_len", "points", "repeats", "seed", "out", "logprob", "interpolate",
      "separator_token", "jobs", "dump_instances", "palette", "notes"};
  for (const auto& [k, v] : j.items())
    if (!known.count(k)) throw ConfigError("config " + path + " has unknown key '" + k + "'");
  return j;
}

// Value from the flag when given, else from the config file, else the default.
template <typename T>
void merge(const CLI::App* app, const char* flag, const json& config, const char* key, T& value) {
  if (app->count(flag) > 0 || !config.contains(key)) return;
  try {
    value = config[key].get<T>();
  } catch (const json::exception&) {
    throw ConfigError(std::string("config key '") + key + "' has the wrong type");
  }
}

}  // namespace

ReportBundle measure(const MeasureOptions& options, std::ostream* progress) {
  if (options.backend.empty()) throw ConfigError("no backend given (--backend-exec, --backend-tcp, --oracle or FC_BACKEND)");
  if ((options.random_pool > 0) == options.corpus.has_value())
    throw ConfigError("give exactly one of --corpus and --random-pool");
  std::unique_ptr<Backend> backend = open_backend(options.backend, options.remote);
  const BackendInfo& info = backend->info();

  SweepConfig config = options.sweep;
  if (config.max_len == 0) {
    if (!info.max_context) throw ConfigError("backend context is unbounded; give --max-len");
    config.max_len = *info.max_context;
  }
  plan_grid(config.max_len, config.points);  // fail on a bad grid before any tokenization

  TokenPool copy_pool;
  std::optional<TokenPool> irrelevant_pool;
  if (options.random_pool > 0) {
    std::vector<TokenId> reserved;
    const Delimiters d = resolve_delimiters(info, config.separator);
    reserved = {d.bos, d.eos};
    copy_pool = random_token_pool(options.random_pool, options.vocab, derive_seed(config.master_seed, kPoolStream),
                                  reserved);
    copy_pool.tokenizer_fingerprint = info.tokenizer_fingerprint();
  } else {
    copy_pool = corpus_pool(*options.corpus, *backend, options.pool_cache);
  }
  if (options.irrelevant_corpus) irrelevant_pool = corpus_pool(*options.irrelevant_corpus, *backend, std::nullopt);

  config.copy_pool = copy_pool.label;
  config.irrelevant_pool = irrelevant_pool ? irrelevant_pool->label : "disjoint:" + copy_pool.label;

  SweepHooks hooks;
  hooks.progress = progress;
  std::map<std::pair<std::size_t, std::size_t>, std::string> dumped;
  if (options.dump_instances) {
    hooks.on_pair = [&](const TaskInstance& copy, const TaskInstance& lm) {
      dumped[{copy.test_length, copy.repeat_index}] =
          instance_to_json(copy).dump() + "\n" + instance_to_json(lm).dump() + "\n";
    };
  }
  SweepPools pools{&copy_pool, irrelevant_pool ? &*irrelevant_pool : nullptr};

  ReportBundle bundle;
  bundle.curve = run_sweep(config, *backend, pools, hooks);
  ExtractionOptions extraction;
  extraction.interpolate = options.interpolate;
  bundle.analysis = extract_memory_lengths(bundle.curve, extraction);
  bundle.notes = options.notes;

  if (options.dump_instances) {
    fs::create_directories(options.out_dir);
    std::string all;
    for (const auto& [key, text] : dumped) all += text;
    write_file(options.out_dir / "instances.jsonl", all);
  }
  return bundle;
}

void write_artifacts(const ReportBundle& bundle, const fs::path& dir, const PlotOptions& plot) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw ConfigError("cannot create output directory " + dir.string() + ": " + ec.message());
  write_file(dir / "report.json", to_json(bundle));
  write_file(dir / "curve.csv", to_csv(bundle.curve));
  write_file(dir / "curve.svg", plot_svg(bundle.curve, bundle.analysis, plot));
}

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Forgetting-curve harness: measures how far back a language model can copy."};
  app.require_subcommand(1);
  app.set_version_flag("--version", kToolVersion);

  // measure
  auto* m = app.add_subcommand("measure", "Sweep a backend and write report.json, curve.csv, curve.svg");
  BackendFlags m_backend;
  m_backend.add(m);
  std::string m_config, m_corpus, m_irrelevant, m_cache, m_out = ".", m_palette = "paper", m_notes;
  std::size_t m_random = 0, m_max_len = 0, m_points = 32, m_repeats = 10, m_jobs = 1;
  std::uint32_t m_vocab = 32000;
  std::uint64_t m_seed = 0;
  std::int64_t m_separator = -1;
  bool m_logprob = false, m_interpolate = false, m_dump = false, m_quiet = false;
  m->add_option("--config", m_config, "JSON file with the same keys as the flags (dashes as underscores)");
  m->add_option("--corpus", m_corpus, "Corpus manifest for the copy targets");
  m->add_option("--irrelevant-corpus", m_irrelevant, "Corpus manifest for the irrelevant prefixes");
  m->add_option("--random-pool", m_random, "Use N uniform-random tokens instead of a corpus");
  m->add_option("--vocab", m_vocab, "Vocabulary size of the random pool")->capture_default_str();
  m->add_option("--pool-cache", m_cache, "Token pool cache file (read if present, else written)");
  m->add_option("--max-len", m_max_len, "Longest tested input length (default: backend max_context)");
  m->add_option("--points", m_points, "Grid points")->capture_default_str();
  m->add_option("--repeats", m_repeats, "Samples per grid point")->capture_default_str();
  m->add_option("--seed", m_seed, "Master seed")->capture_default_str();
  m->add_option("--out", m_out, "Output directory")->capture_default_str();
  m->add_flag("--logprob", m_logprob, "Collect log-probabilities for a perplexity series");
  m->add_flag("--interpolate", m_interpolate, "Report sub-grid lengths by linear interpolation");
  m->add_option("--separator-token", m_separator, "Token id standing in for an absent bos/eos");
  m->add_option("--jobs", m_jobs, "Concurrent requests (only for backends that allow it)")->capture_default_str();
  m->add_flag("--dump-instances", m_dump, "Also write every generated instance to instances.jsonl");
  m->add_option("--palette", m_palette, "paper|colorblind")->capture_default_str();
  m->add_option("--notes", m_notes, "Free text stored in the report");
  m->add_flag("--quiet,-q", m_quiet, "No progress or summary output");

  // analyze
  auto* a = app.add_subcommand("analyze", "Re-extract memory lengths from a report");
  std::string a_report, a_out;
  bool a_interpolate = false;
  a->add_option("report", a_report, "report.json")->required();
  a->add_flag("--interpolate", a_interpolate, "Report sub-grid lengths by linear interpolation");
  a->add_option("--out", a_out, "Write the updated report here");

  // plot
  auto* p = app.add_subcommand("plot", "Render a report as SVG");
  std::string p_report, p_out = "curve.svg", p_palette = "paper", p_title;
  p->add_option("report", p_report, "report.json")->required();
  p->add_option("--out", p_out, "SVG path")->capture_default_str();
  p->add_option("--palette", p_palette, "paper|colorblind")->capture_default_str();
  p->add_option("--title", p_title, "Plot title");

  // compare
  auto* c = app.add_subcommand("compare", "Per-length ANOVA and Kruskal-Wallis across reports");
  std::vector<std::string> c_reports, c_labels;
  std::string c_out = ".", c_palette = "paper";
  c->add_option("reports", c_reports, "report.json files")->required();
  c->add_option("--labels", c_labels, "One setting label per report")->delimiter(',');
  c->add_option("--out", c_out, "Output directory for stats.json and overlay.svg")->capture_default_str();
  c->add_option("--palette", c_palette, "paper|colorblind")->capture_default_str();

  // selftest
  auto* s = app.add_subcommand("selftest", "Run the synthetic acceptance suite");
  std::string s_scratch;
  s->add_option("--scratch", s_scratch, "Scratch directory (default: a temporary directory)");

  // serve
  auto* v = app.add_subcommand("serve", "Serve a built-in oracle over the JSON-lines protocol");
  std::string v_oracle = "induction:w=512,p=0.3,m=8";
  int v_tcp = -1;
  bool v_once = false;
  v->add_option("--oracle", v_oracle, "Oracle spec")->capture_default_str();
  v->add_option("--tcp", v_tcp, "Listen on 127.0.0.1:PORT instead of stdio (0 picks a port)");
  v->add_flag("--once", v_once, "Exit after the first TCP connection closes");

  // conformance
  auto* k = app.add_subcommand("conformance", "Run the protocol conformance fixtures against a backend");
  BackendFlags k_backend;
  k_backend.add(k);
  std::string k_fixtures = FC_DEFAULT_FIXTURES;
  k->add_option("--fixtures", k_fixtures, "Fixture file (JSON lines)")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : static_cast<int>(ErrorKind::config);
  }

  try {
    if (m->parsed()) {
      const json config = load_config(m_config);
      MeasureOptions o;
      o.backend = m_backend.resolve(config).value_or("");
      merge(m, "--corpus", config, "corpus", m_corpus);
      merge(m, "--irrelevant-corpus", config, "irrelevant_corpus", m_irrelevant);
      merge(m, "--random-pool", config, "random_pool", m_random);
      merge(m, "--vocab", config, "vocab", m_vocab);
      merge(m, "--pool-cache", config, "pool_cache", m_cache);
      merge(m, "--max-len", config, "max_len", m_max_len);
      merge(m, "--points", config, "points", m_points);
      merge(m, "--repeats", config, "repeats", m_repeats);
      merge(m, "--seed", config, "seed", m_seed);
      merge(m, "--out", config, "out", m_out);
      merge(m, "--logprob", config, "logprob", m_logprob);
      merge(m, "--interpolate", config, "interpolate", m_interpolate);
      merge(m, "--separator-token", config, "separator_token", m_separator);
      merge(m, "--jobs", config, "jobs", m_jobs);
      merge(m, "--dump-instances", config, "dump_instances", m_dump);
      merge(m, "--palette", config, "palette", m_palette);
      merge(m, "--notes", config, "notes", m_notes);
      if (!m_corpus.empty()) o.corpus = m_corpus;
      if (!m_irrelevant.empty()) o.irrelevant_corpus = m_irrelevant;
      if (!m_cache.empty()) o.pool_cache = m_cache;
      o.random_pool = m_random;
      o.vocab = m_vocab;
      o.sweep.max_len = m_max_len;
      o.sweep.points = m_points;
      o.sweep.repeats = m_repeats;
      o.sweep.master_seed = m_seed;
      o.sweep.collect_logprob = m_logprob;
      o.sweep.jobs = m_jobs;
      if (m_separator >= 0) {
        if (m_separator > 0xffffffffLL) throw ConfigError("--separator-token out of range");
        o.sweep.separator = static_cast<TokenId>(m_separator);
      }
      o.interpolate = m_interpolate;
      o.out_dir = m_out;
      o.dump_instances = m_dump;
      o.plot.palette = parse_palette(m_palette);
      o.notes = m_notes;
      const ReportBundle bundle = measure(o, m_quiet ? nullptr : &err);
      write_artifacts(bundle, o.out_dir, o.plot);
      if (!m_quiet)
        out << "fine=" << display_length(bundle.analysis.fine) << " coarse=" << display_length(bundle.analysis.coarse)
            << " out=" << o.out_dir.string() << "\n";
      for (const auto& w : bundle.analysis.warnings) err << "warning: " << w << "\n";
      return 0;
    }
    if (a->parsed()) {
      ReportBundle bundle = read_report(a_report);
      ExtractionOptions opts = bundle.analysis.options;
      if (a->count("--interpolate") > 0) opts.interpolate = a_interpolate;
      bundle.analysis = extract_memory_lengths(bundle.curve, opts);
      out << analysis_to_json(bundle.analysis).dump(2) << "\n";
      if (!a_out.empty()) write_file(a_out, to_json(bundle));
      return 0;
    }
    if (p->parsed()) {
      const ReportBundle bundle = read_report(p_report);
      PlotOptions opts;
      opts.palette = parse_palette(p_palette);
      opts.title = p_title;
      write_file(p_out, plot_svg(bundle.curve, bundle.analysis, opts));
      return 0;
    }
    if (c->parsed()) {
      if (c_reports.size() < 2) throw ConfigError("compare needs at least two reports");
      if (c_labels.empty()) c_labels = c_reports;
      if (c_labels.size() != c_reports.size())
        throw ConfigError("got " + std::to_string(c_labels.size()) + " labels for " + std::to_string(c_reports.size()) +
                          " reports");
      std::vector<ReportBundle> bundles;
      for (const auto& path : c_reports) bundles.push_back(read_report(path));
      PlotOptions opts;
      opts.palette = parse_palette(c_palette);
      const Comparison cmp = compare_report(bundles, c_labels, opts);
      std::error_code ec;
      fs::create_directories(c_out, ec);
      write_file(fs::path(c_out) / "stats.json", comparison_to_json(cmp));
      write_file(fs::path(c_out) / "overlay.svg", cmp.overlay_svg);
      return 0;
    }
    if (s->parsed()) {
      SelftestOptions opts;
      opts.serve_command = shell_quote(self_executable()) + " serve";
      if (s_scratch.empty()) {
        char tmpl[] = "/tmp/fc-selftest-XXXXXX";
        if (::mkdtemp(tmpl) == nullptr) throw ConfigError("cannot create a scratch directory");
        opts.scratch_dir = tmpl;
      } else {
        opts.scratch_dir = s_scratch;
      }
      opts.log = &err;
      const auto results = run_selftest(opts);
      print_table(out, results);
      if (s_scratch.empty()) fs::remove_all(opts.scratch_dir);
      for (const auto& r : results)
        if (!r.passed) return 1;
      return 0;
    }
    if (v->parsed()) {
      auto backend = make_oracle(parse_oracle_spec(v_oracle));
      if (v_tcp >= 0) {
        if (v_tcp > 65535) throw ConfigError("--tcp port out of range");
        TcpServer server(static_cast<std::uint16_t>(v_tcp));
        out << "listening on 127.0.0.1:" << server.port() << std::endl;
        server.run(*backend, v_once);
      } else {
        FdLineTransport stdio(STDIN_FILENO, STDOUT_FILENO, false, "stdio");
        serve(*backend, stdio);
      }
      return 0;
    }
    if (k->parsed()) {
      const auto spec = k_backend.resolve(json::object());
      if (!spec || spec->rfind("oracle:", 0) == 0)
        throw ConfigError("conformance needs --backend-exec or --backend-tcp (use `fc serve` for oracles)");
      const auto cases = load_conformance_fixtures(k_fixtures);
      std::unique_ptr<LineTransport> transport;
      if (spec->rfind("exec:", 0) == 0) {
        transport = spawn_process(spec->substr(5));
      } else {
        const std::string addr = spec->substr(4);
        const auto colon = addr.rfind(':');
        if (colon == std::string::npos) throw ConfigError("--backend-tcp must be host:port");
        transport = connect_tcp(addr.substr(0, colon), static_cast<std::uint16_t>(std::stoi(addr.substr(colon + 1))));
      }
      const auto outcomes = run_conformance(*transport, cases);
      std::size_t failed = 0;
      for (const auto& o : outcomes) {
        out << (o.passed ? "[PASS] " : "[FAIL] ") << o.name;
        if (!o.passed) out << ": " << o.detail;
        out << "\n";
        failed += !o.passed;
      }
      out << outcomes.size() - failed << "/" << outcomes.size() << " conformance cases passed\n";
      return failed == 0 ? 0 : static_cast<int>(ErrorKind::backend);
    }
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return e.exit_code();
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << "\n";
    return static_cast<int>(ErrorKind::config);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return static_cast<int>(ErrorKind::data);
  }
  return 0;
}

}  // namespace fc
