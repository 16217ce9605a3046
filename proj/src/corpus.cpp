#include "fc/corpus.hpp"

#include <fstream>
#include <iterator>
#include <set>
#include <sstream>
#include <stdexcept>

#include "fc/error.hpp"
#include "json.hpp"

namespace fc {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr char kPoolMagic[] = {'F', 'C', 'P', 'O', 'O', 'L', '1'};

bool valid_utf8(std::string_view s) {
  std::size_t i = 0;
  while (i < s.size()) {
    const auto c = static_cast<unsigned char>(s[i]);
    std::size_t extra = 0;
    std::uint32_t cp = 0;
    if (c < 0x80) {
      ++i;
      continue;
    } else if ((c & 0xE0) == 0xC0) {
      extra = 1;
      cp = c & 0x1F;
    } else if ((c & 0xF0) == 0xE0) {
      extra = 2;
      cp = c & 0x0F;
    } else if ((c & 0xF8) == 0xF0) {
      extra = 3;
      cp = c & 0x07;
    } else {
      return false;
    }
    if (i + extra >= s.size()) return false;
    for (std::size_t k = 1; k <= extra; ++k) {
      const auto cc = static_cast<unsigned char>(s[i + k]);
      if ((cc & 0xC0) != 0x80) return false;
      cp = (cp << 6) | (cc & 0x3F);
    }
    // Overlong forms, surrogates, out of range.
    if ((extra == 1 && cp < 0x80) || (extra == 2 && cp < 0x800) || (extra == 3 && cp < 0x10000) ||
        (cp >= 0xD800 && cp <= 0xDFFF) || cp > 0x10FFFF)
      return false;
    i += extra + 1;
  }
  return true;
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("document not found: " + path.string());
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void put_u32(std::ostream& out, std::uint32_t v) {
  const unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                              static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

void put_u64(std::ostream& out, std::uint64_t v) {
  put_u32(out, static_cast<std::uint32_t>(v));
  put_u32(out, static_cast<std::uint32_t>(v >> 32));
}

std::uint32_t get_u32(std::istream& in, const fs::path& path) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4)) throw DataError("truncated pool cache: " + path.string());
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

}  // namespace

Corpus load_corpus(const fs::path& manifest) {
  std::ifstream in(manifest);
  if (!in) throw ConfigError("cannot open corpus manifest: " + manifest.string());
  json j = json::parse(in, nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw DataError("corpus manifest is not a JSON object: " + manifest.string());
  if (!j.contains("documents") || !j["documents"].is_array() || j["documents"].empty())
    throw DataError("corpus manifest lists no documents: " + manifest.string());

  Corpus corpus;
  corpus.pool_label = j.value("pool_label", manifest.stem().string());
  const fs::path base = manifest.parent_path();
  for (const auto& entry : j["documents"]) {
    if (!entry.is_object() || !entry.contains("id") || !entry["id"].is_string() || !entry.contains("path") ||
        !entry["path"].is_string())
      throw DataError("manifest document entries need string 'id' and 'path'");
    const std::string id = entry["id"].get<std::string>();
    fs::path path = entry["path"].get<std::string>();
    if (path.is_relative()) path = base / path;
    const std::string format = entry.value("format", "txt");
    const std::string content = read_file(path);

    if (format == "txt") {
      if (!valid_utf8(content)) throw DataError("document " + id + " is not valid UTF-8");
      corpus.documents.push_back({id, content});
    } else if (format == "jsonl") {
      const std::string field = entry.value("text_field", "text");
      std::istringstream lines(content);
      std::string line;
      std::size_t record = 0;
      std::size_t line_no = 0;
      while (std::getline(lines, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        json rec = json::parse(line, nullptr, false);
        if (rec.is_discarded() || !rec.is_object() || !rec.contains(field) || !rec[field].is_string())
          throw DataError("document " + id + " line " + std::to_string(line_no) + " lacks string field '" + field + "'");
        corpus.documents.push_back({id + ":" + std::to_string(record++), rec[field].get<std::string>()});
      }
      if (record == 0) throw DataError("document " + id + " holds no records");
    } else {
      throw DataError("document " + id + " has unknown format '" + format + "'");
    }
  }
  validate(corpus);
  return corpus;
}

void validate(const Corpus& corpus) {
  if (corpus.documents.empty()) throw DataError("corpus is empty");
  std::set<std::string> seen;
  for (const auto& doc : corpus.documents) {
    if (!seen.insert(doc.id).second) throw DataError("duplicate document id " + doc.id);
    if (doc.text.empty()) throw DataError("document " + doc.id + " is empty");
  }
}

TokenPool build_token_pool(const Corpus& corpus, Backend& backend) {
  validate(corpus);
  TokenPool pool;
  pool.tokenizer_fingerprint = backend.info().tokenizer_fingerprint();
  pool.label = corpus.pool_label;
  for (const auto& doc : corpus.documents) {
    std::vector<TokenId> ids;
    try {
      ids = tokenize_chunked(backend, doc.text);
    } catch (const BackendError& e) {
      throw BackendError("tokenizing document " + doc.id + ": " + e.what());
    }
    if (ids.empty()) throw DataError("document " + doc.id + " produced zero tokens");
    pool.doc_offsets.push_back({doc.id, pool.ids.size()});
    pool.ids.insert(pool.ids.end(), ids.begin(), ids.end());
  }
  return pool;
}

TokenPool random_token_pool(std::size_t count, std::uint32_t vocab, std::uint64_t seed,
                            std::span<const TokenId> reserved) {
  std::set<TokenId> skip(reserved.begin(), reserved.end());
  std::size_t usable = 0;
  for (TokenId t : skip) usable += t < vocab ? 1 : 0;
  if (vocab <= usable) throw ConfigError("random pool vocabulary has no usable ids");
  if (count == 0) throw ConfigError("random pool size must be positive");

  TokenPool pool;
  pool.ids.reserve(count);
  SplitMix64 rng(derive_seed(seed, 0x706f6f6cULL));
  while (pool.ids.size() < count) {
    const auto id = static_cast<TokenId>(uniform_index(rng, vocab));
    if (!skip.contains(id)) pool.ids.push_back(id);
  }
  pool.doc_offsets.push_back({"random", 0});
  pool.tokenizer_fingerprint = "random/vocab=" + std::to_string(vocab);
  pool.label = "random:n=" + std::to_string(count) + ",vocab=" + std::to_string(vocab) + ",seed=" + std::to_string(seed);
  return pool;
}

SampledSpans sample_copy_and_irrelevant(const TokenPool& pool, std::size_t s_len, std::size_t i_len,
                                        SplitMix64& rng) {
  if (s_len < 2) throw std::invalid_argument("copy target needs at least 2 tokens");
  if (i_len < 1) throw std::invalid_argument("irrelevant span needs at least 1 token");
  const std::size_t n = pool.size();
  if (s_len + i_len > n)
    throw DataError("pool exhausted: " + std::to_string(n) + " tokens cannot host disjoint spans of " +
                    std::to_string(s_len) + " and " + std::to_string(i_len));

  // Copy starts with room for I on the right: [0, n - s_len - i_len].
  // Copy starts with room for I on the left:  [i_len, n - s_len].
  const std::size_t right_room = n - s_len - i_len + 1;
  const std::size_t left_only_begin = std::max(i_len, right_room);
  const std::size_t left_only = n - s_len + 1 - left_only_begin;
  const std::size_t k = uniform_index(rng, right_room + left_only);
  const std::size_t s = k < right_room ? k : left_only_begin + (k - right_room);

  const std::size_t before = s >= i_len ? s - i_len + 1 : 0;
  const std::size_t after = n - i_len >= s + s_len ? n - i_len - s - s_len + 1 : 0;
  const std::size_t q = uniform_index(rng, before + after);
  const std::size_t t = q < before ? q : s + s_len + (q - before);

  SampledSpans out;
  out.copy_span = {s, s_len};
  out.irrelevant_span = {t, i_len};
  out.copy.assign(pool.ids.begin() + static_cast<std::ptrdiff_t>(s), pool.ids.begin() + static_cast<std::ptrdiff_t>(s + s_len));
  out.irrelevant.assign(pool.ids.begin() + static_cast<std::ptrdiff_t>(t),
                        pool.ids.begin() + static_cast<std::ptrdiff_t>(t + i_len));
  return out;
}

Span sample_span(const TokenPool& pool, std::size_t length, SplitMix64& rng) {
  if (length < 1) throw std::invalid_argument("span needs at least 1 token");
  if (length > pool.size())
    throw DataError("pool exhausted: " + std::to_string(pool.size()) + " tokens cannot host a span of " +
                    std::to_string(length));
  return {uniform_index(rng, pool.size() - length + 1), length};
}

void save_pool(const TokenPool& pool, const fs::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write pool cache: " + path.string());
  out.write(kPoolMagic, sizeof kPoolMagic);
  put_u32(out, static_cast<std::uint32_t>(pool.tokenizer_fingerprint.size()));
  out.write(pool.tokenizer_fingerprint.data(), static_cast<std::streamsize>(pool.tokenizer_fingerprint.size()));
  put_u64(out, pool.ids.size());
  for (TokenId id : pool.ids) put_u32(out, id);
  if (!out) throw DataError("failed writing pool cache: " + path.string());
}

TokenPool load_pool(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open pool cache: " + path.string());
  char magic[sizeof kPoolMagic];
  if (!in.read(magic, sizeof magic) || !std::equal(std::begin(magic), std::end(magic), std::begin(kPoolMagic)))
    throw DataError("not a pool cache (bad magic): " + path.string());
  const std::uint32_t fp_len = get_u32(in, path);
  TokenPool pool;
  pool.tokenizer_fingerprint.resize(fp_len);
  if (!in.read(pool.tokenizer_fingerprint.data(), fp_len)) throw DataError("truncated pool cache: " + path.string());
  const std::uint64_t lo = get_u32(in, path);
  const std::uint64_t count = lo | (static_cast<std::uint64_t>(get_u32(in, path)) << 32);

  const auto here = in.tellg();
  in.seekg(0, std::ios::end);
  const auto remaining = static_cast<std::uint64_t>(in.tellg() - here);
  in.seekg(here);
  if (remaining != count * 4) throw DataError("pool cache size does not match its token count: " + path.string());

  pool.ids.reserve(count);
  for (std::uint64_t k = 0; k < count; ++k) pool.ids.push_back(get_u32(in, path));
  pool.doc_offsets.push_back({path.filename().string(), 0});
  pool.label = path.stem().string();
  return pool;
}

}  // namespace fc
