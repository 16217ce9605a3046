#include "fc/conformance.hpp"

#include <fstream>
#include <map>

#include "fc/error.hpp"

namespace fc {

using nlohmann::json;

namespace {

constexpr std::uint64_t kHelperIdBase = 1'000'000'000;

bool is_token(const json& v) { return v.is_number_unsigned() && v.get<std::uint64_t>() <= 0xffffffffULL; }

std::string check_type(const json& v, const std::string& type) {
  auto all = [&](auto pred) {
    if (!v.is_array()) return false;
    for (const auto& x : v)
      if (!pred(x)) return false;
    return true;
  };
  bool ok = false;
  if (type == "string") ok = v.is_string();
  else if (type == "nonempty_string") ok = v.is_string() && !v.get<std::string>().empty();
  else if (type == "bool") ok = v.is_boolean();
  else if (type == "int") ok = v.is_number_integer();
  else if (type == "count_or_unbounded")
    ok = (v.is_number_unsigned() && v.get<std::uint64_t>() > 0) || v == "unbounded";
  else if (type == "token_or_null") ok = v.is_null() || is_token(v);
  else if (type == "token_array") ok = all(is_token);
  else if (type == "flag_array")
    ok = all([](const json& x) { return x.is_boolean() || x == 0 || x == 1; });
  else if (type == "logprob_array")
    ok = all([](const json& x) { return x.is_number() && x.get<double>() <= 0.0; });
  else
    return "fixture uses unknown type '" + type + "'";
  return ok ? std::string() : "expected " + type + ", got " + v.dump();
}

json strip_id(json reply) {
  reply.erase("id");
  return reply;
}

class Session {
 public:
  Session(LineTransport& t, std::chrono::milliseconds timeout) : t_(t), timeout_(timeout) {}

  // Returns the raw reply line.
  std::string exchange(const std::string& line) {
    t_.write_line(line);
    auto reply = t_.read_line(timeout_);
    if (!reply) throw BackendError("backend closed the stream");
    return *reply;
  }

  std::vector<std::uint64_t> tokens_for(const std::string& text) {
    auto it = cache_.find(text);
    if (it != cache_.end()) return it->second;
    json req{{"id", kHelperIdBase + helper_++}, {"op", "tokenize"}, {"text", text}};
    json reply = json::parse(exchange(req.dump()), nullptr, false);
    if (!reply.is_object() || reply.value("ok", false) != true || !reply.contains("ids") || !reply["ids"].is_array())
      throw ProtocolError("helper tokenize failed", reply.dump());
    std::vector<std::uint64_t> ids;
    if (bos_) ids.push_back(*bos_);
    for (const auto& v : reply["ids"]) ids.push_back(v.get<std::uint64_t>());
    return cache_[text] = ids;
  }

  std::optional<std::uint64_t> bos_;
  bool supports_logprob_ = false;

 private:
  LineTransport& t_;
  std::chrono::milliseconds timeout_;
  std::uint64_t helper_ = 0;
  std::map<std::string, std::vector<std::uint64_t>> cache_;
};

json resolve(Session& s, json send, std::size_t& n_positions) {
  if (send.contains("ids") && send["ids"].is_object() && send["ids"].contains("$tokenize"))
    send["ids"] = s.tokens_for(send["ids"]["$tokenize"].get<std::string>());
  if (send.contains("positions")) {
    if (send["positions"].is_object() && send["positions"].contains("$tail")) {
      const std::size_t n = send.contains("ids") ? send["ids"].size() : 0;
      const std::size_t k = std::min<std::size_t>(send["positions"]["$tail"].get<std::size_t>(), n ? n - 1 : 0);
      json pos = json::array();
      for (std::size_t p = n - k; p < n; ++p) pos.push_back(p);
      send["positions"] = pos;
    }
    n_positions = send["positions"].size();
  }
  return send;
}

std::string evaluate(const json& expect, const json& reply, std::size_t n_positions, const Session& s,
                     const std::map<std::string, json>& seen) {
  if (!reply.is_object()) return "reply is not a JSON object";
  if (!reply.contains("ok") || !reply["ok"].is_boolean()) return "reply lacks boolean 'ok'";
  if (!reply.contains("id")) return "reply lacks 'id'";
  if (expect.contains("ok") && reply["ok"] != expect["ok"])
    return "expected ok=" + expect["ok"].dump() + (reply.contains("error") ? ", error: " + reply["error"].dump() : "");
  if (expect.contains("equals"))
    for (const auto& [k, v] : expect["equals"].items()) {
      if (!reply.contains(k)) return "reply lacks '" + k + "'";
      if (reply[k] != v) return "'" + k + "' is " + reply[k].dump() + ", expected " + v.dump();
    }
  if (expect.contains("fields"))
    for (const auto& [k, v] : expect["fields"].items()) {
      if (!reply.contains(k)) return "reply lacks '" + k + "'";
      if (auto err = check_type(reply[k], v.get<std::string>()); !err.empty()) return "'" + k + "': " + err;
    }
  if (expect.contains("len"))
    for (const auto& [k, v] : expect["len"].items()) {
      const std::size_t want = v.is_string() ? n_positions : v.get<std::size_t>();
      if (!reply.contains(k) || !reply[k].is_array() || reply[k].size() != want)
        return "'" + k + "' should have length " + std::to_string(want);
    }
  if (expect.contains("logprob")) {
    const std::string rule = expect["logprob"].get<std::string>();
    const bool present = reply.contains("logprob") && !reply["logprob"].is_null();
    const bool want = rule == "iff_supported" && s.supports_logprob_;
    if (present != want) return want ? "logprob missing" : "logprob present but not expected";
    if (present) {
      if (auto err = check_type(reply["logprob"], "logprob_array"); !err.empty()) return "'logprob': " + err;
      if (reply["logprob"].size() != n_positions) return "'logprob' should have length " + std::to_string(n_positions);
    }
  }
  if (expect.contains("same_as")) {
    const std::string other = expect["same_as"].get<std::string>();
    auto it = seen.find(other);
    if (it == seen.end()) return "fixture refers to unknown case '" + other + "'";
    if (strip_id(reply) != strip_id(it->second)) return "reply differs from case '" + other + "'";
  }
  return {};
}

}  // namespace

std::vector<json> load_conformance_fixtures(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open conformance fixtures: " + path.string());
  std::vector<json> cases;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.contains("name") || !j.contains("expect"))
      throw DataError("bad conformance fixture line: " + line);
    cases.push_back(std::move(j));
  }
  if (cases.empty()) throw DataError("no conformance fixtures in " + path.string());
  return cases;
}

std::vector<ConformanceOutcome> run_conformance(LineTransport& transport, const std::vector<json>& cases,
                                                std::chrono::milliseconds timeout) {
  Session session(transport, timeout);
  std::vector<ConformanceOutcome> out;
  std::map<std::string, json> seen;
  for (const auto& c : cases) {
    ConformanceOutcome o;
    o.name = c["name"].get<std::string>();
    try {
      std::size_t n_positions = 0;
      std::string line = c.contains("send_raw") ? c["send_raw"].get<std::string>()
                                                : resolve(session, c["send"], n_positions).dump();
      const std::string raw = session.exchange(line);
      json reply = json::parse(raw, nullptr, false);
      if (reply.is_discarded()) {
        o.detail = "reply is not JSON: " + raw;
      } else {
        o.detail = evaluate(c["expect"], reply, n_positions, session, seen);
        if (c.contains("send") && c["send"].value("op", "") == "hello" && reply.value("ok", false) == true) {
          if (reply.contains("bos_id") && reply["bos_id"].is_number_unsigned())
            session.bos_ = reply["bos_id"].get<std::uint64_t>();
          session.supports_logprob_ = reply.value("supports_logprob", false);
        }
        seen[o.name] = reply;
      }
      o.passed = o.detail.empty();
    } catch (const Error& e) {
      o.detail = e.what();
      out.push_back(o);
      // The stream is unusable; report the remaining cases as not run.
      for (std::size_t k = out.size(); k < cases.size(); ++k)
        out.push_back({cases[k]["name"].get<std::string>(), false, "not run: stream failed"});
      return out;
    }
    out.push_back(std::move(o));
  }
  return out;
}

}  // namespace fc
