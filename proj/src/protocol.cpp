#include "fc/protocol.hpp"

#include <limits>

#include "fc/error.hpp"

namespace fc::protocol {

using nlohmann::json;

namespace {

const char* op_name(Op op) {
  switch (op) {
    case Op::hello: return "hello";
    case Op::tokenize: return "tokenize";
    case Op::score: return "score";
  }
  return "?";
}

template <typename T>
std::vector<T> unsigned_array(const json& j, const char* field, std::string_view raw) {
  if (!j.contains(field) || !j[field].is_array())
    throw ProtocolError(std::string("missing array field '") + field + "'", std::string(raw));
  std::vector<T> out;
  out.reserve(j[field].size());
  for (const auto& v : j[field]) {
    if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<std::int64_t>() >= 0))
      throw ProtocolError(std::string("field '") + field + "' must hold non-negative integers",
                          std::string(raw));
    const auto x = v.get<std::uint64_t>();
    if (x > std::numeric_limits<T>::max())
      throw ProtocolError(std::string("field '") + field + "' value out of range", std::string(raw));
    out.push_back(static_cast<T>(x));
  }
  return out;
}

std::optional<TokenId> optional_token(const json& reply, const char* field) {
  if (!reply.contains(field) || reply[field].is_null()) return std::nullopt;
  const auto& v = reply[field];
  if (!v.is_number_integer() || v.get<std::int64_t>() < 0 ||
      v.get<std::uint64_t>() > std::numeric_limits<TokenId>::max())
    throw ProtocolError(std::string("hello field '") + field + "' is not a token id", reply.dump());
  return static_cast<TokenId>(v.get<std::uint64_t>());
}

json error_reply(std::uint64_t id, const std::string& message) {
  return json{{"id", id}, {"ok", false}, {"error", message}};
}

}  // namespace

std::string encode_request(const Request& request) {
  json j{{"id", request.id}, {"op", op_name(request.op)}};
  switch (request.op) {
    case Op::hello:
      j["fcp"] = request.fcp;
      break;
    case Op::tokenize:
      j["text"] = request.text;
      break;
    case Op::score:
      j["ids"] = request.ids;
      j["positions"] = request.positions;
      j["logprob"] = request.logprob;
      break;
  }
  return j.dump();
}

Request decode_request(std::string_view line) {
  json j = json::parse(line, nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw ProtocolError("request is not a JSON object", std::string(line));
  if (!j.contains("id") || !j["id"].is_number_unsigned())
    throw ProtocolError("request lacks a non-negative integer 'id'", std::string(line));
  if (!j.contains("op") || !j["op"].is_string())
    throw ProtocolError("request lacks string 'op'", std::string(line));
  Request r;
  r.id = j["id"].get<std::uint64_t>();
  const auto op = j["op"].get<std::string>();
  if (op == "hello") {
    r.op = Op::hello;
    if (j.contains("fcp")) {
      if (!j["fcp"].is_number_integer()) throw ProtocolError("'fcp' must be an integer", std::string(line));
      r.fcp = j["fcp"].get<int>();
    }
  } else if (op == "tokenize") {
    r.op = Op::tokenize;
    if (!j.contains("text") || !j["text"].is_string())
      throw ProtocolError("tokenize request lacks string 'text'", std::string(line));
    r.text = j["text"].get<std::string>();
  } else if (op == "score") {
    r.op = Op::score;
    r.ids = unsigned_array<TokenId>(j, "ids", line);
    r.positions = unsigned_array<std::size_t>(j, "positions", line);
    if (j.contains("logprob")) {
      if (!j["logprob"].is_boolean()) throw ProtocolError("'logprob' must be a boolean", std::string(line));
      r.logprob = j["logprob"].get<bool>();
    }
  } else {
    throw ProtocolError("unknown op '" + op + "'", std::string(line));
  }
  return r;
}

json info_to_json(const BackendInfo& info) {
  json j{{"fcp", kVersion},
         {"name", info.name},
         {"supports_logprob", info.supports_logprob},
         {"supports_concurrent", info.supports_concurrent}};
  if (!info.version.empty()) j["version"] = info.version;
  j["max_context"] = info.max_context ? json(*info.max_context) : json("unbounded");
  j["bos_id"] = info.bos_id ? json(*info.bos_id) : json(nullptr);
  j["eos_id"] = info.eos_id ? json(*info.eos_id) : json(nullptr);
  return j;
}

BackendInfo info_from_json(const json& reply) {
  const std::string raw = reply.dump();
  if (!reply.contains("fcp") || !reply["fcp"].is_number_integer())
    throw ProtocolError("hello reply lacks protocol version 'fcp'", raw);
  if (reply["fcp"].get<int>() != kVersion)
    throw ProtocolError("protocol version mismatch: backend speaks fcp " +
                            std::to_string(reply["fcp"].get<int>()) + ", harness speaks fcp " +
                            std::to_string(kVersion),
                        raw);
  BackendInfo info;
  if (!reply.contains("name") || !reply["name"].is_string() || reply["name"].get<std::string>().empty())
    throw ProtocolError("hello reply lacks a non-empty 'name'", raw);
  info.name = reply["name"].get<std::string>();
  if (reply.contains("version") && reply["version"].is_string()) info.version = reply["version"].get<std::string>();

  if (reply.contains("max_context")) {
    const auto& mc = reply["max_context"];
    if (mc.is_null() || (mc.is_string() && mc.get<std::string>() == "unbounded")) {
      info.max_context = std::nullopt;
    } else if (mc.is_number_integer() && mc.get<std::int64_t>() > 0) {
      info.max_context = mc.get<std::size_t>();
    } else {
      throw ProtocolError("hello field 'max_context' must be a positive integer or \"unbounded\"", raw);
    }
  }
  info.bos_id = optional_token(reply, "bos_id");
  info.eos_id = optional_token(reply, "eos_id");
  for (const char* flag : {"supports_logprob", "supports_concurrent"}) {
    if (reply.contains(flag) && !reply[flag].is_boolean())
      throw ProtocolError(std::string("hello field '") + flag + "' must be a boolean", raw);
  }
  info.supports_logprob = reply.value("supports_logprob", false);
  info.supports_concurrent = reply.value("supports_concurrent", false);
  return info;
}

json parse_reply(std::string_view line) {
  json j = json::parse(line, nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw ProtocolError("reply is not a JSON object", std::string(line));
  if (!j.contains("id") || !j["id"].is_number_unsigned())
    throw ProtocolError("reply lacks a non-negative integer 'id'", std::string(line));
  if (!j.contains("ok") || !j["ok"].is_boolean())
    throw ProtocolError("reply lacks boolean 'ok'", std::string(line));
  if (!j["ok"].get<bool>() && (!j.contains("error") || !j["error"].is_string()))
    throw ProtocolError("error reply lacks string 'error'", std::string(line));
  return j;
}

std::vector<TokenId> tokenize_from_reply(const json& reply) {
  return unsigned_array<TokenId>(reply, "ids", reply.dump());
}

ScoreResult score_from_reply(const json& reply) {
  const std::string raw = reply.dump();
  ScoreResult result;
  if (!reply.contains("correct") || !reply["correct"].is_array())
    throw ProtocolError("score reply lacks array 'correct'", raw);
  for (const auto& v : reply["correct"]) {
    if (v.is_boolean()) {
      result.correct.push_back(v.get<bool>() ? 1 : 0);
    } else if (v.is_number_integer() && (v.get<std::int64_t>() == 0 || v.get<std::int64_t>() == 1)) {
      result.correct.push_back(static_cast<std::uint8_t>(v.get<std::int64_t>()));
    } else {
      throw ProtocolError("score reply 'correct' entries must be 0/1", raw);
    }
  }
  if (reply.contains("logprob") && !reply["logprob"].is_null()) {
    if (!reply["logprob"].is_array()) throw ProtocolError("score reply 'logprob' must be an array", raw);
    std::vector<double> lp;
    for (const auto& v : reply["logprob"]) {
      if (!v.is_number()) throw ProtocolError("score reply 'logprob' entries must be numbers", raw);
      lp.push_back(v.get<double>());
    }
    result.logprob = std::move(lp);
  }
  return result;
}

std::string handle_line(Backend& backend, std::string_view line) {
  std::uint64_t id = 0;
  try {
    // Salvage the id for the error reply when the rest is malformed.
    json probe = json::parse(line, nullptr, false);
    if (probe.is_object() && probe.contains("id") && probe["id"].is_number_unsigned())
      id = probe["id"].get<std::uint64_t>();

    const Request request = decode_request(line);
    json reply{{"id", request.id}, {"ok", true}};
    switch (request.op) {
      case Op::hello: {
        if (request.fcp != kVersion)
          return error_reply(id, "unsupported protocol version " + std::to_string(request.fcp)).dump();
        json info = info_to_json(backend.info());
        reply.update(info);
        break;
      }
      case Op::tokenize:
        reply["ids"] = backend.tokenize(request.text);
        break;
      case Op::score: {
        const auto& info = backend.info();
        ScoreResult r = backend.score(request.ids, request.positions, request.logprob);
        validate_score_result(r, request.positions.size(), request.logprob, info.supports_logprob);
        reply["correct"] = r.correct;
        if (r.logprob) reply["logprob"] = *r.logprob;
        break;
      }
    }
    return reply.dump();
  } catch (const std::exception& e) {
    return error_reply(id, e.what()).dump();
  }
}

}  // namespace fc::protocol
