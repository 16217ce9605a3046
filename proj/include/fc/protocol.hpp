#pragma once

// JSON-lines backend protocol, version 1.
//
//   -> {"id":0,"op":"hello","fcp":1}
//   <- {"id":0,"ok":true,"fcp":1,"name":"...","max_context":32768|"unbounded",
//       "bos_id":1|null,"eos_id":2|null,"supports_logprob":false,"supports_concurrent":false}
//   -> {"id":1,"op":"tokenize","text":"..."}
//   <- {"id":1,"ok":true,"ids":[...]}
//   -> {"id":2,"op":"score","ids":[...],"positions":[...],"logprob":false}
//   <- {"id":2,"ok":true,"correct":[0,1,...],"logprob":[...]}
//   <- {"id":n,"ok":false,"error":"..."}

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "fc/backend.hpp"
#include "json.hpp"

namespace fc::protocol {

inline constexpr int kVersion = 1;

enum class Op { hello, tokenize, score };

struct Request {
  std::uint64_t id = 0;
  Op op = Op::hello;
  int fcp = kVersion;  // hello only
  std::string text;
  std::vector<TokenId> ids;
  std::vector<std::size_t> positions;
  bool logprob = false;
};

std::string encode_request(const Request& request);

/// Throws ProtocolError (payload = the raw line) on anything malformed.
Request decode_request(std::string_view line);

nlohmann::json info_to_json(const BackendInfo& info);
BackendInfo info_from_json(const nlohmann::json& reply);

/// Parses one reply line; throws ProtocolError if it is not a JSON object with
/// an integer "id" and a boolean "ok".
nlohmann::json parse_reply(std::string_view line);

std::vector<TokenId> tokenize_from_reply(const nlohmann::json& reply);
ScoreResult score_from_reply(const nlohmann::json& reply);

/// Answers one request line against a backend. Never throws: failures become
/// {"ok":false} replies.
std::string handle_line(Backend& backend, std::string_view line);

}  // namespace fc::protocol
