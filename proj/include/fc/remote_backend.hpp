#pragma once

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>

#include "fc/backend.hpp"
#include "json.hpp"

namespace fc {

/// Newline-delimited duplex channel.
class LineTransport {
 public:
  virtual ~LineTransport() = default;
  virtual void write_line(std::string_view line) = 0;
  /// nullopt on end of stream. timeout of zero waits forever; throws
  /// BackendError when the timeout elapses.
  virtual std::optional<std::string> read_line(std::chrono::milliseconds timeout) = 0;
  virtual std::string describe() const = 0;
};

/// Line transport over a pair of file descriptors (pipes or one socket).
class FdLineTransport : public LineTransport {
 public:
  FdLineTransport(int read_fd, int write_fd, bool owns, std::string description);
  ~FdLineTransport() override;
  FdLineTransport(const FdLineTransport&) = delete;
  FdLineTransport& operator=(const FdLineTransport&) = delete;

  void write_line(std::string_view line) override;
  std::optional<std::string> read_line(std::chrono::milliseconds timeout) override;
  std::string describe() const override { return description_; }

 protected:
  void close_write();

 private:
  int read_fd_;
  int write_fd_;
  bool owns_;
  std::string description_;
  std::string buffer_;
  bool eof_ = false;
};

/// Spawns `/bin/sh -c command` and talks to its stdin/stdout; stderr is inherited.
std::unique_ptr<LineTransport> spawn_process(const std::string& command);

/// Connects to host:port over TCP.
std::unique_ptr<LineTransport> connect_tcp(const std::string& host, std::uint16_t port);

struct RemoteOptions {
  std::chrono::milliseconds handshake_timeout{30000};
  std::chrono::milliseconds request_timeout{0};
};

/// Backend speaking the JSON-lines protocol. Requests may be issued from many
/// threads; they are pipelined on one stream and matched to replies by id.
class RemoteBackend : public Backend {
 public:
  explicit RemoteBackend(std::unique_ptr<LineTransport> transport, RemoteOptions options = {});

  BackendInfo hello() override;
  std::vector<TokenId> tokenize(std::string_view text) override;
  ScoreResult score(std::span<const TokenId> ids, std::span<const std::size_t> positions,
                    bool want_logprob) override;

 private:
  nlohmann::json round_trip(const std::string& line, std::uint64_t id, std::chrono::milliseconds timeout);
  nlohmann::json checked(nlohmann::json reply);
  std::uint64_t next_id();

  std::unique_ptr<LineTransport> transport_;
  RemoteOptions options_;
  std::optional<std::size_t> max_context_;
  bool supports_logprob_ = false;

  std::mutex write_mutex_;
  std::mutex state_mutex_;
  std::condition_variable replies_cv_;
  std::map<std::uint64_t, nlohmann::json> replies_;
  bool reading_ = false;
  std::optional<std::string> broken_;
  std::uint64_t next_id_ = 0;
};

/// Serves a backend over a line transport until end of stream.
void serve(Backend& backend, LineTransport& transport);

/// Loopback TCP listener for `fc serve --tcp`.
class TcpServer {
 public:
  /// port 0 picks an ephemeral port.
  explicit TcpServer(std::uint16_t port);
  ~TcpServer();
  TcpServer(const TcpServer&) = delete;
  TcpServer& operator=(const TcpServer&) = delete;

  std::uint16_t port() const { return port_; }

  /// Accepts and serves connections one at a time; returns after the first
  /// connection closes when `once` is set.
  void run(Backend& backend, bool once);

 private:
  int listen_fd_ = -1;
  std::uint16_t port_ = 0;
};

/// Builds a backend from "exec:<command>", "tcp:<host>:<port>" or "oracle:<spec>".
std::unique_ptr<Backend> open_backend(const std::string& spec, RemoteOptions options = {});

}  // namespace fc
