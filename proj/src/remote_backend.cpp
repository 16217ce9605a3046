#include "fc/remote_backend.hpp"

#include <arpa/inet.h>
#include <fcntl.h>
#include <netdb.h>
#include <netinet/in.h>
#include <poll.h>
#include <signal.h>
#include <spawn.h>
#include <sys/socket.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <thread>

#include "fc/error.hpp"
#include "fc/protocol.hpp"
#include "fc/synthetic.hpp"

extern char** environ;

namespace fc {

using nlohmann::json;

namespace {

std::string errno_text(const char* what) { return std::string(what) + ": " + std::strerror(errno); }

void ignore_sigpipe() {
  static std::once_flag once;
  std::call_once(once, [] { ::signal(SIGPIPE, SIG_IGN); });
}

}  // namespace

FdLineTransport::FdLineTransport(int read_fd, int write_fd, bool owns, std::string description)
    : read_fd_(read_fd), write_fd_(write_fd), owns_(owns), description_(std::move(description)) {
  ignore_sigpipe();
}

FdLineTransport::~FdLineTransport() {
  if (!owns_) return;
  if (write_fd_ >= 0 && write_fd_ != read_fd_) ::close(write_fd_);
  if (read_fd_ >= 0) ::close(read_fd_);
}

void FdLineTransport::close_write() {
  if (owns_ && write_fd_ >= 0 && write_fd_ != read_fd_) ::close(write_fd_);
  write_fd_ = -1;
}

void FdLineTransport::write_line(std::string_view line) {
  if (write_fd_ < 0) throw BackendError(description_ + ": stream closed");
  std::string data(line);
  data.push_back('\n');
  std::size_t done = 0;
  while (done < data.size()) {
    const ssize_t n = ::write(write_fd_, data.data() + done, data.size() - done);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw BackendError(description_ + ": " + errno_text("write"));
    }
    done += static_cast<std::size_t>(n);
  }
}

std::optional<std::string> FdLineTransport::read_line(std::chrono::milliseconds timeout) {
  const auto deadline = std::chrono::steady_clock::now() + timeout;
  for (;;) {
    if (auto nl = buffer_.find('\n'); nl != std::string::npos) {
      std::string line = buffer_.substr(0, nl);
      buffer_.erase(0, nl + 1);
      if (!line.empty() && line.back() == '\r') line.pop_back();
      return line;
    }
    if (eof_) {
      if (buffer_.empty()) return std::nullopt;
      std::string line = std::move(buffer_);
      buffer_.clear();
      return line;
    }
    int wait_ms = -1;
    if (timeout.count() > 0) {
      const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(
          deadline - std::chrono::steady_clock::now());
      if (left.count() <= 0) throw BackendError(description_ + ": timed out waiting for reply");
      wait_ms = static_cast<int>(left.count());
    }
    pollfd pfd{read_fd_, POLLIN, 0};
    const int ready = ::poll(&pfd, 1, wait_ms);
    if (ready < 0) {
      if (errno == EINTR) continue;
      throw BackendError(description_ + ": " + errno_text("poll"));
    }
    if (ready == 0) throw BackendError(description_ + ": timed out waiting for reply");
    char chunk[65536];
    const ssize_t n = ::read(read_fd_, chunk, sizeof chunk);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw BackendError(description_ + ": " + errno_text("read"));
    }
    if (n == 0) {
      eof_ = true;
    } else {
      buffer_.append(chunk, static_cast<std::size_t>(n));
    }
  }
}

namespace {

class ProcessTransport : public FdLineTransport {
 public:
  ProcessTransport(pid_t pid, int read_fd, int write_fd, std::string description)
      : FdLineTransport(read_fd, write_fd, true, std::move(description)), pid_(pid) {}

  ~ProcessTransport() override {
    close_write();
    // Give the child a moment to exit on EOF before killing it.
    for (int i = 0; i < 200; ++i) {
      int status = 0;
      const pid_t r = ::waitpid(pid_, &status, WNOHANG);
      if (r == pid_ || r < 0) return;
      std::this_thread::sleep_for(std::chrono::milliseconds(10));
    }
    ::kill(pid_, SIGKILL);
    int status = 0;
    ::waitpid(pid_, &status, 0);
  }

 private:
  pid_t pid_;
};

}  // namespace

std::unique_ptr<LineTransport> spawn_process(const std::string& command) {
  ignore_sigpipe();
  int to_child[2];
  int from_child[2];
  if (::pipe2(to_child, O_CLOEXEC) != 0) throw BackendError(errno_text("pipe"));
  if (::pipe2(from_child, O_CLOEXEC) != 0) {
    ::close(to_child[0]);
    ::close(to_child[1]);
    throw BackendError(errno_text("pipe"));
  }
  posix_spawn_file_actions_t actions;
  posix_spawn_file_actions_init(&actions);
  posix_spawn_file_actions_adddup2(&actions, to_child[0], STDIN_FILENO);
  posix_spawn_file_actions_adddup2(&actions, from_child[1], STDOUT_FILENO);

  std::string shell = "/bin/sh";
  std::string flag = "-c";
  std::string cmd = command;
  char* argv[] = {shell.data(), flag.data(), cmd.data(), nullptr};
  pid_t pid = 0;
  const int rc = ::posix_spawn(&pid, shell.c_str(), &actions, nullptr, argv, environ);
  posix_spawn_file_actions_destroy(&actions);
  ::close(to_child[0]);
  ::close(from_child[1]);
  if (rc != 0) {
    ::close(to_child[1]);
    ::close(from_child[0]);
    throw BackendError("cannot spawn backend '" + command + "': " + std::strerror(rc));
  }
  return std::make_unique<ProcessTransport>(pid, from_child[0], to_child[1], "backend '" + command + "'");
}

std::unique_ptr<LineTransport> connect_tcp(const std::string& host, std::uint16_t port) {
  addrinfo hints{};
  hints.ai_family = AF_UNSPEC;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* found = nullptr;
  const std::string service = std::to_string(port);
  if (const int rc = ::getaddrinfo(host.c_str(), service.c_str(), &hints, &found); rc != 0)
    throw BackendError("cannot resolve " + host + ": " + ::gai_strerror(rc));
  int fd = -1;
  for (addrinfo* a = found; a != nullptr; a = a->ai_next) {
    fd = ::socket(a->ai_family, a->ai_socktype | SOCK_CLOEXEC, a->ai_protocol);
    if (fd < 0) continue;
    if (::connect(fd, a->ai_addr, a->ai_addrlen) == 0) break;
    ::close(fd);
    fd = -1;
  }
  ::freeaddrinfo(found);
  if (fd < 0) throw BackendError("cannot connect to " + host + ":" + service + ": " + std::strerror(errno));
  return std::make_unique<FdLineTransport>(fd, fd, true, "backend tcp://" + host + ":" + service);
}

RemoteBackend::RemoteBackend(std::unique_ptr<LineTransport> transport, RemoteOptions options)
    : transport_(std::move(transport)), options_(options) {}

std::uint64_t RemoteBackend::next_id() {
  std::lock_guard lock(state_mutex_);
  return next_id_++;
}

json RemoteBackend::round_trip(const std::string& line, std::uint64_t id, std::chrono::milliseconds timeout) {
  {
    std::lock_guard lock(write_mutex_);
    {
      std::lock_guard state(state_mutex_);
      if (broken_) throw BackendError(*broken_);
    }
    transport_->write_line(line);
  }
  std::unique_lock lock(state_mutex_);
  for (;;) {
    if (auto it = replies_.find(id); it != replies_.end()) {
      json reply = std::move(it->second);
      replies_.erase(it);
      return reply;
    }
    if (broken_) throw BackendError(*broken_);
    if (reading_) {
      replies_cv_.wait(lock);
      continue;
    }
    // This thread becomes the reader until its own reply (or a failure) shows up.
    reading_ = true;
    lock.unlock();
    std::optional<std::string> got;
    std::string failure;
    json reply;
    try {
      got = transport_->read_line(timeout);
      if (!got) {
        failure = transport_->describe() + ": stream closed before reply";
      } else {
        reply = protocol::parse_reply(*got);
      }
    } catch (const std::exception& e) {
      failure = e.what();
    }
    lock.lock();
    reading_ = false;
    if (!failure.empty()) {
      broken_ = failure;
      replies_cv_.notify_all();
      throw BackendError(failure);
    }
    const auto reply_id = reply["id"].get<std::uint64_t>();
    replies_[reply_id] = std::move(reply);
    replies_cv_.notify_all();
  }
}

json RemoteBackend::checked(json reply) {
  if (!reply["ok"].get<bool>()) throw BackendError("backend error: " + reply["error"].get<std::string>());
  return reply;
}

BackendInfo RemoteBackend::hello() {
  protocol::Request request;
  request.id = next_id();
  request.op = protocol::Op::hello;
  json reply = checked(round_trip(protocol::encode_request(request), request.id, options_.handshake_timeout));
  BackendInfo info = protocol::info_from_json(reply);
  max_context_ = info.max_context;
  supports_logprob_ = info.supports_logprob;
  return info;
}

std::vector<TokenId> RemoteBackend::tokenize(std::string_view text) {
  protocol::Request request;
  request.id = next_id();
  request.op = protocol::Op::tokenize;
  request.text = std::string(text);
  return protocol::tokenize_from_reply(
      checked(round_trip(protocol::encode_request(request), request.id, options_.request_timeout)));
}

ScoreResult RemoteBackend::score(std::span<const TokenId> ids, std::span<const std::size_t> positions,
                                 bool want_logprob) {
  const BackendInfo& desc = info();
  validate_score_request(ids, positions, desc.max_context);
  protocol::Request request;
  request.id = next_id();
  request.op = protocol::Op::score;
  request.ids.assign(ids.begin(), ids.end());
  request.positions.assign(positions.begin(), positions.end());
  request.logprob = want_logprob;
  ScoreResult result = protocol::score_from_reply(
      checked(round_trip(protocol::encode_request(request), request.id, options_.request_timeout)));
  validate_score_result(result, positions.size(), want_logprob, desc.supports_logprob);
  return result;
}

void serve(Backend& backend, LineTransport& transport) {
  while (auto line = transport.read_line(std::chrono::milliseconds(0))) {
    if (line->empty()) continue;
    transport.write_line(protocol::handle_line(backend, *line));
  }
}

TcpServer::TcpServer(std::uint16_t port) {
  ignore_sigpipe();
  listen_fd_ = ::socket(AF_INET, SOCK_STREAM | SOCK_CLOEXEC, 0);
  if (listen_fd_ < 0) throw BackendError(errno_text("socket"));
  const int yes = 1;
  ::setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof yes);
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
  addr.sin_port = htons(port);
  if (::bind(listen_fd_, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0 || ::listen(listen_fd_, 4) != 0) {
    const std::string msg = errno_text("bind");
    ::close(listen_fd_);
    throw BackendError(msg);
  }
  socklen_t len = sizeof addr;
  ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&addr), &len);
  port_ = ntohs(addr.sin_port);
}

TcpServer::~TcpServer() {
  if (listen_fd_ >= 0) ::close(listen_fd_);
}

void TcpServer::run(Backend& backend, bool once) {
  for (;;) {
    const int fd = ::accept4(listen_fd_, nullptr, nullptr, SOCK_CLOEXEC);
    if (fd < 0) {
      if (errno == EINTR) continue;
      throw BackendError(errno_text("accept"));
    }
    FdLineTransport conn(fd, fd, true, "client");
    try {
      serve(backend, conn);
    } catch (const BackendError&) {
      // Client vanished mid-reply; keep listening.
    }
    if (once) return;
  }
}

std::unique_ptr<Backend> open_backend(const std::string& spec, RemoteOptions options) {
  auto starts = [&](std::string_view prefix) { return spec.rfind(prefix, 0) == 0; };
  if (starts("exec:")) return std::make_unique<RemoteBackend>(spawn_process(spec.substr(5)), options);
  if (starts("oracle:")) return make_oracle(parse_oracle_spec(spec.substr(7)));
  if (starts("tcp:")) {
    const std::string addr = spec.substr(4);
    const auto colon = addr.rfind(':');
    if (colon == std::string::npos || colon == 0) throw ConfigError("tcp backend spec must be tcp:<host>:<port>");
    int port = 0;
    try {
      port = std::stoi(addr.substr(colon + 1));
    } catch (const std::exception&) {
      port = -1;
    }
    if (port <= 0 || port > 65535) throw ConfigError("invalid tcp port in '" + spec + "'");
    return std::make_unique<RemoteBackend>(connect_tcp(addr.substr(0, colon), static_cast<std::uint16_t>(port)),
                                           options);
  }
  throw ConfigError("backend spec must start with exec:, tcp: or oracle: (got '" + spec + "')");
}

}  // namespace fc
