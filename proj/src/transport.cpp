#include "ttc/transport.hpp"

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>

#include "ttc/error.hpp"

namespace ttc {

Endpoint parse_endpoint(const std::string& addr) {
  Endpoint e;
  std::string port = addr;
  if (const auto colon = addr.rfind(':'); colon != std::string::npos) {
    if (colon > 0) e.host = addr.substr(0, colon);
    port = addr.substr(colon + 1);
  }
  try {
    std::size_t used = 0;
    const int p = std::stoi(port, &used);
    if (used != port.size() || p < 0 || p > 65535) throw std::out_of_range("port");
    e.port = static_cast<std::uint16_t>(p);
  } catch (const std::exception&) {
    throw TransportError("address", "cannot parse '" + addr + "' as host:port");
  }
  return e;
}

namespace {

std::string sys_error(const char* what) { return std::string(what) + ": " + std::strerror(errno); }

sockaddr_in resolve(const Endpoint& ep) {
  sockaddr_in sa{};
  sa.sin_family = AF_INET;
  sa.sin_port = htons(ep.port);
  if (inet_pton(AF_INET, ep.host.c_str(), &sa.sin_addr) == 1) return sa;
  addrinfo hints{};
  hints.ai_family = AF_INET;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* res = nullptr;
  if (getaddrinfo(ep.host.c_str(), nullptr, &hints, &res) != 0 || !res) {
    throw TransportError("address", "cannot resolve host '" + ep.host + "'");
  }
  sa.sin_addr = reinterpret_cast<sockaddr_in*>(res->ai_addr)->sin_addr;
  freeaddrinfo(res);
  return sa;
}

void write_all(int fd, std::span<const std::uint8_t> bytes) {
  std::size_t sent = 0;
  while (sent < bytes.size()) {
    const ssize_t n = ::send(fd, bytes.data() + sent, bytes.size() - sent, MSG_NOSIGNAL);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw TransportError("socket", sys_error("send"));
    }
    sent += static_cast<std::size_t>(n);
  }
}

// Reads until one frame is available; nullopt on orderly close between frames.
std::optional<Message> read_message(int fd, FrameReader& reader) {
  std::uint8_t buf[16384];
  while (true) {
    if (auto m = reader.next()) return m;
    const ssize_t n = ::recv(fd, buf, sizeof buf, 0);
    if (n == 0) {
      if (reader.buffered() > 0) throw FrameError("frame", "connection closed mid-frame");
      return std::nullopt;
    }
    if (n < 0) {
      if (errno == EINTR) continue;
      throw TransportError("socket", sys_error("recv"));
    }
    reader.feed({buf, static_cast<std::size_t>(n)});
  }
}

}  // namespace

Server::Server(const ModelRegistry& registry, Endpoint listen)
    : registry_(registry), listen_(std::move(listen)) {}

Server::~Server() { stop(); }

void Server::start() {
  if (running_) return;
  const sockaddr_in sa = resolve(listen_);
  listen_fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
  if (listen_fd_ < 0) throw TransportError("socket", sys_error("socket"));
  const int one = 1;
  ::setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
  if (::bind(listen_fd_, reinterpret_cast<const sockaddr*>(&sa), sizeof sa) < 0) {
    const std::string err = sys_error("bind");
    ::close(listen_fd_);
    listen_fd_ = -1;
    throw TransportError("listen", err);
  }
  if (::listen(listen_fd_, 64) < 0) {
    const std::string err = sys_error("listen");
    ::close(listen_fd_);
    listen_fd_ = -1;
    throw TransportError("listen", err);
  }
  sockaddr_in bound{};
  socklen_t len = sizeof bound;
  ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&bound), &len);
  port_ = ntohs(bound.sin_port);
  running_ = true;
  acceptor_ = std::thread([this] { accept_loop(); });
}

void Server::stop() {
  if (!running_.exchange(false)) return;
  if (acceptor_.joinable()) acceptor_.join();
  ::close(listen_fd_);
  listen_fd_ = -1;
  std::list<std::thread> threads;
  {
    std::lock_guard lock(conn_mutex_);
    for (int fd : connection_fds_) ::shutdown(fd, SHUT_RDWR);
    threads.swap(connections_);
  }
  for (auto& t : threads) t.join();
}

void Server::accept_loop() {
  while (running_) {
    pollfd p{listen_fd_, POLLIN, 0};
    const int ready = ::poll(&p, 1, 50);
    if (ready <= 0) continue;
    const int fd = ::accept(listen_fd_, nullptr, nullptr);
    if (fd < 0) continue;
    const int one = 1;
    ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
    std::lock_guard lock(conn_mutex_);
    if (!running_) {
      ::close(fd);
      break;
    }
    connection_fds_.push_back(fd);
    connections_.emplace_back([this, fd] { serve_connection(fd); });
  }
}

void Server::serve_connection(int fd) {
  FrameReader reader;
  try {
    while (running_) {
      std::optional<Message> in;
      try {
        in = read_message(fd, reader);
      } catch (const FrameError& e) {
        write_all(fd, frame_encode(ErrorMessage{0, "FrameError", e.what()}));
        break;
      }
      if (!in) break;
      const Message out = server_handle(registry_, *in);
      ++served_;
      write_all(fd, frame_encode(out));
    }
  } catch (const Error&) {
    // peer went away
  }
  std::lock_guard lock(conn_mutex_);
  connection_fds_.remove(fd);
  ::close(fd);
}

Client::Client(const Endpoint& server) {
  const sockaddr_in sa = resolve(server);
  fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
  if (fd_ < 0) throw TransportError("socket", sys_error("socket"));
  if (::connect(fd_, reinterpret_cast<const sockaddr*>(&sa), sizeof sa) < 0) {
    const std::string err = sys_error("connect");
    ::close(fd_);
    fd_ = -1;
    throw TransportError("connect", err + " (" + server.host + ":" + std::to_string(server.port) + ")");
  }
  const int one = 1;
  ::setsockopt(fd_, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
}

Client::~Client() {
  if (fd_ >= 0) ::close(fd_);
}

void Client::send(const Message& m) { write_all(fd_, frame_encode(m)); }

Message Client::receive() {
  auto m = read_message(fd_, reader_);
  if (!m) throw TransportError("socket", "server closed the connection");
  return std::move(*m);
}

namespace {

[[noreturn]] void rethrow(const ErrorMessage& e) {
  const std::string field = "server";
  if (e.kind == "UnknownModel") throw UnknownModel(field, e.message);
  if (e.kind == "ShapeError") throw ShapeError(field, e.message);
  if (e.kind == "SchemaError") throw SchemaError(field, e.message);
  if (e.kind == "InvariantError") throw InvariantError(field, e.message);
  if (e.kind == "ConstraintError") throw ConstraintError(field, e.message);
  if (e.kind == "ConstraintViolation") throw ConstraintViolation(field, e.message);
  if (e.kind == "FrameError") throw FrameError(field, e.message);
  throw TransportError(field, e.kind + ": " + e.message);
}

}  // namespace

InferenceResponse Client::infer(const InferenceRequest& req) {
  send(req);
  Message m = receive();
  if (auto* e = std::get_if<ErrorMessage>(&m)) rethrow(*e);
  auto* r = std::get_if<InferenceResponse>(&m);
  if (!r) throw FrameError("message", "expected a response");
  if (r->nonce != req.nonce) throw FrameError("nonce", "response nonce does not match the request");
  return std::move(*r);
}

}  // namespace ttc
