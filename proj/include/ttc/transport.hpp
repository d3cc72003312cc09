#pragma once

// Plain TCP transport for protocol frames. One thread per connection;
// requests on a connection are answered in order.

#include <atomic>
#include <cstdint>
#include <list>
#include <mutex>
#include <string>
#include <thread>

#include "ttc/protocol.hpp"

namespace ttc {

struct Endpoint {
  std::string host = "127.0.0.1";
  std::uint16_t port = 0;
};

// "host:port" or ":port" or "port".
Endpoint parse_endpoint(const std::string& addr);

class Server {
 public:
  Server(const ModelRegistry& registry, Endpoint listen);
  ~Server();
  Server(const Server&) = delete;
  Server& operator=(const Server&) = delete;

  void start();
  void stop();
  std::uint16_t port() const { return port_; }
  std::uint64_t requests_served() const { return served_.load(); }

 private:
  void accept_loop();
  void serve_connection(int fd);

  const ModelRegistry& registry_;
  Endpoint listen_;
  int listen_fd_ = -1;
  std::uint16_t port_ = 0;
  std::atomic<bool> running_{false};
  std::atomic<std::uint64_t> served_{0};
  std::thread acceptor_;
  std::mutex conn_mutex_;
  std::list<std::thread> connections_;
  std::list<int> connection_fds_;
};

class Client {
 public:
  explicit Client(const Endpoint& server);
  ~Client();
  Client(const Client&) = delete;
  Client& operator=(const Client&) = delete;

  void send(const Message& m);
  Message receive();
  // Sends a request and waits for the matching reply; ErrorMessage replies
  // are rethrown as the corresponding library error.
  InferenceResponse infer(const InferenceRequest& req);

 private:
  int fd_ = -1;
  FrameReader reader_;
};

}  // namespace ttc
