#pragma once

#include <chrono>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>

#include "pufkex/crypto.hpp"

namespace pufkex::app {

inline constexpr std::size_t kMaxFrameBytes = 64 * 1024;

/// Owns one socket descriptor.
class Socket {
 public:
  Socket() = default;
  explicit Socket(int fd) : fd_(fd) {}
  Socket(Socket&& other) noexcept : fd_(std::exchange(other.fd_, -1)) {}
  Socket& operator=(Socket&& other) noexcept;
  Socket(const Socket&) = delete;
  Socket& operator=(const Socket&) = delete;
  ~Socket() { close(); }

  int fd() const noexcept { return fd_; }
  bool valid() const noexcept { return fd_ >= 0; }
  void close() noexcept;
  /// Wakes up anything blocked on the socket without releasing it.
  void shutdown() noexcept;
  void set_timeout(std::chrono::milliseconds timeout);

  void write_all(ByteView data);
  /// False on clean EOF before the first byte.
  bool read_exact(std::uint8_t* out, std::size_t n);

 private:
  int fd_ = -1;
};

struct Endpoint {
  std::string host = "127.0.0.1";
  std::uint16_t port = 0;

  /// "host:port" or ":port".
  static Endpoint parse(std::string_view text);
  std::string str() const;
};

Socket connect_tcp(const Endpoint& endpoint, std::chrono::milliseconds timeout);

class Listener {
 public:
  /// Port 0 picks a free port.
  explicit Listener(const Endpoint& endpoint);
  std::uint16_t port() const noexcept { return port_; }
  /// Waits up to `wait` for a connection.
  std::optional<Socket> accept(std::chrono::milliseconds wait);
  void close() noexcept { socket_.close(); }

 private:
  Socket socket_;
  std::uint16_t port_ = 0;
};

/// 4-byte big-endian length, then the body.
void send_frame(Socket& socket, ByteView body);
/// nullopt on clean EOF between frames.
std::optional<Bytes> recv_frame(Socket& socket, std::size_t max_bytes = kMaxFrameBytes);

}  // namespace pufkex::app
