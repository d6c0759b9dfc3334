#pragma once

#include <cstdint>
#include <optional>
#include <string_view>

#include "pufkex/app/net.hpp"

namespace pufkex::app {

/// Authenticated-encryption channel keyed by a pre-shared secret; stands in
/// for TLS between client and server.
///
/// Handshake: client -> "PKT1" || Nc(32); server -> Ns(32) || HMAC(K, "server" || Nc || Ns);
/// client -> HMAC(K, "client" || Nc || Ns), with K = SHA-256(psk). Either side
/// closes with TunnelRejected when the other's MAC is wrong.
/// Record: nonce(12) || ChaCha20-Poly1305 ciphertext || tag(16), the nonce
/// carrying a per-direction counter that must arrive in order.
class Tunnel {
 public:
  static Tunnel connect(Socket socket, std::string_view psk);
  static Tunnel accept(Socket socket, std::string_view psk);

  void send(ByteView plaintext);
  /// nullopt on clean EOF.
  std::optional<Bytes> recv();
  Socket& socket() noexcept { return socket_; }

 private:
  Tunnel(Socket socket, const Word256& send_key, const Word256& recv_key)
      : socket_(std::move(socket)), send_key_(send_key), recv_key_(recv_key) {}

  Socket socket_;
  Word256 send_key_, recv_key_;
  std::uint64_t send_counter_ = 0;
  std::uint64_t recv_counter_ = 0;
};

inline constexpr std::size_t kTunnelNonceBytes = 12;
inline constexpr std::size_t kTunnelTagBytes = 16;

}  // namespace pufkex::app
