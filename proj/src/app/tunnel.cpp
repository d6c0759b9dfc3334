#include "pufkex/app/tunnel.hpp"

#include <sodium.h>

#include <algorithm>

#include "pufkex/error.hpp"

namespace pufkex::app {
namespace {

constexpr std::string_view kMagic = "PKT1";

Word256 mac(const Word256& key, std::string_view label, const Word256& a, const Word256& b) {
  crypto_auth_hmacsha256_state st;
  crypto_auth_hmacsha256_init(&st, key.bytes().data(), key.bytes().size());
  crypto_auth_hmacsha256_update(&st, reinterpret_cast<const unsigned char*>(label.data()), label.size());
  crypto_auth_hmacsha256_update(&st, a.bytes().data(), a.bytes().size());
  crypto_auth_hmacsha256_update(&st, b.bytes().data(), b.bytes().size());
  Word256::Array out{};
  crypto_auth_hmacsha256_final(&st, out.data());
  return Word256(out);
}

struct Keys {
  Word256 client_to_server, server_to_client;
};

Keys derive(const Word256& k, const Word256& nc, const Word256& ns) {
  return {mac(k, "c2s", nc, ns), mac(k, "s2c", nc, ns)};
}

Bytes concat(std::initializer_list<ByteView> parts) {
  Bytes out;
  for (auto p : parts) out.insert(out.end(), p.begin(), p.end());
  return out;
}

Bytes expect_frame(Socket& s, std::size_t size, const char* step) {
  auto f = recv_frame(s, 4096);
  if (!f) throw Error(Errc::TunnelRejected, step, "peer closed during handshake");
  if (f->size() != size) throw Error(Errc::TunnelRejected, step, "handshake message has wrong size");
  return *f;
}

}  // namespace

Tunnel Tunnel::connect(Socket socket, std::string_view psk) {
  if (sodium_init() < 0) throw Error(Errc::EntropyUnavailable, "tunnel_connect");
  const Word256 k = hash256(psk);
  const Word256 nc = random_word();
  send_frame(socket, concat({ByteView(reinterpret_cast<const std::uint8_t*>(kMagic.data()), kMagic.size()),
                             nc.bytes()}));
  const Bytes reply = expect_frame(socket, 64, "tunnel_connect");
  const Word256 ns = Word256::from_bytes(ByteView(reply).first(32));
  const Word256 proof = Word256::from_bytes(ByteView(reply).subspan(32));
  if (!ct_equal(proof, mac(k, "server", nc, ns)))
    throw Error(Errc::TunnelRejected, "tunnel_connect", "server does not hold the pre-shared key");
  send_frame(socket, mac(k, "client", nc, ns).bytes());
  const Keys keys = derive(k, nc, ns);
  return Tunnel(std::move(socket), keys.client_to_server, keys.server_to_client);
}

Tunnel Tunnel::accept(Socket socket, std::string_view psk) {
  if (sodium_init() < 0) throw Error(Errc::EntropyUnavailable, "tunnel_accept");
  const Word256 k = hash256(psk);
  const Bytes hello = expect_frame(socket, kMagic.size() + 32, "tunnel_accept");
  if (!std::equal(kMagic.begin(), kMagic.end(), hello.begin()))
    throw Error(Errc::TunnelRejected, "tunnel_accept", "bad magic");
  const Word256 nc = Word256::from_bytes(ByteView(hello).subspan(kMagic.size()));
  const Word256 ns = random_word();
  send_frame(socket, concat({ns.bytes(), mac(k, "server", nc, ns).bytes()}));
  const Bytes proof = expect_frame(socket, 32, "tunnel_accept");
  if (!ct_equal(Word256::from_bytes(proof), mac(k, "client", nc, ns)))
    throw Error(Errc::TunnelRejected, "tunnel_accept", "client does not hold the pre-shared key");
  const Keys keys = derive(k, nc, ns);
  return Tunnel(std::move(socket), keys.server_to_client, keys.client_to_server);
}

namespace {

std::array<std::uint8_t, kTunnelNonceBytes> counter_nonce(std::uint64_t counter) {
  std::array<std::uint8_t, kTunnelNonceBytes> n{};
  for (int i = 0; i < 8; ++i) n[4 + i] = static_cast<std::uint8_t>(counter >> (56 - 8 * i));
  return n;
}

}  // namespace

void Tunnel::send(ByteView plaintext) {
  const auto nonce = counter_nonce(send_counter_++);
  Bytes record(kTunnelNonceBytes + plaintext.size() + kTunnelTagBytes);
  std::copy(nonce.begin(), nonce.end(), record.begin());
  unsigned long long written = 0;
  crypto_aead_chacha20poly1305_ietf_encrypt(record.data() + kTunnelNonceBytes, &written, plaintext.data(),
                                            plaintext.size(), nullptr, 0, nullptr, nonce.data(),
                                            send_key_.bytes().data());
  send_frame(socket_, record);
}

std::optional<Bytes> Tunnel::recv() {
  auto record = recv_frame(socket_);
  if (!record) return std::nullopt;
  if (record->size() < kTunnelNonceBytes + kTunnelTagBytes)
    throw Error(Errc::TunnelRejected, "tunnel_recv", "record too short");
  const auto expected = counter_nonce(recv_counter_);
  if (!std::equal(expected.begin(), expected.end(), record->begin()))
    throw Error(Errc::TunnelRejected, "tunnel_recv", "record out of sequence");
  Bytes plain(record->size() - kTunnelNonceBytes - kTunnelTagBytes);
  unsigned long long len = 0;
  if (crypto_aead_chacha20poly1305_ietf_decrypt(plain.data(), &len, nullptr,
                                                record->data() + kTunnelNonceBytes,
                                                record->size() - kTunnelNonceBytes, nullptr, 0,
                                                expected.data(), recv_key_.bytes().data()) != 0)
    throw Error(Errc::TunnelRejected, "tunnel_recv", "authentication tag mismatch");
  ++recv_counter_;
  plain.resize(len);
  return plain;
}

}  // namespace pufkex::app
