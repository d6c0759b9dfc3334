#include "pufkex/app/client.hpp"

#include "pufkex/app/tunnel.hpp"
#include "pufkex/app/wire.hpp"
#include "pufkex/error.hpp"
#include "pufkex/protocol/messages.hpp"

namespace pufkex::app {

using namespace pufkex::protocol;

namespace {

template <typename T>
T take(const std::optional<Bytes>& bytes, std::uint32_t sid, const char* step) {
  if (!bytes) throw Error(Errc::Io, step, "peer closed the connection");
  raise_if_error(*bytes);
  const Frame frame = decode(*bytes);
  if (frame.session_id != sid) throw Error(Errc::MalformedMessage, step, "session id mismatch");
  const T* m = std::get_if<T>(&frame.message);
  if (!m) throw Error(Errc::PhaseViolation, step, std::string("unexpected ") + std::string(message_name(frame.message)));
  return *m;
}

}  // namespace

HandshakeResult run_tcp_handshake(const ClientIdentity& identity, const ClientOptions& options, RandomSource& rng) {
  ClientSession client(identity, options.session);
  const auto& sid_bytes = rng.next_word().bytes();
  const std::uint32_t sid = (std::uint32_t{sid_bytes[0]} << 24) | (std::uint32_t{sid_bytes[1]} << 16) |
                            (std::uint32_t{sid_bytes[2]} << 8) | sid_bytes[3];

  Socket device = connect_tcp(options.device, options.io_timeout);
  device.set_timeout(options.io_timeout);
  send_frame(device, encode(Frame{sid, client.connect_request()}));
  const ConnEstablish est = client.on_establish(take<ConnEstablish>(recv_frame(device), sid, "client_handle_establish"));

  Socket raw = connect_tcp(options.server, options.io_timeout);
  raw.set_timeout(options.io_timeout);
  Tunnel server = Tunnel::connect(std::move(raw), options.psk);
  server.send(encode_login({identity.client_id, identity.alias}));
  server.send(encode(Frame{sid, est}));

  const AuthChallenge challenge =
      client.on_challenge(take<AuthChallenge>(server.recv(), sid, "client_forward_challenge"));
  send_frame(device, encode(Frame{sid, challenge}));

  const CrpRotate rotate = client.on_rotate(take<CrpRotate>(recv_frame(device), sid, "client_forward_rotate"));
  server.send(encode(Frame{sid, rotate}));

  const ClientNonce nonce = client.on_rotate_ack(take<RotateAck>(server.recv(), sid, "client_send_nonce"), rng);
  send_frame(device, encode(Frame{sid, nonce}));

  const SessionKey key = client.on_device_nonce(take<DeviceNonce>(recv_frame(device), sid, "client_finish"));
  return HandshakeResult{est.device_id, key.key, client.tally()};
}

}  // namespace pufkex::app
