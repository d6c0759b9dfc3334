#pragma once

#include <string>

#include "pufkex/app/net.hpp"
#include "pufkex/protocol/roles.hpp"

namespace pufkex::app {

struct ClientOptions {
  Endpoint device;  // open channel
  Endpoint server;  // tunnelled
  std::string psk;
  std::chrono::milliseconds io_timeout{10'000};
  protocol::SessionOptions session;
};

struct HandshakeResult {
  DeviceId device_id;
  Word256 key;
  protocol::OpTally client_ops;
};

/// Drives one handshake over TCP, relaying between device and server.
/// Failures (including the peers' error frames) surface as Error.
HandshakeResult run_tcp_handshake(const protocol::ClientIdentity& identity, const ClientOptions& options,
                                  RandomSource& rng);

}  // namespace pufkex::app
