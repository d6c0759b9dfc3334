#pragma once

#include <optional>

#include "pufkex/crypto.hpp"
#include "pufkex/error.hpp"

namespace pufkex::app {

// A peer that gives up sends one error frame before closing:
//   0xE0 || code[1] || step_len[1] || step || detail
inline constexpr std::uint8_t kErrorTag = 0xE0;

// First record on a client-server tunnel, the login that precedes any
// handshake: 0xF0 || client_id[4] || Id_c'[32].
inline constexpr std::uint8_t kLoginTag = 0xF0;

struct Login {
  DeviceId client_id;
  Word256 alias;
};

Bytes encode_login(const Login& login);
/// Throws MalformedMessage.
Login decode_login(ByteView frame);

Bytes encode_error(const Error& error);
std::optional<Error> decode_error(ByteView frame);
/// Rethrows a peer's error frame locally; no-op for anything else.
void raise_if_error(ByteView frame);

}  // namespace pufkex::app
