#pragma once

#include <cstdint>
#include <string_view>
#include <variant>

#include "pufkex/crypto.hpp"

namespace pufkex::protocol {

// Step 1, client -> device.
struct ConnReq {
  static constexpr std::uint8_t kTag = 0x01;
  DeviceId client_id;
  friend bool operator==(const ConnReq&, const ConnReq&) = default;
};

// Step 1, device -> client -> server.
struct ConnEstablish {
  static constexpr std::uint8_t kTag = 0x02;
  DeviceId device_id;
  DeviceId client_id;
  friend bool operator==(const ConnEstablish&, const ConnEstablish&) = default;
};

// Step 2/3, server -> client -> device: {M1, M2, M3, M4, C_p}.
struct AuthChallenge {
  static constexpr std::uint8_t kTag = 0x03;
  Word256 m1, m2, m3, m4, challenge;
  friend bool operator==(const AuthChallenge&, const AuthChallenge&) = default;
};

// Step 4/5, device -> client -> server: {M5, M6, M7, M8}.
struct CrpRotate {
  static constexpr std::uint8_t kTag = 0x04;
  Word256 m5, m6, m7, m8;
  friend bool operator==(const CrpRotate&, const CrpRotate&) = default;
};

// Step 5, server -> client: {M9}.
struct RotateAck {
  static constexpr std::uint8_t kTag = 0x05;
  Word256 m9;
  friend bool operator==(const RotateAck&, const RotateAck&) = default;
};

// Step 6, client -> device: {M10, M11}.
struct ClientNonce {
  static constexpr std::uint8_t kTag = 0x06;
  Word256 m10, m11;
  friend bool operator==(const ClientNonce&, const ClientNonce&) = default;
};

// Step 7, device -> client: {M12, M13}.
struct DeviceNonce {
  static constexpr std::uint8_t kTag = 0x07;
  Word256 m12, m13;
  friend bool operator==(const DeviceNonce&, const DeviceNonce&) = default;
};

using WireMessage =
    std::variant<ConnReq, ConnEstablish, AuthChallenge, CrpRotate, RotateAck, ClientNonce, DeviceNonce>;

struct Frame {
  std::uint32_t session_id = 0;
  WireMessage message;
  friend bool operator==(const Frame&, const Frame&) = default;
};

inline constexpr std::size_t kFrameHeaderBytes = 5;  // tag + session id

std::size_t payload_bits(const WireMessage& message);
std::string_view message_name(const WireMessage& message);
std::uint8_t message_tag(const WireMessage& message);

/// tag[1] || session_id[4, big-endian] || payload fields in declaration order.
Bytes encode(const Frame& frame);
/// Throws MalformedMessage on unknown tag, truncation or trailing bytes.
Frame decode(ByteView bytes);

/// Header only; throws MalformedMessage when shorter than a header.
std::uint32_t peek_session_id(ByteView bytes);

}  // namespace pufkex::protocol
