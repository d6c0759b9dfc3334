#pragma once

#include <array>
#include <cstdint>
#include <string_view>
#include <vector>

#include "pufkex/crypto.hpp"
#include "pufkex/protocol/roles.hpp"

namespace pufkex::protocol {

enum class Role { Device = 0, Client = 1, Server = 2 };
inline constexpr std::array<Role, 3> kRoles{Role::Device, Role::Client, Role::Server};
std::string_view role_name(Role role);

/// Record of an instrumented run: every frame hop with its sender, and the
/// op tallies each role accumulated.
struct Transcript {
  struct Hop {
    Role sender;
    Bytes frame;
  };
  std::vector<Hop> hops;
  std::array<OpTally, 3> ops{};

  void record(Role sender, Bytes frame) { hops.push_back({sender, std::move(frame)}); }
  OpTally& ops_of(Role role) { return ops[static_cast<std::size_t>(role)]; }
};

struct RoleCost {
  OpTally ops;
  std::uint64_t payload_bits_sent = 0;
  friend bool operator==(const RoleCost&, const RoleCost&) = default;
};

struct CostReport {
  std::array<RoleCost, 3> roles{};

  const RoleCost& of(Role role) const { return roles[static_cast<std::size_t>(role)]; }
  std::uint64_t total_bits() const;
  OpTally total_ops() const;
};

/// Payload bits are charged to whoever puts a frame on the wire, relays
/// included. ConnReq and ConnEstablish are the initial request-response pair
/// and are not charged.
CostReport count_costs(const Transcript& transcript);

}  // namespace pufkex::protocol
