#include "pufkex/protocol/costs.hpp"

#include "pufkex/protocol/messages.hpp"

namespace pufkex::protocol {

std::string_view role_name(Role role) {
  switch (role) {
    case Role::Device: return "device";
    case Role::Client: return "client";
    case Role::Server: return "server";
  }
  return "?";
}

std::uint64_t CostReport::total_bits() const {
  std::uint64_t total = 0;
  for (const auto& r : roles) total += r.payload_bits_sent;
  return total;
}

OpTally CostReport::total_ops() const {
  OpTally t;
  for (const auto& r : roles) {
    t.hash_ops += r.ops.hash_ops;
    t.xor_ops += r.ops.xor_ops;
    t.puf_ops += r.ops.puf_ops;
  }
  return t;
}

CostReport count_costs(const Transcript& transcript) {
  CostReport report;
  for (std::size_t i = 0; i < report.roles.size(); ++i) report.roles[i].ops = transcript.ops[i];
  for (const auto& hop : transcript.hops) {
    const Frame frame = decode(hop.frame);
    if (std::holds_alternative<ConnReq>(frame.message) ||
        std::holds_alternative<ConnEstablish>(frame.message))
      continue;
    report.roles[static_cast<std::size_t>(hop.sender)].payload_bits_sent +=
        payload_bits(frame.message);
  }
  return report;
}

}  // namespace pufkex::protocol
