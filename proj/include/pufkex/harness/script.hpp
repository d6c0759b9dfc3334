#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "pufkex/crypto.hpp"

namespace pufkex::harness {

// Each action decides what replaces one intercepted open-channel frame.
struct Forward {
  friend bool operator==(const Forward&, const Forward&) = default;
};
struct Drop {
  friend bool operator==(const Drop&, const Drop&) = default;
};
/// Deliver observed frame `index` instead.
struct Replay {
  std::size_t index = 0;
  friend bool operator==(const Replay&, const Replay&) = default;
};
/// Deliver observed frame `index` with one bit flipped (bit 0 = MSB of the byte).
struct Tamper {
  std::size_t index = 0;
  std::size_t byte_offset = 0;
  unsigned bit = 0;
  friend bool operator==(const Tamper&, const Tamper&) = default;
};
struct Inject {
  Bytes frame;
  friend bool operator==(const Inject&, const Inject&) = default;
};

using Action = std::variant<Forward, Drop, Replay, Tamper, Inject>;

struct Script {
  std::vector<Action> actions;
  friend bool operator==(const Script&, const Script&) = default;
};

// Text form:
//   pufkex-script 1
//   forward | drop | replay <i> | tamper <i> <byte> <bit> | inject <hex>
// Blank lines and lines starting with '#' are ignored.
Script parse_script(std::string_view text);
std::string format_script(const Script& script);

}  // namespace pufkex::harness
