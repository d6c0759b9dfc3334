#include "pufkex/app/wire.hpp"

#include <algorithm>

namespace pufkex::app {

Bytes encode_login(const Login& login) {
  Bytes out{kLoginTag};
  const auto id = login.client_id.to_bytes();
  out.insert(out.end(), id.begin(), id.end());
  out.insert(out.end(), login.alias.bytes().begin(), login.alias.bytes().end());
  return out;
}

Login decode_login(ByteView frame) {
  if (frame.size() != 1 + 4 + Word256::kBytes || frame[0] != kLoginTag)
    throw Error(Errc::MalformedMessage, "server_login", "expected a login record");
  const std::uint32_t id = (std::uint32_t{frame[1]} << 24) | (std::uint32_t{frame[2]} << 16) |
                           (std::uint32_t{frame[3]} << 8) | frame[4];
  return Login{DeviceId{id}, Word256::from_bytes(frame.subspan(5))};
}

Bytes encode_error(const Error& error) {
  const std::string& step = error.step();
  const std::size_t step_len = std::min<std::size_t>(step.size(), 255);
  Bytes out{kErrorTag, static_cast<std::uint8_t>(error.code()), static_cast<std::uint8_t>(step_len)};
  out.insert(out.end(), step.begin(), step.begin() + static_cast<std::ptrdiff_t>(step_len));
  out.insert(out.end(), error.detail().begin(), error.detail().end());
  return out;
}

std::optional<Error> decode_error(ByteView frame) {
  if (frame.size() < 3 || frame[0] != kErrorTag) return std::nullopt;
  if (frame[1] > static_cast<std::uint8_t>(Errc::Io) || frame.size() < 3u + frame[2])
    return Error(Errc::MalformedMessage, "decode_error", "bad error frame");
  const auto* p = reinterpret_cast<const char*>(frame.data());
  return Error(static_cast<Errc>(frame[1]), std::string(p + 3, frame[2]),
               std::string(p + 3 + frame[2], frame.size() - 3 - frame[2]));
}

void raise_if_error(ByteView frame) {
  if (auto e = decode_error(frame)) throw *e;
}

}  // namespace pufkex::app
