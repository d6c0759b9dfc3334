#include "pufkex/protocol/messages.hpp"

#include "pufkex/error.hpp"

namespace pufkex::protocol {
namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

void put(Bytes& out, const DeviceId& id) {
  const auto b = id.to_bytes();
  out.insert(out.end(), b.begin(), b.end());
}
void put(Bytes& out, const Word256& w) { w.append_to(out); }

class PayloadReader {
 public:
  explicit PayloadReader(ByteView bytes) : bytes_(bytes) {}

  Word256 word() {
    need(Word256::kBytes);
    auto w = Word256::from_bytes(bytes_.subspan(pos_, Word256::kBytes));
    pos_ += Word256::kBytes;
    return w;
  }
  DeviceId id() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v = (v << 8) | bytes_[pos_++];
    return DeviceId{v};
  }
  void expect_end() const {
    if (pos_ != bytes_.size()) throw Error(Errc::MalformedMessage, "decode", "trailing bytes");
  }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) throw Error(Errc::MalformedMessage, "decode", "truncated payload");
  }

  ByteView bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::size_t payload_bits(const WireMessage& message) {
  return std::visit(Overloaded{
                        [](const ConnReq&) -> std::size_t { return 32; },
                        [](const ConnEstablish&) -> std::size_t { return 64; },
                        [](const AuthChallenge&) -> std::size_t { return 5 * 256; },
                        [](const CrpRotate&) -> std::size_t { return 4 * 256; },
                        [](const RotateAck&) -> std::size_t { return 256; },
                        [](const ClientNonce&) -> std::size_t { return 2 * 256; },
                        [](const DeviceNonce&) -> std::size_t { return 2 * 256; },
                    },
                    message);
}

std::string_view message_name(const WireMessage& message) {
  return std::visit(Overloaded{
                        [](const ConnReq&) { return std::string_view("ConnReq"); },
                        [](const ConnEstablish&) { return std::string_view("ConnEstablish"); },
                        [](const AuthChallenge&) { return std::string_view("AuthChallenge"); },
                        [](const CrpRotate&) { return std::string_view("CrpRotate"); },
                        [](const RotateAck&) { return std::string_view("RotateAck"); },
                        [](const ClientNonce&) { return std::string_view("ClientNonce"); },
                        [](const DeviceNonce&) { return std::string_view("DeviceNonce"); },
                    },
                    message);
}

std::uint8_t message_tag(const WireMessage& message) {
  return std::visit([](const auto& m) { return std::decay_t<decltype(m)>::kTag; }, message);
}

Bytes encode(const Frame& frame) {
  Bytes out;
  out.reserve(kFrameHeaderBytes + payload_bits(frame.message) / 8);
  out.push_back(message_tag(frame.message));
  put(out, DeviceId{frame.session_id});
  std::visit(Overloaded{
                 [&](const ConnReq& m) { put(out, m.client_id); },
                 [&](const ConnEstablish& m) {
                   put(out, m.device_id);
                   put(out, m.client_id);
                 },
                 [&](const AuthChallenge& m) {
                   for (const auto* w : {&m.m1, &m.m2, &m.m3, &m.m4, &m.challenge}) put(out, *w);
                 },
                 [&](const CrpRotate& m) {
                   for (const auto* w : {&m.m5, &m.m6, &m.m7, &m.m8}) put(out, *w);
                 },
                 [&](const RotateAck& m) { put(out, m.m9); },
                 [&](const ClientNonce& m) {
                   put(out, m.m10);
                   put(out, m.m11);
                 },
                 [&](const DeviceNonce& m) {
                   put(out, m.m12);
                   put(out, m.m13);
                 },
             },
             frame.message);
  return out;
}

std::uint32_t peek_session_id(ByteView bytes) {
  if (bytes.size() < kFrameHeaderBytes)
    throw Error(Errc::MalformedMessage, "decode", "frame shorter than header");
  return (std::uint32_t{bytes[1]} << 24) | (std::uint32_t{bytes[2]} << 16) |
         (std::uint32_t{bytes[3]} << 8) | std::uint32_t{bytes[4]};
}

Frame decode(ByteView bytes) {
  Frame frame;
  frame.session_id = peek_session_id(bytes);
  PayloadReader in(bytes.subspan(kFrameHeaderBytes));
  switch (bytes[0]) {
    case ConnReq::kTag:
      frame.message = ConnReq{in.id()};
      break;
    case ConnEstablish::kTag: {
      ConnEstablish m;
      m.device_id = in.id();
      m.client_id = in.id();
      frame.message = m;
      break;
    }
    case AuthChallenge::kTag: {
      AuthChallenge m;
      m.m1 = in.word();
      m.m2 = in.word();
      m.m3 = in.word();
      m.m4 = in.word();
      m.challenge = in.word();
      frame.message = m;
      break;
    }
    case CrpRotate::kTag: {
      CrpRotate m;
      m.m5 = in.word();
      m.m6 = in.word();
      m.m7 = in.word();
      m.m8 = in.word();
      frame.message = m;
      break;
    }
    case RotateAck::kTag:
      frame.message = RotateAck{in.word()};
      break;
    case ClientNonce::kTag: {
      ClientNonce m;
      m.m10 = in.word();
      m.m11 = in.word();
      frame.message = m;
      break;
    }
    case DeviceNonce::kTag: {
      DeviceNonce m;
      m.m12 = in.word();
      m.m13 = in.word();
      frame.message = m;
      break;
    }
    default:
      throw Error(Errc::MalformedMessage, "decode", "unknown tag");
  }
  in.expect_end();
  return frame;
}

}  // namespace pufkex::protocol
