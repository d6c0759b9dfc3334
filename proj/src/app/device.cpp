#include "pufkex/app/device.hpp"

#include <spdlog/spdlog.h>

#include <utility>

#include "pufkex/app/wire.hpp"
#include "pufkex/error.hpp"
#include "pufkex/protocol/messages.hpp"

namespace pufkex::app {

using namespace pufkex::protocol;

namespace {

Frame expect_frame(Socket& socket, const char* step) {
  auto bytes = recv_frame(socket);
  if (!bytes) throw Error(Errc::Io, step, "client closed the connection");
  raise_if_error(*bytes);
  return decode(*bytes);
}

template <typename T>
const T& as(const Frame& frame, const char* step) {
  const T* m = std::get_if<T>(&frame.message);
  if (!m) throw Error(Errc::PhaseViolation, step, std::string("unexpected ") + std::string(message_name(frame.message)));
  return *m;
}

}  // namespace

DeviceEmulator::DeviceEmulator(DeviceId self, puf::PufFunction puf, const Endpoint& listen,
                               std::unique_ptr<RandomSource> rng, std::chrono::milliseconds io_timeout,
                               SessionOptions options)
    : self_(self),
      puf_(std::move(puf)),
      listener_(listen),
      rng_(std::move(rng)),
      io_timeout_(io_timeout),
      options_(options) {}

DeviceEmulator::~DeviceEmulator() {
  stop();
  if (worker_.joinable()) worker_.join();
}

std::optional<Word256> DeviceEmulator::last_key() const {
  std::lock_guard lock(key_mutex_);
  return last_key_;
}

void DeviceEmulator::run() {
  spdlog::info("device {} listening on port {}", self_.hex(), port());
  while (!stopping_) {
    auto socket = listener_.accept(std::chrono::milliseconds(100));
    if (!socket) continue;
    if (busy_.exchange(true)) {
      ++refused_;
      spdlog::info("device {}: refusing concurrent connection", self_.hex());
      continue;  // closes the socket
    }
    if (worker_.joinable()) worker_.join();
    worker_ = std::thread([this, s = std::move(*socket)]() mutable {
      serve(std::move(s));
    });
  }
}

void DeviceEmulator::serve(Socket socket) {
  bool released = false;
  const auto release = [&] {
    if (!std::exchange(released, true)) busy_ = false;
  };
  try {
    socket.set_timeout(io_timeout_);
    try {
      const Frame req = expect_frame(socket, "device_receive");
      const ConnEstablish est = device_answer_conn_req(self_, as<ConnReq>(req, "device_answer_conn_req"));
      const std::uint32_t sid = req.session_id;
      send_frame(socket, encode(Frame{sid, est}));

      const Frame auth = expect_frame(socket, "device_receive");
      auto [session, rotate] =
          DeviceSession::handle_auth(puf_, self_, as<AuthChallenge>(auth, "device_handle_auth"), *rng_, options_);
      send_frame(socket, encode(Frame{sid, rotate}));

      const Frame nonce = expect_frame(socket, "device_receive");
      auto [reply, key] = session.handle_nonce(as<ClientNonce>(nonce, "device_handle_nonce"), *rng_);
      {
        std::lock_guard lock(key_mutex_);
        last_key_ = key.key;
      }
      ++established_;
      release();
      send_frame(socket, encode(Frame{sid, reply}));
      spdlog::info("device {}: session {:08x} established", self_.hex(), sid);
    } catch (const Error& e) {
      spdlog::warn("device {}: {}", self_.hex(), e.what());
      if (e.code() != Errc::Io) send_frame(socket, encode_error(e));
    }
  } catch (const std::exception& e) {
    spdlog::warn("device {}: {}", self_.hex(), e.what());
  }
  release();
}

}  // namespace pufkex::app
