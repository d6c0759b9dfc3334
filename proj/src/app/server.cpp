#include "pufkex/app/server.hpp"

#include <spdlog/spdlog.h>
#include <sys/socket.h>

#include "pufkex/app/tunnel.hpp"
#include "pufkex/app/wire.hpp"
#include "pufkex/protocol/messages.hpp"

namespace pufkex::app {

using namespace pufkex::protocol;

ServerDaemon::ServerDaemon(const AppConfig& config, std::unique_ptr<RandomSource> rng)
    : config_(config),
      file_(config.store_path),
      store_(file_.load(), [this](const StoreSnapshot& s) { file_.save(s); }),
      listener_(config.listen),
      rng_(std::move(rng)) {}

ServerDaemon::~ServerDaemon() {
  stop();
  {
    std::lock_guard lock(conn_mutex_);
    for (const auto& [id, fd] : live_fds_) ::shutdown(fd, SHUT_RDWR);
  }
  for (auto& t : threads_)
    if (t.joinable()) t.join();
}

void ServerDaemon::run() {
  spdlog::info("server listening on {}:{}", config_.listen.host, port());
  std::uint64_t next_id = 0;
  while (!stopping_) {
    auto socket = listener_.accept(std::chrono::milliseconds(100));
    if (!socket) continue;
    const std::uint64_t id = next_id++;
    threads_.emplace_back([this, id, s = std::move(*socket)]() mutable { serve(id, std::move(s)); });
  }
  std::lock_guard lock(conn_mutex_);
  for (const auto& [id, fd] : live_fds_) ::shutdown(fd, SHUT_RDWR);
}

void ServerDaemon::serve(std::uint64_t id, Socket socket) {
  {
    std::lock_guard lock(conn_mutex_);
    live_fds_[id] = socket.fd();
  }
  std::optional<ServerSession> session;
  std::optional<Tunnel> tunnel;
  const SessionOptions options{config_.session_timeout};
  try {
    socket.set_timeout(config_.io_timeout);
    tunnel.emplace(Tunnel::accept(std::move(socket), config_.psk));
    std::optional<DeviceId> logged_in;
    while (auto bytes = tunnel->recv()) {
      try {
        if (!logged_in) {
          const Login login = decode_login(*bytes);
          const auto record = store_.find_client(login.client_id);
          if (!record) throw Error(Errc::UnknownClient, "server_login", login.client_id.hex());
          if (!ct_equal(record->alias, login.alias))
            throw Error(Errc::AuthenticationFailure, "server_login", "credentials do not match");
          logged_in = login.client_id;
          continue;
        }
        const Frame frame = decode(*bytes);
        if (const auto* est = std::get_if<ConnEstablish>(&frame.message)) {
          if (session) throw Error(Errc::PhaseViolation, "server_begin_auth", "session already open");
          if (est->client_id != *logged_in)
            throw Error(Errc::IdentityMismatch, "server_begin_auth", "ConnEstablish names another client");
          std::lock_guard rng_lock(rng_mutex_);
          auto [s, challenge] = ServerSession::begin_auth(store_, est->device_id, est->client_id, *rng_, options);
          session.emplace(std::move(s));
          tunnel->send(encode(Frame{frame.session_id, challenge}));
          spdlog::debug("session {:08x}: challenge sent for device {}", frame.session_id, est->device_id.hex());
        } else if (const auto* rot = std::get_if<CrpRotate>(&frame.message)) {
          if (!session) throw Error(Errc::PhaseViolation, "server_handle_rotate", "no open session");
          const RotateAck ack = session->handle_rotate(store_, *rot);
          ++completed_;
          tunnel->send(encode(Frame{frame.session_id, ack}));
          spdlog::info("session {:08x}: CRP rotated", frame.session_id);
          break;
        } else {
          throw Error(Errc::PhaseViolation, "server_dispatch",
                      std::string("unexpected ") + std::string(message_name(frame.message)));
        }
      } catch (const Error& e) {
        spdlog::warn("connection {}: {}", id, e.what());
        session.reset();
        tunnel->send(encode_error(e));
        break;
      }
    }
  } catch (const std::exception& e) {
    spdlog::warn("connection {}: {}", id, e.what());
  }
  session.reset();
  std::lock_guard lock(conn_mutex_);
  live_fds_.erase(id);
}

}  // namespace pufkex::app
