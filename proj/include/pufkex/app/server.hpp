#pragma once

#include <atomic>
#include <map>
#include <memory>
#include <mutex>
#include <thread>

#include "pufkex/app/config.hpp"
#include "pufkex/app/net.hpp"
#include "pufkex/app/store_file.hpp"
#include "pufkex/protocol/roles.hpp"

namespace pufkex::app {

/// Authentication server. Accepts tunnelled client connections, one thread
/// per connection; each connection carries a login and one handshake:
///   client: Login           (checked against the registry; no reply)
///   client: ConnEstablish   server: AuthChallenge
///   client: CrpRotate       server: RotateAck
/// Every CRP rotation is written through to the store file before it is acknowledged.
class ServerDaemon {
 public:
  ServerDaemon(const AppConfig& config, std::unique_ptr<RandomSource> rng);
  ~ServerDaemon();

  /// Binds now, so port() is valid before run().
  std::uint16_t port() const noexcept { return listener_.port(); }
  /// Blocks until stop().
  void run();
  void stop() noexcept { stopping_ = true; }

  protocol::ServerStore& store() noexcept { return store_; }
  std::size_t sessions_completed() const noexcept { return completed_; }

 private:
  void serve(std::uint64_t id, Socket socket);

  AppConfig config_;
  StoreFile file_;
  protocol::ServerStore store_;
  Listener listener_;
  std::unique_ptr<RandomSource> rng_;
  std::mutex rng_mutex_;
  std::atomic<bool> stopping_{false};
  std::atomic<std::size_t> completed_{0};

  std::mutex conn_mutex_;
  std::map<std::uint64_t, int> live_fds_;
  std::vector<std::thread> threads_;
};

}  // namespace pufkex::app
