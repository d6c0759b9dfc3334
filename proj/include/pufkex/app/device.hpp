#pragma once

#include <atomic>
#include <memory>
#include <mutex>
#include <optional>
#include <thread>

#include "pufkex/app/net.hpp"
#include "pufkex/protocol/roles.hpp"
#include "pufkex/sram_puf.hpp"

namespace pufkex::app {

/// IoT device on the open channel. Listens only; it never opens a connection
/// of its own. While a handshake is in progress any further connection is
/// closed unanswered.
class DeviceEmulator {
 public:
  DeviceEmulator(DeviceId self, puf::PufFunction puf, const Endpoint& listen, std::unique_ptr<RandomSource> rng,
                 std::chrono::milliseconds io_timeout, protocol::SessionOptions options = {});
  ~DeviceEmulator();

  std::uint16_t port() const noexcept { return listener_.port(); }
  /// Blocks until stop().
  void run();
  void stop() noexcept { stopping_ = true; }

  bool busy() const noexcept { return busy_; }
  std::size_t refused() const noexcept { return refused_; }
  std::size_t established() const noexcept { return established_; }
  std::optional<Word256> last_key() const;

 private:
  void serve(Socket socket);

  DeviceId self_;
  puf::PufFunction puf_;
  Listener listener_;
  std::unique_ptr<RandomSource> rng_;
  std::chrono::milliseconds io_timeout_;
  protocol::SessionOptions options_;

  std::atomic<bool> stopping_{false};
  std::atomic<bool> busy_{false};
  std::atomic<std::size_t> refused_{0};
  std::atomic<std::size_t> established_{0};
  mutable std::mutex key_mutex_;
  std::optional<Word256> last_key_;
  std::thread worker_;
};

}  // namespace pufkex::app
