#pragma once

#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "pufkex/error.hpp"
#include "pufkex/harness/knowledge.hpp"
#include "pufkex/harness/script.hpp"
#include "pufkex/protocol/costs.hpp"
#include "pufkex/protocol/roles.hpp"
#include "pufkex/protocol/store.hpp"
#include "pufkex/sram_puf.hpp"

namespace pufkex::harness {

using protocol::Role;

enum class ChannelKind { Open, Secure };

struct InFlight {
  Role from;
  Role to;
  Bytes frame;
};

/// FIFO link between two parties. The simulator hands Open-channel frames to
/// the adversary before they are queued; Secure frames bypass it.
class SimChannel {
 public:
  explicit SimChannel(ChannelKind kind) : kind_(kind) {}

  ChannelKind kind() const noexcept { return kind_; }
  void push(InFlight f) { queue_.push_back(std::move(f)); }
  bool empty() const noexcept { return queue_.empty(); }
  InFlight pop();
  /// Everything ever queued, in order.
  const std::vector<InFlight>& log() const noexcept { return log_; }
  void record(const InFlight& f) { log_.push_back(f); }

 private:
  ChannelKind kind_;
  std::deque<InFlight> queue_;
  std::vector<InFlight> log_;
};

class Adversary {
 public:
  struct Observed {
    Bytes frame;
    Role from;
  };
  /// Consulted before the script for each intercepted frame. Returning a value
  /// overrides the script; the script position still advances.
  using Strategy = std::function<std::optional<std::vector<Bytes>>(Adversary&, std::size_t index)>;

  explicit Adversary(Script script = {}, Strategy strategy = {})
      : script_(std::move(script)), strategy_(std::move(strategy)) {}

  /// Records the frame, then returns the frames to deliver in its place.
  std::vector<Bytes> intercept(const Bytes& frame, Role from);

  const std::vector<Observed>& observed() const noexcept { return observed_; }
  /// A copy of observed frame `index` carrying another session id.
  Bytes replay_as(std::size_t index, std::uint32_t session_id) const;
  /// Index of the most recent observed frame with this message tag.
  std::optional<std::size_t> last_with_tag(std::uint8_t tag) const;

 private:
  const Bytes& source(std::size_t index) const;

  Script script_;
  Strategy strategy_;
  std::size_t next_action_ = 0;
  std::vector<Observed> observed_;
};

/// One enrolled device and one registered client, derived from a seed.
struct Fixture {
  std::uint64_t seed = 0;
  DeviceId device_id;
  DeviceId client_id;
  std::string username;
  std::string password;
  std::shared_ptr<const puf::PufFunction> puf;
  protocol::StoreSnapshot store;

  static Fixture make(std::uint64_t seed, std::size_t cell_count = 1024);
};

struct Established {
  bool keys_match = false;
};
struct AbortedAt {
  std::string step;
  Errc error = Errc::Io;
  std::string detail;
};
using Outcome = std::variant<Established, AbortedAt>;

std::string describe(const Outcome& outcome);

struct SimOptions {
  /// Served to the server before its seeded stream.
  std::vector<Word256> server_words;
  protocol::SessionOptions session;
};

/// Deterministic three-party network. Honest parties run the protocol roles;
/// the adversary sits on the client-device link.
class Simulation {
 public:
  Simulation(const Fixture& fixture, std::uint64_t seed, Adversary adversary = Adversary{},
             SimOptions options = {});

  /// The honest client opens a new handshake. Returns its session id.
  std::uint32_t start_session();
  /// Adversary-originated frame, routed by its tag.
  void inject_open(Bytes frame);
  /// Delivers frames until all channels drain or a party aborts. A run that
  /// drains without finishing ends in SessionExpired at the waiting step.
  Outcome run();

  std::size_t deliveries() const noexcept { return deliveries_; }
  const Adversary& adversary() const noexcept { return adversary_; }
  const protocol::ServerStore& store() const noexcept { return store_; }
  const SimChannel& open_channel() const noexcept { return open_; }
  const SimChannel& secure_channel() const noexcept { return secure_; }
  /// Ground truth for every session any honest party took part in.
  std::vector<SessionTruth> truths() const;
  /// Frames the honest parties sent, plus their summed op tallies.
  protocol::Transcript transcript() const;
  /// Keys established during the latest run() only.
  std::optional<Word256> client_key() const;
  std::optional<Word256> device_key() const;
  /// Values the server holds: its session secrets, the store, and every Word256
  /// that crossed the secure channel.
  std::vector<Word256> server_view() const;

 private:
  struct DeviceState {
    std::optional<std::uint32_t> session;
    std::optional<protocol::DeviceSession> handshake;
  };

  void send(Role from, Role to, const protocol::WireMessage& message, std::uint32_t session_id);
  void flush();
  void enqueue(InFlight f);
  void deliver(const InFlight& f);
  void at_client(Role from, const protocol::Frame& frame);
  void at_device(const protocol::Frame& frame);
  void at_server(const protocol::Frame& frame);
  void wind_down();
  Outcome finish();
  protocol::Clock::time_point now() const;

  const Fixture& fixture_;
  SimOptions options_;
  Adversary adversary_;
  protocol::ServerStore store_;
  SeededRandom server_fallback_, device_rng_, client_rng_;
  ScriptedRandom server_rng_;
  SimChannel open_{ChannelKind::Open};
  SimChannel secure_{ChannelKind::Secure};
  std::deque<ChannelKind> order_;  // which channel holds the next frame
  std::vector<InFlight> outbox_;
  protocol::Clock::duration skew_{};
  std::size_t run_start_device_ = 0;
  std::optional<std::size_t> run_client_;  // client session driven by the latest run

  std::uint32_t next_session_ = 1;
  std::optional<std::uint32_t> client_session_id_;
  std::vector<std::pair<std::uint32_t, protocol::ClientSession>> client_sessions_;
  DeviceState device_;
  std::vector<std::pair<std::uint32_t, protocol::DeviceSession>> device_history_;
  std::map<std::uint32_t, protocol::ServerSession> server_sessions_;
  std::vector<std::pair<std::uint32_t, protocol::ServerSession>> server_history_;
  protocol::Transcript sent_;
  std::size_t deliveries_ = 0;
  std::optional<AbortedAt> abort_;
};

}  // namespace pufkex::harness
