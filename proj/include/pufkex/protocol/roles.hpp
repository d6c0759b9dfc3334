#pragma once

#include <chrono>
#include <optional>
#include <utility>

#include "pufkex/crypto.hpp"
#include "pufkex/protocol/messages.hpp"
#include "pufkex/protocol/store.hpp"
#include "pufkex/sram_puf.hpp"

namespace pufkex::protocol {

using Clock = std::chrono::steady_clock;

struct SessionOptions {
  std::chrono::milliseconds timeout{30'000};
};

/// Cryptographic work done by one role during one handshake.
struct OpTally {
  unsigned hash_ops = 0;
  unsigned xor_ops = 0;
  unsigned puf_ops = 0;
  friend bool operator==(const OpTally&, const OpTally&) = default;
};

struct SessionKey {
  Word256 key;
};

/// H(N_c, N_p, Id_c', Id_p).
Word256 derive_session_key(const Word256& client_nonce, const Word256& device_nonce,
                           const Word256& client_alias, DeviceId device_id);

// Counts every hash, XOR and PUF evaluation it performs.
class OpMeter {
 public:
  Word256 hash(std::initializer_list<HashField> fields);
  Word256 mix(const Word256& a, const Word256& b);
  Word256 puf(const puf::PufFunction& f, const Word256& challenge);
  const OpTally& tally() const noexcept { return tally_; }

 private:
  OpTally tally_;
};

/// Step 1 at the device: echo the client id next to our own.
ConnEstablish device_answer_conn_req(DeviceId self, const ConnReq& request);

class ServerSession {
 public:
  enum class Phase { AwaitRotate, Done, Aborted };

  /// Step 2. Fails with UnknownDevice / UnknownClient / DeviceBusy before any
  /// session state exists.
  static std::pair<ServerSession, AuthChallenge> begin_auth(ServerStore& store, DeviceId device_id,
                                                            DeviceId client_id, RandomSource& rng,
                                                            SessionOptions options = {},
                                                            Clock::time_point now = Clock::now());

  /// Step 5. On success the stored CRP is rotated; on failure it is untouched.
  RotateAck handle_rotate(ServerStore& store, const CrpRotate& message,
                          Clock::time_point now = Clock::now());

  /// Marks an in-flight session as aborted once its deadline has passed.
  bool expire_if_due(Clock::time_point now);

  Phase phase() const noexcept { return phase_; }
  DeviceId device_id() const noexcept { return crp_.device_id; }
  DeviceId client_id() const noexcept { return client_id_; }
  const Word256& client_alias() const noexcept { return alias_; }
  const OpTally& tally() const noexcept { return meter_.tally(); }
  Clock::time_point expires_at() const noexcept { return expires_at_; }

  // Session secrets, exposed for analysis tooling.
  const Word256& t1() const noexcept { return t1_; }
  const Word256& t2() const noexcept { return t2_; }
  const CrpRecord& crp() const noexcept { return crp_; }

 private:
  ServerSession() = default;
  void abort() noexcept;

  DeviceLease lease_;
  CrpRecord crp_;
  DeviceId client_id_;
  Word256 alias_;
  Word256 t1_, t2_;
  Phase phase_ = Phase::AwaitRotate;
  Clock::time_point expires_at_;
  OpMeter meter_;
};

class DeviceSession {
 public:
  enum class Phase { AwaitNonce, Established, Aborted };

  /// Steps 3-4. Throws AuthenticationFailure (and emits nothing) when M4 does
  /// not verify.
  static std::pair<DeviceSession, CrpRotate> handle_auth(const puf::PufFunction& puf,
                                                         DeviceId self,
                                                         const AuthChallenge& message,
                                                         RandomSource& rng,
                                                         SessionOptions options = {},
                                                         Clock::time_point now = Clock::now());

  /// Step 7, device half.
  std::pair<DeviceNonce, SessionKey> handle_nonce(const ClientNonce& message, RandomSource& rng,
                                                  Clock::time_point now = Clock::now());

  Phase phase() const noexcept { return phase_; }
  DeviceId device_id() const noexcept { return self_; }
  const OpTally& tally() const noexcept { return meter_.tally(); }
  const std::optional<Word256>& key() const noexcept { return key_; }

  const Word256& challenge() const noexcept { return challenge_; }
  const Word256& response() const noexcept { return response_; }
  const Word256& t1() const noexcept { return t1_; }
  const Word256& t2() const noexcept { return t2_; }
  const Word256& client_alias() const noexcept { return alias_; }
  const Word256& new_challenge() const noexcept { return new_challenge_; }
  const Word256& new_response() const noexcept { return new_response_; }
  const Word256& client_nonce() const noexcept { return client_nonce_; }
  const Word256& device_nonce() const noexcept { return device_nonce_; }

 private:
  DeviceSession() = default;

  DeviceId self_;
  Word256 challenge_, response_;
  Word256 t1_, t2_, alias_;
  Word256 new_challenge_, new_response_;
  Word256 client_nonce_, device_nonce_;
  std::optional<Word256> key_;
  Phase phase_ = Phase::AwaitNonce;
  Clock::time_point expires_at_;
  OpMeter meter_;
};

/// What a registered client knows about itself.
struct ClientIdentity {
  DeviceId client_id;
  Word256 alias;

  static ClientIdentity from_credentials(std::string_view username, std::string_view password,
                                         DeviceId client_id);
};

class ClientSession {
 public:
  enum class Phase {
    AwaitEstablish,
    AwaitServer,
    AwaitDeviceRotate,
    AwaitRotateAck,
    AwaitDeviceNonce,
    Established,
    Aborted
  };

  explicit ClientSession(ClientIdentity identity, SessionOptions options = {},
                         Clock::time_point now = Clock::now());

  /// Step 1: connection request for the device.
  ConnReq connect_request() const { return ConnReq{identity_.client_id}; }
  /// Step 1: checks the echoed client id; returns the message for the server.
  ConnEstablish on_establish(const ConnEstablish& message, Clock::time_point now = Clock::now());
  /// Step 3: relay of the server's challenge toward the device.
  AuthChallenge on_challenge(const AuthChallenge& message, Clock::time_point now = Clock::now());
  /// Step 4: relay of the device's rotation toward the server.
  CrpRotate on_rotate(const CrpRotate& message, Clock::time_point now = Clock::now());
  /// Step 6.
  ClientNonce on_rotate_ack(const RotateAck& message, RandomSource& rng,
                            Clock::time_point now = Clock::now());
  /// Step 7, client half.
  SessionKey on_device_nonce(const DeviceNonce& message, Clock::time_point now = Clock::now());

  void abort() noexcept { phase_ = Phase::Aborted; }

  Phase phase() const noexcept { return phase_; }
  const ClientIdentity& identity() const noexcept { return identity_; }
  std::optional<DeviceId> device_id() const noexcept { return device_id_; }
  const OpTally& tally() const noexcept { return meter_.tally(); }
  const std::optional<Word256>& key() const noexcept { return key_; }

  const Word256& rotate_ack() const noexcept { return m9_; }
  const Word256& client_nonce() const noexcept { return client_nonce_; }
  const Word256& device_nonce() const noexcept { return device_nonce_; }

 private:
  void expect(Phase wanted, const char* step, Clock::time_point now);

  ClientIdentity identity_;
  std::optional<DeviceId> device_id_;
  Word256 m9_, client_nonce_, device_nonce_;
  std::optional<Word256> key_;
  Phase phase_ = Phase::AwaitEstablish;
  Clock::time_point expires_at_;
  OpMeter meter_;
};

}  // namespace pufkex::protocol
