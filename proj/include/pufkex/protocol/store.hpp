#pragma once

#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <string_view>

#include "pufkex/crypto.hpp"
#include "pufkex/sram_puf.hpp"

namespace pufkex::protocol {

/// The one challenge-response pair the server holds for a device.
struct CrpRecord {
  DeviceId device_id;
  Word256 challenge;
  Word256 response;
  friend bool operator==(const CrpRecord&, const CrpRecord&) = default;
};

struct ClientRecord {
  DeviceId client_id;
  Word256 alias;  // Id_c' = H(U_c, P_c, Id_c)
  friend bool operator==(const ClientRecord&, const ClientRecord&) = default;
};

struct Registration {
  ClientRecord record;
  bool policy_warning = false;  // empty username or password
};

/// Keyed by id, so a device can never hold two CRPs.
struct StoreSnapshot {
  std::map<DeviceId, CrpRecord> crps;
  std::map<DeviceId, ClientRecord> clients;
  friend bool operator==(const StoreSnapshot&, const StoreSnapshot&) = default;
};

/// H(U_c, P_c, Id_c), with username and password length-prefixed.
Word256 client_alias(std::string_view username, std::string_view password, DeviceId client_id);

class ServerStore;

/// Exclusive claim on a device for the lifetime of one server session.
class DeviceLease {
 public:
  DeviceLease() = default;
  DeviceLease(DeviceLease&& other) noexcept;
  DeviceLease& operator=(DeviceLease&& other) noexcept;
  DeviceLease(const DeviceLease&) = delete;
  DeviceLease& operator=(const DeviceLease&) = delete;
  ~DeviceLease();

  void release() noexcept;
  bool held() const noexcept { return store_ != nullptr; }

 private:
  friend class ServerStore;
  DeviceLease(ServerStore* store, DeviceId id) : store_(store), id_(id) {}

  ServerStore* store_ = nullptr;
  DeviceId id_;
};

/// Server-side CRP database and client registry. Thread-safe. Every mutation
/// is offered to the persister before it becomes visible; a persister that
/// throws leaves the in-memory state untouched.
class ServerStore {
 public:
  using Persister = std::function<void(const StoreSnapshot&)>;

  explicit ServerStore(StoreSnapshot initial = {}, Persister persister = {});
  ServerStore(const ServerStore&) = delete;
  ServerStore& operator=(const ServerStore&) = delete;

  CrpRecord enroll_device(DeviceId device_id, const puf::PufFunction& puf, RandomSource& rng);
  Registration register_client(std::string_view username, std::string_view password,
                               DeviceId client_id);

  std::optional<CrpRecord> find_crp(DeviceId device_id) const;
  std::optional<ClientRecord> find_client(DeviceId client_id) const;
  StoreSnapshot snapshot() const;

  /// Replaces the device's CRP, provided it still matches `expected`.
  void commit_rotation(const CrpRecord& expected, const CrpRecord& next);

  /// Throws DeviceBusy while another session holds the device.
  DeviceLease acquire(DeviceId device_id);
  bool busy(DeviceId device_id) const;

  void set_persister(Persister persister);

 private:
  friend class DeviceLease;
  void release(DeviceId device_id) noexcept;
  void apply(StoreSnapshot next);  // caller holds mutex_

  mutable std::mutex mutex_;
  StoreSnapshot state_;
  Persister persister_;
  std::set<DeviceId> leased_;
};

}  // namespace pufkex::protocol
