#include "pufkex/protocol/store.hpp"

#include "pufkex/error.hpp"

namespace pufkex::protocol {
namespace {

ByteView as_bytes(std::string_view s) {
  return {reinterpret_cast<const std::uint8_t*>(s.data()), s.size()};
}

}  // namespace

Word256 client_alias(std::string_view username, std::string_view password, DeviceId client_id) {
  return hash_fields({Octets{as_bytes(username)}, Octets{as_bytes(password)}, client_id});
}

DeviceLease::DeviceLease(DeviceLease&& other) noexcept
    : store_(std::exchange(other.store_, nullptr)), id_(other.id_) {}

DeviceLease& DeviceLease::operator=(DeviceLease&& other) noexcept {
  if (this != &other) {
    release();
    store_ = std::exchange(other.store_, nullptr);
    id_ = other.id_;
  }
  return *this;
}

DeviceLease::~DeviceLease() { release(); }

void DeviceLease::release() noexcept {
  if (store_ != nullptr) std::exchange(store_, nullptr)->release(id_);
}

ServerStore::ServerStore(StoreSnapshot initial, Persister persister)
    : state_(std::move(initial)), persister_(std::move(persister)) {}

void ServerStore::apply(StoreSnapshot next) {
  if (persister_) persister_(next);
  state_ = std::move(next);
}

CrpRecord ServerStore::enroll_device(DeviceId device_id, const puf::PufFunction& puf,
                                     RandomSource& rng) {
  std::lock_guard lock(mutex_);
  if (state_.crps.contains(device_id))
    throw Error(Errc::AlreadyEnrolled, "enroll_device", device_id.hex());
  CrpRecord record{device_id, rng.next_word(), {}};
  record.response = puf.respond(record.challenge);
  StoreSnapshot next = state_;
  next.crps.emplace(device_id, record);
  apply(std::move(next));
  return record;
}

Registration ServerStore::register_client(std::string_view username, std::string_view password,
                                          DeviceId client_id) {
  std::lock_guard lock(mutex_);
  if (state_.clients.contains(client_id))
    throw Error(Errc::AlreadyRegistered, "register_client", client_id.hex());
  Registration reg{{client_id, client_alias(username, password, client_id)},
                   username.empty() || password.empty()};
  StoreSnapshot next = state_;
  next.clients.emplace(client_id, reg.record);
  apply(std::move(next));
  return reg;
}

std::optional<CrpRecord> ServerStore::find_crp(DeviceId device_id) const {
  std::lock_guard lock(mutex_);
  if (auto it = state_.crps.find(device_id); it != state_.crps.end()) return it->second;
  return std::nullopt;
}

std::optional<ClientRecord> ServerStore::find_client(DeviceId client_id) const {
  std::lock_guard lock(mutex_);
  if (auto it = state_.clients.find(client_id); it != state_.clients.end()) return it->second;
  return std::nullopt;
}

StoreSnapshot ServerStore::snapshot() const {
  std::lock_guard lock(mutex_);
  return state_;
}

void ServerStore::commit_rotation(const CrpRecord& expected, const CrpRecord& next_record) {
  std::lock_guard lock(mutex_);
  auto it = state_.crps.find(expected.device_id);
  if (it == state_.crps.end() || it->second != expected)
    throw Error(Errc::RotateFailure, "server_handle_rotate", "stored CRP changed underneath session");
  StoreSnapshot next = state_;
  next.crps[expected.device_id] = next_record;
  apply(std::move(next));
}

DeviceLease ServerStore::acquire(DeviceId device_id) {
  std::lock_guard lock(mutex_);
  if (!leased_.insert(device_id).second)
    throw Error(Errc::DeviceBusy, "server_begin_auth", device_id.hex());
  return DeviceLease(this, device_id);
}

bool ServerStore::busy(DeviceId device_id) const {
  std::lock_guard lock(mutex_);
  return leased_.contains(device_id);
}

void ServerStore::set_persister(Persister persister) {
  std::lock_guard lock(mutex_);
  persister_ = std::move(persister);
}

void ServerStore::release(DeviceId device_id) noexcept {
  std::lock_guard lock(mutex_);
  leased_.erase(device_id);
}

}  // namespace pufkex::protocol
