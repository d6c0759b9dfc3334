#include "pufkex/crypto.hpp"

#include <sodium.h>

#include <bit>
#include <cstring>
#include <stdexcept>

#include "pufkex/error.hpp"

namespace pufkex {
namespace {

constexpr char kHexDigits[] = "0123456789abcdef";

int hex_value(char c) {
  if (c >= '0' && c <= '9') return c - '0';
  if (c >= 'a' && c <= 'f') return c - 'a' + 10;
  if (c >= 'A' && c <= 'F') return c - 'A' + 10;
  return -1;
}

void ensure_sodium() {
  static const bool ready = sodium_init() >= 0;
  if (!ready) throw Error(Errc::EntropyUnavailable, "crypto", "sodium_init failed");
}

// Streaming SHA-256 over the field encoding, so large field lists never need
// an intermediate buffer.
class FieldHasher {
 public:
  FieldHasher() {
    ensure_sodium();
    crypto_hash_sha256_init(&state_);
  }

  void operator()(const Word256& w) { update(w.bytes()); }
  void operator()(const DeviceId& id) { update(id.to_bytes()); }
  void operator()(const Octets& o) {
    const auto n = static_cast<std::uint32_t>(o.data.size());
    const std::array<std::uint8_t, 4> len{static_cast<std::uint8_t>(n >> 24),
                                          static_cast<std::uint8_t>(n >> 16),
                                          static_cast<std::uint8_t>(n >> 8),
                                          static_cast<std::uint8_t>(n)};
    update(len);
    update(o.data);
  }

  Word256 finish() {
    Word256::Array out{};
    crypto_hash_sha256_final(&state_, out.data());
    return Word256(out);
  }

 private:
  void update(ByteView bytes) { crypto_hash_sha256_update(&state_, bytes.data(), bytes.size()); }

  crypto_hash_sha256_state state_{};
};

}  // namespace

Word256 Word256::from_bytes(ByteView bytes) {
  if (bytes.size() != kBytes) throw std::invalid_argument("Word256 needs exactly 32 bytes");
  Array a{};
  std::memcpy(a.data(), bytes.data(), kBytes);
  return Word256(a);
}

Word256 Word256::from_hex(std::string_view hex) {
  const Bytes raw = pufkex::from_hex(hex);
  return from_bytes(raw);
}

Word256 Word256::from_uint(std::uint64_t value) {
  Array a{};
  for (int i = 0; i < 8; ++i) a[kBytes - 1 - i] = static_cast<std::uint8_t>(value >> (8 * i));
  return Word256(a);
}

std::string Word256::hex() const { return to_hex(bytes_); }

bool Word256::is_zero() const noexcept {
  std::uint8_t acc = 0;
  for (auto b : bytes_) acc |= b;
  return acc == 0;
}

bool Word256::bit(std::size_t index) const {
  if (index >= kBits) throw std::out_of_range("Word256 bit index");
  return (bytes_[index / 8] >> (7 - index % 8)) & 1U;
}

Word256 Word256::with_bit_flipped(std::size_t index) const {
  if (index >= kBits) throw std::out_of_range("Word256 bit index");
  Word256 copy = *this;
  copy.bytes_[index / 8] ^= static_cast<std::uint8_t>(0x80U >> (index % 8));
  return copy;
}

Word256& Word256::operator^=(const Word256& other) noexcept {
  for (std::size_t i = 0; i < kBytes; ++i) bytes_[i] ^= other.bytes_[i];
  return *this;
}

std::size_t Word256Hash::operator()(const Word256& w) const noexcept {
  std::uint64_t h = 0;
  std::memcpy(&h, w.bytes().data(), sizeof h);
  return static_cast<std::size_t>(h);
}

std::array<std::uint8_t, 4> DeviceId::to_bytes() const noexcept {
  return {static_cast<std::uint8_t>(value >> 24), static_cast<std::uint8_t>(value >> 16),
          static_cast<std::uint8_t>(value >> 8), static_cast<std::uint8_t>(value)};
}

std::string DeviceId::hex() const { return to_hex(to_bytes()); }

DeviceId DeviceId::from_hex(std::string_view hex) {
  const Bytes raw = pufkex::from_hex(hex);
  if (raw.size() != 4) throw std::invalid_argument("DeviceId needs exactly 4 bytes");
  return DeviceId{(std::uint32_t{raw[0]} << 24) | (std::uint32_t{raw[1]} << 16) |
                  (std::uint32_t{raw[2]} << 8) | std::uint32_t{raw[3]}};
}

Word256 hash256(ByteView data) {
  ensure_sodium();
  Word256::Array out{};
  crypto_hash_sha256(out.data(), data.data(), data.size());
  return Word256(out);
}

Word256 hash256(std::string_view text) {
  return hash256(ByteView(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

Word256 hash_fields(std::span<const HashField> fields) {
  FieldHasher hasher;
  for (const auto& f : fields) std::visit(hasher, f);
  return hasher.finish();
}

Word256 hash_fields(std::initializer_list<HashField> fields) {
  return hash_fields(std::span<const HashField>(fields.begin(), fields.size()));
}

Word256 xor256(const Word256& a, const Word256& b) noexcept { return a ^ b; }

bool ct_equal(const Word256& a, const Word256& b) noexcept {
  volatile std::uint8_t diff = 0;
  for (std::size_t i = 0; i < Word256::kBytes; ++i) diff = diff | (a.bytes()[i] ^ b.bytes()[i]);
  return diff == 0;
}

int hamming_distance(const Word256& a, const Word256& b) noexcept {
  int n = 0;
  for (std::size_t i = 0; i < Word256::kBytes; ++i)
    n += std::popcount(static_cast<unsigned>(a.bytes()[i] ^ b.bytes()[i]));
  return n;
}

SystemRandom::SystemRandom() { ensure_sodium(); }

Word256 SystemRandom::next_word() {
  Word256::Array a{};
  randombytes_buf(a.data(), a.size());
  return Word256(a);
}

Word256 SeededRandom::next_word() {
  static constexpr std::string_view kLabel = "pufkex/seeded-random/v1";
  const std::array<std::uint8_t, 8> seed_be{
      static_cast<std::uint8_t>(seed_ >> 56), static_cast<std::uint8_t>(seed_ >> 48),
      static_cast<std::uint8_t>(seed_ >> 40), static_cast<std::uint8_t>(seed_ >> 32),
      static_cast<std::uint8_t>(seed_ >> 24), static_cast<std::uint8_t>(seed_ >> 16),
      static_cast<std::uint8_t>(seed_ >> 8),  static_cast<std::uint8_t>(seed_)};
  const auto label = ByteView(reinterpret_cast<const std::uint8_t*>(kLabel.data()), kLabel.size());
  return hash_fields({Octets{label}, Octets{seed_be}, Word256::from_uint(counter_++)});
}

Word256 ScriptedRandom::next_word() {
  if (next_ < queued_.size()) return queued_[next_++];
  return fallback_.next_word();
}

Word256 random_word() {
  static SystemRandom source;
  return source.next_word();
}

std::string to_hex(ByteView bytes) {
  std::string out;
  out.reserve(bytes.size() * 2);
  for (auto b : bytes) {
    out.push_back(kHexDigits[b >> 4]);
    out.push_back(kHexDigits[b & 0x0F]);
  }
  return out;
}

Bytes from_hex(std::string_view hex) {
  if (hex.size() % 2 != 0) throw std::invalid_argument("odd-length hex string");
  Bytes out(hex.size() / 2);
  for (std::size_t i = 0; i < out.size(); ++i) {
    const int hi = hex_value(hex[2 * i]);
    const int lo = hex_value(hex[2 * i + 1]);
    if (hi < 0 || lo < 0) throw std::invalid_argument("invalid hex digit");
    out[i] = static_cast<std::uint8_t>((hi << 4) | lo);
  }
  return out;
}

}  // namespace pufkex
