#pragma once

#include <array>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace pufkex {

using Bytes = std::vector<std::uint8_t>;
using ByteView = std::span<const std::uint8_t>;

/// Fixed 256-bit value. Bit 0 is the most significant bit of byte 0.
class Word256 {
 public:
  static constexpr std::size_t kBytes = 32;
  static constexpr std::size_t kBits = 256;
  using Array = std::array<std::uint8_t, kBytes>;

  constexpr Word256() = default;
  explicit constexpr Word256(const Array& bytes) : bytes_(bytes) {}

  static Word256 from_bytes(ByteView bytes);
  static Word256 from_hex(std::string_view hex);
  /// Big-endian integer embedding (value lands in the last 8 bytes).
  static Word256 from_uint(std::uint64_t value);

  const Array& bytes() const noexcept { return bytes_; }
  std::string hex() const;
  bool is_zero() const noexcept;
  bool bit(std::size_t index) const;
  Word256 with_bit_flipped(std::size_t index) const;
  void append_to(Bytes& out) const { out.insert(out.end(), bytes_.begin(), bytes_.end()); }

  Word256& operator^=(const Word256& other) noexcept;
  friend Word256 operator^(Word256 a, const Word256& b) noexcept { return a ^= b; }

  // Ordinary (non constant-time) comparison for containers and tests.
  // Authenticator checks go through ct_equal.
  friend bool operator==(const Word256&, const Word256&) = default;
  friend auto operator<=>(const Word256&, const Word256&) = default;

 private:
  Array bytes_{};
};

struct Word256Hash {
  std::size_t operator()(const Word256& w) const noexcept;
};

/// 32-bit device or client identifier, always serialized as 4 bytes big-endian.
struct DeviceId {
  std::uint32_t value = 0;

  std::array<std::uint8_t, 4> to_bytes() const noexcept;
  std::string hex() const;
  static DeviceId from_hex(std::string_view hex);

  friend bool operator==(const DeviceId&, const DeviceId&) = default;
  friend auto operator<=>(const DeviceId&, const DeviceId&) = default;
};

/// Variable-length input to hash_fields. Encoded as a 4-byte big-endian length
/// followed by the octets.
struct Octets {
  ByteView data;
};

using HashField = std::variant<Word256, DeviceId, Octets>;

Word256 hash256(ByteView data);
Word256 hash256(std::string_view text);

/// Hash of the fixed-width concatenation of the fields in order: 32 bytes per
/// Word256, 4 bytes per DeviceId, length-prefixed octets. No separators.
Word256 hash_fields(std::span<const HashField> fields);
Word256 hash_fields(std::initializer_list<HashField> fields);

Word256 xor256(const Word256& a, const Word256& b) noexcept;

/// Equality that always inspects all 32 bytes.
bool ct_equal(const Word256& a, const Word256& b) noexcept;

int hamming_distance(const Word256& a, const Word256& b) noexcept;

class RandomSource {
 public:
  virtual ~RandomSource() = default;
  virtual Word256 next_word() = 0;
};

/// OS entropy through libsodium. Construction throws EntropyUnavailable when
/// the library cannot initialise.
class SystemRandom final : public RandomSource {
 public:
  SystemRandom();
  Word256 next_word() override;
};

/// Deterministic stream: word i = SHA-256(label || seed || i).
class SeededRandom final : public RandomSource {
 public:
  explicit SeededRandom(std::uint64_t seed) : seed_(seed) {}
  Word256 next_word() override;

 private:
  std::uint64_t seed_;
  std::uint64_t counter_ = 0;
};

/// Returns queued words first, then defers to a fallback source.
class ScriptedRandom final : public RandomSource {
 public:
  ScriptedRandom(std::vector<Word256> queued, RandomSource& fallback)
      : queued_(std::move(queued)), fallback_(fallback) {}
  Word256 next_word() override;

 private:
  std::vector<Word256> queued_;
  std::size_t next_ = 0;
  RandomSource& fallback_;
};

/// Draw from the process-wide system generator.
Word256 random_word();

std::string to_hex(ByteView bytes);
Bytes from_hex(std::string_view hex);

}  // namespace pufkex
