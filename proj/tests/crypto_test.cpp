#include <gtest/gtest.h>

#include <array>
#include <set>

#include "oracle_vectors.hpp"
#include "pufkex/crypto.hpp"
#include "pufkex/error.hpp"

namespace pufkex {
namespace {

Word256 sequential(std::uint8_t start) {
  Word256::Array a{};
  for (std::size_t i = 0; i < a.size(); ++i) a[i] = static_cast<std::uint8_t>(start + i);
  return Word256(a);
}

TEST(Hash256, PublishedVectors) {
  EXPECT_EQ(hash256(ByteView{}).hex(),
            "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  EXPECT_EQ(hash256(std::string_view("abc")).hex(),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST(Hash256, Deterministic) {
  const Bytes data{1, 2, 3, 4, 5};
  EXPECT_EQ(hash256(data), hash256(data));
}

TEST(HashFields, SingleZeroWordIsHashOf32ZeroBytes) {
  const Bytes zeros(32, 0);
  EXPECT_EQ(hash_fields({Word256{}}), hash256(zeros));
}

TEST(HashFields, OrderMatters) {
  SeededRandom rng(11);
  const Word256 a = rng.next_word();
  const Word256 b = rng.next_word();
  ASSERT_NE(a, b);
  EXPECT_NE(hash_fields({a, b}), hash_fields({b, a}));
}

TEST(HashFields, GoldenFiveFieldDigest) {
  const Word256 digest = hash_fields({sequential(0), sequential(32), Word256::from_hex(oracle::kRp),
                                      Word256::from_hex(oracle::kCp),
                                      Word256::from_hex(oracle::kAlias)});
  EXPECT_EQ(digest.hex(), oracle::kHashFive);
}

TEST(HashFields, DeviceIdIsFourBytes) {
  EXPECT_EQ(hash_fields({Word256::from_hex(oracle::kRp), DeviceId{0x01020304}}).hex(),
            oracle::kRpWithId);
}

TEST(HashFields, OctetsAreLengthPrefixed) {
  const std::string ab = "ab", c = "c", a = "a", bc = "bc";
  auto view = [](const std::string& s) {
    return Octets{ByteView(reinterpret_cast<const std::uint8_t*>(s.data()), s.size())};
  };
  EXPECT_NE(hash_fields({view(ab), view(c)}), hash_fields({view(a), view(bc)}));
}

TEST(Xor256, IdentityAndSelfInverse) {
  SeededRandom rng(3);
  const Word256 a = rng.next_word();
  EXPECT_EQ(xor256(a, Word256{}), a);
  EXPECT_TRUE(xor256(a, a).is_zero());
}

TEST(Xor256, BytewiseOracle) {
  Word256::Array ff{}, of{}, expected{};
  ff.fill(0xFF);
  of.fill(0x0F);
  for (std::size_t i = 0; i < expected.size(); ++i) expected[i] = ff[i] ^ of[i];
  const Word256 r = xor256(Word256(ff), Word256(of));
  EXPECT_EQ(r, Word256(expected));
  EXPECT_EQ(r.bytes()[0], 0xF0);
}

TEST(Xor256, GroupLaws) {
  SeededRandom rng(5);
  for (int i = 0; i < 200; ++i) {
    const Word256 a = rng.next_word(), b = rng.next_word(), c = rng.next_word();
    EXPECT_EQ(xor256(xor256(a, b), c), xor256(a, xor256(b, c)));
    EXPECT_EQ(xor256(a, b), xor256(b, a));
    EXPECT_EQ(xor256(xor256(a, b), b), a);
  }
}

TEST(RandomWord, SuccessiveDrawsDiffer) { EXPECT_NE(random_word(), random_word()); }

TEST(RandomWord, SeededIsReproducible) {
  SeededRandom a(42), b(42), c(43);
  for (int i = 0; i < 10; ++i) {
    const Word256 x = a.next_word();
    EXPECT_EQ(x, b.next_word());
    EXPECT_NE(x, c.next_word());
  }
}

TEST(RandomWord, PerBitFrequencyIsBalanced) {
  SystemRandom rng;
  std::array<int, 256> ones{};
  constexpr int kSamples = 10'000;
  for (int s = 0; s < kSamples; ++s) {
    const Word256 w = rng.next_word();
    for (std::size_t bit = 0; bit < 256; ++bit) ones[bit] += w.bit(bit);
  }
  for (std::size_t bit = 0; bit < 256; ++bit) {
    const double f = ones[bit] / static_cast<double>(kSamples);
    EXPECT_GE(f, 0.48) << "bit " << bit;
    EXPECT_LE(f, 0.52) << "bit " << bit;
  }
}

TEST(RandomWord, NoRepeatsInAMillionDraws) {
  SystemRandom rng;
  std::set<Word256> seen;
  for (int i = 0; i < 1'000'000; ++i) ASSERT_TRUE(seen.insert(rng.next_word()).second);
}

TEST(RandomWord, ScriptedQueueThenFallback) {
  SeededRandom fallback(1);
  SeededRandom reference(1);
  ScriptedRandom rng({Word256{}, Word256::from_uint(7)}, fallback);
  EXPECT_TRUE(rng.next_word().is_zero());
  EXPECT_EQ(rng.next_word(), Word256::from_uint(7));
  EXPECT_EQ(rng.next_word(), reference.next_word());
}

TEST(CtEqual, Basics) {
  SeededRandom rng(9);
  const Word256 a = rng.next_word();
  EXPECT_TRUE(ct_equal(a, a));
  EXPECT_FALSE(ct_equal(a, a.with_bit_flipped(255)));
  EXPECT_FALSE(ct_equal(a, a.with_bit_flipped(0)));
}

TEST(Word256, HexRoundTripAndBitOrder) {
  SeededRandom rng(2);
  const Word256 a = rng.next_word();
  EXPECT_EQ(Word256::from_hex(a.hex()), a);
  EXPECT_EQ(Word256{}.with_bit_flipped(0).bytes()[0], 0x80);
  EXPECT_EQ(Word256::from_uint(1).bytes()[31], 1);
  EXPECT_THROW(Word256::from_hex("abc"), std::invalid_argument);
  EXPECT_THROW(Word256::from_hex("zz"), std::invalid_argument);
}

TEST(DeviceIdCodec, BigEndian) {
  const DeviceId id{0xA1B2C3D4};
  EXPECT_EQ(id.to_bytes(), (std::array<std::uint8_t, 4>{0xA1, 0xB2, 0xC3, 0xD4}));
  EXPECT_EQ(id.hex(), "a1b2c3d4");
  EXPECT_EQ(DeviceId::from_hex("a1b2c3d4"), id);
}

TEST(Hamming, Counts) {
  EXPECT_EQ(hamming_distance(Word256{}, Word256{}), 0);
  Word256::Array ff{};
  ff.fill(0xFF);
  EXPECT_EQ(hamming_distance(Word256{}, Word256(ff)), 256);
}

}  // namespace
}  // namespace pufkex
