#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <set>

#include "pufkex/error.hpp"
#include "pufkex/sram_puf.hpp"

namespace pufkex::puf {
namespace {

std::vector<PufFunction> fabricate_many(std::size_t n, std::uint64_t first_id = 1000) {
  std::vector<PufFunction> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(make_puf(first_id + i, 77 + i));
  return out;
}

TEST(Fabricate, DeterministicInChipId) {
  EXPECT_EQ(SramChip::fabricate(5), SramChip::fabricate(5));
  EXPECT_NE(SramChip::fabricate(5).nominal_bits(), SramChip::fabricate(6).nominal_bits());
}

TEST(Fabricate, NominalBitsOfDistinctChipsDifferInAboutHalf) {
  constexpr std::size_t n = kDefaultCellCount;
  for (std::uint64_t pair = 0; pair < 100; ++pair) {
    const auto a = SramChip::fabricate(2 * pair).nominal_bits();
    const auto b = SramChip::fabricate(2 * pair + 1).nominal_bits();
    std::size_t d = 0;
    for (std::size_t i = 0; i < n; ++i) d += a[i] != b[i];
    EXPECT_NEAR(static_cast<double>(d), n / 2.0, 0.05 * n) << "pair " << pair;
  }
}

TEST(Fabricate, FullStabilityMeansNoFlips) {
  const auto chip = SramChip::fabricate(9, 1024, 1.0);
  for (const auto& c : chip.cells()) EXPECT_EQ(c.flip_probability, 0.0);
}

TEST(Fabricate, RejectsBadParameters) {
  EXPECT_THROW(SramChip::fabricate(1, 511), Error);
  EXPECT_THROW(SramChip::fabricate(1, 1024, 0.0), Error);
  EXPECT_THROW(SramChip::fabricate(1, 1024, 1.5), Error);
}

TEST(PowerOnRead, StableChipReadsNominal) {
  const auto chip = SramChip::fabricate(3, 1024, 1.0);
  NoiseSource noise(1);
  EXPECT_EQ(chip.power_on_read(noise), chip.nominal_bits());
  EXPECT_EQ(chip.power_on_read(noise), chip.power_on_read(noise));
}

TEST(PowerOnRead, HalfProbabilityCellFlipsHalfTheTime) {
  std::vector<CellModel> cells(512);
  cells[0] = {1, 0.5};
  const auto chip = SramChip::from_cells(1, cells);
  NoiseSource noise(123);
  int flips = 0;
  for (int i = 0; i < 10'000; ++i) flips += chip.power_on_read(noise)[0] != 1;
  EXPECT_NEAR(flips / 10'000.0, 0.5, 0.02);
}

TEST(StableCells, FullyStableChipKeepsEverything) {
  const auto chip = SramChip::fabricate(4, 600, 1.0);
  NoiseSource noise(2);
  const auto pool = find_stable_cells(chip, 31, noise);
  EXPECT_EQ(pool.addresses.size(), 600u);
  EXPECT_TRUE(std::is_sorted(pool.addresses.begin(), pool.addresses.end()));
}

TEST(StableCells, PlantedUnstableCellsAreExcluded) {
  // Each planted cell survives 31 reads with probability 2^-30.
  std::vector<CellModel> cells(512);
  for (std::size_t i = 0; i < cells.size(); ++i) cells[i].nominal_bit = i % 2;
  cells[3].flip_probability = 0.5;
  cells[17].flip_probability = 0.5;
  const auto chip = SramChip::from_cells(1, cells);
  NoiseSource noise(99);
  const auto pool = find_stable_cells(chip, 31, noise);
  EXPECT_EQ(pool.addresses.size(), 510u);
  EXPECT_EQ(std::count(pool.addresses.begin(), pool.addresses.end(), 3u), 0);
  EXPECT_EQ(std::count(pool.addresses.begin(), pool.addresses.end(), 17u), 0);
}

TEST(StableCells, SingleReadIsVacuous) {
  const auto chip = SramChip::fabricate(4, 600, 0.5);
  NoiseSource noise(2);
  const auto pool = find_stable_cells(chip, 1, noise);
  EXPECT_EQ(pool.addresses.size(), 600u);
  EXPECT_TRUE(pool.vacuous());
}

TEST(StableCells, TooFewStableCellsMakesChipUnusable) {
  std::vector<CellModel> cells(512, CellModel{0, 0.5});
  for (int i = 0; i < 50; ++i) cells[i].flip_probability = 0.0;
  const auto chip = SramChip::from_cells(1, cells);
  NoiseSource noise(5);
  try {
    find_stable_cells(chip, 31, noise);
    FAIL() << "expected ChipUnusable";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::ChipUnusable);
  }
}

TEST(ExpandChallenge, FullPoolGivesAPermutation) {
  StablePool pool;
  for (std::uint32_t i = 0; i < 96; ++i) pool.addresses.push_back(i * 3);
  SeededRandom rng(1);
  const auto out = expand_challenge(rng.next_word(), pool, 96);
  auto sorted = out;
  std::sort(sorted.begin(), sorted.end());
  EXPECT_EQ(sorted, pool.addresses);
  EXPECT_NE(out, pool.addresses);
}

TEST(ExpandChallenge, DeterministicAndNeverRepeats) {
  const auto puf = make_puf(1, 1);
  SeededRandom rng(2);
  for (int i = 0; i < 50; ++i) {
    const Word256 c = rng.next_word();
    const auto a = expand_challenge(c, puf.pool(), 96);
    EXPECT_EQ(a, expand_challenge(c, puf.pool(), 96));
    EXPECT_EQ(std::set<std::uint32_t>(a.begin(), a.end()).size(), a.size());
  }
}

TEST(ExpandChallenge, OneBitChangesTheSequence) {
  const auto puf = make_puf(1, 1);
  SeededRandom rng(3);
  int differing = 0;
  for (int t = 0; t < 1000; ++t) {
    const Word256 c = rng.next_word();
    const std::size_t bit = t % 256;
    differing += expand_challenge(c, puf.pool(), 96) !=
                 expand_challenge(c.with_bit_flipped(bit), puf.pool(), 96);
  }
  EXPECT_GE(differing, 950);
}

TEST(ExpandChallenge, SmallPoolIsUnusable) {
  StablePool pool{{1, 2, 3}, 31};
  EXPECT_THROW(expand_challenge(Word256{}, pool, 96), Error);
}

TEST(Respond, ReproducibleAtZeroNoise) {
  const auto puf = make_puf(21, 5);
  SeededRandom rng(4);
  const Word256 c = rng.next_word();
  EXPECT_EQ(puf.respond(c), puf.respond(c));
  NoiseSource noise(1);
  EXPECT_EQ(puf.respond(c, noise), puf.respond(c));
}

TEST(Respond, DifferentChallengesLookIndependent) {
  const auto puf = make_puf(21, 5);
  SeededRandom rng(6);
  double total = 0;
  for (int i = 0; i < 200; ++i) total += hamming_distance(puf.respond(rng.next_word()), puf.respond(rng.next_word()));
  EXPECT_NEAR(total / 200, 128.0, 6.0);
}

TEST(Respond, DifferentChipsSameChallenge) {
  SeededRandom rng(7);
  double total = 0;
  for (std::uint64_t pair = 0; pair < 100; ++pair) {
    const auto a = make_puf(500 + 2 * pair, 1);
    const auto b = make_puf(501 + 2 * pair, 1);
    const Word256 c = rng.next_word();
    total += hamming_distance(a.respond(c), b.respond(c));
  }
  EXPECT_NEAR(total / 100, 128.0, 6.0);
}

TEST(Respond, BitsAreBalanced) {
  std::array<int, 256> ones{};
  SeededRandom rng(8);
  const auto pufs = fabricate_many(10, 3000);
  for (int s = 0; s < 1000; ++s) {
    const Word256 r = pufs[s % pufs.size()].respond(rng.next_word());
    for (std::size_t b = 0; b < 256; ++b) ones[b] += r.bit(b);
  }
  // 0.03 is ~1.9 sigma at n = 1000: about 6% of bits land outside it by
  // chance, so bound the outlier count and cap every bit at ~4.4 sigma.
  int outliers = 0;
  long total = 0;
  for (int n : ones) {
    const double f = n / 1000.0;
    outliers += std::abs(f - 0.5) > 0.03;
    EXPECT_LT(std::abs(f - 0.5), 0.07);
    total += n;
  }
  EXPECT_LE(outliers, 25);
  EXPECT_NEAR(total / (256.0 * 1000.0), 0.5, 0.03);
}

TEST(IntraDistance, ZeroAtZeroNoise) {
  const auto puf = make_puf(31, 2);
  NoiseSource noise(3);
  const auto s = intra_distance(puf, Word256::from_uint(1), 20, noise);
  EXPECT_EQ(s.mean, 0.0);
  EXPECT_EQ(s.max, 0);
  const auto two = intra_distance(puf, Word256::from_uint(1), 2, noise);
  EXPECT_EQ(two.pairs, 1u);
  EXPECT_EQ(two.max, 0);
}

TEST(IntraDistance, CorruptedPoolShowsNoise) {
  std::vector<CellModel> cells(512);
  for (std::size_t i = 0; i < cells.size(); ++i) cells[i] = {static_cast<std::uint8_t>(i & 1), 0.5};
  StablePool pool;
  for (std::uint32_t i = 0; i < 96; ++i) pool.addresses.push_back(i);
  const PufFunction puf(SramChip::from_cells(1, cells), pool);
  NoiseSource noise(4);
  const auto s = intra_distance(puf, Word256::from_uint(9), 10, noise);
  EXPECT_GT(s.mean, 0.0);
  EXPECT_GT(s.max, 64);
}

TEST(InterDistance, ClonedChipIsZero) {
  std::vector<PufFunction> clones{make_puf(8, 1), make_puf(8, 1)};
  EXPECT_EQ(inter_distance(clones, Word256::from_uint(3)).mean, 0.0);
}

TEST(InterDistance, TwentyChipsNearHalf) {
  const auto pufs = fabricate_many(20);
  const auto s = inter_distance(pufs, Word256::from_uint(12345));
  EXPECT_EQ(s.pairs, 190u);
  EXPECT_GE(s.mean, 115.0);
  EXPECT_LE(s.mean, 141.0);
}

TEST(InterDistance, SinglePairMatchesDirectHamming) {
  const auto pufs = fabricate_many(2);
  const Word256 c = Word256::from_uint(77);
  const auto s = inter_distance(pufs, c);
  const int direct = hamming_distance(pufs[0].respond(c), pufs[1].respond(c));
  EXPECT_EQ(s.pairs, 1u);
  EXPECT_EQ(s.mean, direct);
  EXPECT_EQ(s.min, direct);
  EXPECT_EQ(s.max, direct);
}

TEST(Identity, SerializeRoundTrip) {
  const auto puf = make_puf(44, 3, 1024, 0.8);
  const Bytes data = serialize_identity(puf);
  EXPECT_EQ(std::string(data.begin(), data.begin() + 4), "SPUF");
  EXPECT_EQ(data[4], 1);
  const auto back = deserialize_identity(data);
  EXPECT_EQ(back.chip(), puf.chip());
  EXPECT_EQ(back.pool(), puf.pool());
  EXPECT_EQ(serialize_identity(back), data);
  SeededRandom rng(1);
  const Word256 c = rng.next_word();
  EXPECT_EQ(back.respond(c), puf.respond(c));
}

TEST(Identity, CorruptFilesAreRejected) {
  const Bytes data = serialize_identity(make_puf(44, 3, 1024));
  Bytes bad_magic = data;
  bad_magic[0] = 'X';
  EXPECT_THROW(deserialize_identity(bad_magic), Error);
  Bytes truncated(data.begin(), data.end() - 3);
  EXPECT_THROW(deserialize_identity(truncated), Error);
  Bytes trailing = data;
  trailing.push_back(0);
  EXPECT_THROW(deserialize_identity(trailing), Error);
}

TEST(Identity, FileRoundTrip) {
  const auto path = std::filesystem::temp_directory_path() / "pufkex_identity_test.spuf";
  const auto puf = make_puf(45, 3, 1024);
  save_identity(path, puf);
  EXPECT_EQ(load_identity(path).chip(), puf.chip());
  std::filesystem::remove(path);
  EXPECT_THROW(load_identity(path), Error);
}

}  // namespace
}  // namespace pufkex::puf
