#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <random>
#include <span>
#include <vector>

#include "pufkex/crypto.hpp"

namespace pufkex::puf {

inline constexpr std::size_t kDefaultCellCount = 4096;
inline constexpr std::size_t kDefaultFingerprintBits = 96;
inline constexpr unsigned kDefaultQualificationReads = 31;
inline constexpr double kDefaultStableFraction = 0.85;
inline constexpr std::size_t kMinCellCount = 512;

struct CellModel {
  std::uint8_t nominal_bit = 0;
  double flip_probability = 0.0;  // in [0, 0.5]

  friend bool operator==(const CellModel&, const CellModel&) = default;
};

/// Read-noise generator. Every random decision taken while reading a chip goes
/// through one of these.
class NoiseSource {
 public:
  explicit NoiseSource(std::uint64_t seed) : engine_(seed) {}
  bool flip(double probability);

 private:
  std::mt19937_64 engine_;
};

/// Simulated SRAM array. Immutable after construction.
class SramChip {
 public:
  /// Deterministic in chip_id. Unstable cells (1 - stable_fraction of the
  /// array) get a flip probability uniform in [0.2, 0.5].
  static SramChip fabricate(std::uint64_t chip_id, std::size_t cell_count = kDefaultCellCount,
                            double stable_fraction = kDefaultStableFraction);
  static SramChip from_cells(std::uint64_t chip_id, std::vector<CellModel> cells);

  std::uint64_t chip_id() const noexcept { return chip_id_; }
  std::size_t cell_count() const noexcept { return cells_.size(); }
  const std::vector<CellModel>& cells() const noexcept { return cells_; }

  std::vector<std::uint8_t> nominal_bits() const;
  /// One power-on: bit i is the nominal value flipped with the cell's flip probability.
  std::vector<std::uint8_t> power_on_read(NoiseSource& noise) const;
  std::uint8_t read_cell(std::uint32_t address, NoiseSource* noise) const;

  friend bool operator==(const SramChip&, const SramChip&) = default;

 private:
  SramChip(std::uint64_t chip_id, std::vector<CellModel> cells)
      : chip_id_(chip_id), cells_(std::move(cells)) {}

  std::uint64_t chip_id_;
  std::vector<CellModel> cells_;
};

struct StablePool {
  std::vector<std::uint32_t> addresses;  // ascending, distinct
  std::uint32_t read_count = 0;

  /// A single read cannot demonstrate stability.
  bool vacuous() const noexcept { return read_count < 2; }

  friend bool operator==(const StablePool&, const StablePool&) = default;
};

/// Keeps the addresses whose value matched across every one of `reads`
/// power-on reads. Throws ChipUnusable when fewer than fingerprint_bits survive.
StablePool find_stable_cells(const SramChip& chip, unsigned reads, NoiseSource& noise,
                             std::size_t fingerprint_bits = kDefaultFingerprintBits);

/// Challenge -> ordered selection of k pool addresses, without replacement.
/// Round i picks entry hash_fields([c, i]) mod |remaining| of the entries not
/// yet chosen (remaining entries keep pool order).
std::vector<std::uint32_t> expand_challenge(const Word256& challenge, const StablePool& pool,
                                            std::size_t k);

class PufFunction {
 public:
  PufFunction(SramChip chip, StablePool pool,
              std::size_t fingerprint_bits = kDefaultFingerprintBits);

  /// Zero read noise: a pure function of (chip, pool, challenge).
  Word256 respond(const Word256& challenge) const;
  /// Reads the selected cells through the noise generator.
  Word256 respond(const Word256& challenge, NoiseSource& noise) const;

  const SramChip& chip() const noexcept { return chip_; }
  const StablePool& pool() const noexcept { return pool_; }
  std::size_t fingerprint_bits() const noexcept { return fingerprint_bits_; }

 private:
  Word256 blend(const Word256& challenge, NoiseSource* noise) const;

  SramChip chip_;
  StablePool pool_;
  std::size_t fingerprint_bits_;
};

/// Convenience: fabricate, qualify and wrap a chip in one go.
PufFunction make_puf(std::uint64_t chip_id, std::uint64_t qualification_seed,
                     std::size_t cell_count = kDefaultCellCount,
                     double stable_fraction = kDefaultStableFraction,
                     unsigned reads = kDefaultQualificationReads,
                     std::size_t fingerprint_bits = kDefaultFingerprintBits);

struct DistanceStats {
  double mean = 0.0;
  int min = 0;
  int max = 0;
  std::size_t pairs = 0;
};

/// Pairwise Hamming distances among `trials` noisy responses to one challenge.
DistanceStats intra_distance(const PufFunction& puf, const Word256& challenge, unsigned trials,
                             NoiseSource& noise);

/// Pairwise Hamming distances between the zero-noise responses of every PUF pair.
DistanceStats inter_distance(std::span<const PufFunction> pufs, const Word256& challenge);

// Identity file ("SPUF", version 1):
//   magic[4] version[1] chip_id[8] cell_count[4]
//   cell_count x { nominal_bit[1] flip_probability[8, IEEE-754 binary64] }
//   pool_count[4] pool_count x address[4]
//   read_count[4] fingerprint_bits[4]
// All integers big-endian.
Bytes serialize_identity(const PufFunction& puf);
PufFunction deserialize_identity(ByteView data);
void save_identity(const std::filesystem::path& path, const PufFunction& puf);
PufFunction load_identity(const std::filesystem::path& path);

}  // namespace pufkex::puf
