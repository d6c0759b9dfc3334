#include "pufkex/sram_puf.hpp"

#include <algorithm>
#include <bit>
#include <fstream>
#include <iterator>

#include "pufkex/error.hpp"

namespace pufkex::puf {
namespace {

constexpr std::array<std::uint8_t, 4> kMagic{'S', 'P', 'U', 'F'};
constexpr std::uint8_t kFormatVersion = 1;
constexpr double kUnstableFlipMin = 0.2;
constexpr double kUnstableFlipMax = 0.5;

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

// Explicit mapping rather than <random> distributions so chip contents do not
// depend on the standard library implementation.
double unit_interval(std::mt19937_64& engine) {
  return static_cast<double>(engine() >> 11) * 0x1.0p-53;
}

std::uint32_t mod_word(const Word256& w, std::uint32_t modulus) {
  std::uint64_t r = 0;
  for (auto b : w.bytes()) r = ((r << 8) | b) % modulus;
  return static_cast<std::uint32_t>(r);
}

void put_u32(Bytes& out, std::uint32_t v) {
  for (int s = 24; s >= 0; s -= 8) out.push_back(static_cast<std::uint8_t>(v >> s));
}

void put_u64(Bytes& out, std::uint64_t v) {
  for (int s = 56; s >= 0; s -= 8) out.push_back(static_cast<std::uint8_t>(v >> s));
}

class Reader {
 public:
  explicit Reader(ByteView data) : data_(data) {}

  std::uint8_t u8() {
    need(1);
    return data_[pos_++];
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v = (v << 8) | data_[pos_++];
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v = (v << 8) | data_[pos_++];
    return v;
  }
  bool done() const { return pos_ == data_.size(); }

 private:
  void need(std::size_t n) const {
    if (data_.size() - pos_ < n) throw Error(Errc::CorruptIdentity, "load_identity", "truncated");
  }

  ByteView data_;
  std::size_t pos_ = 0;
};

}  // namespace

bool NoiseSource::flip(double probability) {
  if (probability <= 0.0) return false;
  return unit_interval(engine_) < probability;
}

SramChip SramChip::fabricate(std::uint64_t chip_id, std::size_t cell_count,
                             double stable_fraction) {
  if (cell_count < kMinCellCount)
    throw Error(Errc::ConfigError, "fabricate_chip", "cell_count must be >= 512");
  if (!(stable_fraction > 0.0 && stable_fraction <= 1.0))
    throw Error(Errc::ConfigError, "fabricate_chip", "stable_fraction must be in (0, 1]");

  std::mt19937_64 engine(splitmix64(chip_id));
  std::vector<CellModel> cells(cell_count);
  for (auto& cell : cells) {
    cell.nominal_bit = static_cast<std::uint8_t>(engine() >> 63);
    if (unit_interval(engine) >= stable_fraction) {
      cell.flip_probability =
          kUnstableFlipMin + (kUnstableFlipMax - kUnstableFlipMin) * unit_interval(engine);
    }
  }
  return SramChip(chip_id, std::move(cells));
}

SramChip SramChip::from_cells(std::uint64_t chip_id, std::vector<CellModel> cells) {
  for (const auto& c : cells) {
    if (c.nominal_bit > 1 || !(c.flip_probability >= 0.0 && c.flip_probability <= 0.5))
      throw Error(Errc::ConfigError, "from_cells", "cell out of range");
  }
  return SramChip(chip_id, std::move(cells));
}

std::vector<std::uint8_t> SramChip::nominal_bits() const {
  std::vector<std::uint8_t> bits(cells_.size());
  std::transform(cells_.begin(), cells_.end(), bits.begin(),
                 [](const CellModel& c) { return c.nominal_bit; });
  return bits;
}

std::vector<std::uint8_t> SramChip::power_on_read(NoiseSource& noise) const {
  std::vector<std::uint8_t> bits(cells_.size());
  for (std::size_t i = 0; i < cells_.size(); ++i)
    bits[i] = cells_[i].nominal_bit ^ static_cast<std::uint8_t>(noise.flip(cells_[i].flip_probability));
  return bits;
}

std::uint8_t SramChip::read_cell(std::uint32_t address, NoiseSource* noise) const {
  const CellModel& c = cells_.at(address);
  if (noise == nullptr) return c.nominal_bit;
  return c.nominal_bit ^ static_cast<std::uint8_t>(noise->flip(c.flip_probability));
}

StablePool find_stable_cells(const SramChip& chip, unsigned reads, NoiseSource& noise,
                             std::size_t fingerprint_bits) {
  if (reads == 0) throw Error(Errc::ConfigError, "find_stable_cells", "reads must be >= 1");

  const auto first = chip.power_on_read(noise);
  std::vector<bool> stable(first.size(), true);
  for (unsigned r = 1; r < reads; ++r) {
    const auto next = chip.power_on_read(noise);
    for (std::size_t i = 0; i < next.size(); ++i)
      if (next[i] != first[i]) stable[i] = false;
  }

  StablePool pool;
  pool.read_count = reads;
  for (std::size_t i = 0; i < stable.size(); ++i)
    if (stable[i]) pool.addresses.push_back(static_cast<std::uint32_t>(i));

  if (pool.addresses.size() < fingerprint_bits)
    throw Error(Errc::ChipUnusable, "find_stable_cells",
                std::to_string(pool.addresses.size()) + " stable cells, need " +
                    std::to_string(fingerprint_bits));
  return pool;
}

std::vector<std::uint32_t> expand_challenge(const Word256& challenge, const StablePool& pool,
                                            std::size_t k) {
  if (pool.addresses.size() < k)
    throw Error(Errc::ChipUnusable, "expand_challenge", "pool smaller than fingerprint");

  std::vector<std::uint32_t> remaining = pool.addresses;
  std::vector<std::uint32_t> selected;
  selected.reserve(k);
  for (std::size_t round = 0; round < k; ++round) {
    const Word256 digest = hash_fields({challenge, Word256::from_uint(round)});
    const auto index = mod_word(digest, static_cast<std::uint32_t>(remaining.size()));
    selected.push_back(remaining[index]);
    remaining.erase(remaining.begin() + index);
  }
  return selected;
}

PufFunction::PufFunction(SramChip chip, StablePool pool, std::size_t fingerprint_bits)
    : chip_(std::move(chip)), pool_(std::move(pool)), fingerprint_bits_(fingerprint_bits) {
  if (fingerprint_bits_ == 0 || fingerprint_bits_ > Word256::kBits)
    throw Error(Errc::ConfigError, "puf", "fingerprint size must be in [1, 256]");
  if (pool_.addresses.size() < fingerprint_bits_)
    throw Error(Errc::ChipUnusable, "puf", "pool smaller than fingerprint");
  for (std::size_t i = 0; i < pool_.addresses.size(); ++i) {
    if (pool_.addresses[i] >= chip_.cell_count())
      throw Error(Errc::ChipUnusable, "puf", "pool address outside the array");
    if (i > 0 && pool_.addresses[i] <= pool_.addresses[i - 1])
      throw Error(Errc::ChipUnusable, "puf", "pool addresses must be ascending and distinct");
  }
}

Word256 PufFunction::respond(const Word256& challenge) const { return blend(challenge, nullptr); }

Word256 PufFunction::respond(const Word256& challenge, NoiseSource& noise) const {
  return blend(challenge, &noise);
}

Word256 PufFunction::blend(const Word256& challenge, NoiseSource* noise) const {
  const auto addresses = expand_challenge(challenge, pool_, fingerprint_bits_);
  Word256::Array packed{};
  for (std::size_t i = 0; i < addresses.size(); ++i) {
    if (chip_.read_cell(addresses[i], noise))
      packed[i / 8] |= static_cast<std::uint8_t>(0x80U >> (i % 8));
  }
  return hash_fields({challenge, Word256(packed)});
}

PufFunction make_puf(std::uint64_t chip_id, std::uint64_t qualification_seed,
                     std::size_t cell_count, double stable_fraction, unsigned reads,
                     std::size_t fingerprint_bits) {
  SramChip chip = SramChip::fabricate(chip_id, cell_count, stable_fraction);
  NoiseSource noise(qualification_seed);
  StablePool pool = find_stable_cells(chip, reads, noise, fingerprint_bits);
  return PufFunction(std::move(chip), std::move(pool), fingerprint_bits);
}

namespace {

DistanceStats summarize(const std::vector<int>& distances) {
  DistanceStats s;
  if (distances.empty()) return s;
  s.pairs = distances.size();
  s.min = *std::min_element(distances.begin(), distances.end());
  s.max = *std::max_element(distances.begin(), distances.end());
  double sum = 0.0;
  for (int d : distances) sum += d;
  s.mean = sum / static_cast<double>(distances.size());
  return s;
}

}  // namespace

DistanceStats intra_distance(const PufFunction& puf, const Word256& challenge, unsigned trials,
                             NoiseSource& noise) {
  if (trials < 2) throw Error(Errc::ConfigError, "intra_distance", "need at least 2 trials");
  std::vector<Word256> responses;
  responses.reserve(trials);
  for (unsigned t = 0; t < trials; ++t) responses.push_back(puf.respond(challenge, noise));

  std::vector<int> distances;
  for (std::size_t i = 0; i < responses.size(); ++i)
    for (std::size_t j = i + 1; j < responses.size(); ++j)
      distances.push_back(hamming_distance(responses[i], responses[j]));
  return summarize(distances);
}

DistanceStats inter_distance(std::span<const PufFunction> pufs, const Word256& challenge) {
  if (pufs.size() < 2) throw Error(Errc::ConfigError, "inter_distance", "need at least 2 PUFs");
  std::vector<Word256> responses;
  responses.reserve(pufs.size());
  for (const auto& p : pufs) responses.push_back(p.respond(challenge));

  std::vector<int> distances;
  for (std::size_t i = 0; i < responses.size(); ++i)
    for (std::size_t j = i + 1; j < responses.size(); ++j)
      distances.push_back(hamming_distance(responses[i], responses[j]));
  return summarize(distances);
}

Bytes serialize_identity(const PufFunction& puf) {
  const SramChip& chip = puf.chip();
  Bytes out(kMagic.begin(), kMagic.end());
  out.push_back(kFormatVersion);
  put_u64(out, chip.chip_id());
  put_u32(out, static_cast<std::uint32_t>(chip.cell_count()));
  for (const auto& cell : chip.cells()) {
    out.push_back(cell.nominal_bit);
    put_u64(out, std::bit_cast<std::uint64_t>(cell.flip_probability));
  }
  put_u32(out, static_cast<std::uint32_t>(puf.pool().addresses.size()));
  for (auto a : puf.pool().addresses) put_u32(out, a);
  put_u32(out, puf.pool().read_count);
  put_u32(out, static_cast<std::uint32_t>(puf.fingerprint_bits()));
  return out;
}

PufFunction deserialize_identity(ByteView data) {
  Reader in(data);
  for (auto m : kMagic)
    if (in.u8() != m) throw Error(Errc::CorruptIdentity, "load_identity", "bad magic");
  if (in.u8() != kFormatVersion)
    throw Error(Errc::CorruptIdentity, "load_identity", "unsupported version");

  const std::uint64_t chip_id = in.u64();
  const std::uint32_t cell_count = in.u32();
  if (cell_count > data.size())
    throw Error(Errc::CorruptIdentity, "load_identity", "cell count exceeds file size");
  std::vector<CellModel> cells(cell_count);
  for (auto& cell : cells) {
    cell.nominal_bit = in.u8();
    cell.flip_probability = std::bit_cast<double>(in.u64());
  }

  StablePool pool;
  const std::uint32_t pool_count = in.u32();
  if (pool_count > cell_count)
    throw Error(Errc::CorruptIdentity, "load_identity", "pool larger than array");
  pool.addresses.resize(pool_count);
  for (auto& a : pool.addresses) a = in.u32();
  pool.read_count = in.u32();
  const std::uint32_t fingerprint_bits = in.u32();
  if (!in.done()) throw Error(Errc::CorruptIdentity, "load_identity", "trailing bytes");

  try {
    return PufFunction(SramChip::from_cells(chip_id, std::move(cells)), std::move(pool),
                       fingerprint_bits);
  } catch (const Error& e) {
    throw Error(Errc::CorruptIdentity, "load_identity", e.what());
  }
}

void save_identity(const std::filesystem::path& path, const PufFunction& puf) {
  const Bytes data = serialize_identity(puf);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size()));
  if (!out) throw Error(Errc::Io, "save_identity", path.string());
}

PufFunction load_identity(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::CorruptIdentity, "load_identity", "cannot open " + path.string());
  const Bytes data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return deserialize_identity(data);
}

}  // namespace pufkex::puf
