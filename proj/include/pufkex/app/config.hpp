#pragma once

#include <chrono>
#include <filesystem>
#include <string>

#include "pufkex/app/net.hpp"
#include "pufkex/sram_puf.hpp"

namespace pufkex::app {

enum class ChannelMode { Simulated, Tcp };

struct PufParams {
  std::size_t cell_count = puf::kDefaultCellCount;
  std::size_t fingerprint_bits = puf::kDefaultFingerprintBits;
  unsigned qualification_reads = puf::kDefaultQualificationReads;
  double stable_fraction = puf::kDefaultStableFraction;
};

struct AppConfig {
  Endpoint listen{"127.0.0.1", 7400};        // server
  Endpoint device_listen{"127.0.0.1", 7401}; // device emulator (open channel)
  std::filesystem::path store_path;          // required
  ChannelMode channel_mode = ChannelMode::Simulated;
  std::string psk = "pufkex-development-psk";
  PufParams puf;
  std::chrono::milliseconds session_timeout{30'000};
  std::chrono::milliseconds io_timeout{10'000};
  std::string log_level = "info";
};

inline constexpr const char* kConfigEnv = "PUFKEX_CONFIG";
inline constexpr const char* kLogLevelEnv = "PUFKEX_LOG_LEVEL";

// JSON object; every key optional except "store_path":
//   listen, device_listen: "host:port"     channel_mode: "simulated" | "tcp"
//   psk: string    session_timeout_ms, io_timeout_ms: integers    log_level: string
//   puf: {cell_count, fingerprint_bits, qualification_reads, stable_fraction}
// Unknown keys are rejected with ConfigError.
AppConfig parse_config(std::string_view json_text);
/// Reads the file, then applies PUFKEX_LOG_LEVEL.
AppConfig load_config(const std::filesystem::path& path);
/// `explicit_path` if set, else $PUFKEX_CONFIG, else nullopt.
std::optional<std::filesystem::path> config_path(const std::optional<std::filesystem::path>& explicit_path);

bool uses_default_psk(const AppConfig& config);

}  // namespace pufkex::app
