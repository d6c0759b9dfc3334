#pragma once

#include <filesystem>
#include <functional>
#include <string>
#include <string_view>

#include "pufkex/protocol/store.hpp"

namespace pufkex::app {

// Text format, records sorted by id:
//   PUFKEX-STORE 1
//   CRP <device_id_hex8> <challenge_hex64> <response_hex64>
//   CLIENT <client_id_hex8> <alias_hex64>
std::string format_store(const protocol::StoreSnapshot& snapshot);
/// Throws CorruptStore.
protocol::StoreSnapshot parse_store(std::string_view text);

enum class CrashPoint { BeforeTempWrite, MidTempWrite, BeforeSync, BeforeRename, AfterRename };
inline constexpr std::array<CrashPoint, 5> kCrashPoints{CrashPoint::BeforeTempWrite, CrashPoint::MidTempWrite,
                                                        CrashPoint::BeforeSync, CrashPoint::BeforeRename,
                                                        CrashPoint::AfterRename};
std::string_view crash_point_name(CrashPoint point);

/// The on-disk store. save() writes a temp file, fsyncs it, renames it over
/// the old file and fsyncs the directory, so a reader sees the old or the new
/// contents and nothing in between.
class StoreFile {
 public:
  /// Invoked at each crash point; fault-injection tests make it throw or die.
  using CrashHook = std::function<void(CrashPoint)>;

  explicit StoreFile(std::filesystem::path path) : path_(std::move(path)) {}

  const std::filesystem::path& path() const noexcept { return path_; }
  std::filesystem::path temp_path() const;
  bool exists() const { return std::filesystem::exists(path_); }
  /// A missing file is an empty store.
  protocol::StoreSnapshot load() const;
  void save(const protocol::StoreSnapshot& snapshot) const;
  void set_crash_hook(CrashHook hook) { hook_ = std::move(hook); }

 private:
  void at(CrashPoint point) const {
    if (hook_) hook_(point);
  }

  std::filesystem::path path_;
  CrashHook hook_;
};

}  // namespace pufkex::app
