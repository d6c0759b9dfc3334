#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace pufkex {

enum class Errc {
  ConfigError,
  EntropyUnavailable,
  ChipUnusable,
  AlreadyEnrolled,
  AlreadyRegistered,
  UnknownDevice,
  UnknownClient,
  DeviceBusy,
  AuthenticationFailure,
  RotateFailure,
  MalformedMessage,
  PhaseViolation,
  SessionExpired,
  IdentityMismatch,
  CorruptStore,
  CorruptIdentity,
  TunnelRejected,
  Io,
};

std::string_view to_string(Errc code) noexcept;

// Every failure raised by the library carries a code and the protocol step
// (or subsystem) that detected it.
class Error : public std::runtime_error {
 public:
  Error(Errc code, std::string step, const std::string& detail = {});

  Errc code() const noexcept { return code_; }
  const std::string& step() const noexcept { return step_; }
  const std::string& detail() const noexcept { return detail_; }

 private:
  Errc code_;
  std::string step_;
  std::string detail_;
};

}  // namespace pufkex
