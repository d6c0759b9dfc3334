#include "pufkex/error.hpp"

namespace pufkex {

std::string_view to_string(Errc code) noexcept {
  switch (code) {
    case Errc::ConfigError: return "ConfigError";
    case Errc::EntropyUnavailable: return "EntropyUnavailable";
    case Errc::ChipUnusable: return "ChipUnusable";
    case Errc::AlreadyEnrolled: return "AlreadyEnrolled";
    case Errc::AlreadyRegistered: return "AlreadyRegistered";
    case Errc::UnknownDevice: return "UnknownDevice";
    case Errc::UnknownClient: return "UnknownClient";
    case Errc::DeviceBusy: return "DeviceBusy";
    case Errc::AuthenticationFailure: return "AuthenticationFailure";
    case Errc::RotateFailure: return "RotateFailure";
    case Errc::MalformedMessage: return "MalformedMessage";
    case Errc::PhaseViolation: return "PhaseViolation";
    case Errc::SessionExpired: return "SessionExpired";
    case Errc::IdentityMismatch: return "IdentityMismatch";
    case Errc::CorruptStore: return "CorruptStore";
    case Errc::CorruptIdentity: return "CorruptIdentity";
    case Errc::TunnelRejected: return "TunnelRejected";
    case Errc::Io: return "Io";
  }
  return "Unknown";
}

namespace {
std::string compose(Errc code, const std::string& step, const std::string& detail) {
  std::string msg(to_string(code));
  msg += " at ";
  msg += step;
  if (!detail.empty()) {
    msg += ": ";
    msg += detail;
  }
  return msg;
}
}  // namespace

Error::Error(Errc code, std::string step, const std::string& detail)
    : std::runtime_error(compose(code, step, detail)), code_(code), step_(std::move(step)), detail_(detail) {}

}  // namespace pufkex
