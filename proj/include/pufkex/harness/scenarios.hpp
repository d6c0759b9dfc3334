#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "pufkex/harness/simulation.hpp"

namespace pufkex::harness {

struct ScenarioResult {
  Outcome outcome;
  protocol::StoreSnapshot store_before;
  protocol::StoreSnapshot store_after;
  Knowledge knowledge;  // adversary's, closed over the run's hash recipes
  /// A key established in the attacked handshake is derivable by the adversary.
  bool adversary_knows_a_key = false;
  /// Session keys from any handshake in the run (recorded ones included) that
  /// the adversary can derive.
  std::size_t keys_exposed = 0;
  protocol::CostReport costs;
  std::size_t deliveries = 0;
  std::optional<Word256> client_key;
  std::optional<Word256> device_key;

  bool established() const { return std::holds_alternative<Established>(outcome); }
  const AbortedAt* aborted() const { return std::get_if<AbortedAt>(&outcome); }
  /// The attacked handshake aborted and left the adversary no key.
  bool attack_defeated() const;
};

ScenarioResult run_honest(std::uint64_t seed);
/// One handshake with the given adversary script on the open link.
ScenarioResult run_scripted(std::uint64_t seed, const Script& script);

enum class ReplayKind { StaleChallenge, StaleRotate, FullTranscript };
std::string_view replay_kind_name(ReplayKind kind);
/// An honest session, then a replay of its traffic. Kind defaults to seed % 3.
ScenarioResult run_replay(std::uint64_t seed, std::optional<ReplayKind> kind = std::nullopt);

/// The open-channel fields an adversary can flip: 13 words and 3 ids.
enum class TamperField {
  M1, M2, M3, M4, Cp, M5, M6, M7, M8, M10, M11, M12, M13,
  ConnReqClientId, EstablishDeviceId, EstablishClientId,
};
inline constexpr std::size_t kTamperFields = 16;
inline constexpr std::size_t kTamperPositions = 32;
std::string_view tamper_field_name(TamperField field);
/// Tamper script for one bit. Word fields: position p flips the top bit of
/// byte p. Id fields: position p is bit p of the 4-byte id.
Script tamper_script(TamperField field, std::size_t position);
ScenarioResult run_tamper(std::uint64_t seed, TamperField field, std::size_t position);

struct IdentityCheck {
  std::string name;
  bool holds = false;
};

struct SecretHit {
  std::uint32_t subset = 0;  // bit i set = field i included
  std::string secret;
};

struct EavesdropReport {
  std::uint64_t seed = 0;
  std::vector<std::string> field_names;  // 14 entries
  std::size_t subsets_checked = 0;
  std::vector<SecretHit> hits;
  /// Same question answered by the XOR span of the fields.
  std::vector<std::string> span_hits;
  /// Secrets reachable once two layers of protocol hashing are allowed.
  std::vector<std::string> closure_hits;
  std::vector<IdentityCheck> identities;  // the nine XOR identities
  /// Whether B^C = (M1^M3)^(M2^M3) equals T2^Rp^H(T1,T2)^Id_c'. It does not:
  /// B^C collapses to M1^M2 = Rp^T2, and the right side is M1^M2^M3.
  bool b_xor_c_matches_masked_form = false;

  bool clean() const { return hits.empty() && span_hits.empty() && closure_hits.empty(); }
  bool identities_hold() const;
};

/// Honest run, then every XOR subset of the 14 open-channel words checked
/// against the session secrets. force_zero_t1 plants a known leak.
EavesdropReport run_eavesdrop_analysis(std::uint64_t seed, bool force_zero_t1 = false);

struct EscrowReport {
  std::uint64_t seed = 0;
  std::size_t server_view_words = 0;
  std::vector<std::string> leaked;  // of N_c, N_p, key in the server-only model
  bool nonces_on_secure_channel = false;
  /// The server, handed the open-channel frames, recomputes the key.
  bool tapped_server_derives_key = false;
  bool tapped_closure_knows_key = false;
  /// Before any handshake the server holds none of the (future) secrets.
  bool pre_handshake_empty = false;

  bool boundary_holds() const {
    return leaked.empty() && !nonces_on_secure_channel && tapped_server_derives_key &&
           tapped_closure_knows_key && pre_handshake_empty;
  }
};

EscrowReport run_key_escrow_check(std::uint64_t seed);

struct ChainExposure {
  std::uint64_t seed = 0;
  struct Session {
    bool established = false;
    bool rp_exposed = false;
    bool key_exposed = false;
  };
  std::vector<Session> sessions;

  std::size_t keys_exposed() const;
};

/// Passive adversary on the open link across `sessions` consecutive honest
/// handshakes with one device. Each session's M5 = Cpnew^Rp meets the next
/// session's clear Cp = Cpnew, so Rp of every session but the last falls out
/// by XOR, and the rest of the session follows.
ChainExposure run_chain_eavesdrop(std::uint64_t seed, std::size_t sessions);

enum class Forgery { Random, OtherDevice, None };
std::string_view forgery_name(Forgery kind);
/// The adversary swallows the AuthChallenge and answers the server with a
/// forged CrpRotate. Forgery::None is the honest control.
ScenarioResult run_mitm_impersonation(std::uint64_t seed, Forgery kind = Forgery::Random);

}  // namespace pufkex::harness
