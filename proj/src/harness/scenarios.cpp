#include "pufkex/harness/scenarios.hpp"

#include <algorithm>
#include <memory>
#include <set>

namespace pufkex::harness {

using namespace protocol;

namespace {

std::uint64_t attacker_seed(std::uint64_t seed) { return seed * 8 + 7; }

ScenarioResult collect(const Simulation& sim, Outcome outcome, StoreSnapshot before) {
  ScenarioResult r;
  r.outcome = std::move(outcome);
  r.store_before = std::move(before);
  r.store_after = sim.store().snapshot();
  for (const auto& seen : sim.adversary().observed()) r.knowledge.observe_frame(seen.frame);

  std::vector<HashRecipe> recipes;
  const auto truths = sim.truths();
  for (const auto& t : truths) {
    auto more = protocol_recipes(t);
    recipes.insert(recipes.end(), more.begin(), more.end());
  }
  r.knowledge.close(recipes);
  std::set<Word256> exposed;
  for (const auto& t : truths)
    if (t.key && r.knowledge.knows(*t.key)) exposed.insert(*t.key);
  r.keys_exposed = exposed.size();
  for (const auto& key : {sim.client_key(), sim.device_key()})
    if (key && r.knowledge.knows(*key)) r.adversary_knows_a_key = true;

  r.costs = count_costs(sim.transcript());
  r.deliveries = sim.deliveries();
  r.client_key = sim.client_key();
  r.device_key = sim.device_key();
  return r;
}

std::optional<std::size_t> first_with_tag(const Adversary& adv, std::uint8_t tag) {
  const auto& seen = adv.observed();
  for (std::size_t i = 0; i < seen.size(); ++i)
    if (!seen[i].frame.empty() && seen[i].frame[0] == tag) return i;
  return std::nullopt;
}

std::uint8_t tag_of(const Bytes& frame) { return frame.empty() ? 0 : frame[0]; }

}  // namespace

bool ScenarioResult::attack_defeated() const { return aborted() && !adversary_knows_a_key; }

ScenarioResult run_honest(std::uint64_t seed) { return run_scripted(seed, Script{}); }

ScenarioResult run_scripted(std::uint64_t seed, const Script& script) {
  const Fixture fixture = Fixture::make(seed);
  Simulation sim(fixture, seed, Adversary(script));
  StoreSnapshot before = sim.store().snapshot();
  sim.start_session();
  Outcome outcome = sim.run();
  return collect(sim, std::move(outcome), std::move(before));
}

// ---------------------------------------------------------------------------
// Replay

std::string_view replay_kind_name(ReplayKind kind) {
  switch (kind) {
    case ReplayKind::StaleChallenge: return "stale-challenge";
    case ReplayKind::StaleRotate: return "stale-rotate";
    case ReplayKind::FullTranscript: return "full-transcript";
  }
  return "?";
}

ScenarioResult run_replay(std::uint64_t seed, std::optional<ReplayKind> kind) {
  const ReplayKind k = kind.value_or(static_cast<ReplayKind>(seed % 3));
  const Fixture fixture = Fixture::make(seed);

  struct State {
    bool armed = false;
    std::uint32_t recorded_session = 0;
  };
  auto state = std::make_shared<State>();

  Adversary::Strategy strategy = [state, k](Adversary& adv,
                                            std::size_t index) -> std::optional<std::vector<Bytes>> {
    if (!state->armed) return std::nullopt;
    const Bytes& frame = adv.observed()[index].frame;
    const std::uint8_t tag = tag_of(frame);
    if (k == ReplayKind::FullTranscript) {
      // Adversary plays the client from the recorded transcript; the device's
      // answers go nowhere else.
      if (tag == ConnEstablish::kTag) return std::vector<Bytes>{adv.observed()[*first_with_tag(adv, AuthChallenge::kTag)].frame};
      if (tag == CrpRotate::kTag) return std::vector<Bytes>{adv.observed()[*first_with_tag(adv, ClientNonce::kTag)].frame};
      return std::vector<Bytes>{};
    }
    const std::uint8_t target = k == ReplayKind::StaleChallenge ? AuthChallenge::kTag : CrpRotate::kTag;
    const std::uint32_t sid = peek_session_id(frame);
    if (tag != target || sid == state->recorded_session) return std::nullopt;
    return std::vector<Bytes>{adv.replay_as(*first_with_tag(adv, target), sid)};
  };

  Simulation sim(fixture, seed, Adversary({}, strategy));
  state->recorded_session = sim.start_session();
  const Outcome first = sim.run();
  if (!std::holds_alternative<Established>(first))
    throw Error(Errc::ConfigError, "run_replay", "recording session failed: " + describe(first));

  StoreSnapshot before = sim.store().snapshot();
  state->armed = true;
  if (k == ReplayKind::FullTranscript) {
    sim.inject_open(sim.adversary().observed()[*first_with_tag(sim.adversary(), ConnReq::kTag)].frame);
  } else {
    sim.start_session();
  }
  Outcome outcome = sim.run();
  return collect(sim, std::move(outcome), std::move(before));
}

// ---------------------------------------------------------------------------
// Tamper

std::string_view tamper_field_name(TamperField field) {
  static constexpr std::array<std::string_view, kTamperFields> names{
      "M1", "M2", "M3", "M4", "Cp", "M5", "M6", "M7", "M8", "M10", "M11", "M12", "M13",
      "ConnReq.Id_c", "ConnEstablish.Id_p", "ConnEstablish.Id_c"};
  return names[static_cast<std::size_t>(field)];
}

Script tamper_script(TamperField field, std::size_t position) {
  struct Place {
    std::size_t frame;   // index in the honest open-channel sequence
    std::size_t offset;  // payload offset of the field
    bool word;
  };
  static constexpr std::array<Place, kTamperFields> places{{
      {2, 0, true}, {2, 32, true}, {2, 64, true}, {2, 96, true}, {2, 128, true},
      {3, 0, true}, {3, 32, true}, {3, 64, true}, {3, 96, true},
      {4, 0, true}, {4, 32, true},
      {5, 0, true}, {5, 32, true},
      {0, 0, false}, {1, 0, false}, {1, 4, false},
  }};
  if (position >= kTamperPositions)
    throw Error(Errc::ConfigError, "tamper_script", "position must be below 32");
  const Place p = places[static_cast<std::size_t>(field)];
  Script script;
  for (std::size_t i = 0; i < p.frame; ++i) script.actions.emplace_back(Forward{});
  const std::size_t base = kFrameHeaderBytes + p.offset;
  if (p.word)
    script.actions.emplace_back(Tamper{p.frame, base + position, 0});
  else
    script.actions.emplace_back(Tamper{p.frame, base + position / 8, static_cast<unsigned>(position % 8)});
  return script;
}

ScenarioResult run_tamper(std::uint64_t seed, TamperField field, std::size_t position) {
  return run_scripted(seed, tamper_script(field, position));
}

// ---------------------------------------------------------------------------
// Eavesdropping

bool EavesdropReport::identities_hold() const {
  for (const auto& i : identities)
    if (!i.holds) return false;
  return identities.size() == 9;
}

EavesdropReport run_eavesdrop_analysis(std::uint64_t seed, bool force_zero_t1) {
  const Fixture fixture = Fixture::make(seed);
  SimOptions options;
  if (force_zero_t1) options.server_words = {Word256{}};
  Simulation sim(fixture, seed, Adversary{}, options);
  sim.start_session();
  const Outcome outcome = sim.run();
  if (!std::holds_alternative<Established>(outcome))
    throw Error(Errc::ConfigError, "run_eavesdrop_analysis", "handshake failed: " + describe(outcome));

  EavesdropReport report;
  report.seed = seed;

  std::vector<Word256> fields;
  Word256 ids;
  for (const auto& seen : sim.adversary().observed()) {
    const Frame f = decode(seen.frame);
    if (const auto* m = std::get_if<AuthChallenge>(&f.message)) {
      fields.insert(fields.end(), {m->m1, m->m2, m->m3, m->m4, m->challenge});
    } else if (const auto* m = std::get_if<CrpRotate>(&f.message)) {
      fields.insert(fields.end(), {m->m5, m->m6, m->m7, m->m8});
    } else if (const auto* m = std::get_if<ClientNonce>(&f.message)) {
      fields.insert(fields.end(), {m->m10, m->m11});
    } else if (const auto* m = std::get_if<DeviceNonce>(&f.message)) {
      fields.insert(fields.end(), {m->m12, m->m13});
    } else if (const auto* m = std::get_if<ConnEstablish>(&f.message)) {
      ids = identity_word(m->device_id, m->client_id);
    }
  }
  fields.push_back(ids);
  report.field_names = {"M1", "M2", "M3", "M4", "Cp", "M5", "M6", "M7",
                        "M8", "M10", "M11", "M12", "M13", "Id_p||Id_c"};

  // The device's record holds every secret of a completed session.
  SessionTruth truth;
  std::vector<HashRecipe> recipes;
  for (const auto& t : sim.truths()) {
    if (t.key && t.rp_new) truth = t;
    auto more = protocol_recipes(t);
    recipes.insert(recipes.end(), more.begin(), more.end());
  }
  const std::vector<std::pair<std::string, Word256>> secrets{
      {"Rp", *truth.rp}, {"Rpnew", *truth.rp_new}, {"T1", *truth.t1}, {"T2", *truth.t2},
      {"Id_c'", *truth.alias}, {"Nc", *truth.nc}, {"Np", *truth.np}, {"key", *truth.key}};

  // Gray-code walk: consecutive subsets differ in one field.
  const std::uint32_t count = 1u << fields.size();
  Word256 acc;
  for (std::uint32_t i = 0; i < count; ++i) {
    if (i != 0) acc ^= fields[static_cast<std::size_t>(__builtin_ctz(i))];
    const std::uint32_t subset = i ^ (i >> 1);
    for (const auto& [name, value] : secrets)
      if (acc == value) report.hits.push_back({subset, name});
  }
  report.subsets_checked = count;

  XorSpan span;
  Knowledge closure;
  for (const Word256& w : fields) {
    span.add(w);
    closure.learn(w);
  }
  closure.close(recipes);
  for (const auto& [name, value] : secrets) {
    if (span.contains(value)) report.span_hits.push_back(name);
    if (closure.knows(value)) report.closure_hits.push_back(name);
  }

  const Word256 &m1 = fields[0], &m2 = fields[1], &m3 = fields[2];
  const Word256 t1 = *truth.t1, t2 = *truth.t2, rp = *truth.rp;
  const Word256 masked_id = hash_fields({t1, t2}) ^ *truth.alias;
  const Word256 a = m1 ^ m2, b = m1 ^ m3, c = m2 ^ m3, all = m1 ^ m2 ^ m3;
  report.identities = {
      {"A=M1^M2 = Rp^T2", a == (rp ^ t2)},
      {"B=M1^M3 = T1^Rp^H(T1,T2)^Id_c'", b == (t1 ^ rp ^ masked_id)},
      {"C=M2^M3 = T1^T2^H(T1,T2)^Id_c'", c == (t1 ^ t2 ^ masked_id)},
      {"A^B = T1^T2^H(T1,T2)^Id_c'", (a ^ b) == (t1 ^ t2 ^ masked_id)},
      {"A^C = T1^Rp^H(T1,T2)^Id_c'", (a ^ c) == (t1 ^ rp ^ masked_id)},
      {"M1^M2^M3 = T2^Rp^H(T1,T2)^Id_c'", all == (t2 ^ rp ^ masked_id)},
      {"(A^B)^(A^C) = Rp^T2", ((a ^ b) ^ (a ^ c)) == (rp ^ t2)},
      {"(A^B)^(M1^M2^M3) = M1 = T1^Rp", ((a ^ b) ^ all) == (t1 ^ rp)},
      {"(A^C)^(M1^M2^M3) = M2 = T1^T2", ((a ^ c) ^ all) == (t1 ^ t2)},
  };
  // B^C collapses to Rp^T2; it only meets T2^Rp^H^Id_c' when the mask vanishes.
  report.b_xor_c_matches_masked_form = (b ^ c) == (t2 ^ rp ^ masked_id);
  return report;
}

// ---------------------------------------------------------------------------
// Key escrow

EscrowReport run_key_escrow_check(std::uint64_t seed) {
  const Fixture fixture = Fixture::make(seed);
  Simulation sim(fixture, seed);
  const std::vector<Word256> pre_view = sim.server_view();
  sim.start_session();
  const Outcome outcome = sim.run();
  if (!std::holds_alternative<Established>(outcome))
    throw Error(Errc::ConfigError, "run_key_escrow_check", "handshake failed: " + describe(outcome));

  EscrowReport report;
  report.seed = seed;
  SessionTruth truth;
  std::vector<HashRecipe> recipes;
  for (const auto& t : sim.truths()) {
    if (t.key && t.rp_new) truth = t;
    auto more = protocol_recipes(t);
    recipes.insert(recipes.end(), more.begin(), more.end());
  }
  const std::vector<std::pair<std::string, Word256>> secrets{
      {"Nc", *truth.nc}, {"Np", *truth.np}, {"key", *truth.key}};

  const std::vector<Word256> view = sim.server_view();
  report.server_view_words = view.size();
  Knowledge server;
  for (const Word256& w : view) server.learn(w);
  server.close(recipes);
  for (const auto& [name, value] : secrets)
    if (server.knows(value)) report.leaked.push_back(name);

  for (const auto& f : sim.secure_channel().log())
    for (const auto& [name, value] : secrets) {
      const auto& v = value.bytes();
      if (std::search(f.frame.begin(), f.frame.end(), v.begin(), v.end()) != f.frame.end())
        report.nonces_on_secure_channel = true;
    }

  Knowledge pre;
  for (const Word256& w : pre_view) pre.learn(w);
  pre.close(recipes);
  report.pre_handshake_empty = true;
  for (const auto& [name, value] : secrets)
    if (pre.knows(value)) report.pre_handshake_empty = false;

  // Counter-case: hand the server the open-channel frames as well.
  std::optional<Word256> m9, m10, m12;
  for (const auto& f : sim.secure_channel().log()) {
    const Frame frame = decode(f.frame);
    if (const auto* ack = std::get_if<RotateAck>(&frame.message)) m9 = ack->m9;
  }
  Knowledge tapped = server;
  for (const auto& seen : sim.adversary().observed()) {
    tapped.observe_frame(seen.frame);
    const Frame f = decode(seen.frame);
    if (const auto* n = std::get_if<ClientNonce>(&f.message)) m10 = n->m10;
    if (const auto* n = std::get_if<DeviceNonce>(&f.message)) m12 = n->m12;
  }
  if (m9 && m10 && m12) {
    const Word256 nc = *m10 ^ *m9;
    const Word256 np = *m12 ^ nc;
    const auto client = sim.store().find_client(fixture.client_id);
    report.tapped_server_derives_key =
        derive_session_key(nc, np, client->alias, fixture.device_id) == *truth.key;
  }
  tapped.close(recipes);
  report.tapped_closure_knows_key = tapped.knows(*truth.key);
  return report;
}

// ---------------------------------------------------------------------------
// Passive observation across sessions

std::size_t ChainExposure::keys_exposed() const {
  return static_cast<std::size_t>(
      std::count_if(sessions.begin(), sessions.end(), [](const Session& s) { return s.key_exposed; }));
}

ChainExposure run_chain_eavesdrop(std::uint64_t seed, std::size_t sessions) {
  const Fixture fixture = Fixture::make(seed);
  Simulation sim(fixture, seed);
  ChainExposure report;
  report.seed = seed;
  std::vector<bool> established;
  for (std::size_t i = 0; i < sessions; ++i) {
    sim.start_session();
    established.push_back(std::holds_alternative<Established>(sim.run()));
  }

  Knowledge k;
  for (const auto& seen : sim.adversary().observed()) k.observe_frame(seen.frame);
  std::vector<HashRecipe> recipes;
  std::vector<SessionTruth> device_truths;
  for (const auto& t : sim.truths()) {
    auto more = protocol_recipes(t);
    recipes.insert(recipes.end(), more.begin(), more.end());
    if (t.rp_new) device_truths.push_back(t);  // device records, in session order
  }
  k.close(recipes);
  for (std::size_t i = 0; i < sessions; ++i) {
    ChainExposure::Session s;
    s.established = established[i];
    if (i < device_truths.size()) {
      s.rp_exposed = k.knows(*device_truths[i].rp);
      s.key_exposed = device_truths[i].key && k.knows(*device_truths[i].key);
    }
    report.sessions.push_back(s);
  }
  return report;
}

// ---------------------------------------------------------------------------
// Impersonation

std::string_view forgery_name(Forgery kind) {
  switch (kind) {
    case Forgery::Random: return "random";
    case Forgery::OtherDevice: return "other-device";
    case Forgery::None: return "none";
  }
  return "?";
}

ScenarioResult run_mitm_impersonation(std::uint64_t seed, Forgery kind) {
  const Fixture fixture = Fixture::make(seed);
  std::shared_ptr<const puf::PufFunction> other;
  if (kind == Forgery::OtherDevice)
    other = std::make_shared<const puf::PufFunction>(puf::make_puf(
        attacker_seed(seed), attacker_seed(seed) + 1, fixture.puf->chip().cell_count()));
  auto rng = std::make_shared<SeededRandom>(attacker_seed(seed));

  Adversary::Strategy strategy = [kind, other, rng](Adversary& adv, std::size_t index)
      -> std::optional<std::vector<Bytes>> {
    const Bytes& bytes = adv.observed()[index].frame;
    if (kind == Forgery::None || tag_of(bytes) != AuthChallenge::kTag) return std::nullopt;
    const Frame frame = decode(bytes);
    const auto& ch = std::get<AuthChallenge>(frame.message);
    CrpRotate forged;
    if (kind == Forgery::Random) {
      forged = CrpRotate{rng->next_word(), rng->next_word(), rng->next_word(), rng->next_word()};
    } else {
      // Follow the device's recipe with the wrong chip.
      const Word256 rp = other->respond(ch.challenge);
      const Word256 t1 = ch.m1 ^ rp;
      const Word256 t2 = ch.m2 ^ t1;
      const Word256 c_new = rng->next_word();
      forged.m5 = c_new ^ rp;
      forged.m6 = hash_fields({forged.m5, rp});
      forged.m7 = t2 ^ other->respond(c_new);
      forged.m8 = hash_fields({forged.m7, t2});
    }
    return std::vector<Bytes>{encode(Frame{frame.session_id, forged})};
  };

  Simulation sim(fixture, seed, Adversary({}, strategy));
  StoreSnapshot before = sim.store().snapshot();
  sim.start_session();
  Outcome outcome = sim.run();
  return collect(sim, std::move(outcome), std::move(before));
}

}  // namespace pufkex::harness
