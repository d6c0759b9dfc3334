#include <gtest/gtest.h>

#include <set>
#include <thread>

#include "golden_vectors.hpp"
#include "oracle_vectors.hpp"
#include "pufkex/error.hpp"
#include "pufkex/protocol/costs.hpp"
#include "pufkex/protocol/messages.hpp"
#include "pufkex/protocol/roles.hpp"
#include "pufkex/protocol/store.hpp"

namespace pufkex::protocol {
namespace {

using oracle::kAlias;

constexpr DeviceId kDevice{0x11223344};
constexpr DeviceId kClient{0x0000abcd};

Word256 W(const char* hex) { return Word256::from_hex(hex); }

Word256 sequential(std::uint8_t start) {
  Word256::Array a{};
  for (std::size_t i = 0; i < a.size(); ++i) a[i] = static_cast<std::uint8_t>(start + i);
  return Word256(a);
}

Errc code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no pufkex::Error thrown";
  return Errc::Io;
}

// Store holding the oracle CRP and alias, with no PUF behind it.
StoreSnapshot oracle_snapshot() {
  StoreSnapshot s;
  s.crps[kDevice] = CrpRecord{kDevice, W(oracle::kCp), W(oracle::kRp)};
  s.clients[kClient] = ClientRecord{kClient, W(kAlias)};
  return s;
}

struct Fixture {
  explicit Fixture(std::uint64_t seed = 1)
      : puf(puf::make_puf(seed, seed + 100)), rng(seed), identity(ClientIdentity::from_credentials("alice", "hunter2", kClient)) {
    store.enroll_device(kDevice, puf, rng);
    store.register_client("alice", "hunter2", kClient);
  }

  puf::PufFunction puf;
  SeededRandom rng;
  ServerStore store;
  ClientIdentity identity;
};

struct HandshakeResult {
  Word256 client_key, device_key;
  Transcript transcript;
};

// Runs all seven steps in process, relaying through encode/decode.
HandshakeResult handshake(Fixture& f, RandomSource& server_rng, RandomSource& device_rng,
                          RandomSource& client_rng) {
  HandshakeResult r;
  auto relay = [&](Role from, auto message) {
    Bytes bytes = encode(Frame{7, message});
    r.transcript.record(from, bytes);
    return std::get<decltype(message)>(decode(bytes).message);
  };

  ClientSession client(f.identity);
  const auto req = relay(Role::Client, client.connect_request());
  const auto est = relay(Role::Device, device_answer_conn_req(kDevice, req));
  const auto est_fwd = relay(Role::Client, client.on_establish(est));

  auto [server, challenge] = ServerSession::begin_auth(f.store, est_fwd.device_id, est_fwd.client_id, server_rng);
  const auto challenge_in = relay(Role::Server, challenge);
  const auto challenge_fwd = relay(Role::Client, client.on_challenge(challenge_in));

  auto [device, rotate] = DeviceSession::handle_auth(f.puf, kDevice, challenge_fwd, device_rng);
  const auto rotate_in = relay(Role::Device, rotate);
  const auto rotate_fwd = relay(Role::Client, client.on_rotate(rotate_in));

  const auto ack = relay(Role::Server, server.handle_rotate(f.store, rotate_fwd));
  const auto nonce = relay(Role::Client, client.on_rotate_ack(ack, client_rng));
  auto [device_nonce, device_key] = device.handle_nonce(nonce, device_rng);
  const auto dn = relay(Role::Device, device_nonce);
  const auto client_key = client.on_device_nonce(dn);

  r.client_key = client_key.key;
  r.device_key = device_key.key;
  r.transcript.ops_of(Role::Server) = server.tally();
  r.transcript.ops_of(Role::Device) = device.tally();
  r.transcript.ops_of(Role::Client) = client.tally();
  return r;
}

// ----------------------------------------------------------------------------
// Codec

TEST(Codec, RoundTripsEveryVariant) {
  SeededRandom rng(1);
  auto w = [&] { return rng.next_word(); };
  const std::vector<WireMessage> all{
      ConnReq{DeviceId{1}},
      ConnEstablish{DeviceId{2}, DeviceId{3}},
      AuthChallenge{w(), w(), w(), w(), w()},
      CrpRotate{w(), w(), w(), w()},
      RotateAck{w()},
      ClientNonce{w(), w()},
      DeviceNonce{w(), w()},
  };
  std::uint8_t expected_tag = 1;
  for (const auto& m : all) {
    const Frame f{0xDEADBEEF, m};
    const Bytes bytes = encode(f);
    EXPECT_EQ(bytes[0], expected_tag++);
    EXPECT_EQ(bytes.size(), kFrameHeaderBytes + payload_bits(m) / 8);
    EXPECT_EQ(decode(bytes), f);
    EXPECT_EQ(peek_session_id(bytes), 0xDEADBEEF);
  }
}

TEST(Codec, PayloadSizes) {
  EXPECT_EQ(payload_bits(ConnReq{}), 32u);
  EXPECT_EQ(payload_bits(ConnEstablish{}), 64u);
  EXPECT_EQ(payload_bits(AuthChallenge{}), 1280u);
  EXPECT_EQ(payload_bits(CrpRotate{}), 1024u);
  EXPECT_EQ(payload_bits(RotateAck{}), 256u);
  EXPECT_EQ(payload_bits(ClientNonce{}), 512u);
  EXPECT_EQ(payload_bits(DeviceNonce{}), 512u);
  EXPECT_EQ(encode(Frame{0, AuthChallenge{}}).size() - kFrameHeaderBytes, 160u);
}

TEST(Codec, RejectsMalformedFrames) {
  const Bytes good = encode(Frame{1, CrpRotate{}});
  EXPECT_EQ(code_of([&] { decode(Bytes(good.begin(), good.end() - 1)); }), Errc::MalformedMessage);
  EXPECT_EQ(code_of([&] { decode(Bytes(good.begin(), good.begin() + 3)); }), Errc::MalformedMessage);
  Bytes extra = good;
  extra.push_back(0);
  EXPECT_EQ(code_of([&] { decode(extra); }), Errc::MalformedMessage);
  for (std::uint8_t tag : {0x00, 0x08, 0xFF}) {
    Bytes bad = good;
    bad[0] = tag;
    EXPECT_EQ(code_of([&] { decode(bad); }), Errc::MalformedMessage);
  }
}

TEST(Codec, FieldLayoutIsBigEndianInDeclarationOrder) {
  const Bytes b = encode(Frame{0x01020304, ConnEstablish{DeviceId{0xA0A1A2A3}, DeviceId{0xB0B1B2B3}}});
  EXPECT_EQ(b, (Bytes{0x02, 0x01, 0x02, 0x03, 0x04, 0xA0, 0xA1, 0xA2, 0xA3, 0xB0, 0xB1, 0xB2, 0xB3}));
}

// ----------------------------------------------------------------------------
// Enrollment and registration

TEST(Enroll, StoresOneRecordAndRejectsDuplicates) {
  const auto puf = puf::make_puf(3, 4);
  SeededRandom rng(5);
  ServerStore store;
  const CrpRecord rec = store.enroll_device(kDevice, puf, rng);
  EXPECT_EQ(store.snapshot().crps.size(), 1u);
  EXPECT_EQ(store.find_crp(kDevice), rec);
  EXPECT_EQ(puf.respond(rec.challenge), rec.response);
  EXPECT_EQ(code_of([&] { store.enroll_device(kDevice, puf, rng); }), Errc::AlreadyEnrolled);
  EXPECT_EQ(store.snapshot().crps.size(), 1u);
}

TEST(Enroll, SeededGoldenRecord) {
  const auto puf = puf::make_puf(3, 4);
  SeededRandom rng(5);
  ServerStore store;
  const CrpRecord rec = store.enroll_device(kDevice, puf, rng);
  // Frozen from the reference build.
  EXPECT_EQ(rec.challenge.hex(), GOLDEN_ENROLL_C);
  EXPECT_EQ(rec.response.hex(), GOLDEN_ENROLL_R);
}

TEST(Register, AliasMatchesIndependentDigest) {
  ServerStore store;
  const Registration reg = store.register_client("alice", "hunter2", kClient);
  EXPECT_EQ(reg.record.alias.hex(), oracle::kAliasAlice);
  EXPECT_FALSE(reg.policy_warning);
  EXPECT_EQ(store.find_client(kClient)->alias, reg.record.alias);
  EXPECT_EQ(code_of([&] { store.register_client("bob", "x", kClient); }), Errc::AlreadyRegistered);
}

TEST(Register, PasswordChangesAlias) {
  EXPECT_NE(client_alias("alice", "pw1", kClient), client_alias("alice", "pw2", kClient));
}

TEST(Register, EmptyCredentialsWarn) {
  ServerStore store;
  EXPECT_TRUE(store.register_client("", "", DeviceId{1}).policy_warning);
  EXPECT_TRUE(store.register_client("u", "", DeviceId{2}).policy_warning);
  EXPECT_EQ(store.snapshot().clients.size(), 2u);
}

// ----------------------------------------------------------------------------
// Step 2: server challenge

TEST(ServerBeginAuth, MatchesIndependentOracle) {
  ServerStore store(oracle_snapshot());
  SeededRandom fallback(0);
  ScriptedRandom rng({sequential(0), sequential(32)}, fallback);
  auto [session, msg] = ServerSession::begin_auth(store, kDevice, kClient, rng);
  EXPECT_EQ(msg.m1.hex(), oracle::kM1);
  EXPECT_EQ(msg.m2.hex(), oracle::kM2);
  EXPECT_EQ(msg.m3.hex(), oracle::kM3);
  EXPECT_EQ(msg.m4.hex(), oracle::kM4);
  EXPECT_EQ(msg.challenge.hex(), oracle::kCp);
  EXPECT_EQ(session.tally(), (OpTally{2, 3, 0}));
}

TEST(ServerBeginAuth, ZeroNoncesExposeXorIdentity) {
  ServerStore store(oracle_snapshot());
  SeededRandom fallback(0);
  ScriptedRandom rng({Word256{}, Word256{}}, fallback);
  auto [session, msg] = ServerSession::begin_auth(store, kDevice, kClient, rng);
  EXPECT_EQ(msg.m1.hex(), oracle::kRp);
  EXPECT_TRUE(msg.m2.is_zero());
  EXPECT_EQ(msg.m3.hex(), oracle::kM3Zero);
}

TEST(ServerBeginAuth, UnknownPartiesAllocateNothing) {
  ServerStore store(oracle_snapshot());
  SeededRandom rng(1);
  EXPECT_EQ(code_of([&] { ServerSession::begin_auth(store, DeviceId{9}, kClient, rng); }), Errc::UnknownDevice);
  EXPECT_EQ(code_of([&] { ServerSession::begin_auth(store, kDevice, DeviceId{9}, rng); }), Errc::UnknownClient);
  EXPECT_FALSE(store.busy(kDevice));
}

TEST(ServerBeginAuth, SecondSessionForSameDeviceIsRefused) {
  ServerStore store(oracle_snapshot());
  SeededRandom rng(1);
  {
    auto first = ServerSession::begin_auth(store, kDevice, kClient, rng);
    EXPECT_TRUE(store.busy(kDevice));
    EXPECT_EQ(code_of([&] { ServerSession::begin_auth(store, kDevice, kClient, rng); }), Errc::DeviceBusy);
  }
  EXPECT_FALSE(store.busy(kDevice));
  EXPECT_NO_THROW(ServerSession::begin_auth(store, kDevice, kClient, rng));
}

TEST(ServerBeginAuth, GoldenSeededChallenge) {
  ServerStore store(oracle_snapshot());
  SeededRandom rng(2024);
  auto [session, msg] = ServerSession::begin_auth(store, kDevice, kClient, rng);
  EXPECT_EQ(to_hex(encode(Frame{1, msg})), GOLDEN_AUTH_CHALLENGE);
}

// ----------------------------------------------------------------------------
// Step 5: server rotation, against the independent oracle

TEST(ServerHandleRotate, AcceptsOracleRotationAndCommits) {
  ServerStore store(oracle_snapshot());
  SeededRandom fallback(0);
  ScriptedRandom rng({sequential(0), sequential(32)}, fallback);
  auto [session, msg] = ServerSession::begin_auth(store, kDevice, kClient, rng);
  const CrpRotate rot{W(oracle::kM5), W(oracle::kM6), W(oracle::kM7), W(oracle::kM8)};
  const RotateAck ack = session.handle_rotate(store, rot);
  EXPECT_EQ(ack.m9.hex(), oracle::kM9);
  EXPECT_EQ(store.find_crp(kDevice)->challenge.hex(), oracle::kCnew);
  EXPECT_EQ(store.find_crp(kDevice)->response.hex(), oracle::kRnew);
  EXPECT_EQ(session.phase(), ServerSession::Phase::Done);
  EXPECT_EQ(session.tally(), (OpTally{5, 5, 0}));
  EXPECT_FALSE(store.busy(kDevice));
}

TEST(ServerHandleRotate, TamperedFieldsLeaveStoreUntouched) {
  const CrpRotate good{W(oracle::kM5), W(oracle::kM6), W(oracle::kM7), W(oracle::kM8)};
  for (int field = 0; field < 4; ++field) {
    for (std::size_t bit : {0u, 100u, 255u}) {
      ServerStore store(oracle_snapshot());
      const StoreSnapshot before = store.snapshot();
      SeededRandom fallback(0);
      ScriptedRandom rng({sequential(0), sequential(32)}, fallback);
      auto [session, msg] = ServerSession::begin_auth(store, kDevice, kClient, rng);
      CrpRotate bad = good;
      Word256* fields[] = {&bad.m5, &bad.m6, &bad.m7, &bad.m8};
      *fields[field] = fields[field]->with_bit_flipped(bit);
      EXPECT_EQ(code_of([&] { session.handle_rotate(store, bad); }), Errc::RotateFailure);
      EXPECT_EQ(store.snapshot(), before);
      EXPECT_EQ(session.phase(), ServerSession::Phase::Aborted);
      EXPECT_FALSE(store.busy(kDevice));
    }
  }
}

TEST(ServerHandleRotate, PhaseDisciplineAndExpiry) {
  ServerStore store(oracle_snapshot());
  SeededRandom fallback(0);
  ScriptedRandom rng({sequential(0), sequential(32)}, fallback);
  const auto t0 = Clock::now();
  auto [session, msg] = ServerSession::begin_auth(store, kDevice, kClient, rng, {std::chrono::milliseconds(100)}, t0);
  const CrpRotate rot{W(oracle::kM5), W(oracle::kM6), W(oracle::kM7), W(oracle::kM8)};
  const StoreSnapshot before = store.snapshot();
  EXPECT_EQ(code_of([&] { session.handle_rotate(store, rot, t0 + std::chrono::seconds(1)); }), Errc::SessionExpired);
  EXPECT_EQ(session.phase(), ServerSession::Phase::Aborted);
  EXPECT_EQ(store.snapshot(), before);
  EXPECT_EQ(code_of([&] { session.handle_rotate(store, rot, t0); }), Errc::PhaseViolation);
  EXPECT_EQ(session.phase(), ServerSession::Phase::Aborted);
}

TEST(ServerHandleRotate, PersisterFailureKeepsOldCrp) {
  ServerStore store(oracle_snapshot());
  store.set_persister([](const StoreSnapshot&) { throw std::runtime_error("disk full"); });
  SeededRandom fallback(0);
  ScriptedRandom rng({sequential(0), sequential(32)}, fallback);
  auto [session, msg] = ServerSession::begin_auth(store, kDevice, kClient, rng);
  const CrpRotate rot{W(oracle::kM5), W(oracle::kM6), W(oracle::kM7), W(oracle::kM8)};
  EXPECT_THROW(session.handle_rotate(store, rot), std::runtime_error);
  EXPECT_EQ(store.find_crp(kDevice)->challenge.hex(), oracle::kCp);
  EXPECT_EQ(session.phase(), ServerSession::Phase::Aborted);
}

// ----------------------------------------------------------------------------
// Steps 6-7 against the oracle

TEST(ClientNonceStep, MatchesOracleAndZeroNonceIdentity) {
  ClientSession client(ClientIdentity{kClient, W(kAlias)});
  client.on_establish(ConnEstablish{DeviceId{0x11223344}, kClient});
  client.on_challenge(AuthChallenge{});
  client.on_rotate(CrpRotate{});
  SeededRandom fallback(0);
  ScriptedRandom rng({W(oracle::kNc)}, fallback);
  const ClientNonce n = client.on_rotate_ack(RotateAck{W(oracle::kM9)}, rng);
  EXPECT_EQ(n.m10.hex(), oracle::kM10);
  EXPECT_EQ(n.m11.hex(), oracle::kM11);

  const SessionKey key = client.on_device_nonce(DeviceNonce{W(oracle::kM12), W(oracle::kM13)});
  EXPECT_EQ(key.key.hex(), oracle::kKey);
  EXPECT_EQ(client.tally(), (OpTally{3, 2, 0}));

  ClientSession zero(ClientIdentity{kClient, W(kAlias)});
  zero.on_establish(ConnEstablish{kDevice, kClient});
  zero.on_challenge(AuthChallenge{});
  zero.on_rotate(CrpRotate{});
  ScriptedRandom zero_rng({Word256{}}, fallback);
  EXPECT_EQ(zero.on_rotate_ack(RotateAck{W(oracle::kM9)}, zero_rng).m10.hex(), oracle::kM9);
}

TEST(SessionKeyDerivation, MatchesOracle) {
  EXPECT_EQ(derive_session_key(W(oracle::kNc), W(oracle::kNp), W(kAlias), kDevice).hex(), oracle::kKey);
}

// ----------------------------------------------------------------------------
// Device steps with a real PUF

TEST(DeviceHandleAuth, RecoversServerSecrets) {
  Fixture f;
  auto [server, challenge] = ServerSession::begin_auth(f.store, kDevice, kClient, f.rng);
  auto [device, rotate] = DeviceSession::handle_auth(f.puf, kDevice, challenge, f.rng);
  EXPECT_EQ(device.t1(), server.t1());
  EXPECT_EQ(device.t2(), server.t2());
  EXPECT_EQ(device.client_alias(), server.client_alias());
  EXPECT_NE(device.new_challenge(), challenge.challenge);
  EXPECT_EQ(device.tally(), (OpTally{4, 5, 2}));
}

TEST(DeviceHandleAuth, AnySingleBitFlipAborts) {
  Fixture f;
  auto [server, challenge] = ServerSession::begin_auth(f.store, kDevice, kClient, f.rng);
  for (int field = 0; field < 5; ++field) {
    for (std::size_t byte = 0; byte < 32; ++byte) {
      AuthChallenge bad = challenge;
      Word256* fields[] = {&bad.m1, &bad.m2, &bad.m3, &bad.m4, &bad.challenge};
      *fields[field] = fields[field]->with_bit_flipped(byte * 8 + (byte % 8));
      EXPECT_EQ(code_of([&] { DeviceSession::handle_auth(f.puf, kDevice, bad, f.rng); }),
                Errc::AuthenticationFailure)
          << "field " << field << " byte " << byte;
    }
  }
}

TEST(DeviceHandleAuth, GoldenSeededRotation) {
  const auto puf = puf::make_puf(3, 4);
  ServerStore store;
  SeededRandom enroll_rng(5);
  store.enroll_device(kDevice, puf, enroll_rng);
  store.register_client("alice", "hunter2", kClient);
  SeededRandom server_rng(6), device_rng(7);
  auto [server, challenge] = ServerSession::begin_auth(store, kDevice, kClient, server_rng);
  auto [device, rotate] = DeviceSession::handle_auth(puf, kDevice, challenge, device_rng);
  EXPECT_EQ(to_hex(encode(Frame{1, rotate})), GOLDEN_CRP_ROTATE);

  const RotateAck ack = server.handle_rotate(store, rotate);
  ClientSession client(ClientIdentity::from_credentials("alice", "hunter2", kClient));
  client.on_establish(ConnEstablish{kDevice, kClient});
  client.on_challenge(challenge);
  client.on_rotate(rotate);
  SeededRandom client_rng(8);
  const ClientNonce cn = client.on_rotate_ack(ack, client_rng);
  EXPECT_EQ(to_hex(encode(Frame{1, cn})), GOLDEN_CLIENT_NONCE);
  auto [dn, key] = device.handle_nonce(cn, device_rng);
  EXPECT_EQ(to_hex(encode(Frame{1, dn})), GOLDEN_DEVICE_NONCE);
  EXPECT_EQ(key.key.hex(), GOLDEN_SESSION_KEY);
}

TEST(DeviceHandleNonce, FlippedM11Aborts) {
  Fixture f;
  auto [server, challenge] = ServerSession::begin_auth(f.store, kDevice, kClient, f.rng);
  auto [device, rotate] = DeviceSession::handle_auth(f.puf, kDevice, challenge, f.rng);
  const RotateAck ack = server.handle_rotate(f.store, rotate);
  ClientSession client(f.identity);
  client.on_establish(ConnEstablish{kDevice, kClient});
  client.on_challenge(challenge);
  client.on_rotate(rotate);
  ClientNonce cn = client.on_rotate_ack(ack, f.rng);
  cn.m11 = cn.m11.with_bit_flipped(17);
  EXPECT_EQ(code_of([&] { device.handle_nonce(cn, f.rng); }), Errc::AuthenticationFailure);
  EXPECT_EQ(device.phase(), DeviceSession::Phase::Aborted);
  EXPECT_FALSE(device.key().has_value());
  // Aborted sessions reject further input without changing state.
  EXPECT_EQ(code_of([&] { device.handle_nonce(cn, f.rng); }), Errc::PhaseViolation);
  EXPECT_EQ(device.phase(), DeviceSession::Phase::Aborted);
}

// ----------------------------------------------------------------------------
// Whole handshake

TEST(Handshake, KeysAgreeAndCrpRotates) {
  Fixture f;
  SeededRandom s(10), d(11), c(12);
  const auto before = *f.store.find_crp(kDevice);
  const auto r = handshake(f, s, d, c);
  EXPECT_TRUE(ct_equal(r.client_key, r.device_key));
  const auto after = *f.store.find_crp(kDevice);
  EXPECT_NE(after.challenge, before.challenge);
  EXPECT_EQ(f.puf.respond(after.challenge), after.response);
  EXPECT_EQ(f.store.snapshot().crps.size(), 1u);
}

TEST(Handshake, CostsMatchHandTrace) {
  Fixture f;
  SeededRandom s(10), d(11), c(12);
  const CostReport report = count_costs(handshake(f, s, d, c).transcript);
  EXPECT_EQ(report.of(Role::Device).payload_bits_sent, 1536u);
  EXPECT_EQ(report.of(Role::Client).payload_bits_sent, 2816u);
  EXPECT_EQ(report.of(Role::Server).payload_bits_sent, 1536u);
  EXPECT_EQ(report.total_bits(), 5888u);
  EXPECT_EQ(report.of(Role::Device).ops, (OpTally{8, 7, 2}));
  EXPECT_EQ(report.of(Role::Client).ops, (OpTally{3, 2, 0}));
  EXPECT_EQ(report.of(Role::Server).ops, (OpTally{5, 5, 0}));
}

TEST(Handshake, EmptyTranscriptCostsNothing) {
  const CostReport report = count_costs(Transcript{});
  EXPECT_EQ(report.total_bits(), 0u);
  EXPECT_EQ(report.total_ops(), OpTally{});
}

TEST(Handshake, FiftyConsecutiveRotations) {
  Fixture f(3);
  SeededRandom s(1), d(2), c(3);
  std::set<Word256> challenges{f.store.find_crp(kDevice)->challenge};
  for (int i = 0; i < 50; ++i) {
    const auto r = handshake(f, s, d, c);
    ASSERT_EQ(r.client_key, r.device_key) << "session " << i;
    const auto crp = *f.store.find_crp(kDevice);
    EXPECT_EQ(f.puf.respond(crp.challenge), crp.response);
    EXPECT_TRUE(challenges.insert(crp.challenge).second);
  }
}

TEST(Handshake, FreshValuesAcrossSessions) {
  Fixture f(4);
  SystemRandom s, d, c;
  std::set<Word256> keys;
  for (int i = 0; i < 100; ++i) keys.insert(handshake(f, s, d, c).client_key);
  EXPECT_EQ(keys.size(), 100u);
}

TEST(Handshake, ReplayedRotationFromEarlierSessionFails) {
  Fixture f;
  SeededRandom rng(20);
  auto [s1, c1] = ServerSession::begin_auth(f.store, kDevice, kClient, rng);
  auto [d1, r1] = DeviceSession::handle_auth(f.puf, kDevice, c1, rng);
  s1.handle_rotate(f.store, r1);

  auto [s2, c2] = ServerSession::begin_auth(f.store, kDevice, kClient, rng);
  const StoreSnapshot before = f.store.snapshot();
  EXPECT_EQ(code_of([&] { s2.handle_rotate(f.store, r1); }), Errc::RotateFailure);
  EXPECT_EQ(f.store.snapshot(), before);
}

TEST(Handshake, FlippedM12IsCaughtByM13Check) {
  Fixture f;
  SeededRandom rng(30);
  ClientSession client(f.identity);
  client.on_establish(ConnEstablish{kDevice, kClient});
  auto [server, challenge] = ServerSession::begin_auth(f.store, kDevice, kClient, rng);
  client.on_challenge(challenge);
  auto [device, rotate] = DeviceSession::handle_auth(f.puf, kDevice, challenge, rng);
  client.on_rotate(rotate);
  const auto cn = client.on_rotate_ack(server.handle_rotate(f.store, rotate), rng);
  auto [dn, key] = device.handle_nonce(cn, rng);
  dn.m12 = dn.m12.with_bit_flipped(3);
  EXPECT_EQ(code_of([&] { client.on_device_nonce(dn); }), Errc::AuthenticationFailure);
  EXPECT_FALSE(client.key().has_value());
}

TEST(Handshake, DeviceNonceSplicedAcrossSessionsAborts) {
  Fixture f;
  SeededRandom rng(40);
  auto run_until_device_nonce = [&](ClientSession& client) {
    client.on_establish(ConnEstablish{kDevice, kClient});
    auto [server, challenge] = ServerSession::begin_auth(f.store, kDevice, kClient, rng);
    client.on_challenge(challenge);
    auto [device, rotate] = DeviceSession::handle_auth(f.puf, kDevice, challenge, rng);
    client.on_rotate(rotate);
    const auto cn = client.on_rotate_ack(server.handle_rotate(f.store, rotate), rng);
    return device.handle_nonce(cn, rng).first;
  };
  ClientSession a(f.identity), b(f.identity);
  const DeviceNonce from_a = run_until_device_nonce(a);
  run_until_device_nonce(b);
  EXPECT_EQ(code_of([&] { b.on_device_nonce(from_a); }), Errc::AuthenticationFailure);
}

TEST(ClientSessionDiscipline, OutOfOrderMessagesAreRejected) {
  ClientSession client(ClientIdentity{kClient, W(kAlias)});
  SeededRandom rng(1);
  EXPECT_EQ(code_of([&] { client.on_challenge(AuthChallenge{}); }), Errc::PhaseViolation);
  EXPECT_EQ(code_of([&] { client.on_rotate_ack(RotateAck{}, rng); }), Errc::PhaseViolation);
  EXPECT_EQ(code_of([&] { client.on_device_nonce(DeviceNonce{}); }), Errc::PhaseViolation);
  EXPECT_EQ(client.phase(), ClientSession::Phase::AwaitEstablish);
  EXPECT_EQ(code_of([&] { client.on_establish(ConnEstablish{kDevice, DeviceId{1}}); }), Errc::IdentityMismatch);
  EXPECT_EQ(client.phase(), ClientSession::Phase::Aborted);
}

TEST(ClientSessionDiscipline, ExpiresAfterDeadline) {
  const auto t0 = Clock::now();
  ClientSession client(ClientIdentity{kClient, W(kAlias)}, {std::chrono::milliseconds(10)}, t0);
  EXPECT_EQ(code_of([&] { client.on_establish(ConnEstablish{kDevice, kClient}, t0 + std::chrono::seconds(1)); }),
            Errc::SessionExpired);
  EXPECT_EQ(client.phase(), ClientSession::Phase::Aborted);
}

TEST(ServerStoreConcurrency, DistinctDevicesProceedInParallel) {
  const auto puf_a = puf::make_puf(1, 1, 1024);
  const auto puf_b = puf::make_puf(2, 2, 1024);
  ServerStore store;
  SeededRandom rng(1);
  store.enroll_device(DeviceId{1}, puf_a, rng);
  store.enroll_device(DeviceId{2}, puf_b, rng);
  store.register_client("u", "p", kClient);

  auto worker = [&](DeviceId id, const puf::PufFunction& puf, std::uint64_t seed) {
    SeededRandom local(seed);
    for (int i = 0; i < 20; ++i) {
      auto [server, challenge] = ServerSession::begin_auth(store, id, kClient, local);
      auto [device, rotate] = DeviceSession::handle_auth(puf, id, challenge, local);
      server.handle_rotate(store, rotate);
    }
  };
  std::thread ta(worker, DeviceId{1}, std::cref(puf_a), 10);
  std::thread tb(worker, DeviceId{2}, std::cref(puf_b), 20);
  ta.join();
  tb.join();
  const auto snap = store.snapshot();
  EXPECT_EQ(snap.crps.size(), 2u);
  EXPECT_EQ(puf_a.respond(snap.crps.at(DeviceId{1}).challenge), snap.crps.at(DeviceId{1}).response);
  EXPECT_EQ(puf_b.respond(snap.crps.at(DeviceId{2}).challenge), snap.crps.at(DeviceId{2}).response);
}

}  // namespace
}  // namespace pufkex::protocol
