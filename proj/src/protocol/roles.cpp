#include "pufkex/protocol/roles.hpp"

#include "pufkex/error.hpp"

namespace pufkex::protocol {

Word256 derive_session_key(const Word256& client_nonce, const Word256& device_nonce,
                           const Word256& client_alias, DeviceId device_id) {
  return hash_fields({client_nonce, device_nonce, client_alias, device_id});
}

Word256 OpMeter::hash(std::initializer_list<HashField> fields) {
  ++tally_.hash_ops;
  return hash_fields(fields);
}

Word256 OpMeter::mix(const Word256& a, const Word256& b) {
  ++tally_.xor_ops;
  return xor256(a, b);
}

Word256 OpMeter::puf(const puf::PufFunction& f, const Word256& challenge) {
  ++tally_.puf_ops;
  return f.respond(challenge);
}

ConnEstablish device_answer_conn_req(DeviceId self, const ConnReq& request) {
  return ConnEstablish{self, request.client_id};
}

// ---------------------------------------------------------------------------
// Server

std::pair<ServerSession, AuthChallenge> ServerSession::begin_auth(ServerStore& store,
                                                                  DeviceId device_id,
                                                                  DeviceId client_id,
                                                                  RandomSource& rng,
                                                                  SessionOptions options,
                                                                  Clock::time_point now) {
  constexpr const char* kStep = "server_begin_auth";
  if (!store.find_crp(device_id)) throw Error(Errc::UnknownDevice, kStep, device_id.hex());
  const auto client = store.find_client(client_id);
  if (!client) throw Error(Errc::UnknownClient, kStep, client_id.hex());

  ServerSession s;
  s.lease_ = store.acquire(device_id);
  // Re-read under the lease: a rotation may have landed in between.
  const auto crp = store.find_crp(device_id);
  if (!crp) throw Error(Errc::UnknownDevice, kStep, device_id.hex());
  s.crp_ = *crp;
  s.client_id_ = client_id;
  s.alias_ = client->alias;
  s.expires_at_ = now + options.timeout;

  s.t1_ = rng.next_word();
  s.t2_ = rng.next_word();

  AuthChallenge msg;
  msg.m1 = s.meter_.mix(s.t1_, s.crp_.response);
  msg.m2 = s.meter_.mix(s.t1_, s.t2_);
  msg.m3 = s.meter_.mix(s.meter_.hash({s.t1_, s.t2_}), s.alias_);
  msg.m4 = s.meter_.hash({s.t1_, s.t2_, s.crp_.response, s.crp_.challenge, s.alias_});
  msg.challenge = s.crp_.challenge;
  return {std::move(s), msg};
}

void ServerSession::abort() noexcept {
  phase_ = Phase::Aborted;
  lease_.release();
}

bool ServerSession::expire_if_due(Clock::time_point now) {
  if (phase_ == Phase::AwaitRotate && now > expires_at_) {
    abort();
    return true;
  }
  return false;
}

RotateAck ServerSession::handle_rotate(ServerStore& store, const CrpRotate& message,
                                       Clock::time_point now) {
  constexpr const char* kStep = "server_handle_rotate";
  if (phase_ != Phase::AwaitRotate) throw Error(Errc::PhaseViolation, kStep);
  if (expire_if_due(now)) throw Error(Errc::SessionExpired, kStep);

  const Word256& rp = crp_.response;
  const Word256 new_challenge = meter_.mix(message.m5, rp);
  if (!ct_equal(message.m6, meter_.hash({message.m5, rp}))) {
    abort();
    throw Error(Errc::RotateFailure, kStep, "M6 does not verify");
  }
  const Word256 new_response = meter_.mix(t2_, message.m7);
  if (!ct_equal(message.m8, meter_.hash({message.m7, t2_}))) {
    abort();
    throw Error(Errc::RotateFailure, kStep, "M8 does not verify");
  }

  try {
    store.commit_rotation(crp_, CrpRecord{crp_.device_id, new_challenge, new_response});
  } catch (...) {
    abort();
    throw;
  }

  RotateAck ack{meter_.hash({new_challenge, new_response})};
  phase_ = Phase::Done;
  lease_.release();
  return ack;
}

// ---------------------------------------------------------------------------
// Device

std::pair<DeviceSession, CrpRotate> DeviceSession::handle_auth(const puf::PufFunction& puf,
                                                               DeviceId self,
                                                               const AuthChallenge& message,
                                                               RandomSource& rng,
                                                               SessionOptions options,
                                                               Clock::time_point now) {
  DeviceSession s;
  s.self_ = self;
  s.expires_at_ = now + options.timeout;
  OpMeter& op = s.meter_;

  const Word256 rp = op.puf(puf, message.challenge);
  s.t1_ = op.mix(message.m1, rp);
  s.t2_ = op.mix(message.m2, s.t1_);
  s.alias_ = op.mix(message.m3, op.hash({s.t1_, s.t2_}));
  if (!ct_equal(message.m4, op.hash({s.t1_, s.t2_, rp, message.challenge, s.alias_})))
    throw Error(Errc::AuthenticationFailure, "device_handle_auth", "M4 does not verify");
  s.challenge_ = message.challenge;
  s.response_ = rp;

  do {
    s.new_challenge_ = rng.next_word();
  } while (s.new_challenge_ == message.challenge);

  CrpRotate out;
  out.m5 = op.mix(s.new_challenge_, rp);
  s.new_response_ = op.puf(puf, s.new_challenge_);
  out.m6 = op.hash({out.m5, rp});
  out.m7 = op.mix(s.t2_, s.new_response_);
  out.m8 = op.hash({out.m7, s.t2_});
  return {std::move(s), out};
}

std::pair<DeviceNonce, SessionKey> DeviceSession::handle_nonce(const ClientNonce& message,
                                                               RandomSource& rng,
                                                               Clock::time_point now) {
  constexpr const char* kStep = "device_handle_nonce";
  if (phase_ != Phase::AwaitNonce) throw Error(Errc::PhaseViolation, kStep);
  if (now > expires_at_) {
    phase_ = Phase::Aborted;
    throw Error(Errc::SessionExpired, kStep);
  }

  const Word256 m9 = meter_.hash({new_challenge_, new_response_});
  const Word256 nc = meter_.mix(message.m10, m9);
  if (!ct_equal(message.m11, meter_.hash({message.m10, m9}))) {
    phase_ = Phase::Aborted;
    throw Error(Errc::AuthenticationFailure, kStep, "M11 does not verify");
  }
  client_nonce_ = nc;
  device_nonce_ = rng.next_word();

  DeviceNonce out;
  out.m12 = meter_.mix(device_nonce_, client_nonce_);
  out.m13 = meter_.hash({out.m12, client_nonce_});
  key_ = meter_.hash({client_nonce_, device_nonce_, alias_, self_});
  phase_ = Phase::Established;
  return {out, SessionKey{*key_}};
}

// ---------------------------------------------------------------------------
// Client

ClientIdentity ClientIdentity::from_credentials(std::string_view username,
                                                std::string_view password, DeviceId client_id) {
  return ClientIdentity{client_id, client_alias(username, password, client_id)};
}

ClientSession::ClientSession(ClientIdentity identity, SessionOptions options,
                             Clock::time_point now)
    : identity_(identity), expires_at_(now + options.timeout) {}

void ClientSession::expect(Phase wanted, const char* step, Clock::time_point now) {
  if (phase_ != wanted) throw Error(Errc::PhaseViolation, step);
  if (now > expires_at_) {
    phase_ = Phase::Aborted;
    throw Error(Errc::SessionExpired, step);
  }
}

ConnEstablish ClientSession::on_establish(const ConnEstablish& message, Clock::time_point now) {
  constexpr const char* kStep = "client_handle_establish";
  expect(Phase::AwaitEstablish, kStep, now);
  if (message.client_id != identity_.client_id) {
    phase_ = Phase::Aborted;
    throw Error(Errc::IdentityMismatch, kStep, "device echoed a different client id");
  }
  device_id_ = message.device_id;
  phase_ = Phase::AwaitServer;
  return message;
}

AuthChallenge ClientSession::on_challenge(const AuthChallenge& message, Clock::time_point now) {
  expect(Phase::AwaitServer, "client_forward_challenge", now);
  phase_ = Phase::AwaitDeviceRotate;
  return message;
}

CrpRotate ClientSession::on_rotate(const CrpRotate& message, Clock::time_point now) {
  expect(Phase::AwaitDeviceRotate, "client_forward_rotate", now);
  phase_ = Phase::AwaitRotateAck;
  return message;
}

ClientNonce ClientSession::on_rotate_ack(const RotateAck& message, RandomSource& rng,
                                         Clock::time_point now) {
  expect(Phase::AwaitRotateAck, "client_send_nonce", now);
  m9_ = message.m9;
  client_nonce_ = rng.next_word();
  ClientNonce out;
  out.m10 = meter_.mix(client_nonce_, m9_);
  out.m11 = meter_.hash({out.m10, m9_});
  phase_ = Phase::AwaitDeviceNonce;
  return out;
}

SessionKey ClientSession::on_device_nonce(const DeviceNonce& message, Clock::time_point now) {
  constexpr const char* kStep = "client_finish";
  expect(Phase::AwaitDeviceNonce, kStep, now);
  const Word256 np = meter_.mix(message.m12, client_nonce_);
  if (!ct_equal(message.m13, meter_.hash({message.m12, client_nonce_}))) {
    phase_ = Phase::Aborted;
    throw Error(Errc::AuthenticationFailure, kStep, "M13 does not verify");
  }
  device_nonce_ = np;
  key_ = meter_.hash({client_nonce_, device_nonce_, identity_.alias, *device_id_});
  phase_ = Phase::Established;
  return SessionKey{*key_};
}

}  // namespace pufkex::protocol
