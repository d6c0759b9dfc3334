#include "pufkex/harness/simulation.hpp"

#include <sstream>

namespace pufkex::harness {

using namespace protocol;

namespace {

std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t stream) { return seed * 8 + stream; }

// Where a frame on the client-device link is headed, judged by its tag alone.
std::optional<Role> open_destination(ByteView frame) {
  if (frame.empty()) return std::nullopt;
  switch (frame[0]) {
    case ConnReq::kTag:
    case AuthChallenge::kTag:
    case ClientNonce::kTag:
      return Role::Device;
    case ConnEstablish::kTag:
    case CrpRotate::kTag:
    case RotateAck::kTag:
    case DeviceNonce::kTag:
      return Role::Client;
    default:
      return std::nullopt;
  }
}

Role peer_on_open(Role to) { return to == Role::Device ? Role::Client : Role::Device; }

const char* waiting_step(ClientSession::Phase phase) {
  switch (phase) {
    case ClientSession::Phase::AwaitEstablish: return "client_handle_establish";
    case ClientSession::Phase::AwaitServer: return "client_forward_challenge";
    case ClientSession::Phase::AwaitDeviceRotate: return "client_forward_rotate";
    case ClientSession::Phase::AwaitRotateAck: return "client_send_nonce";
    case ClientSession::Phase::AwaitDeviceNonce: return "client_finish";
    default: return "client";
  }
}

}  // namespace

InFlight SimChannel::pop() {
  InFlight f = std::move(queue_.front());
  queue_.pop_front();
  return f;
}

// ---------------------------------------------------------------------------

const Bytes& Adversary::source(std::size_t index) const {
  if (index >= observed_.size())
    throw Error(Errc::ConfigError, "adversary",
                "frame " + std::to_string(index) + " has not been observed");
  return observed_[index].frame;
}

std::vector<Bytes> Adversary::intercept(const Bytes& frame, Role from) {
  observed_.push_back({frame, from});
  const std::size_t index = observed_.size() - 1;
  std::optional<std::vector<Bytes>> decided;
  if (strategy_) decided = strategy_(*this, index);
  const Action action = next_action_ < script_.actions.size() ? script_.actions[next_action_] : Action{Forward{}};
  ++next_action_;
  if (decided) return *std::move(decided);

  return std::visit(
      [&](const auto& a) -> std::vector<Bytes> {
        using T = std::decay_t<decltype(a)>;
        if constexpr (std::is_same_v<T, Forward>) {
          return {frame};
        } else if constexpr (std::is_same_v<T, Drop>) {
          return {};
        } else if constexpr (std::is_same_v<T, Replay>) {
          return {source(a.index)};
        } else if constexpr (std::is_same_v<T, Tamper>) {
          Bytes copy = source(a.index);
          if (a.byte_offset >= copy.size())
            throw Error(Errc::ConfigError, "adversary", "tamper offset beyond frame");
          copy[a.byte_offset] ^= static_cast<std::uint8_t>(0x80u >> a.bit);
          return {copy};
        } else {
          return {a.frame};
        }
      },
      action);
}

Bytes Adversary::replay_as(std::size_t index, std::uint32_t session_id) const {
  Bytes copy = source(index);
  if (copy.size() < kFrameHeaderBytes)
    throw Error(Errc::ConfigError, "adversary", "frame too short to carry a session id");
  for (int i = 0; i < 4; ++i) copy[1 + i] = static_cast<std::uint8_t>(session_id >> (24 - 8 * i));
  return copy;
}

std::optional<std::size_t> Adversary::last_with_tag(std::uint8_t tag) const {
  for (std::size_t i = observed_.size(); i-- > 0;)
    if (!observed_[i].frame.empty() && observed_[i].frame[0] == tag) return i;
  return std::nullopt;
}

// ---------------------------------------------------------------------------

Fixture Fixture::make(std::uint64_t seed, std::size_t cell_count) {
  Fixture f;
  f.seed = seed;
  f.device_id = DeviceId{0xD0000000u | static_cast<std::uint32_t>(seed & 0x0FFFFFFF)};
  f.client_id = DeviceId{0xC0000000u | static_cast<std::uint32_t>(seed & 0x0FFFFFFF)};
  f.username = "user-" + std::to_string(seed);
  f.password = "pass-" + std::to_string(seed);
  f.puf = std::make_shared<const puf::PufFunction>(
      puf::make_puf(stream_seed(seed, 5), stream_seed(seed, 6), cell_count));
  ServerStore store;
  SeededRandom rng(stream_seed(seed, 1));
  store.enroll_device(f.device_id, *f.puf, rng);
  store.register_client(f.username, f.password, f.client_id);
  f.store = store.snapshot();
  return f;
}

std::string describe(const Outcome& outcome) {
  if (const auto* e = std::get_if<Established>(&outcome))
    return e->keys_match ? "established, keys match" : "established, KEYS DIFFER";
  const auto& a = std::get<AbortedAt>(outcome);
  std::ostringstream out;
  out << "aborted at " << a.step << " (" << to_string(a.error) << ")";
  return out.str();
}

// ---------------------------------------------------------------------------

Simulation::Simulation(const Fixture& fixture, std::uint64_t seed, Adversary adversary,
                       SimOptions options)
    : fixture_(fixture),
      options_(std::move(options)),
      adversary_(std::move(adversary)),
      store_(fixture.store),
      server_fallback_(stream_seed(seed, 2)),
      device_rng_(stream_seed(seed, 3)),
      client_rng_(stream_seed(seed, 4)),
      server_rng_(options_.server_words, server_fallback_) {}

Clock::time_point Simulation::now() const {
  return Clock::time_point{} + std::chrono::milliseconds(deliveries_) + skew_;
}

std::uint32_t Simulation::start_session() {
  const std::uint32_t id = next_session_++;
  ClientIdentity identity = ClientIdentity::from_credentials(fixture_.username, fixture_.password,
                                                             fixture_.client_id);
  client_sessions_.emplace_back(id, ClientSession(identity, options_.session, now()));
  client_session_id_ = id;
  send(Role::Client, Role::Device, client_sessions_.back().second.connect_request(), id);
  flush();
  return id;
}

void Simulation::inject_open(Bytes frame) {
  const Role to = open_destination(frame).value_or(Role::Device);
  enqueue(InFlight{peer_on_open(to), to, std::move(frame)});
}

void Simulation::send(Role from, Role to, const WireMessage& message, std::uint32_t session_id) {
  Bytes bytes = encode(Frame{session_id, message});
  sent_.record(from, bytes);
  outbox_.push_back(InFlight{from, to, std::move(bytes)});
}

void Simulation::enqueue(InFlight f) {
  SimChannel& channel = (f.from == Role::Server || f.to == Role::Server) ? secure_ : open_;
  channel.record(f);
  channel.push(std::move(f));
  order_.push_back(channel.kind());
}

void Simulation::flush() {
  std::vector<InFlight> out;
  out.swap(outbox_);
  for (auto& f : out) {
    if (f.from == Role::Server || f.to == Role::Server) {
      enqueue(std::move(f));
      continue;
    }
    for (Bytes& replacement : adversary_.intercept(f.frame, f.from)) {
      const Role to = open_destination(replacement).value_or(f.to);
      enqueue(InFlight{peer_on_open(to), to, std::move(replacement)});
    }
  }
}

void Simulation::deliver(const InFlight& f) {
  ++deliveries_;
  try {
    Frame frame;
    try {
      frame = decode(f.frame);
    } catch (const Error& e) {
      throw Error(e.code(), std::string(role_name(f.to)) + "_receive", e.what());
    }
    switch (f.to) {
      case Role::Client: at_client(f.from, frame); break;
      case Role::Device: at_device(frame); break;
      case Role::Server: at_server(frame); break;
    }
  } catch (const Error& e) {
    outbox_.clear();
    abort_ = AbortedAt{e.step(), e.code(), e.what()};
    return;
  }
  flush();
}

void Simulation::at_client(Role from, const Frame& frame) {
  if (!client_session_id_ || frame.session_id != *client_session_id_) return;
  ClientSession& c = client_sessions_.back().second;
  const std::uint32_t sid = frame.session_id;
  const auto unexpected = [&] {
    return Error(Errc::PhaseViolation, "client_receive",
                 std::string(message_name(frame.message)) + " from " + std::string(role_name(from)));
  };
  std::visit(
      [&](const auto& m) {
        using T = std::decay_t<decltype(m)>;
        constexpr bool from_device = std::is_same_v<T, ConnEstablish> || std::is_same_v<T, CrpRotate> ||
                                     std::is_same_v<T, DeviceNonce>;
        constexpr bool from_server = std::is_same_v<T, AuthChallenge> || std::is_same_v<T, RotateAck>;
        if ((from_device && from != Role::Device) || (from_server && from != Role::Server) ||
            (!from_device && !from_server))
          throw unexpected();
        if constexpr (std::is_same_v<T, ConnEstablish>) {
          send(Role::Client, Role::Server, c.on_establish(m, now()), sid);
        } else if constexpr (std::is_same_v<T, AuthChallenge>) {
          send(Role::Client, Role::Device, c.on_challenge(m, now()), sid);
        } else if constexpr (std::is_same_v<T, CrpRotate>) {
          send(Role::Client, Role::Server, c.on_rotate(m, now()), sid);
        } else if constexpr (std::is_same_v<T, RotateAck>) {
          send(Role::Client, Role::Device, c.on_rotate_ack(m, client_rng_, now()), sid);
        } else if constexpr (std::is_same_v<T, DeviceNonce>) {
          c.on_device_nonce(m, now());
        }
      },
      frame.message);
}

void Simulation::at_device(const Frame& frame) {
  const std::uint32_t sid = frame.session_id;
  if (const auto* req = std::get_if<ConnReq>(&frame.message)) {
    if (device_.session) return;  // one session at a time; later requests are refused
    device_.session = sid;
    send(Role::Device, Role::Client, device_answer_conn_req(fixture_.device_id, *req), sid);
    return;
  }
  if (!device_.session || sid != *device_.session) return;

  if (const auto* auth = std::get_if<AuthChallenge>(&frame.message)) {
    if (device_.handshake) throw Error(Errc::PhaseViolation, "device_handle_auth");
    try {
      auto [session, rotate] =
          DeviceSession::handle_auth(*fixture_.puf, fixture_.device_id, *auth, device_rng_, options_.session, now());
      device_.handshake.emplace(std::move(session));
      send(Role::Device, Role::Client, rotate, sid);
    } catch (const Error&) {
      device_ = {};
      throw;
    }
    return;
  }
  if (const auto* nonce = std::get_if<ClientNonce>(&frame.message)) {
    if (!device_.handshake) throw Error(Errc::PhaseViolation, "device_handle_nonce");
    const auto retire = [&] {
      device_history_.emplace_back(sid, std::move(*device_.handshake));
      device_ = {};
    };
    try {
      auto [reply, key] = device_.handshake->handle_nonce(*nonce, device_rng_, now());
      retire();
      send(Role::Device, Role::Client, reply, sid);
    } catch (const Error&) {
      retire();
      throw;
    }
    return;
  }
  throw Error(Errc::PhaseViolation, "device_receive", std::string(message_name(frame.message)));
}

void Simulation::at_server(const Frame& frame) {
  const std::uint32_t sid = frame.session_id;
  if (const auto* est = std::get_if<ConnEstablish>(&frame.message)) {
    if (server_sessions_.count(sid)) throw Error(Errc::PhaseViolation, "server_begin_auth");
    auto [session, challenge] =
        ServerSession::begin_auth(store_, est->device_id, est->client_id, server_rng_, options_.session, now());
    server_sessions_.emplace(sid, std::move(session));
    send(Role::Server, Role::Client, challenge, sid);
    return;
  }
  if (const auto* rot = std::get_if<CrpRotate>(&frame.message)) {
    const auto it = server_sessions_.find(sid);
    if (it == server_sessions_.end()) throw Error(Errc::PhaseViolation, "server_handle_rotate");
    const auto retire = [&] {
      server_history_.emplace_back(sid, std::move(it->second));
      server_sessions_.erase(it);
    };
    try {
      const RotateAck ack = it->second.handle_rotate(store_, *rot, now());
      retire();
      send(Role::Server, Role::Client, ack, sid);
    } catch (...) {
      retire();
      throw;
    }
    return;
  }
  throw Error(Errc::PhaseViolation, "server_receive", std::string(message_name(frame.message)));
}

void Simulation::wind_down() {
  skew_ += options_.session.timeout + std::chrono::milliseconds(1);
  for (auto& [sid, s] : server_sessions_) {
    s.expire_if_due(now());
    server_history_.emplace_back(sid, std::move(s));
  }
  server_sessions_.clear();
  if (device_.handshake) device_history_.emplace_back(*device_.session, std::move(*device_.handshake));
  device_ = {};
  if (client_session_id_) {
    ClientSession& c = client_sessions_.back().second;
    if (c.phase() != ClientSession::Phase::Established) c.abort();
    client_session_id_.reset();
  }
  while (!open_.empty()) open_.pop();
  while (!secure_.empty()) secure_.pop();
  order_.clear();
}

Outcome Simulation::run() {
  run_start_device_ = device_history_.size();
  run_client_.reset();
  if (client_session_id_) run_client_ = client_sessions_.size() - 1;
  while (!abort_ && !order_.empty()) {
    const ChannelKind kind = order_.front();
    order_.pop_front();
    const InFlight f = (kind == ChannelKind::Open ? open_ : secure_).pop();
    deliver(f);
  }
  return finish();
}

Outcome Simulation::finish() {
  if (abort_) {
    AbortedAt a = *std::move(abort_);
    abort_.reset();
    wind_down();
    return a;
  }
  const ClientSession* client =
      client_session_id_ ? &client_sessions_.back().second : nullptr;
  if (client && client->phase() == ClientSession::Phase::Established) {
    const auto dk = device_key();
    const bool match = dk && client->key() && ct_equal(*dk, *client->key());
    client_session_id_.reset();
    return Established{match};
  }
  // Nothing in flight and no one finished: the deadline will fire.
  for (std::size_t i = run_start_device_; i < device_history_.size(); ++i)
    if (device_history_[i].second.phase() == DeviceSession::Phase::Established && !client) {
      wind_down();
      return Established{false};
    }
  AbortedAt a{"idle", Errc::SessionExpired, "no frames in flight"};
  if (client) a.step = waiting_step(client->phase());
  else if (device_.session) a.step = device_.handshake ? "device_handle_nonce" : "device_handle_auth";
  wind_down();
  return a;
}

// ---------------------------------------------------------------------------

std::vector<SessionTruth> Simulation::truths() const {
  std::vector<SessionTruth> out;
  const auto server_truth = [&](const ServerSession& s) {
    SessionTruth t;
    t.device_id = s.device_id();
    t.rp = s.crp().response;
    t.cp = s.crp().challenge;
    t.t1 = s.t1();
    t.t2 = s.t2();
    t.alias = s.client_alias();
    out.push_back(t);
  };
  for (const auto& [sid, s] : server_history_) server_truth(s);
  for (const auto& [sid, s] : server_sessions_) server_truth(s);

  const auto device_truth = [&](const DeviceSession& d) {
    SessionTruth t;
    t.device_id = d.device_id();
    t.cp = d.challenge();
    t.rp = d.response();
    t.t1 = d.t1();
    t.t2 = d.t2();
    t.alias = d.client_alias();
    t.cp_new = d.new_challenge();
    t.rp_new = d.new_response();
    if (d.phase() == DeviceSession::Phase::Established) {
      t.nc = d.client_nonce();
      t.np = d.device_nonce();
      t.key = d.key();
    }
    out.push_back(t);
  };
  for (const auto& [sid, d] : device_history_) device_truth(d);
  if (device_.handshake) device_truth(*device_.handshake);

  for (const auto& [sid, c] : client_sessions_) {
    using P = ClientSession::Phase;
    SessionTruth t;
    t.device_id = c.device_id().value_or(fixture_.device_id);
    t.alias = c.identity().alias;
    if (c.key() || c.phase() == P::AwaitDeviceNonce) {
      t.m9 = c.rotate_ack();
      t.nc = c.client_nonce();
    }
    if (c.key()) {
      t.np = c.device_nonce();
      t.key = c.key();
    }
    out.push_back(t);
  }
  return out;
}

Transcript Simulation::transcript() const {
  Transcript t = sent_;
  const auto add = [&](Role role, const OpTally& x) {
    OpTally& acc = t.ops_of(role);
    acc.hash_ops += x.hash_ops;
    acc.xor_ops += x.xor_ops;
    acc.puf_ops += x.puf_ops;
  };
  for (const auto& [sid, c] : client_sessions_) add(Role::Client, c.tally());
  for (const auto& [sid, d] : device_history_) add(Role::Device, d.tally());
  if (device_.handshake) add(Role::Device, device_.handshake->tally());
  for (const auto& [sid, s] : server_history_) add(Role::Server, s.tally());
  for (const auto& [sid, s] : server_sessions_) add(Role::Server, s.tally());
  return t;
}

std::optional<Word256> Simulation::client_key() const {
  if (!run_client_) return std::nullopt;
  return client_sessions_[*run_client_].second.key();
}

std::optional<Word256> Simulation::device_key() const {
  if (device_history_.size() <= run_start_device_) return std::nullopt;
  return device_history_.back().second.key();
}

std::vector<Word256> Simulation::server_view() const {
  std::vector<Word256> view;
  const auto session = [&](const ServerSession& s) {
    view.insert(view.end(), {s.t1(), s.t2(), s.crp().challenge, s.crp().response, s.client_alias()});
  };
  for (const auto& [sid, s] : server_history_) session(s);
  for (const auto& [sid, s] : server_sessions_) session(s);
  const StoreSnapshot snap = store_.snapshot();
  for (const auto& [id, crp] : snap.crps) view.insert(view.end(), {crp.challenge, crp.response});
  for (const auto& [id, client] : snap.clients) view.push_back(client.alias);
  for (const auto& f : secure_.log()) {
    const auto words = frame_words(f.frame);
    view.insert(view.end(), words.begin(), words.end());
  }
  return view;
}

}  // namespace pufkex::harness
