#include <csignal>
#include <cstdio>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <thread>

#include <spdlog/spdlog.h>

#include "CLI11.hpp"
#include "pufkex/app/client.hpp"
#include "pufkex/app/config.hpp"
#include "pufkex/app/device.hpp"
#include "pufkex/app/server.hpp"
#include "pufkex/app/store_file.hpp"
#include "pufkex/error.hpp"
#include "pufkex/harness/report.hpp"
#include "pufkex/harness/scenarios.hpp"

namespace {

using namespace pufkex;
using namespace pufkex::app;
using namespace pufkex::harness;

constexpr int kExitAborted = 1;
constexpr int kExitUsage = 2;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string fingerprint(const Word256& key) {
  return hash256(key.bytes()).hex().substr(0, 16);
}

// ---------------------------------------------------------------------------
// Shared options

struct ConfigArgs {
  std::optional<std::string> config;
  std::optional<std::string> store;

  void add(CLI::App* cmd) {
    cmd->add_option("--config", config, "JSON config file (default: $PUFKEX_CONFIG)");
    cmd->add_option("--store", store, "store file; overrides the config's store_path");
  }

  AppConfig load() const {
    AppConfig c;
    const auto path = config_path(config ? std::optional<std::filesystem::path>(*config) : std::nullopt);
    if (path) c = load_config(*path);
    if (store) c.store_path = *store;
    if (c.store_path.empty()) throw UsageError("a store is required: pass --store or --config");
    return c;
  }
};

DeviceId parse_id(const std::string& text) {
  try {
    return DeviceId::from_hex(text);
  } catch (const std::exception&) {
    throw UsageError("bad id '" + text + "': expected 8 hex digits");
  }
}

void apply_log_level(const std::string& level) {
  const auto parsed = spdlog::level::from_str(level);
  if (parsed == spdlog::level::off && level != "off") throw UsageError("unknown log level '" + level + "'");
  spdlog::set_level(parsed);
}

// ---------------------------------------------------------------------------
// enroll / register

int cmd_enroll(const ConfigArgs& cfg, const std::string& device_hex, std::uint64_t chip_id, std::uint64_t qual_seed,
               const std::string& identity_path) {
  const AppConfig config = cfg.load();
  const DeviceId id = parse_id(device_hex);
  const auto puf = puf::make_puf(chip_id, qual_seed, config.puf.cell_count, config.puf.stable_fraction,
                                 config.puf.qualification_reads, config.puf.fingerprint_bits);
  StoreFile file(config.store_path);
  protocol::ServerStore store(file.load(), [&](const protocol::StoreSnapshot& s) { file.save(s); });
  SystemRandom rng;
  const auto crp = store.enroll_device(id, puf, rng);
  puf::save_identity(identity_path, puf);
  std::cout << "enrolled device " << id.hex() << " (chip " << chip_id << ", " << puf.pool().addresses.size()
            << " stable cells)\n"
            << "challenge " << crp.challenge.hex() << "\n"
            << "identity written to " << identity_path << "\n";
  return 0;
}

int cmd_register(const ConfigArgs& cfg, const std::string& client_hex, const std::string& username,
                 const std::string& password) {
  const AppConfig config = cfg.load();
  StoreFile file(config.store_path);
  protocol::ServerStore store(file.load(), [&](const protocol::StoreSnapshot& s) { file.save(s); });
  const auto reg = store.register_client(username, password, parse_id(client_hex));
  if (reg.policy_warning) std::cerr << "warning: empty username or password\n";
  std::cout << "registered client " << reg.record.client_id.hex() << "\nalias " << reg.record.alias.hex() << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// auth

int report_outcome(const ScenarioResult& r) {
  if (r.client_key) std::cout << "client key fingerprint " << fingerprint(*r.client_key) << "\n";
  else std::cout << "client key fingerprint (none)\n";
  if (r.device_key) std::cout << "device key fingerprint " << fingerprint(*r.device_key) << "\n";
  else std::cout << "device key fingerprint (none)\n";
  std::cout << "verdict: " << describe(r.outcome) << "\n";
  if (const auto* a = r.aborted()) {
    std::cerr << "aborted at " << a->step << ": " << to_string(a->error) << "\n";
    return kExitAborted;
  }
  return std::get<Established>(r.outcome).keys_match ? 0 : kExitAborted;
}

struct AuthArgs {
  std::string mode;
  std::uint64_t seed = 7;
  std::string device;
  std::string client_hex, username, password;
};

int cmd_auth(const ConfigArgs& cfg, const AuthArgs& a) {
  std::string mode = a.mode;
  std::optional<AppConfig> config;
  if (mode.empty() || mode == "tcp") {
    try {
      config = cfg.load();
    } catch (const UsageError&) {
      if (mode == "tcp") throw;
    }
    if (mode.empty()) mode = config && config->channel_mode == ChannelMode::Tcp ? "tcp" : "simulated";
  }

  if (mode == "simulated") {
    std::cout << "seed " << a.seed << " (simulated)\n";
    return report_outcome(run_honest(a.seed));
  }
  if (a.client_hex.empty() || a.device.empty()) throw UsageError("tcp mode needs --client-id and --device");
  ClientOptions options;
  options.device = Endpoint::parse(a.device);
  options.server = config->listen;
  options.psk = config->psk;
  options.io_timeout = config->io_timeout;
  options.session.timeout = config->session_timeout;
  if (uses_default_psk(*config)) spdlog::warn("using the built-in development PSK");
  SystemRandom rng;
  const auto identity = protocol::ClientIdentity::from_credentials(a.username, a.password, parse_id(a.client_hex));
  const HandshakeResult r = run_tcp_handshake(identity, options, rng);
  std::cout << "device " << r.device_id.hex() << "\n"
            << "client key fingerprint " << fingerprint(r.key) << "\n"
            << "verdict: established, device answered with a valid M13\n";
  return 0;
}

// ---------------------------------------------------------------------------
// attack

int verdict(bool defeated, const std::string& where) {
  if (defeated) {
    std::cout << "attack defeated at " << where << "\n";
    return 0;
  }
  std::cout << "ATTACK SUCCEEDED: " << where << "\n";
  return kExitAborted;
}

int attack_replay(std::uint64_t seed, const std::string& kind_name) {
  ReplayKind kind = ReplayKind::StaleChallenge;
  bool found = false;
  for (ReplayKind k : {ReplayKind::StaleChallenge, ReplayKind::StaleRotate, ReplayKind::FullTranscript})
    if (replay_kind_name(k) == kind_name) kind = k, found = true;
  if (!found) throw UsageError("unknown replay kind '" + kind_name + "'");
  const ScenarioResult r = run_replay(seed, kind);
  std::cout << "replay " << kind_name << ", seed " << seed << ": " << describe(r.outcome) << "\n";
  if (r.keys_exposed > 0)
    std::cout << "note: " << r.keys_exposed
              << " key(s) of the recorded session are derivable from two sessions of traffic (see README)\n";
  return verdict(r.attack_defeated(), r.aborted() ? r.aborted()->step : describe(r.outcome));
}

int attack_tamper(std::uint64_t seed, const std::optional<std::string>& field_name, std::optional<std::size_t> position) {
  std::vector<TamperField> fields;
  for (std::size_t i = 0; i < kTamperFields; ++i) {
    const auto f = static_cast<TamperField>(i);
    if (!field_name || tamper_field_name(f) == *field_name) fields.push_back(f);
  }
  if (fields.empty()) throw UsageError("unknown field '" + *field_name + "'");
  if (position && *position >= kTamperPositions) throw UsageError("position must be below 32");

  std::size_t runs = 0, defeated = 0;
  std::string last_step;
  for (TamperField f : fields) {
    for (std::size_t p = 0; p < kTamperPositions; ++p) {
      if (position && p != *position) continue;
      const ScenarioResult r = run_tamper(seed, f, p);
      ++runs;
      if (r.attack_defeated()) {
        ++defeated;
        last_step = r.aborted()->step;
      } else {
        std::cout << "tamper " << tamper_field_name(f) << " bit " << p << ": " << describe(r.outcome) << "\n";
      }
    }
  }
  std::cout << defeated << "/" << runs << " tampered runs aborted before key establishment\n";
  return verdict(defeated == runs, runs == 1 ? last_step : "every tampered run");
}

int attack_eavesdrop(std::uint64_t seed, std::size_t sessions) {
  const EavesdropReport rep = run_eavesdrop_analysis(seed);
  std::cout << "single transcript: " << rep.subsets_checked << " XOR subsets, " << rep.hits.size() << " secret hits, "
            << rep.span_hits.size() << " span hits, " << rep.closure_hits.size() << " closure hits\n";
  for (const auto& id : rep.identities) std::cout << "  identity " << id.name << ": " << (id.holds ? "holds" : "FAILS") << "\n";
  bool defeated = rep.clean() && rep.identities_hold();
  if (sessions >= 2) {
    const ChainExposure chain = run_chain_eavesdrop(seed, sessions);
    std::cout << "across " << sessions << " sessions with one device: " << chain.keys_exposed() << " of "
              << chain.sessions.size() << " session keys derivable\n";
    for (std::size_t i = 0; i < chain.sessions.size(); ++i) {
      const auto& s = chain.sessions[i];
      std::cout << "  session " << i << ": Rp " << (s.rp_exposed ? "exposed" : "hidden") << ", key "
                << (s.key_exposed ? "exposed" : "hidden") << "\n";
    }
    if (chain.keys_exposed() > 0) {
      std::cout << "M5 = Cpnew ^ Rp meets the next session's clear Cp = Cpnew, which yields Rp\n";
      defeated = false;
    }
  }
  return verdict(defeated, defeated ? "passive observation" : "passive observation recovers session secrets");
}

int attack_mitm(std::uint64_t seed, const std::string& forgery_text, std::size_t trials) {
  Forgery kind = Forgery::Random;
  if (forgery_text == "other-device") kind = Forgery::OtherDevice;
  else if (forgery_text != "random") throw UsageError("unknown forgery '" + forgery_text + "'");
  std::size_t defeated = 0;
  std::string step;
  for (std::size_t i = 0; i < trials; ++i) {
    const ScenarioResult r = run_mitm_impersonation(seed + i, kind);
    if (r.attack_defeated()) {
      ++defeated;
      step = r.aborted()->step;
    }
  }
  std::cout << defeated << "/" << trials << " forged CrpRotate messages rejected\n";
  return verdict(defeated == trials, defeated == trials ? step : "server accepted a forgery");
}

int attack_escrow(std::uint64_t seed) {
  const EscrowReport rep = run_key_escrow_check(seed);
  std::cout << "server-only view: " << rep.server_view_words << " words, leaks "
            << (rep.leaked.empty() ? std::string("nothing") : std::to_string(rep.leaked.size()) + " secret(s)") << "\n"
            << "nonces on secure channel: " << (rep.nonces_on_secure_channel ? "yes" : "no") << "\n"
            << "server with open-channel taps derives the key: " << (rep.tapped_server_derives_key ? "yes" : "no")
            << " (model boundary)\n";
  return verdict(rep.boundary_holds(), rep.boundary_holds() ? "server state" : "server recovers the session key");
}

// ---------------------------------------------------------------------------
// puf-stats / costs

int cmd_puf_stats(std::size_t chips, std::uint64_t first_chip, unsigned trials, const std::string& format) {
  if (chips < 2) throw UsageError("--chips must be at least 2");
  std::vector<puf::PufFunction> pufs;
  for (std::size_t i = 0; i < chips; ++i) pufs.push_back(puf::make_puf(first_chip + i, 77 + i));
  const Word256 challenge = hash256(std::string_view("puf-stats"));
  const auto inter = puf::inter_distance(pufs, challenge);
  puf::DistanceStats intra{0, 0, 0, 0};
  for (std::size_t i = 0; i < chips; ++i) {
    puf::NoiseSource noise(1000 + i);
    const auto s = puf::intra_distance(pufs[i], challenge, trials, noise);
    intra.mean = std::max(intra.mean, s.mean);
    intra.max = std::max(intra.max, s.max);
    intra.pairs += s.pairs;
  }
  if (format == "tsv") {
    std::cout << "metric\tmean\tmean_fraction\tmin\tmax\tpairs\n"
              << "inter\t" << inter.mean << '\t' << inter.mean / 256 << '\t' << inter.min << '\t' << inter.max << '\t'
              << inter.pairs << "\nintra\t" << intra.mean << '\t' << intra.mean / 256 << "\t0\t" << intra.max << '\t'
              << intra.pairs << "\n";
  } else {
    std::cout << chips << " chips, 256-bit responses\n"
              << "inter-distance mean " << inter.mean << " bits (" << inter.mean / 256 << "), min " << inter.min
              << ", max " << inter.max << ", " << inter.pairs << " pairs\n"
              << "intra-distance worst mean " << intra.mean << " bits, max " << intra.max << ", " << intra.pairs
              << " pairs over " << trials << " power-ons per chip\n";
  }
  return 0;
}

int cmd_costs(std::uint64_t seed, const std::string& format, bool timings) {
  const CostTable table = report_costs({run_honest(seed)});
  std::cout << (format == "tsv" ? render_tsv(table) : render_table(table));
  if (timings) {
    for (const auto& t : measure_op_timings())
      std::cout << (format == "tsv" ? "timing\t" + t.op + "\t" : "T_" + t.op + " ") << t.nanoseconds
                << (format == "tsv" ? "\n" : " ns\n");
  }
  return 0;
}

// ---------------------------------------------------------------------------
// serve / emulate

std::atomic<bool> g_stop{false};
extern "C" void on_signal(int) { g_stop = true; }

void wait_for_signal(const std::function<void()>& stop) {
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  while (!g_stop) std::this_thread::sleep_for(std::chrono::milliseconds(100));
  stop();
}

int cmd_serve(const ConfigArgs& cfg) {
  const AppConfig config = cfg.load();
  apply_log_level(config.log_level);
  if (uses_default_psk(config)) spdlog::warn("using the built-in development PSK; set \"psk\" in the config");
  ServerDaemon daemon(config, std::make_unique<SystemRandom>());
  std::thread watcher([&] { wait_for_signal([&] { daemon.stop(); }); });
  daemon.run();
  watcher.join();
  return 0;
}

int cmd_emulate(const ConfigArgs& cfg, const std::string& identity, const std::string& device_hex,
                const std::optional<std::string>& listen) {
  AppConfig config;
  try {
    config = cfg.load();
  } catch (const UsageError&) {
  }
  const Endpoint endpoint = listen ? Endpoint::parse(*listen) : config.device_listen;
  apply_log_level(config.log_level);
  DeviceEmulator device(parse_id(device_hex), puf::load_identity(identity), endpoint, std::make_unique<SystemRandom>(),
                        config.io_timeout, protocol::SessionOptions{config.session_timeout});
  std::cout << "listening on " << endpoint.host << ":" << device.port() << std::endl;
  std::thread watcher([&] { wait_for_signal([&] { device.stop(); }); });
  device.run();
  watcher.join();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"PUF-based mutual authentication and key exchange"};
  app.require_subcommand(1);
  std::string log_level = "warn";
  app.add_option("--log-level", log_level, "trace, debug, info, warn, error, off");

  ConfigArgs cfg;
  std::function<int()> action;

  auto* enroll = app.add_subcommand("enroll", "fabricate a device chip, write its identity file and enroll its CRP");
  cfg.add(enroll);
  std::string device_hex, identity_path;
  std::uint64_t chip_id = 1, qual_seed = 1;
  enroll->add_option("--device-id", device_hex, "8 hex digits")->required();
  enroll->add_option("--chip-id", chip_id, "simulated chip serial");
  enroll->add_option("--qualification-seed", qual_seed);
  enroll->add_option("--identity", identity_path, "identity file to write")->required();
  enroll->callback([&] { action = [&] { return cmd_enroll(cfg, device_hex, chip_id, qual_seed, identity_path); }; });

  auto* reg = app.add_subcommand("register", "register a client and print its alias identity");
  cfg.add(reg);
  std::string client_hex, username, password;
  reg->add_option("--client-id", client_hex, "8 hex digits")->required();
  reg->add_option("--username", username)->required();
  reg->add_option("--password", password)->required();
  reg->callback([&] { action = [&] { return cmd_register(cfg, client_hex, username, password); }; });

  auto* auth = app.add_subcommand("auth", "run one handshake and print both key fingerprints");
  cfg.add(auth);
  AuthArgs auth_args;
  auth->add_option("--mode", auth_args.mode, "simulated or tcp (default: config channel_mode)")
      ->check(CLI::IsMember({"simulated", "tcp"}));
  auth->add_option("--seed", auth_args.seed, "simulated run seed");
  auth->add_option("--device", auth_args.device, "device emulator host:port (tcp)");
  auth->add_option("--client-id", auth_args.client_hex, "(tcp)");
  auth->add_option("--username", auth_args.username, "(tcp)");
  auth->add_option("--password", auth_args.password, "(tcp)");
  auth->callback([&] { action = [&] { return cmd_auth(cfg, auth_args); }; });

  auto* attack = app.add_subcommand("attack", "run an adversary scenario; exit 0 iff it was defeated");
  std::string scenario, replay_kind = "stale-challenge", forgery = "random";
  std::uint64_t attack_seed = 0;
  std::optional<std::string> tamper_field;
  std::optional<std::size_t> tamper_position;
  std::size_t sessions = 1, trials = 1;
  attack->add_option("--scenario", scenario)->required()->check(
      CLI::IsMember({"replay", "tamper", "eavesdrop", "mitm", "escrow"}));
  attack->add_option("--seed", attack_seed);
  attack->add_option("--kind", replay_kind, "replay: stale-challenge, stale-rotate, full-transcript");
  attack->add_option("--field", tamper_field, "tamper: field name (default: all 16)");
  attack->add_option("--position", tamper_position, "tamper: bit position 0-31 (default: all)");
  attack->add_option("--sessions", sessions, "eavesdrop: consecutive sessions observed")->check(CLI::PositiveNumber);
  attack->add_option("--forgery", forgery, "mitm: random or other-device");
  attack->add_option("--trials", trials, "mitm: seeds to try")->check(CLI::PositiveNumber);
  attack->callback([&] {
    action = [&] {
      if (scenario == "replay") return attack_replay(attack_seed, replay_kind);
      if (scenario == "tamper") return attack_tamper(attack_seed, tamper_field, tamper_position);
      if (scenario == "eavesdrop") return attack_eavesdrop(attack_seed, sessions);
      if (scenario == "mitm") return attack_mitm(attack_seed, forgery, trials);
      return attack_escrow(attack_seed);
    };
  });

  auto* stats = app.add_subcommand("puf-stats", "intra- and inter-distance over simulated chips");
  std::size_t chips = 20;
  std::uint64_t first_chip = 1000;
  unsigned power_ons = 20;
  std::string stats_format = "table";
  stats->add_option("--chips", chips);
  stats->add_option("--first-chip", first_chip);
  stats->add_option("--power-ons", power_ons)->check(CLI::Range(2u, 10000u));
  stats->add_option("--format", stats_format)->check(CLI::IsMember({"table", "tsv"}));
  stats->callback([&] { action = [&] { return cmd_puf_stats(chips, first_chip, power_ons, stats_format); }; });

  auto* costs = app.add_subcommand("costs", "communication and computation cost of one honest handshake");
  std::uint64_t cost_seed = 1;
  std::string cost_format = "table";
  bool timings = false;
  costs->add_option("--seed", cost_seed);
  costs->add_option("--format", cost_format)->check(CLI::IsMember({"table", "tsv"}));
  costs->add_flag("--timings", timings, "also measure per-op wall-clock cost");
  costs->callback([&] { action = [&] { return cmd_costs(cost_seed, cost_format, timings); }; });

  auto* serve = app.add_subcommand("serve", "run the authentication server");
  cfg.add(serve);
  serve->callback([&] { action = [&] { return cmd_serve(cfg); }; });

  auto* emulate = app.add_subcommand("emulate", "run a device emulator on the open channel");
  cfg.add(emulate);
  std::string emu_identity, emu_device;
  std::optional<std::string> emu_listen;
  emulate->add_option("--identity", emu_identity, "identity file from enroll")->required();
  emulate->add_option("--device-id", emu_device)->required();
  emulate->add_option("--listen", emu_listen, "host:port (default: config device_listen)");
  emulate->callback([&] { action = [&] { return cmd_emulate(cfg, emu_identity, emu_device, emu_listen); }; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    apply_log_level(log_level);
    return action();
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.code() == Errc::ConfigError ? kExitUsage : kExitAborted;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitAborted;
  }
}
