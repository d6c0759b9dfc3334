#include "pufkex/app/config.hpp"

#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"
#include "pufkex/error.hpp"

namespace pufkex::app {

using nlohmann::json;

namespace {

void reject_unknown(const json& object, const std::set<std::string>& known, const std::string& where) {
  for (const auto& [key, value] : object.items())
    if (!known.count(key)) throw Error(Errc::ConfigError, "config", "unknown key '" + where + key + "'");
}

template <typename T>
T get(const json& object, const char* key, T fallback) {
  if (!object.contains(key)) return fallback;
  try {
    return object.at(key).get<T>();
  } catch (const json::exception&) {
    throw Error(Errc::ConfigError, "config", std::string("wrong type for '") + key + "'");
  }
}

}  // namespace

AppConfig parse_config(std::string_view json_text) {
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw Error(Errc::ConfigError, "config", e.what());
  }
  if (!root.is_object()) throw Error(Errc::ConfigError, "config", "top level must be an object");
  reject_unknown(root,
                 {"listen", "device_listen", "store_path", "channel_mode", "psk", "puf", "session_timeout_ms",
                  "io_timeout_ms", "log_level"},
                 "");

  AppConfig c;
  if (!root.contains("store_path")) throw Error(Errc::ConfigError, "config", "store_path is required");
  c.store_path = get<std::string>(root, "store_path", "");
  if (c.store_path.empty()) throw Error(Errc::ConfigError, "config", "store_path is empty");
  if (root.contains("listen")) c.listen = Endpoint::parse(get<std::string>(root, "listen", ""));
  if (root.contains("device_listen")) c.device_listen = Endpoint::parse(get<std::string>(root, "device_listen", ""));
  const std::string mode = get<std::string>(root, "channel_mode", "simulated");
  if (mode == "simulated") c.channel_mode = ChannelMode::Simulated;
  else if (mode == "tcp") c.channel_mode = ChannelMode::Tcp;
  else throw Error(Errc::ConfigError, "config", "channel_mode must be 'simulated' or 'tcp'");
  c.psk = get<std::string>(root, "psk", c.psk);
  if (c.psk.empty()) throw Error(Errc::ConfigError, "config", "psk is empty");
  c.session_timeout = std::chrono::milliseconds(get<std::int64_t>(root, "session_timeout_ms", c.session_timeout.count()));
  c.io_timeout = std::chrono::milliseconds(get<std::int64_t>(root, "io_timeout_ms", c.io_timeout.count()));
  if (c.session_timeout.count() <= 0 || c.io_timeout.count() <= 0)
    throw Error(Errc::ConfigError, "config", "timeouts must be positive");
  c.log_level = get<std::string>(root, "log_level", c.log_level);

  if (root.contains("puf")) {
    const json& p = root.at("puf");
    if (!p.is_object()) throw Error(Errc::ConfigError, "config", "puf must be an object");
    reject_unknown(p, {"cell_count", "fingerprint_bits", "qualification_reads", "stable_fraction"}, "puf.");
    c.puf.cell_count = get<std::size_t>(p, "cell_count", c.puf.cell_count);
    c.puf.fingerprint_bits = get<std::size_t>(p, "fingerprint_bits", c.puf.fingerprint_bits);
    c.puf.qualification_reads = get<unsigned>(p, "qualification_reads", c.puf.qualification_reads);
    c.puf.stable_fraction = get<double>(p, "stable_fraction", c.puf.stable_fraction);
  }
  return c;
}

AppConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::ConfigError, "config", "cannot read " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  AppConfig c = parse_config(buf.str());
  if (const char* level = std::getenv(kLogLevelEnv); level && *level) c.log_level = level;
  return c;
}

std::optional<std::filesystem::path> config_path(const std::optional<std::filesystem::path>& explicit_path) {
  if (explicit_path) return explicit_path;
  if (const char* env = std::getenv(kConfigEnv); env && *env) return std::filesystem::path(env);
  return std::nullopt;
}

bool uses_default_psk(const AppConfig& config) { return config.psk == AppConfig{}.psk; }

}  // namespace pufkex::app
