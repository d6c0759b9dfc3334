#include "pufkex/harness/script.hpp"

#include <charconv>
#include <sstream>

#include "pufkex/error.hpp"

namespace pufkex::harness {
namespace {

constexpr std::string_view kHeader = "pufkex-script 1";

std::vector<std::string_view> split_words(std::string_view line) {
  std::vector<std::string_view> words;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
    const std::size_t start = i;
    while (i < line.size() && line[i] != ' ' && line[i] != '\t') ++i;
    if (i > start) words.push_back(line.substr(start, i - start));
  }
  return words;
}

template <typename T>
T number(std::string_view word, std::size_t line_no) {
  T value{};
  const auto [end, ec] = std::from_chars(word.data(), word.data() + word.size(), value);
  if (ec != std::errc{} || end != word.data() + word.size())
    throw Error(Errc::ConfigError, "parse_script",
                "line " + std::to_string(line_no) + ": bad number '" + std::string(word) + "'");
  return value;
}

}  // namespace

Script parse_script(std::string_view text) {
  Script script;
  bool header_seen = false;
  std::size_t line_no = 0;
  while (!text.empty()) {
    const std::size_t nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);

    const auto words = split_words(line);
    if (words.empty() || words[0].front() == '#') continue;
    const auto fail = [&](const std::string& what) {
      return Error(Errc::ConfigError, "parse_script", "line " + std::to_string(line_no) + ": " + what);
    };
    if (!header_seen) {
      if (words.size() != 2 || words[0] != "pufkex-script") throw fail("missing 'pufkex-script' header");
      if (words[1] != "1") throw fail("unsupported script version " + std::string(words[1]));
      header_seen = true;
      continue;
    }

    const std::string_view op = words[0];
    const auto arity = [&](std::size_t n) {
      if (words.size() != n + 1) throw fail(std::string(op) + " takes " + std::to_string(n) + " argument(s)");
    };
    if (op == "forward") {
      arity(0);
      script.actions.emplace_back(Forward{});
    } else if (op == "drop") {
      arity(0);
      script.actions.emplace_back(Drop{});
    } else if (op == "replay") {
      arity(1);
      script.actions.emplace_back(Replay{number<std::size_t>(words[1], line_no)});
    } else if (op == "tamper") {
      arity(3);
      const auto bit = number<unsigned>(words[3], line_no);
      if (bit > 7) throw fail("bit must be 0-7");
      script.actions.emplace_back(
          Tamper{number<std::size_t>(words[1], line_no), number<std::size_t>(words[2], line_no), bit});
    } else if (op == "inject") {
      arity(1);
      Bytes frame;
      try {
        frame = from_hex(words[1]);
      } catch (const std::exception&) {
        throw fail("bad hex in inject");
      }
      script.actions.emplace_back(Inject{std::move(frame)});
    } else {
      throw fail("unknown action '" + std::string(op) + "'");
    }
  }
  if (!header_seen) throw Error(Errc::ConfigError, "parse_script", "empty script");
  return script;
}

std::string format_script(const Script& script) {
  std::ostringstream out;
  out << kHeader << '\n';
  for (const auto& action : script.actions) {
    std::visit(
        [&](const auto& a) {
          using T = std::decay_t<decltype(a)>;
          if constexpr (std::is_same_v<T, Forward>) out << "forward";
          else if constexpr (std::is_same_v<T, Drop>) out << "drop";
          else if constexpr (std::is_same_v<T, Replay>) out << "replay " << a.index;
          else if constexpr (std::is_same_v<T, Tamper>)
            out << "tamper " << a.index << ' ' << a.byte_offset << ' ' << a.bit;
          else out << "inject " << to_hex(a.frame);
        },
        action);
    out << '\n';
  }
  return out.str();
}

}  // namespace pufkex::harness
