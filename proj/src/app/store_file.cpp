#include "pufkex/app/store_file.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <fstream>
#include <sstream>

#include "pufkex/error.hpp"

namespace pufkex::app {

using protocol::ClientRecord;
using protocol::CrpRecord;
using protocol::StoreSnapshot;

namespace {

constexpr std::string_view kHeader = "PUFKEX-STORE 1";

[[noreturn]] void io_fail(const std::string& what) {
  throw Error(Errc::Io, "store_file", what + ": " + std::strerror(errno));
}

void write_fd(int fd, std::string_view data) {
  while (!data.empty()) {
    const ssize_t n = ::write(fd, data.data(), data.size());
    if (n < 0) {
      if (errno == EINTR) continue;
      io_fail("write");
    }
    data.remove_prefix(static_cast<std::size_t>(n));
  }
}

}  // namespace

std::string_view crash_point_name(CrashPoint point) {
  switch (point) {
    case CrashPoint::BeforeTempWrite: return "before-temp-write";
    case CrashPoint::MidTempWrite: return "mid-temp-write";
    case CrashPoint::BeforeSync: return "before-sync";
    case CrashPoint::BeforeRename: return "before-rename";
    case CrashPoint::AfterRename: return "after-rename";
  }
  return "?";
}

std::string format_store(const StoreSnapshot& snapshot) {
  std::ostringstream out;
  out << kHeader << '\n';
  for (const auto& [id, crp] : snapshot.crps)
    out << "CRP " << id.hex() << ' ' << crp.challenge.hex() << ' ' << crp.response.hex() << '\n';
  for (const auto& [id, client] : snapshot.clients) out << "CLIENT " << id.hex() << ' ' << client.alias.hex() << '\n';
  return out.str();
}

StoreSnapshot parse_store(std::string_view text) {
  StoreSnapshot s;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  const auto fail = [&](const std::string& what) {
    return Error(Errc::CorruptStore, "parse_store", "line " + std::to_string(line_no) + ": " + what);
  };
  if (!std::getline(in, line) || line != kHeader) {
    line_no = 1;
    throw fail("missing 'PUFKEX-STORE 1' header");
  }
  line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream fields(line);
    std::string kind, id_hex, a, b, extra;
    fields >> kind >> id_hex >> a;
    try {
      if (kind == "CRP") {
        fields >> b;
        if (b.empty() || (fields >> extra)) throw fail("CRP takes three fields");
        const DeviceId id = DeviceId::from_hex(id_hex);
        if (!s.crps.emplace(id, CrpRecord{id, Word256::from_hex(a), Word256::from_hex(b)}).second)
          throw fail("second CRP for device " + id_hex);
      } else if (kind == "CLIENT") {
        if (a.empty() || (fields >> extra)) throw fail("CLIENT takes two fields");
        const DeviceId id = DeviceId::from_hex(id_hex);
        if (!s.clients.emplace(id, ClientRecord{id, Word256::from_hex(a)}).second)
          throw fail("duplicate client " + id_hex);
      } else {
        throw fail("unknown record '" + kind + "'");
      }
    } catch (const Error&) {
      throw;
    } catch (const std::exception& e) {
      throw fail(e.what());
    }
  }
  return s;
}

std::filesystem::path StoreFile::temp_path() const {
  auto p = path_;
  p += ".tmp";
  return p;
}

StoreSnapshot StoreFile::load() const {
  std::ifstream in(path_, std::ios::binary);
  if (!in) {
    if (!std::filesystem::exists(path_)) return {};
    throw Error(Errc::Io, "store_file", "cannot open " + path_.string());
  }
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_store(buf.str());
}

void StoreFile::save(const StoreSnapshot& snapshot) const {
  const std::string text = format_store(snapshot);
  const std::string tmp = temp_path().string();

  at(CrashPoint::BeforeTempWrite);
  const int fd = ::open(tmp.c_str(), O_WRONLY | O_CREAT | O_TRUNC | O_CLOEXEC, 0600);
  if (fd < 0) io_fail("open " + tmp);
  try {
    const std::size_t half = text.size() / 2;
    write_fd(fd, std::string_view(text).substr(0, half));
    at(CrashPoint::MidTempWrite);
    write_fd(fd, std::string_view(text).substr(half));
    at(CrashPoint::BeforeSync);
    if (::fsync(fd) != 0) io_fail("fsync " + tmp);
  } catch (...) {
    ::close(fd);
    throw;
  }
  if (::close(fd) != 0) io_fail("close " + tmp);

  at(CrashPoint::BeforeRename);
  if (::rename(tmp.c_str(), path_.c_str()) != 0) io_fail("rename");
  at(CrashPoint::AfterRename);

  const auto dir = path_.has_parent_path() ? path_.parent_path() : std::filesystem::path(".");
  const int dfd = ::open(dir.c_str(), O_RDONLY | O_DIRECTORY | O_CLOEXEC);
  if (dfd >= 0) {
    ::fsync(dfd);
    ::close(dfd);
  }
}

}  // namespace pufkex::app
