#include "pufkex/harness/report.hpp"

#include <chrono>
#include <iomanip>
#include <sstream>

namespace pufkex::harness {

using protocol::OpTally;

std::string format_op_tally(const OpTally& ops) {
  std::string out;
  const auto term = [&](unsigned n, const char* unit) {
    if (n == 0) return;
    if (!out.empty()) out += '+';
    out += std::to_string(n) + unit;
  };
  term(ops.hash_ops, "T_h");
  term(ops.puf_ops, "T_puf");
  term(ops.xor_ops, "T_xor");
  return out.empty() ? "0" : out;
}

std::string CostRow::measured_ops_text() const { return format_op_tally(measured_ops); }

CostTable report_costs(const std::vector<ScenarioResult>& results, const PublishedCosts& published) {
  CostTable table;
  const ScenarioResult* first = nullptr;
  for (const auto& r : results) {
    if (!r.established()) continue;
    if (!first) {
      first = &r;
      continue;
    }
    for (std::size_t i = 0; i < 3; ++i)
      if (!(r.costs.roles[i] == first->costs.roles[i])) table.consistent = false;
  }
  if (!first) return table;

  const auto& costs = first->costs;
  for (std::size_t i = 0; i < 3; ++i) {
    const auto role = protocol::kRoles[i];
    table.rows.push_back(CostRow{std::string(protocol::role_name(role)), costs.of(role).payload_bits_sent,
                                 published.bits[i], costs.of(role).ops, published.ops[i]});
  }
  table.rows.push_back(
      CostRow{"total", costs.total_bits(), published.total_bits, costs.total_ops(), published.total_ops});

  for (const auto& row : table.rows) {
    if (!row.ops_match() && row.role != "total")
      table.notes.push_back(row.role + ": traced " + row.measured_ops_text() + " vs published " +
                            row.published_ops);
  }
  if (!table.notes.empty()) {
    table.notes.push_back(
        "traced counts include every hash the role evaluates: the device recomputes M9 and "
        "hashes H(T1,T2) and the key; the client hashes M11, M13 and the key; the server "
        "hashes H(T1,T2), M4, M6, M8 and M9. The published row appears to omit some of these.");
    table.notes.push_back(
        "PUF evaluations: the device evaluates PUF(Cp) and PUF(Cpnew); the published row counts one.");
  }
  return table;
}

std::string render_table(const CostTable& table) {
  if (table.rows.empty()) return "(no honest runs)\n";
  std::ostringstream out;
  out << std::left << std::setw(8) << "role" << std::right << std::setw(10) << "bits" << std::setw(11)
      << "published" << "  " << std::left << std::setw(24) << "ops (traced)" << std::setw(24)
      << "ops (published)" << '\n';
  for (const auto& row : table.rows) {
    out << std::left << std::setw(8) << row.role << std::right << std::setw(10) << row.measured_bits
        << std::setw(11) << row.published_bits << (row.bits_match() ? " =" : " !") << std::left
        << std::setw(24) << row.measured_ops_text() << std::setw(24) << row.published_ops
        << (row.ops_match() ? "=" : "differs (see notes)") << '\n';
  }
  out << "total " << table.rows.back().measured_bits << " bits\n";
  if (!table.consistent) out << "WARNING: honest runs disagreed on costs\n";
  for (const auto& n : table.notes) out << "note: " << n << '\n';
  return out.str();
}

std::string render_tsv(const CostTable& table) {
  std::ostringstream out;
  out << "role\tbits\tpublished_bits\tbits_match\thash\tpuf\txor\tpublished_ops\tops_match\n";
  for (const auto& row : table.rows)
    out << row.role << '\t' << row.measured_bits << '\t' << row.published_bits << '\t'
        << (row.bits_match() ? "yes" : "no") << '\t' << row.measured_ops.hash_ops << '\t'
        << row.measured_ops.puf_ops << '\t' << row.measured_ops.xor_ops << '\t' << row.published_ops
        << '\t' << (row.ops_match() ? "yes" : "no") << '\n';
  return out.str();
}

std::vector<OpTiming> measure_op_timings(std::size_t iterations) {
  using clock = std::chrono::steady_clock;
  const auto puf = puf::make_puf(1, 2);
  SeededRandom rng(3);
  Word256 a = rng.next_word(), b = rng.next_word();
  volatile std::uint8_t sink = 0;

  const auto time = [&](const char* name, auto&& op) {
    const auto start = clock::now();
    for (std::size_t i = 0; i < iterations; ++i) op();
    const std::chrono::duration<double, std::nano> elapsed = clock::now() - start;
    return OpTiming{name, elapsed.count() / static_cast<double>(iterations), iterations};
  };
  std::vector<OpTiming> out;
  out.push_back(time("hash", [&] { a = hash_fields({a, b}); }));
  out.push_back(time("xor", [&] { a = a ^ b; sink = sink ^ a.bytes()[0]; }));
  out.push_back(time("puf", [&] { a = puf.respond(a); }));
  sink = sink ^ a.bytes()[0];
  return out;
}

}  // namespace pufkex::harness
