#pragma once

#include <array>
#include <string>
#include <vector>

#include "pufkex/harness/scenarios.hpp"

namespace pufkex::harness {

/// Published per-role figures for the protocol.
struct PublishedCosts {
  std::array<std::uint64_t, 3> bits{1536, 2816, 1536};  // device, client, server
  std::uint64_t total_bits = 5888;
  std::array<std::string, 3> ops{"5T_h+1T_puf+7T_xor", "2T_h+2T_xor", "4T_h+5T_xor"};
  std::string total_ops = "11T_h+1T_puf+14T_xor";
};

struct CostRow {
  std::string role;  // device, client, server, total
  std::uint64_t measured_bits = 0;
  std::uint64_t published_bits = 0;
  protocol::OpTally measured_ops;
  std::string published_ops;

  bool bits_match() const { return measured_bits == published_bits; }
  std::string measured_ops_text() const;
  bool ops_match() const { return measured_ops_text() == published_ops; }
};

struct CostTable {
  std::vector<CostRow> rows;  // empty when no honest run was supplied
  /// Whether every supplied honest run produced identical figures.
  bool consistent = true;
  std::vector<std::string> notes;
};

/// Builds the comparison from honest runs; others in `results` are ignored.
CostTable report_costs(const std::vector<ScenarioResult>& results,
                       const PublishedCosts& published = {});

std::string render_table(const CostTable& table);
std::string render_tsv(const CostTable& table);

struct OpTiming {
  std::string op;
  double nanoseconds = 0.0;
  std::size_t iterations = 0;
};
/// Wall-clock cost of one hash, XOR and PUF evaluation on this machine.
std::vector<OpTiming> measure_op_timings(std::size_t iterations = 2000);

std::string format_op_tally(const protocol::OpTally& ops);

}  // namespace pufkex::harness
