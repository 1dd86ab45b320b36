#pragma once

// Trace checkers. Each one works from the exported JSON-lines trace alone
// and recomputes its property without calling into the runtime.

#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "hiermon/fabric.hpp"

namespace hiermon {

struct OracleReport {
  std::string oracle;
  bool pass = true;
  /// Number of emitted values, instants or episodes compared.
  std::size_t checked = 0;
  /// 1-based line of the first divergent record.
  std::optional<std::size_t> line;
  std::string message;
};

Json to_json(const OracleReport& report);

/// Throws std::runtime_error naming the offending line on malformed input.
std::vector<Json> read_trace(std::istream& in);
std::vector<Json> read_trace_file(const std::string& path);
std::vector<Json> to_records(const EventTrace& trace);

/// Every windowed emit equals the mean/max/min/count/last recomputed from
/// the metric deliveries inside its window, with level >= 1 inputs replaced
/// by their own recomputation. Relative tolerance 1e-9.
OracleReport verify_aggregation(const std::vector<Json>& records);

/// At the end of every instant, each manager's reservation on each node
/// equals the summed demand of its live (deploying or running) records.
OracleReport verify_conservation(const std::vector<Json>& records);

/// One replace-node per lost app per failure, each ending running on
/// another node or denied, and never two running copies of one app.
OracleReport verify_repair(const std::vector<Json>& records);

/// Dispatches on "aggregation", "conservation" or "repair"; throws
/// std::invalid_argument otherwise.
OracleReport verify(const std::vector<Json>& records, std::string_view oracle);

inline constexpr double kAggregationTolerance = 1e-9;

}  // namespace hiermon
