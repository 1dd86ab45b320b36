#pragma once

// Scenario files: topology, settings, faults, rules, workload and embedded
// expectations in one line-oriented text file. The grammar is documented in
// README.md.

#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "hiermon/descriptor.hpp"
#include "hiermon/hierarchy.hpp"
#include "hiermon/oracles.hpp"

namespace hiermon {

/// Carries every violation found, one per line of what().
class ScenarioError : public std::runtime_error {
 public:
  explicit ScenarioError(std::vector<std::string> violations);
  const std::vector<std::string>& violations() const { return violations_; }

 private:
  std::vector<std::string> violations_;
};

struct WorkloadCommand {
  enum class Kind { Deploy, Release, Reattach };

  SimTime at{0};
  Kind kind = Kind::Deploy;
  /// Manager receiving deploy/release, or the node being reattached.
  NodeId target;
  AppId app;
  ResourceMap demand{{kCpu, 1}};
  Params params;
  NodeId parent;
};

/// Deploy/release commands drawn from the fabric's random source before the
/// run starts.
struct RandomWorkload {
  int count = 50;
  std::vector<NodeId> managers;
  SimTime from{1000};
  SimTime until{0};  // 0: duration - install timeout
  std::int64_t max_demand = 2;
};

struct LatencyOverride {
  ActorId from;
  ActorId to;
  Duration latency{0};
};

struct LaunchDirective {
  std::string virtual_node;
  std::string host_template;
};

struct Expectation {
  std::string text;
  std::size_t line = 0;
};

struct Scenario {
  std::string name;
  std::uint64_t seed = 1;
  SimTime duration{60000};
  HierarchyTopology topology;
  HostSettings settings;
  Duration default_latency = kDefaultLatency;
  std::vector<LatencyOverride> latencies;
  std::vector<FaultSpec> faults;
  std::optional<std::filesystem::path> descriptor;
  Bindings bindings;
  std::vector<LaunchDirective> launches;
  std::vector<WorkloadCommand> workload;
  std::optional<RandomWorkload> random_workload;
  std::vector<Expectation> expectations;
};

/// Relative descriptor paths are taken relative to `base_dir`.
Scenario parse_scenario(std::string_view text, const std::filesystem::path& base_dir = {});
Scenario load_scenario(const std::filesystem::path& path);

/// Cross-checks that need the whole file: topology shape, times within the
/// duration, known actors, launches covering the topology. Throws
/// ScenarioError.
void validate(const Scenario& scenario);

struct RunOptions {
  std::optional<std::uint64_t> seed;
  std::optional<SimTime> duration;
  /// Added to (and overriding) the scenario's own bindings.
  Bindings bindings;
};

struct AssertionResult {
  std::string expectation;
  bool pass = false;
  std::string actual;
};

struct RunResult {
  Scenario scenario;
  EventTrace trace;
  Json report;
  std::vector<AssertionResult> assertions;

  bool passed() const;
};

/// Builds, runs and evaluates. Throws ScenarioError on invalid input.
RunResult run_scenario(Scenario scenario, const RunOptions& options = {});

/// Writes trace.jsonl, report.json and metrics.jsonl under
/// <out_root>/<scenario>/<seed>/ and returns that directory.
std::filesystem::path write_outputs(const RunResult& result, const std::filesystem::path& out_root);

}  // namespace hiermon
