#include <iostream>

#include <CLI11.hpp>

#include "hiermon/descriptor.hpp"
#include "hiermon/oracles.hpp"
#include "hiermon/scenario.hpp"

using namespace hiermon;

namespace {

Bindings to_bindings(const std::vector<std::string>& defines) {
  Bindings out;
  for (const auto& d : defines) {
    auto [k, v] = parse_binding(d);
    out[k] = v;
  }
  return out;
}

int run(const std::string& path, std::optional<std::uint64_t> seed,
        std::optional<std::int64_t> duration, const std::string& out_dir,
        const std::vector<std::string>& defines) {
  RunOptions options;
  options.seed = seed;
  if (duration) options.duration = SimTime{*duration};
  options.bindings = to_bindings(defines);

  auto result = run_scenario(load_scenario(path), options);
  auto dir = write_outputs(result, out_dir);

  const auto& c = result.report.at("counters");
  auto n = [&](const char* key) { return c.at(key).dump(); };
  std::cout << result.scenario.name << " seed " << result.scenario.seed << ": "
            << n("roles.boot") << " boot, " << n("roles.mirror") << " mirror, "
            << n("roles.node") << " node; root events/window "
            << n("root.events-per-window.min") << ".." << n("root.events-per-window.max")
            << "\n";
  for (const auto& a : result.assertions)
    std::cout << (a.pass ? "  ok    " : "  FAIL  ") << a.expectation << "  [" << a.actual << "]\n";
  std::cout << "output: " << dir.string() << "\n";
  return result.passed() ? 0 : 1;
}

int verify_trace(const std::string& path, const std::string& oracle) {
  auto report = verify(read_trace_file(path), oracle);
  std::cout << to_json(report).dump(2) << "\n";
  return report.pass ? 0 : 1;
}

int parse_descriptor_file(const std::string& path, const std::vector<std::string>& defines) {
  auto desc = load_descriptor(path);
  Json out;
  out["descriptor"] = to_json(desc);
  if (!defines.empty()) out["plan"] = to_json(resolve(desc, to_bindings(defines)));
  std::cout << out.dump(2) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Hierarchical management simulator"};
  app.require_subcommand(1);

  std::string path;
  std::vector<std::string> defines;

  auto* run_cmd = app.add_subcommand("run", "Run a scenario and write trace, report and metrics");
  std::optional<std::uint64_t> seed;
  std::optional<std::int64_t> duration;
  std::string out_dir = "out";
  run_cmd->add_option("scenario", path, "Scenario file")->required()->check(CLI::ExistingFile);
  run_cmd->add_option("--seed", seed, "Override the scenario seed");
  run_cmd->add_option("--duration", duration, "Override the run length in ms");
  run_cmd->add_option("--out", out_dir, "Output root");
  run_cmd->add_option("-D", defines, "Descriptor binding NAME=value")->allow_extra_args(false);

  auto* verify_cmd = app.add_subcommand("verify", "Check a trace with an oracle");
  std::string oracle;
  verify_cmd->add_option("trace", path, "Trace file")->required()->check(CLI::ExistingFile);
  verify_cmd->add_option("--oracle", oracle, "Oracle name")
      ->required()
      ->check(CLI::IsMember({"aggregation", "conservation", "repair"}));

  auto* parse_cmd = app.add_subcommand("parse-descriptor", "Parse and optionally resolve a descriptor");
  parse_cmd->add_option("file", path, "Descriptor file")->required()->check(CLI::ExistingFile);
  parse_cmd->add_option("-D", defines, "Binding NAME=value")->allow_extra_args(false);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run_cmd) return run(path, seed, duration, out_dir, defines);
    if (*verify_cmd) return verify_trace(path, oracle);
    if (*parse_cmd) return parse_descriptor_file(path, defines);
  } catch (const ScenarioError& e) {
    std::cerr << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
