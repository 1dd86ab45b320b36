// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fail.

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>

#include "hiermon/descriptor.hpp"
#include "hiermon/hierarchy.hpp"
#include "hiermon/monitoring.hpp"
#include "hiermon/oracles.hpp"
#include "hiermon/scenario.hpp"

using namespace hiermon;
using namespace std::chrono_literals;
namespace fs = std::filesystem;

namespace {

// Pinned tolerances and bounds.
constexpr double kWallLimitSeconds = 10.0;
constexpr Duration kHeartbeatTimeout{3000};
constexpr Duration kSweep{1000};
constexpr Duration kLatency{10};
constexpr Duration kRoundTrip = 2 * kLatency;
constexpr Duration kRegistryTtl{5000};
constexpr int kSeeds = 20;
constexpr int kConservationSeeds = 10;
constexpr SimTime kQuietRun{100'000};

const fs::path kRoot = HIERMON_SOURCE_DIR;

struct Outcome {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    if (!ok && pass) {
      pass = false;
      detail = what;
    }
  }
};

std::vector<fs::path> bundled() {
  std::vector<fs::path> out;
  for (const auto& e : fs::directory_iterator(kRoot / "scenarios"))
    if (e.path().extension() == ".scn") out.push_back(e.path());
  std::sort(out.begin(), out.end());
  return out;
}

Scenario scenario(const char* name) { return load_scenario(kRoot / "scenarios" / (std::string(name) + ".scn")); }

RunOptions seeded(std::uint64_t seed) {
  RunOptions o;
  o.seed = seed;
  return o;
}

std::string payload_type(const TraceRecord& r) { return r.payload.value("type", ""); }

bool is_note(const TraceRecord& r, std::string_view type) {
  return r.kind == TraceKind::Note && payload_type(r) == type;
}

std::string actor_of(const std::string& endpoint) { return endpoint.substr(0, endpoint.find('/')); }

struct WindowCount {
  std::int64_t events = 0;
  std::int64_t raw = 0;
  std::set<std::string> sources;
};

/// Metric deliveries to the root's monitor, bucketed by arrival window.
/// Window k (k >= 1) is complete when it ends by the duration; window 0
/// precedes the first summaries.
std::vector<WindowCount> root_windows(const EventTrace& trace, const NodeId& root, Duration window,
                                      SimTime duration) {
  std::vector<WindowCount> out;
  for (std::int64_t k = 1; (k + 1) * window.count() <= duration.count(); ++k) out.emplace_back();
  for (const auto& r : trace) {
    if (r.kind != TraceKind::Deliver || r.to != root + "/monitor" || payload_type(r) != "metric") continue;
    auto k = r.time.count() / window.count();
    if (k < 1 || k > static_cast<std::int64_t>(out.size())) continue;
    auto& w = out[static_cast<std::size_t>(k - 1)];
    if (r.payload.at("event").at("level").get<int>() == 0) {
      ++w.raw;
    } else {
      ++w.events;
      w.sources.insert(actor_of(r.from));
    }
  }
  return out;
}

std::string file_text(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

Outcome ac1() {
  Outcome o;
  auto start = std::chrono::steady_clock::now();
  auto s = scenario("paper-7node");
  auto result = run_scenario(s);
  double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  const auto& t = result.scenario.topology;
  o.require(t.nodes().size() == 7, "topology has " + std::to_string(t.nodes().size()) + " nodes");
  o.require(t.root() == "boot" && t.at("boot").role == NodeRole::Boot, "root is not the boot");
  auto mirrors = t.children("boot");
  o.require(mirrors.size() == 2, "boot has " + std::to_string(mirrors.size()) + " children");
  for (const auto& m : mirrors) {
    o.require(t.at(m).role == NodeRole::Mirror, m + " is not a mirror");
    o.require(t.children(m).size() == 2, m + " does not have 2 children");
    for (const auto& n : t.children(m)) o.require(t.at(n).role == NodeRole::Node, n + " is not a node");
  }
  o.require(result.scenario.duration == 60'000ms, "duration is not 60000 ms");
  const Duration window = t.at("m1").aggregation.window;
  o.require(window == 5000ms, "window is not 5000 ms");

  auto windows = root_windows(result.trace, "boot", window, result.scenario.duration);
  o.require(windows.size() == 11, "expected 11 complete windows, got " + std::to_string(windows.size()));
  for (std::size_t k = 0; k < windows.size(); ++k) {
    const auto& w = windows[k];
    std::string at = "window " + std::to_string(k + 1);
    o.require(w.events == 2, at + ": " + std::to_string(w.events) + " aggregated events");
    o.require(w.sources == std::set<std::string>{"m1", "m2"}, at + ": events not one per mirror");
    o.require(w.raw == 0, at + ": " + std::to_string(w.raw) + " raw events");
  }
  std::int64_t raw = 0;
  for (const auto& r : result.trace)
    if (r.kind == TraceKind::Deliver && actor_of(r.to) == "boot" && payload_type(r) == "metric" &&
        r.payload.at("event").at("level").get<int>() == 0)
      ++raw;
  o.require(raw == 0, std::to_string(raw) + " raw events reached the boot");
  o.require(wall < kWallLimitSeconds, "took " + std::to_string(wall) + " s");
  if (o.pass) o.detail = "7 nodes, 11 windows x 2 summaries, 0 raw, " + std::to_string(wall) + " s";
  return o;
}

Outcome ac2() {
  Outcome o;
  auto dir = fs::temp_directory_path() / "hiermon-acceptance-ac2";
  fs::remove_all(dir);
  std::size_t checked = 0, scenarios = 0;
  for (const auto& path : bundled()) {
    auto result = run_scenario(load_scenario(path));
    auto out = write_outputs(result, dir);
    auto rep = verify_aggregation(read_trace_file((out / "trace.jsonl").string()));
    o.require(rep.pass, path.filename().string() + ": " + rep.message);
    o.require(rep.checked > 0, path.filename().string() + ": nothing checked");
    checked += rep.checked;
    ++scenarios;
  }
  fs::remove_all(dir);
  if (o.pass)
    o.detail = std::to_string(scenarios) + " scenarios, " + std::to_string(checked) + " values within 1e-9";
  return o;
}

Outcome ac3() {
  Outcome o;
  const std::vector<NodeId> leaves{"n3", "n4", "n5", "n6"};
  Duration worst{0};
  for (int seed = 1; seed <= kSeeds; ++seed) {
    std::mt19937_64 pick(static_cast<std::uint64_t>(seed) * 7919);
    NodeId victim = leaves[pick() % leaves.size()];
    SimTime crash{5000 + static_cast<std::int64_t>(pick() % 20'000)};

    Deployment d(seven_node_topology(), static_cast<std::uint64_t>(seed));
    d.build();
    d.fabric().inject(CrashFault{victim, crash});
    d.run_until(crash + 10'000ms);

    std::vector<SimTime> detected;
    for (const auto& r : d.fabric().trace()) {
      if (!is_note(r, "lifecycle") || r.payload.at("event") != "node-failed") continue;
      if (r.payload.at("node") != victim) {
        o.require(false, "seed " + std::to_string(seed) + ": false positive on " +
                             r.payload.at("node").get<std::string>());
        continue;
      }
      detected.push_back(r.time);
    }
    std::string at = "seed " + std::to_string(seed) + " crash " + victim + "@" + std::to_string(crash.count());
    o.require(detected.size() == 1, at + ": " + std::to_string(detected.size()) + " failure reports");
    if (detected.empty()) continue;
    SimTime f = detected.front();
    o.require(f > crash + kHeartbeatTimeout && f <= crash + kHeartbeatTimeout + kSweep + kLatency,
              at + ": reported at " + std::to_string(f.count()));
    worst = std::max(worst, f - crash);

    Deployment quiet(seven_node_topology(), static_cast<std::uint64_t>(seed));
    quiet.build();
    quiet.run_until(kQuietRun);
    for (const auto& r : quiet.fabric().trace())
      if (is_note(r, "lifecycle") && r.payload.at("event") == "node-failed")
        o.require(false, "seed " + std::to_string(seed) + ": false positive in a crash-free run");
  }
  if (o.pass)
    o.detail = std::to_string(kSeeds) + " seeds, worst delay " + std::to_string(worst.count()) +
               " ms, 0 false positives";
  return o;
}

Outcome ac4() {
  Outcome o;
  const Duration bound = kHeartbeatTimeout + kSweep + 4 * kRoundTrip;
  for (int seed = 1; seed <= 5; ++seed) {
    std::string at = "seed " + std::to_string(seed);
    Deployment d(seven_node_topology(), static_cast<std::uint64_t>(seed));
    d.build();
    d.fabric().schedule({"m1", port::kControl}, 2000ms,
                        msg::wrap(msg::DeployCommand{"web", {{kCpu, 1}}, {}}));
    d.run_until(3000ms);
    const auto* m1 = d.host("m1");
    const auto* before = m1->ledger().running("web");
    o.require(before != nullptr, at + ": web not running before the crash");
    if (!before) continue;
    NodeId victim = before->node;
    NodeId sibling = victim == "n3" ? "n4" : "n3";
    o.require(d.host(sibling)->installed().empty(), at + ": sibling is not free");

    const SimTime crash = 20'000ms;
    d.fabric().inject(CrashFault{victim, crash});
    d.run_until(crash + bound);

    const auto* after = m1->ledger().running("web");
    o.require(after != nullptr, at + ": web not running " + std::to_string(bound.count()) + " ms after crash");
    if (!after) continue;
    o.require(after->node != victim, at + ": web still on the failed node");
    o.require(m1->node_table().is_available(after->node), at + ": web on an unavailable node");
    o.require(d.host(after->node)->installed().contains("web"), at + ": web not installed on its node");

    std::size_t placements = 0;
    for (const auto& node : d.topology().nodes()) {
      const auto* h = d.host(node.id);
      if (!h->is_manager() || !h->representation().find("web")) continue;
      o.require(h->representation().find("web")->node == after->node,
                at + ": " + node.id + " places web elsewhere");
    }
    auto snapshot = d.snapshot("boot");
    for (const auto& [app, p] : snapshot.placements()) placements += app == "web";
    o.require(placements == 1, at + ": " + std::to_string(placements) + " placements of web");
    o.require(snapshot.apps_on(victim).empty(), at + ": failed node still holds apps");

    std::size_t at_boot = 0;
    for (const auto& r : d.fabric().trace())
      if ((r.kind == TraceKind::Deliver || r.kind == TraceKind::Drop) &&
          (actor_of(r.from) == "boot" || actor_of(r.to) == "boot") && r.payload.value("domain", "") == "repair")
        ++at_boot;
    o.require(at_boot == 0, at + ": " + std::to_string(at_boot) + " repair messages at the boot");
  }
  if (o.pass) o.detail = "5 seeds repaired within " + std::to_string(bound.count()) + " ms, 0 repair messages at boot";
  return o;
}

Outcome ac5() {
  Outcome o;
  Deployment d(seven_node_topology({{kCpu, 2}}), 1);
  d.build();
  auto deploy = [&](const NodeId& mgr, SimTime at, AppId app, std::int64_t cpu) {
    d.fabric().schedule({mgr, port::kControl}, at, msg::wrap(msg::DeployCommand{std::move(app), {{kCpu, cpu}}, {}}));
  };
  deploy("m1", 2000ms, "a1", 2);
  deploy("m1", 2500ms, "a2", 2);
  deploy("m1", 3000ms, "a3", 2);
  deploy("m2", 5000ms, "a4", 2);
  deploy("m1", 7000ms, "a5", 1);
  d.run_until(10'000ms);

  auto final_result = [&](const AppId& app) -> const TraceRecord* {
    const TraceRecord* last = nullptr;
    for (const auto& r : d.fabric().trace())
      if (r.kind == TraceKind::Deliver && r.to == "m1/deployer" && payload_type(r) == "deploy-result" &&
          r.payload.at("app") == app)
        last = &r;
    return last;
  };

  const auto* a3 = final_result("a3");
  o.require(a3 && a3->payload.at("state") == "running", "a3 not granted");
  if (a3) {
    NodeId node = a3->payload.at("node");
    o.require(d.topology().in_subtree("m2", node), "a3 granted on " + node + ", outside m2");
    o.require(d.host(node)->installed().contains("a3"), "a3 not installed on " + node);
  }
  bool via_boot = false;
  for (const auto& r : d.fabric().trace())
    if (r.kind == TraceKind::Deliver && r.from == "m1/deployer" && actor_of(r.to) == "boot" &&
        payload_type(r) == "allocate" && r.payload.at("request").at("app") == "a3")
      via_boot = true;
  o.require(via_boot, "a3 was not forwarded to the boot");

  std::int64_t free = 0;
  for (const auto& n : {"n3", "n4", "n5", "n6"}) {
    std::int64_t used = 0;
    for (const auto& [app, demand] : d.host(n)->installed()) used += demand.contains(kCpu) ? demand.at(kCpu) : 0;
    free += 2 - used;
  }
  o.require(free == 0, "tree not full before a5: " + std::to_string(free) + " cpu free");
  const auto* a5 = final_result("a5");
  o.require(a5 && a5->payload.at("state") == "denied" && a5->payload.at("reason") == "exhausted",
            "a5 not denied as exhausted");
  for (const auto& n : d.topology().nodes())
    if (d.host(n.id)->installed().contains("a5")) o.require(false, "a5 installed on " + n.id);
  if (o.pass) o.detail = "a3 granted on " + a3->payload.at("node").get<std::string>() + " via boot, a5 exhausted";
  return o;
}

Outcome ac6() {
  Outcome o;
  std::size_t balances = 0;
  auto s = scenario("random-workload");
  for (int seed = 1; seed <= kConservationSeeds; ++seed) {
    auto result = run_scenario(s, seeded(static_cast<std::uint64_t>(seed)));
    std::size_t commands = 0;
    for (const auto& r : result.trace)
      if (r.kind == TraceKind::Timer && r.to.ends_with("/control") &&
          (payload_type(r) == "deploy" || payload_type(r) == "release"))
        ++commands;
    o.require(commands == 50, "seed " + std::to_string(seed) + ": " + std::to_string(commands) + " commands");
    auto rep = verify_conservation(to_records(result.trace));
    o.require(rep.pass, "seed " + std::to_string(seed) + ": " + rep.message);
    balances += rep.checked;
  }
  if (o.pass) o.detail = std::to_string(kConservationSeeds) + " seeds x 50 commands, " + std::to_string(balances) + " balances";
  return o;
}

Outcome ac7() {
  Outcome o;
  Registration reg{{"n1", "producer"}, RegistrationKind::Producer, {"cpu"}, 0ms, kRegistryTtl};

  Directory once;
  once.register_subject(reg);
  o.require(once.lookup({"cpu"}, kRegistryTtl - 1ms).size() == 1, "absent at ttl - 1");
  o.require(once.lookup({"cpu"}, kRegistryTtl).empty(), "present at ttl");

  Directory refreshed;
  for (SimTime t = 0ms; t <= 60'000ms; t += 1ms) {
    if (t.count() % 1000 == 0) {
      reg.registered_at = t;
      refreshed.register_subject(reg);
    }
    refreshed.purge(t);
    if (refreshed.lookup({"cpu"}, t).size() != 1) {
      o.require(false, "refreshed producer missing at " + std::to_string(t.count()));
      break;
    }
  }

  // Inside the running system: a crashed producer vanishes one ttl after its
  // last refresh reached the directory.
  Deployment d(seven_node_topology(), 1);
  d.build();
  const SimTime crash = 20'000ms;
  d.fabric().inject(CrashFault{"n3", crash});
  d.run_until(crash + kLatency + 1ms);
  SimTime last{-1};
  Duration ttl{0};
  for (const auto& r : d.fabric().trace())
    if (r.kind == TraceKind::Deliver && r.from == "n3/producer" && r.to == "m1/directory" &&
        payload_type(r) == "register") {
      last = r.time;
      ttl = Duration(r.payload.at("ttl").get<std::int64_t>());
    }
  o.require(last > 0ms, "no registration from n3");
  auto visible = [&] {
    auto found = d.host("m1")->directory().lookup({kCpu}, d.fabric().now());
    return std::any_of(found.begin(), found.end(), [](const Endpoint& e) { return e.actor == "n3"; });
  };
  d.run_until(last + ttl - 1ms);
  o.require(visible(), "n3 gone before its ttl ran out");
  d.run_until(last + ttl);
  o.require(!visible(), "n3 still listed at its ttl");
  if (o.pass) o.detail = "ttl 5000: present at 4999, absent at 5000; refreshed 60000 ms; in-system ttl " +
                         std::to_string(ttl.count());
  return o;
}

Outcome ac8() {
  Outcome o;
  struct Case {
    const char* name;
    std::size_t leaves;
    std::int64_t children;
  };
  std::string detail;
  for (const auto& c : {Case{"scale-d2", 4, 2}, Case{"scale-d3", 16, 4}}) {
    auto result = run_scenario(scenario(c.name));
    const auto& t = result.scenario.topology;
    auto root = *t.root();
    std::size_t leaves = 0;
    for (const auto& n : t.nodes()) leaves += n.role == NodeRole::Node;
    o.require(leaves == c.leaves, std::string(c.name) + ": " + std::to_string(leaves) + " leaves");
    o.require(static_cast<std::int64_t>(t.children(root).size()) == c.children,
              std::string(c.name) + ": root has the wrong child count");
    o.require(t.height(root) == 2, std::string(c.name) + ": tree is not 3 levels");
    auto windows = root_windows(result.trace, root, t.at(root).aggregation.window, result.scenario.duration);
    o.require(!windows.empty(), std::string(c.name) + ": no complete windows");
    for (const auto& w : windows) {
      o.require(w.events == c.children, std::string(c.name) + ": " + std::to_string(w.events) + " events in a window");
      o.require(w.raw == 0, std::string(c.name) + ": raw events at the root");
    }
    detail += std::string(detail.empty() ? "" : ", ") + std::to_string(c.leaves) + " leaves -> " +
              std::to_string(c.children) + "/window";
  }
  if (o.pass) o.detail = detail;
  return o;
}

Outcome ac9() {
  Outcome o;
  auto a = fs::temp_directory_path() / "hiermon-acceptance-ac9a";
  auto b = fs::temp_directory_path() / "hiermon-acceptance-ac9b";
  fs::remove_all(a);
  fs::remove_all(b);
  std::size_t n = 0;
  for (const auto& path : bundled()) {
    auto s = load_scenario(path);
    auto da = write_outputs(run_scenario(s), a);
    auto db = write_outputs(run_scenario(s), b);
    auto ta = file_text(da / "trace.jsonl");
    o.require(!ta.empty(), path.filename().string() + ": empty trace");
    o.require(ta == file_text(db / "trace.jsonl"), path.filename().string() + ": traces differ");
    ++n;
  }
  fs::remove_all(a);
  fs::remove_all(b);
  if (o.pass) o.detail = std::to_string(n) + " scenarios byte-identical";
  return o;
}

Outcome ac10() {
  Outcome o;
  auto desc = load_descriptor((kRoot / "descriptors/jade-grid.desc").string());
  o.require(desc.variables.size() == 1 && desc.virtual_nodes.size() == 1 && desc.mappings.size() == 1 &&
                desc.processes.size() == 1,
            "descriptor structure");
  auto plan = resolve(desc, {{"NODES", "sidonie.inria.fr tahiti.inria.fr idefix.inria.fr"}});
  o.require(plan.targets.size() == 3, "expected 3 targets");
  o.require(plan.hosts() == std::vector<std::string>{"sidonie.inria.fr", "tahiti.inria.fr", "idefix.inria.fr"},
            "hosts out of order");

  auto parse_fails = [&](const char* what, const std::string& text) {
    try {
      parse_descriptor(text);
      o.require(false, std::string(what) + " accepted");
    } catch (const DescriptorError&) {
    }
  };
  auto resolve_fails = [&](const char* what, const std::string& text, const Bindings& b) {
    try {
      resolve(parse_descriptor(text), b);
      o.require(false, std::string(what) + " accepted");
    } catch (const DescriptorError&) {
    }
  };
  const std::string head = "descriptor x\nvariable N\n";
  parse_fails("unknown process", head + "virtual-node v multiple\nmap v -> p\n");
  parse_fails("undeclared variable", head + "virtual-node v multiple\nmap v -> p\nprocess p launcher ssh hostlist \"${M}\"\n");
  parse_fails("duplicate virtual node", head + "virtual-node v multiple\nvirtual-node v single\n");
  const std::string grid = file_text(kRoot / "descriptors/jade-grid.desc");
  resolve_fails("unbound variable", grid, {});
  resolve_fails("empty expansion", grid, {{"NODES", ""}});
  resolve_fails("single on two hosts",
                head + "virtual-node v single\nmap v -> p\nprocess p launcher ssh hostlist \"${N}\"\n",
                {{"N", "a b"}});
  if (o.pass) o.detail = "3 targets in order, 6 negative cases rejected";
  return o;
}

}  // namespace

int main() {
  struct Criterion {
    const char* id;
    Outcome (*run)();
  };
  const Criterion criteria[] = {{"AC1", ac1}, {"AC2", ac2}, {"AC3", ac3}, {"AC4", ac4}, {"AC5", ac5},
                                {"AC6", ac6}, {"AC7", ac7}, {"AC8", ac8}, {"AC9", ac9}, {"AC10", ac10}};
  bool all = true;
  for (const auto& c : criteria) {
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail = std::string("exception: ") + e.what();
    }
    all = all && o.pass;
    std::cout << c.id << ' ' << (o.pass ? "PASS" : "FAIL") << "  " << o.detail << std::endl;
  }
  return all ? 0 : 1;
}
