#include "hiermon/scenario.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <map>
#include <sstream>

namespace hiermon {

namespace fs = std::filesystem;

namespace {

std::string join_violations(const std::vector<std::string>& v) {
  std::string out = "invalid scenario:";
  for (const auto& s : v) out += "\n  - " + s;
  return out;
}

struct Word {
  std::string text;
  bool quoted = false;
};

/// Whitespace-separated words; double quotes group, '#' outside quotes
/// starts a comment.
std::vector<Word> words_of(std::string_view line, std::string& error) {
  std::vector<Word> out;
  std::size_t i = 0;
  while (i < line.size()) {
    char c = line[i];
    if (c == '#') break;
    if (std::isspace(static_cast<unsigned char>(c))) {
      ++i;
      continue;
    }
    Word w;
    if (c == '"') {
      w.quoted = true;
      auto end = line.find('"', i + 1);
      if (end == std::string_view::npos) {
        error = "unterminated string";
        return {};
      }
      w.text = std::string(line.substr(i + 1, end - i - 1));
      i = end + 1;
    } else {
      while (i < line.size() && !std::isspace(static_cast<unsigned char>(line[i])) && line[i] != '#')
        w.text += line[i++];
    }
    out.push_back(std::move(w));
  }
  return out;
}

std::vector<std::string> split_commas(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream in(s);
  for (std::string part; std::getline(in, part, ',');)
    if (!part.empty()) out.push_back(part);
  return out;
}

template <class T>
std::optional<T> number(const std::string& s) {
  T v{};
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

std::optional<ResourceMap> resources(const std::string& spec) {
  if (auto n = number<std::int64_t>(spec)) return ResourceMap{{kCpu, *n}};
  ResourceMap m;
  for (const auto& part : split_commas(spec)) {
    auto eq = part.find('=');
    if (eq == std::string::npos) return std::nullopt;
    auto n = number<std::int64_t>(part.substr(eq + 1));
    if (!n) return std::nullopt;
    m[part.substr(0, eq)] = *n;
  }
  if (m.empty()) return std::nullopt;
  return m;
}

struct PendingNode {
  NodeId id;
  NodeRole role;
  std::optional<NodeId> parent;
  std::optional<ResourceMap> capacity;
  std::size_t line;
};

// ---- expectations ----------------------------------------------------------

struct Check {
  enum class Kind { Counter, Placement, PlacementUnder, Absent, Result, Oracle };
  Kind kind = Kind::Counter;
  std::string name;  // counter, app or oracle
  Comparison op = Comparison::Greater;
  bool equal = false;
  bool not_equal = false;
  double value = 0;
  std::string node;
  std::string manager;
  std::string state;
  std::string reason;
};

std::optional<Check> parse_check(const std::string& text, std::string& error) {
  std::istringstream in(text);
  std::vector<std::string> w;
  for (std::string s; in >> s;) w.push_back(s);
  if (w.empty()) {
    error = "empty expectation";
    return std::nullopt;
  }
  Check c;
  if (w[0] == "oracle" && w.size() == 2) {
    c.kind = Check::Kind::Oracle;
    c.name = w[1];
    if (c.name != "aggregation" && c.name != "conservation" && c.name != "repair") {
      error = "unknown oracle '" + c.name + "'";
      return std::nullopt;
    }
    return c;
  }
  if (w[0] == "placement" && w.size() == 4 && w[2] == "under") {
    c.kind = Check::Kind::PlacementUnder;
    c.name = w[1];
    c.manager = w[3];
    return c;
  }
  if (w[0] == "placement" && (w.size() == 3 || (w.size() == 5 && w[3] == "in"))) {
    c.kind = Check::Kind::Placement;
    c.name = w[1];
    c.node = w[2];
    if (w.size() == 5) c.manager = w[4];
    return c;
  }
  if (w[0] == "absent" && w.size() == 4 && w[2] == "in") {
    c.kind = Check::Kind::Absent;
    c.name = w[1];
    c.manager = w[3];
    return c;
  }
  if (w[0] == "result" && (w.size() == 3 || (w.size() == 5 && w[3] == "reason"))) {
    c.kind = Check::Kind::Result;
    c.name = w[1];
    c.state = w[2];
    if (w.size() == 5) c.reason = w[4];
    return c;
  }
  if (w.size() == 3) {
    c.kind = Check::Kind::Counter;
    c.name = w[0];
    if (w[1] == "==") {
      c.equal = true;
    } else if (w[1] == "!=") {
      c.not_equal = true;
    } else if (auto op = comparison_from_string(w[1])) {
      c.op = *op;
    } else {
      error = "unknown comparison '" + w[1] + "'";
      return std::nullopt;
    }
    auto v = number<double>(w[2]);
    if (!v) {
      error = "bad number '" + w[2] + "'";
      return std::nullopt;
    }
    c.value = *v;
    return c;
  }
  error = "cannot read expectation '" + text + "'";
  return std::nullopt;
}

Json number_json(double v) {
  if (v == static_cast<double>(static_cast<std::int64_t>(v))) return static_cast<std::int64_t>(v);
  return v;
}

std::string show(double v) {
  std::ostringstream out;
  out << v;
  return out.str();
}

}  // namespace

ScenarioError::ScenarioError(std::vector<std::string> violations)
    : std::runtime_error(join_violations(violations)), violations_(std::move(violations)) {}

bool RunResult::passed() const {
  return std::all_of(assertions.begin(), assertions.end(), [](const auto& a) { return a.pass; });
}

Scenario parse_scenario(std::string_view text, const fs::path& base_dir) {
  Scenario sc;
  std::vector<std::string> errors;
  std::vector<PendingNode> nodes;
  HeartbeatConfig heartbeat;
  AggregationSpec aggregation;
  SensorSpec sensor;
  bool custom_rules = false;

  std::istringstream in{std::string(text)};
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const std::string where = "line " + std::to_string(line_no) + ": ";
    auto err = [&](const std::string& what) { errors.push_back(where + what); };
    std::string werr;
    auto w = words_of(raw, werr);
    if (!werr.empty()) {
      err(werr);
      continue;
    }
    if (w.empty()) continue;
    const std::string& kw = w[0].text;
    auto ms = [&](std::size_t i) -> std::optional<SimTime> {
      if (i >= w.size()) return std::nullopt;
      auto v = number<std::int64_t>(w[i].text);
      if (!v || *v < 0) return std::nullopt;
      return SimTime{*v};
    };
    auto rest = [&](std::size_t from) {
      std::string out;
      for (std::size_t i = from; i < w.size(); ++i) out += (out.empty() ? "" : " ") + w[i].text;
      return out;
    };

    if (kw == "scenario" && w.size() == 2) {
      sc.name = w[1].text;
    } else if (kw == "seed" && w.size() == 2) {
      if (auto v = number<std::uint64_t>(w[1].text)) sc.seed = *v; else err("bad seed");
    } else if (kw == "duration" && w.size() == 2) {
      if (auto v = ms(1)) sc.duration = *v; else err("bad duration");
    } else if (kw == "window" && w.size() == 2) {
      if (auto v = ms(1)) aggregation.window = *v; else err("bad window");
    } else if (kw == "functions" && w.size() >= 2) {
      aggregation.functions.clear();
      for (std::size_t i = 1; i < w.size(); ++i) {
        if (auto fn = agg_function_from_string(w[i].text)) aggregation.functions.push_back(*fn);
        else err("unknown aggregation function '" + w[i].text + "'");
      }
    } else if (kw == "group-by" && w.size() == 2) {
      if (w[1].text == "property") aggregation.group_by = GroupBy::Property;
      else if (w[1].text == "source") aggregation.group_by = GroupBy::Source;
      else err("group-by must be property or source");
    } else if (kw == "heartbeat" && w.size() % 2 == 1 && w.size() > 1) {
      for (std::size_t i = 1; i + 1 < w.size(); i += 2) {
        auto v = ms(i + 1);
        if (!v) err("bad value for heartbeat " + w[i].text);
        else if (w[i].text == "period") heartbeat.period = *v;
        else if (w[i].text == "timeout") heartbeat.failure_timeout = *v;
        else if (w[i].text == "sweep") heartbeat.sweep_interval = *v;
        else err("unknown heartbeat setting '" + w[i].text + "'");
      }
    } else if (kw == "sensor" && w.size() % 2 == 1 && w.size() > 1) {
      for (std::size_t i = 1; i + 1 < w.size(); i += 2) {
        if (w[i].text == "period") {
          if (auto v = ms(i + 1)) sensor.period = *v; else err("bad sensor period");
        } else if (w[i].text == "noise") {
          if (auto v = number<double>(w[i + 1].text)) sensor.noise = *v; else err("bad sensor noise");
        } else if (w[i].text == "metric") {
          sensor.metric = w[i + 1].text;
        } else {
          err("unknown sensor setting '" + w[i].text + "'");
        }
      }
    } else if (kw == "latency" && w.size() == 2) {
      if (auto v = ms(1)) sc.default_latency = *v; else err("bad latency");
    } else if (kw == "latency" && w.size() == 4) {
      if (auto v = ms(3)) sc.latencies.push_back({w[1].text, w[2].text, *v});
      else err("bad latency");
    } else if (kw == "drop" && (w.size() == 4 || (w.size() == 6 && w[4].text == "at"))) {
      auto p = number<double>(w[3].text);
      auto at = w.size() == 6 ? ms(5) : std::optional<SimTime>{SimTime{0}};
      if (!p || *p < 0 || *p > 1 || !at) err("bad drop rule");
      else sc.faults.push_back(DropRateFault{w[1].text, w[2].text, *p, *at});
    } else if (kw == "partition" && w.size() == 7 && w[3].text == "from" && w[5].text == "until") {
      auto a = split_commas(w[1].text), b = split_commas(w[2].text);
      auto from = ms(4), until = ms(6);
      if (!from || !until) err("bad partition times");
      else sc.faults.push_back(PartitionFault{{a.begin(), a.end()}, {b.begin(), b.end()}, *from, *until});
    } else if (kw == "install-timeout" && w.size() == 2) {
      if (auto v = ms(1)) sc.settings.install_timeout = *v; else err("bad install-timeout");
    } else if (kw == "refresh" && w.size() == 2) {
      if (auto v = ms(1); v && v->count() > 0) sc.settings.refresh_period = *v; else err("bad refresh");
    } else if (kw == "node" && w.size() >= 3) {
      PendingNode n{w[1].text, NodeRole::Node, std::nullopt, std::nullopt, line_no};
      if (auto r = role_from_string(w[2].text)) n.role = *r; else err("unknown role '" + w[2].text + "'");
      for (std::size_t i = 3; i < w.size(); i += 2) {
        if (i + 1 >= w.size()) {
          err("missing value after '" + w[i].text + "'");
        } else if (w[i].text == "parent") {
          n.parent = w[i + 1].text;
        } else if (w[i].text == "capacity") {
          if (auto c = resources(w[i + 1].text)) n.capacity = *c; else err("bad capacity '" + w[i + 1].text + "'");
        } else {
          err("unknown node setting '" + w[i].text + "'");
        }
      }
      nodes.push_back(std::move(n));
    } else if (kw == "descriptor" && w.size() == 2) {
      fs::path p = w[1].text;
      sc.descriptor = p.is_absolute() || base_dir.empty() ? p : base_dir / p;
    } else if (kw == "bind" && w.size() == 3) {
      sc.bindings[w[1].text] = w[2].text;
    } else if (kw == "launch" && w.size() == 4 && w[2].text == "as") {
      sc.launches.push_back({w[1].text, w[3].text});
    } else if (kw == "fault" && w.size() == 5 && w[3].text == "at") {
      auto at = ms(4);
      if (!at) err("bad fault time");
      else if (w[1].text == "crash") sc.faults.push_back(CrashFault{w[2].text, *at});
      else if (w[1].text == "restart") sc.faults.push_back(RestartFault{w[2].text, *at});
      else err("unknown fault '" + w[1].text + "'");
    } else if (kw == "rule" && w.size() > 1) {
      if (!custom_rules) sc.settings.rules.clear();
      custom_rules = true;
      try {
        sc.settings.rules.push_back(parse_rule(rest(1)));
      } catch (const std::invalid_argument& e) {
        err(e.what());
      }
    } else if (kw == "disable" && w.size() == 2) {
      auto d = domain_from_string(w[1].text);
      if (!d || *d == Domain::Deploy) err("only repair or optimization can be disabled");
      else sc.settings.domains.erase(*d);
    } else if (kw == "at" && w.size() >= 5) {
      WorkloadCommand cmd;
      auto at = ms(1);
      if (!at) {
        err("bad command time");
        continue;
      }
      cmd.at = *at;
      const std::string& verb = w[2].text;
      if (verb == "deploy" || verb == "release") {
        cmd.app = w[3].text;
        if (w.size() < 6 || w[4].text != "on") {
          err("expected '" + verb + " <app> on <manager>'");
          continue;
        }
        cmd.target = w[5].text;
        cmd.kind = verb == "deploy" ? WorkloadCommand::Kind::Deploy : WorkloadCommand::Kind::Release;
        for (std::size_t i = 6; i < w.size(); i += 2) {
          if (cmd.kind != WorkloadCommand::Kind::Deploy || i + 1 >= w.size()) {
            err("unexpected '" + w[i].text + "'");
            break;
          }
          if (w[i].text == "demand") {
            if (auto d = resources(w[i + 1].text)) cmd.demand = *d; else err("bad demand");
          } else if (w[i].text == "param") {
            auto eq = w[i + 1].text.find('=');
            if (eq == std::string::npos) err("param must be key=value");
            else cmd.params[w[i + 1].text.substr(0, eq)] = w[i + 1].text.substr(eq + 1);
          } else {
            err("unknown deploy option '" + w[i].text + "'");
          }
        }
      } else if (verb == "reattach" && w.size() == 6 && w[4].text == "to") {
        cmd.kind = WorkloadCommand::Kind::Reattach;
        cmd.target = w[3].text;
        cmd.parent = w[5].text;
      } else {
        err("unknown command '" + rest(2) + "'");
        continue;
      }
      sc.workload.push_back(std::move(cmd));
    } else if (kw == "workload" && w.size() >= 2 && w[1].text == "random") {
      RandomWorkload rw;
      for (std::size_t i = 2; i < w.size(); i += 2) {
        if (i + 1 >= w.size()) {
          err("missing value after '" + w[i].text + "'");
          break;
        }
        const auto& key = w[i].text;
        const auto& val = w[i + 1].text;
        if (key == "count") {
          if (auto v = number<int>(val); v && *v > 0) rw.count = *v; else err("bad count");
        } else if (key == "managers") {
          rw.managers = split_commas(val);
        } else if (key == "from") {
          if (auto v = ms(i + 1)) rw.from = *v; else err("bad from");
        } else if (key == "until") {
          if (auto v = ms(i + 1)) rw.until = *v; else err("bad until");
        } else if (key == "max-demand") {
          if (auto v = number<std::int64_t>(val); v && *v > 0) rw.max_demand = *v; else err("bad max-demand");
        } else {
          err("unknown workload setting '" + key + "'");
        }
      }
      sc.random_workload = rw;
    } else if (kw == "expect" && w.size() > 1) {
      sc.expectations.push_back({rest(1), line_no});
    } else {
      err("cannot read '" + rest(0) + "'");
    }
  }

  for (const auto& n : nodes) {
    TopologyNode t;
    t.id = n.id;
    t.role = n.role;
    t.parent = n.parent;
    if (n.capacity) t.capacity = *n.capacity;
    else if (n.role != NodeRole::Node) t.capacity = {};
    t.heartbeat = heartbeat;
    t.aggregation = aggregation;
    t.sensor = sensor;
    try {
      sc.topology.add(std::move(t));
    } catch (const TopologyError& e) {
      errors.push_back("line " + std::to_string(n.line) + ": " + e.what());
    }
  }
  if (sensor.metric != kCpu) sc.settings.metrics = {sensor.metric};
  if (!errors.empty()) throw ScenarioError(errors);
  return sc;
}

Scenario load_scenario(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ScenarioError({"cannot open scenario '" + path.string() + "'"});
  std::ostringstream buf;
  buf << in.rdbuf();
  Scenario sc = parse_scenario(buf.str(), path.parent_path());
  if (sc.name.empty()) sc.name = path.stem().string();
  return sc;
}

void validate(const Scenario& sc) {
  std::vector<std::string> errors;
  if (sc.name.empty()) errors.emplace_back("scenario has no name");
  if (sc.duration <= SimTime::zero()) errors.emplace_back("duration must be > 0");
  for (const auto& v : sc.topology.violations()) errors.push_back(v);

  const auto& topo = sc.topology;
  auto known = [&](const ActorId& a) { return a == "*" || topo.contains(a); };
  auto manager = [&](const NodeId& a) {
    const auto* n = topo.find(a);
    return n != nullptr && n->role != NodeRole::Node;
  };
  auto time_ok = [&](SimTime t, const std::string& what) {
    if (t > sc.duration)
      errors.push_back(what + " at " + std::to_string(t.count()) + " is after the end of the run");
  };

  for (const auto& l : sc.latencies)
    if (!known(l.from) || !known(l.to)) errors.push_back("latency names an unknown actor");
  for (const auto& f : sc.faults) {
    std::visit(
        [&](const auto& fault) {
          using T = std::decay_t<decltype(fault)>;
          if constexpr (std::is_same_v<T, CrashFault> || std::is_same_v<T, RestartFault>) {
            if (!topo.contains(fault.actor)) errors.push_back("fault on unknown actor '" + fault.actor + "'");
            time_ok(fault.at, "fault on " + fault.actor);
          } else if constexpr (std::is_same_v<T, DropRateFault>) {
            if (!known(fault.from) || !known(fault.to)) errors.push_back("drop rule names an unknown actor");
            time_ok(fault.at, "drop rule");
          } else if constexpr (std::is_same_v<T, PartitionFault>) {
            for (const auto& a : fault.group_a)
              if (!known(a)) errors.push_back("partition names unknown actor '" + a + "'");
            for (const auto& a : fault.group_b)
              if (!known(a)) errors.push_back("partition names unknown actor '" + a + "'");
            if (fault.until < fault.from) errors.push_back("partition ends before it starts");
            time_ok(fault.from, "partition");
          }
        },
        f);
  }
  for (const auto& cmd : sc.workload) {
    time_ok(cmd.at, "command");
    if (cmd.kind == WorkloadCommand::Kind::Reattach) {
      const auto* n = topo.find(cmd.target);
      if (n == nullptr || n->role == NodeRole::Boot)
        errors.push_back("cannot reattach '" + cmd.target + "'");
      if (!manager(cmd.parent)) errors.push_back("reattach target '" + cmd.parent + "' is not a manager");
    } else if (!manager(cmd.target)) {
      errors.push_back("command for '" + cmd.app + "' targets '" + cmd.target + "', which is not a manager");
    }
  }
  if (sc.random_workload) {
    const auto& rw = *sc.random_workload;
    if (rw.managers.empty()) errors.emplace_back("random workload lists no managers");
    for (const auto& m : rw.managers)
      if (!manager(m)) errors.push_back("random workload manager '" + m + "' is not a manager");
    SimTime until = rw.until.count() > 0 ? rw.until : sc.duration - sc.settings.install_timeout;
    if (until <= rw.from) errors.emplace_back("random workload window is empty");
    time_ok(until, "random workload");
  }

  if (!sc.launches.empty()) {
    if (!sc.descriptor) {
      errors.emplace_back("launch needs a descriptor");
    } else {
      try {
        auto desc = load_descriptor(sc.descriptor->string());
        auto plan = resolve(desc, sc.bindings);
        std::set<NodeId> launched;
        for (const auto& l : sc.launches) {
          auto hosts = plan.hosts(l.virtual_node);
          if (!desc.find_virtual_node(l.virtual_node))
            errors.push_back("launch of unknown virtual node '" + l.virtual_node + "'");
          for (const auto& h : hosts) launched.insert(h);
        }
        for (const auto& n : topo.nodes())
          if (!launched.contains(n.id)) errors.push_back("node '" + n.id + "' is never launched");
      } catch (const DescriptorError& e) {
        errors.push_back(std::string("descriptor: ") + e.what());
      }
    }
  }

  for (const auto& e : sc.expectations) {
    std::string why;
    if (!parse_check(e.text, why)) errors.push_back("line " + std::to_string(e.line) + ": " + why);
  }
  if (!errors.empty()) throw ScenarioError(errors);
}

namespace {

void generate_workload(Scenario& sc, Fabric& fabric) {
  const auto& rw = *sc.random_workload;
  const SimTime until = rw.until.count() > 0 ? rw.until : sc.duration - sc.settings.install_timeout;
  const auto span = static_cast<std::uint64_t>((until - rw.from).count()) + 1;

  std::vector<SimTime> times;
  for (int i = 0; i < rw.count; ++i)
    times.push_back(rw.from + SimTime{static_cast<std::int64_t>(fabric.next_random() % span)});
  std::stable_sort(times.begin(), times.end());

  std::vector<std::pair<AppId, NodeId>> live;
  for (int i = 0; i < rw.count; ++i) {
    WorkloadCommand cmd;
    cmd.at = times[static_cast<std::size_t>(i)];
    if (live.empty() || fabric.next_random() % 3 != 0) {
      cmd.kind = WorkloadCommand::Kind::Deploy;
      cmd.app = "w" + std::to_string(i);
      cmd.target = rw.managers[fabric.next_random() % rw.managers.size()];
      cmd.demand = {{kCpu, 1 + static_cast<std::int64_t>(fabric.next_random() % rw.max_demand)}};
      live.emplace_back(cmd.app, cmd.target);
    } else {
      auto idx = fabric.next_random() % live.size();
      cmd.kind = WorkloadCommand::Kind::Release;
      cmd.app = live[idx].first;
      cmd.target = live[idx].second;
      live.erase(live.begin() + static_cast<std::ptrdiff_t>(idx));
    }
    sc.workload.push_back(std::move(cmd));
  }
}

Payload command_payload(const WorkloadCommand& cmd) {
  switch (cmd.kind) {
    case WorkloadCommand::Kind::Deploy:
      return msg::wrap(msg::DeployCommand{cmd.app, cmd.demand, cmd.params});
    case WorkloadCommand::Kind::Release: return msg::wrap(msg::ReleaseCommand{cmd.app});
    case WorkloadCommand::Kind::Reattach: return msg::wrap(msg::Reattach{cmd.parent});
  }
  return nullptr;
}

Json build_report(const Scenario& sc, const Deployment& dep, const std::vector<Json>& records,
                  std::map<std::string, double>& counters) {
  const auto& topo = sc.topology;
  const NodeId root = *topo.root();
  const auto window = topo.at(root).aggregation.window;

  Json report;
  report["scenario"] = sc.name;
  report["seed"] = sc.seed;
  report["duration"] = sc.duration.count();
  report["window"] = window.count();

  Json roles = Json::object();
  Json tree = Json::object();
  for (const auto& n : topo.nodes()) {
    roles[n.id] = to_string(n.role);
    tree[n.id] = n.parent ? Json(*n.parent) : Json(nullptr);
    counters["roles." + std::string(to_string(n.role))] += 1;
  }
  for (const char* r : {"boot", "mirror", "node"}) counters.try_emplace(std::string("roles.") + r, 0);
  report["roles"] = roles;
  report["tree"] = tree;

  Json windows = Json::object();
  std::map<std::int64_t, std::pair<int, int>> root_windows;  // k -> (events, raw)
  std::map<std::string, double> lifecycle;
  std::map<std::string, double> allocation{{"granted", 0}, {"escalated", 0}, {"delegated", 0}, {"denied", 0}};
  std::map<std::string, double> results{{"running", 0}, {"lost", 0}, {"denied", 0}};
  double repair_episodes = 0;
  double repair_at_root = 0;
  double raw_at_root = 0;

  for (const auto& r : records) {
    const auto& kind = r.at("kind");
    const auto& p = r.at("payload");
    const std::string type = p.value("type", "");
    const std::string from = r.value("from", "");
    const std::string to = r.value("to", "");
    const auto t = r.at("t").get<std::int64_t>();

    if (kind == "deliver" || kind == "drop") {
      auto actor = [](const std::string& ep) { return ep.substr(0, ep.find('/')); };
      if (p.value("domain", "") == "repair" && (actor(from) == root || actor(to) == root))
        repair_at_root += 1;
    }
    if (kind == "deliver" && type == "metric" && to == root + "/monitor") {
      auto& slot = root_windows[t / window.count()];
      slot.first += 1;
      if (p.at("event").at("level").get<int>() == 0) {
        slot.second += 1;
        raw_at_root += 1;
      }
    }
    if (kind != "note") continue;
    if (type == "emit" && p.contains("window_start")) {
      Json w;
      w["window_start"] = p.at("window_start");
      w["window_end"] = p.at("window_end");
      w["source"] = p.at("event").at("source");
      w["level"] = p.at("event").at("level");
      Json props = Json::object();
      for (const auto& pair : p.at("event").at("properties")) props[pair.at(0).get<std::string>()] = pair.at(1);
      w["properties"] = std::move(props);
      windows[p.value("source", "")].push_back(std::move(w));
    } else if (type == "lifecycle") {
      lifecycle[p.value("event", "")] += 1;
    } else if (type == "action" && p.value("action", "") == "replace-node" &&
               !p.value("apps", Json::array()).empty()) {
      repair_episodes += 1;
    } else if (type == "allocation") {
      const auto& outcome = p.at("outcome");
      allocation[outcome.value("outcome", "")] += 1;
    } else if (type == "action-result" && p.contains("app")) {
      results[p.value("result", "")] += 1;
    }
  }
  report["windows"] = windows;

  Json per_window = Json::array();
  double min_events = 0, max_events = 0;
  int complete = 0;
  for (std::int64_t k = 1; (k + 1) * window.count() <= sc.duration.count(); ++k) {
    auto it = root_windows.find(k);
    int events = it == root_windows.end() ? 0 : it->second.first;
    int raw = it == root_windows.end() ? 0 : it->second.second;
    per_window.push_back(Json{{"window_start", k * window.count()}, {"events", events}, {"raw", raw}});
    if (complete == 0 || events < min_events) min_events = events;
    if (complete == 0 || events > max_events) max_events = events;
    ++complete;
  }
  report["root_events_per_window"] = per_window;
  counters["root.complete-windows"] = complete;
  counters["root.events-per-window.min"] = min_events;
  counters["root.events-per-window.max"] = max_events;
  counters["root.raw-events"] = raw_at_root;
  counters["root.children"] = static_cast<double>(topo.children(root).size());

  for (const char* e : {"node-available", "node-failed", "node-recovered", "node-stopped"})
    lifecycle.try_emplace(e, 0);
  Json lc = Json::object();
  for (const auto& [k, v] : lifecycle) {
    lc[k] = number_json(v);
    counters["lifecycle." + k] = v;
  }
  report["lifecycle"] = lc;
  report["repair_episodes"] = number_json(repair_episodes);
  counters["repair.episodes"] = repair_episodes;
  counters["repair.messages-at-root"] = repair_at_root;
  Json alloc = Json::object();
  for (const auto& [k, v] : allocation) {
    alloc[k] = number_json(v);
    counters["allocation." + k] = v;
  }
  report["allocation"] = alloc;
  Json res = Json::object();
  for (const auto& [k, v] : results) {
    res[k] = number_json(v);
    counters["results." + k] = v;
  }
  report["results"] = res;

  Json reps = Json::object();
  for (const auto& n : topo.nodes())
    if (n.role != NodeRole::Node && dep.host(n.id) != nullptr) reps[n.id] = to_json(dep.snapshot(n.id));
  report["representation"] = reps;
  return report;
}

AssertionResult evaluate(const Check& c, const std::string& text, const Scenario& sc,
                         const Deployment& dep, const std::vector<Json>& records,
                         const std::map<std::string, double>& counters, Json& oracles) {
  AssertionResult a{text, false, ""};
  const NodeId root = *sc.topology.root();
  switch (c.kind) {
    case Check::Kind::Counter: {
      auto it = counters.find(c.name);
      if (it == counters.end()) {
        a.actual = "unknown counter";
        return a;
      }
      a.actual = show(it->second);
      if (c.equal) a.pass = it->second == c.value;
      else if (c.not_equal) a.pass = it->second != c.value;
      else a.pass = compare(it->second, c.op, c.value);
      return a;
    }
    case Check::Kind::Placement:
    case Check::Kind::Absent: {
      NodeId m = c.manager.empty() ? root : c.manager;
      if (!sc.topology.contains(m) || sc.topology.at(m).role == NodeRole::Node) {
        a.actual = "'" + m + "' is not a manager";
        return a;
      }
      auto snap = dep.snapshot(m);
      const auto* pl = snap.find(c.name);
      a.actual = pl == nullptr ? "absent" : pl->node;
      a.pass = c.kind == Check::Kind::Absent ? pl == nullptr : (pl != nullptr && pl->node == c.node);
      return a;
    }
    case Check::Kind::PlacementUnder: {
      auto snap = dep.snapshot(root);
      const auto* pl = snap.find(c.name);
      a.actual = pl == nullptr ? "absent" : pl->node;
      a.pass = pl != nullptr && sc.topology.in_subtree(c.manager, pl->node);
      return a;
    }
    case Check::Kind::Result: {
      const Json* last = nullptr;
      for (const auto& r : records)
        if (r.at("kind") == "note" && r.at("payload").value("type", "") == "action-result" &&
            r.at("payload").value("app", "") == c.name)
          last = &r.at("payload");
      if (last == nullptr) {
        a.actual = "no result";
        return a;
      }
      a.actual = last->value("result", "");
      if (!last->value("reason", "").empty()) a.actual += " (" + last->value("reason", "") + ")";
      a.pass = last->value("result", "") == c.state &&
               (c.reason.empty() || last->value("reason", "") == c.reason);
      return a;
    }
    case Check::Kind::Oracle: {
      if (!oracles.contains(c.name)) oracles[c.name] = to_json(verify(records, c.name));
      a.pass = oracles[c.name].at("pass").get<bool>();
      a.actual = oracles[c.name].at("message").get<std::string>();
      return a;
    }
  }
  return a;
}

}  // namespace

RunResult run_scenario(Scenario sc, const RunOptions& options) {
  if (options.seed) sc.seed = *options.seed;
  if (options.duration) sc.duration = *options.duration;
  for (const auto& [k, v] : options.bindings) sc.bindings[k] = v;
  validate(sc);

  Deployment dep(sc.topology, sc.seed, sc.settings);
  Fabric& fabric = dep.fabric();
  fabric.set_default_latency(sc.default_latency);
  for (const auto& l : sc.latencies) fabric.set_latency(l.from, l.to, l.latency);

  if (sc.launches.empty()) {
    dep.build();
  } else {
    auto plan = resolve(load_descriptor(sc.descriptor->string()), sc.bindings);
    for (const auto& l : sc.launches) {
      LaunchPlan part;
      part.command = l.host_template;
      for (const auto& t : plan.targets)
        if (t.virtual_node == l.virtual_node) part.targets.push_back(t);
      dep.launch(part, l.host_template);
    }
  }
  for (const auto& f : sc.faults) fabric.inject(f);
  if (sc.random_workload) generate_workload(sc, fabric);
  std::stable_sort(sc.workload.begin(), sc.workload.end(),
                   [](const auto& a, const auto& b) { return a.at < b.at; });
  for (const auto& cmd : sc.workload)
    fabric.schedule({cmd.target, port::kControl}, cmd.at - fabric.now(), command_payload(cmd));

  dep.run_until(sc.duration);

  RunResult result;
  result.trace = fabric.trace();
  auto records = to_records(result.trace);
  std::map<std::string, double> counters;
  result.report = build_report(sc, dep, records, counters);

  Json oracles = Json::object();
  for (const auto& e : sc.expectations) {
    std::string why;
    auto check = parse_check(e.text, why);
    result.assertions.push_back(evaluate(*check, e.text, sc, dep, records, counters, oracles));
  }
  Json counter_json = Json::object();
  for (const auto& [k, v] : counters) counter_json[k] = number_json(v);
  result.report["counters"] = counter_json;
  result.report["oracles"] = oracles;
  Json assertions = Json::array();
  for (const auto& a : result.assertions)
    assertions.push_back(Json{{"expect", a.expectation}, {"pass", a.pass}, {"actual", a.actual}});
  result.report["assertions"] = assertions;
  result.report["passed"] = result.passed();
  result.scenario = std::move(sc);
  return result;
}

fs::path write_outputs(const RunResult& result, const fs::path& out_root) {
  fs::path dir = out_root / result.scenario.name / std::to_string(result.scenario.seed);
  fs::create_directories(dir);
  {
    std::ofstream out(dir / "trace.jsonl");
    write_trace(out, result.trace);
  }
  {
    std::ofstream out(dir / "report.json");
    out << result.report.dump(2) << '\n';
  }
  {
    std::ofstream out(dir / "metrics.jsonl");
    for (const auto& r : result.trace) {
      if (r.kind != TraceKind::Note || r.payload.value("type", "") != "emit") continue;
      Json line;
      line["t"] = r.time.count();
      for (const auto& [k, v] : r.payload.items())
        if (k != "type") line[k] = v;
      out << line.dump() << '\n';
    }
  }
  return dir;
}

}  // namespace hiermon
