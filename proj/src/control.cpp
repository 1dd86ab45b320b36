#include "hiermon/control.hpp"

#include <algorithm>
#include <charconv>
#include <sstream>
#include <stdexcept>

namespace hiermon {

void SensorSpec::validate() const {
  if (period <= Duration::zero()) throw std::invalid_argument("sensor period must be > 0");
  if (noise < 0.0) throw std::invalid_argument("sensor noise must be >= 0");
}

double utilization(const ResourceMap& reserved, const ResourceMap& capacity,
                   const std::string& resource) {
  auto cap = capacity.find(resource);
  if (cap == capacity.end() || cap->second <= 0) return 0.0;
  auto res = reserved.find(resource);
  double used = res == reserved.end() ? 0.0 : static_cast<double>(res->second);
  return used / static_cast<double>(cap->second);
}

MetricEvent sense(const NodeId& node, SimTime now, const SensorSpec& spec,
                  const ResourceMap& reserved, const ResourceMap& capacity,
                  double noise_sample) {
  double v = utilization(reserved, capacity, spec.metric) + noise_sample;
  v = std::clamp(v, 0.0, 1.0);
  MetricEvent ev;
  ev.source = node;
  ev.timestamp = now;
  ev.level = 0;
  ev.set(spec.metric, v);
  return ev;
}

Executor executor_of(const Action& action) {
  if (const auto* t = std::get_if<TuneParameter>(&action)) return Executor{t->node};
  return Executor{};
}

std::string_view action_name(const Action& action) {
  return std::visit(
      [](const auto& a) -> std::string_view {
        using T = std::decay_t<decltype(a)>;
        if constexpr (std::is_same_v<T, ReplaceNode>) return "replace-node";
        if constexpr (std::is_same_v<T, TuneParameter>) return "tune";
        if constexpr (std::is_same_v<T, Rebind>) return "rebind";
        if constexpr (std::is_same_v<T, StopNode>) return "stop-node";
      },
      action);
}

Json to_json(const Action& action) {
  Json j;
  j["action"] = action_name(action);
  std::visit(
      [&j](const auto& a) {
        using T = std::decay_t<decltype(a)>;
        if constexpr (std::is_same_v<T, ReplaceNode>) {
          j["failed"] = a.failed;
          j["apps"] = a.apps;
        } else if constexpr (std::is_same_v<T, TuneParameter>) {
          j["node"] = a.node;
          j["name"] = a.name;
          j["value"] = a.value;
        } else if constexpr (std::is_same_v<T, Rebind>) {
          j["component"] = a.component;
          j["from"] = a.from;
          j["target"] = a.target;
        } else if constexpr (std::is_same_v<T, StopNode>) {
          j["node"] = a.node;
        }
      },
      action);
  auto exec = executor_of(action);
  j["executor"] = exec.local_actuator ? "local-actuator:" + *exec.local_actuator : "manager";
  return j;
}

std::string_view to_string(Comparison c) {
  switch (c) {
    case Comparison::Greater: return ">";
    case Comparison::GreaterEqual: return ">=";
    case Comparison::Less: return "<";
    case Comparison::LessEqual: return "<=";
  }
  return "?";
}

std::optional<Comparison> comparison_from_string(std::string_view s) {
  for (Comparison c : {Comparison::Greater, Comparison::GreaterEqual, Comparison::Less,
                       Comparison::LessEqual})
    if (to_string(c) == s) return c;
  return std::nullopt;
}

bool compare(double lhs, Comparison c, double rhs) {
  switch (c) {
    case Comparison::Greater: return lhs > rhs;
    case Comparison::GreaterEqual: return lhs >= rhs;
    case Comparison::Less: return lhs < rhs;
    case Comparison::LessEqual: return lhs <= rhs;
  }
  return false;
}

namespace {

std::vector<std::string> split_words(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::vector<std::string> words;
  for (std::string w; in >> w;) words.push_back(w);
  return words;
}

double parse_number(const std::string& s, std::string_view what) {
  double v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size())
    throw std::invalid_argument("rule: bad " + std::string(what) + " '" + s + "'");
  return v;
}

std::optional<LifecycleKind> lifecycle_from_string(std::string_view s) {
  for (LifecycleKind k : {LifecycleKind::NodeAvailable, LifecycleKind::NodeFailed,
                          LifecycleKind::NodeRecovered, LifecycleKind::NodeStopped})
    if (to_string(k) == s) return k;
  return std::nullopt;
}

}  // namespace

ReactorRule parse_rule(std::string_view text) {
  auto w = split_words(text);
  auto fail = [&](const std::string& why) {
    throw std::invalid_argument("rule '" + std::string(text) + "': " + why);
  };
  if (w.size() < 4) fail("expected '<domain> on <trigger> do <action>'");

  ReactorRule rule;
  auto domain = domain_from_string(w[0]);
  if (!domain || *domain == Domain::Deploy) fail("domain must be repair or optimization");
  rule.domain = *domain;
  if (w[1] != "on") fail("expected 'on'");

  auto do_pos = std::find(w.begin(), w.end(), "do");
  if (do_pos == w.end()) fail("missing 'do'");
  std::vector<std::string> trig(w.begin() + 2, do_pos);
  std::vector<std::string> act(do_pos + 1, w.end());

  if (trig.size() == 1) {
    auto kind = lifecycle_from_string(trig[0]);
    if (!kind) fail("unknown lifecycle event '" + trig[0] + "'");
    rule.trigger = LifecycleTrigger{*kind};
  } else if (trig.size() == 3 || trig.size() == 5) {
    MetricTrigger m;
    m.property = trig[0];
    auto op = comparison_from_string(trig[1]);
    if (!op) fail("unknown comparison '" + trig[1] + "'");
    m.op = *op;
    m.threshold = parse_number(trig[2], "threshold");
    if (trig.size() == 5) {
      if (trig[3] != "for") fail("expected 'for <windows>'");
      m.consecutive = static_cast<int>(parse_number(trig[4], "window count"));
      if (m.consecutive < 1) fail("window count must be >= 1");
    }
    rule.trigger = m;
  } else {
    fail("malformed trigger");
  }

  if (act.empty()) fail("missing action");
  if (act[0] == "replace-node" && act.size() == 1) {
    rule.response = ReplaceNodeTemplate{};
  } else if (act[0] == "rebalance" && act.size() == 1) {
    rule.response = RebalanceTemplate{};
  } else if (act[0] == "stop-node" && act.size() == 1) {
    rule.response = StopNodeTemplate{};
  } else if (act[0] == "tune" && act.size() == 3) {
    rule.response = TuneTemplate{act[1], parse_number(act[2], "tune value")};
  } else {
    fail("unknown action '" + act[0] + "'");
  }
  return rule;
}

std::string render(const ReactorRule& rule) {
  std::ostringstream out;
  out << to_string(rule.domain) << " on ";
  if (const auto* l = std::get_if<LifecycleTrigger>(&rule.trigger)) {
    out << to_string(l->kind);
  } else {
    const auto& m = std::get<MetricTrigger>(rule.trigger);
    out << m.property << ' ' << to_string(m.op) << ' ' << m.threshold;
    if (m.consecutive != 1) out << " for " << m.consecutive;
  }
  out << " do ";
  std::visit(
      [&out](const auto& a) {
        using T = std::decay_t<decltype(a)>;
        if constexpr (std::is_same_v<T, ReplaceNodeTemplate>) out << "replace-node";
        if constexpr (std::is_same_v<T, RebalanceTemplate>) out << "rebalance";
        if constexpr (std::is_same_v<T, StopNodeTemplate>) out << "stop-node";
        if constexpr (std::is_same_v<T, TuneTemplate>) out << "tune " << a.name << ' ' << a.value;
      },
      rule.response);
  return out.str();
}

std::vector<ReactorRule> default_rules() {
  return {parse_rule("repair on node-failed do replace-node"),
          parse_rule("optimization on cpu_mean > 0.9 for 2 do rebalance")};
}

Reactor::Reactor(std::vector<ReactorRule> rules, std::set<Domain> enabled)
    : rules_(std::move(rules)), enabled_(std::move(enabled)), streak_(rules_.size(), 0) {}

std::optional<Action> Reactor::instantiate(const ActionTemplate& response,
                                           const std::optional<NodeId>& subject,
                                           const ReactorContext& ctx) const {
  return std::visit(
      [&](const auto& t) -> std::optional<Action> {
        using T = std::decay_t<decltype(t)>;
        if constexpr (std::is_same_v<T, ReplaceNodeTemplate>) {
          if (!subject) return std::nullopt;
          return ReplaceNode{*subject, ctx.apps_on(*subject)};
        } else if constexpr (std::is_same_v<T, TuneTemplate>) {
          auto node = subject ? subject : ctx.hottest_child();
          if (!node) return std::nullopt;
          return TuneParameter{*node, t.name, t.value};
        } else if constexpr (std::is_same_v<T, RebalanceTemplate>) {
          if (auto move = ctx.rebalance_move()) return *move;
          return std::nullopt;
        } else if constexpr (std::is_same_v<T, StopNodeTemplate>) {
          auto node = subject ? subject : ctx.coldest_child();
          if (!node) return std::nullopt;
          return StopNode{*node};
        }
      },
      response);
}

std::vector<Decision> Reactor::react(const LifecycleEvent& event, const ReactorContext& ctx) {
  std::vector<Decision> actions;
  for (const auto& rule : rules_) {
    if (!enabled(rule.domain)) continue;
    const auto* trig = std::get_if<LifecycleTrigger>(&rule.trigger);
    if (trig == nullptr || trig->kind != event.kind) continue;
    if (auto a = instantiate(rule.response, event.node, ctx))
      actions.push_back({rule.domain, std::move(*a)});
  }
  return actions;
}

std::vector<Decision> Reactor::react(const MetricEvent& event, const ReactorContext& ctx) {
  std::vector<Decision> actions;
  for (std::size_t i = 0; i < rules_.size(); ++i) {
    const auto& rule = rules_[i];
    if (!enabled(rule.domain)) continue;
    const auto* trig = std::get_if<MetricTrigger>(&rule.trigger);
    if (trig == nullptr) continue;
    auto value = event.get(trig->property);
    if (!value || !compare(*value, trig->op, trig->threshold)) {
      streak_[i] = 0;
      continue;
    }
    if (++streak_[i] < trig->consecutive) continue;
    streak_[i] = 0;
    if (auto a = instantiate(rule.response, std::nullopt, ctx))
      actions.push_back({rule.domain, std::move(*a)});
  }
  return actions;
}

}  // namespace hiermon
