#pragma once

// Sensor -> reactor -> actuator cycles. Rules are declarative; each rule
// belongs to one monitoring domain and domains can be switched off
// independently.

#include <optional>
#include <set>
#include <string_view>
#include <variant>
#include <vector>

#include "hiermon/allocation.hpp"
#include "hiermon/membership.hpp"
#include "hiermon/monitoring.hpp"

namespace hiermon {

struct SensorSpec {
  std::string metric = kCpu;
  Duration period{1000};
  /// Half-width of the uniform load noise added to each reading.
  double noise = 0.0;

  void validate() const;
};

/// Utilization of `resource`: reserved / capacity, 0 when there is no
/// capacity.
double utilization(const ResourceMap& reserved, const ResourceMap& capacity,
                   const std::string& resource = kCpu);

/// A level-0 reading. `noise_sample` is added and the result clamped to
/// [0, 1].
MetricEvent sense(const NodeId& node, SimTime now, const SensorSpec& spec,
                  const ResourceMap& reserved, const ResourceMap& capacity,
                  double noise_sample = 0.0);

struct ReplaceNode {
  NodeId failed;
  std::vector<AppId> apps;
};
struct TuneParameter {
  NodeId node;
  std::string name;
  double value = 0.0;
};
/// Move a running component to another node.
struct Rebind {
  AppId component;
  NodeId from;
  NodeId target;
};
struct StopNode {
  NodeId node;
};

using Action = std::variant<ReplaceNode, TuneParameter, Rebind, StopNode>;

/// Manager-side actions run in the manager's actuator; tuning is always
/// delegated to the node's local actuator.
struct Executor {
  std::optional<NodeId> local_actuator;
};

Executor executor_of(const Action& action);
Json to_json(const Action& action);
std::string_view action_name(const Action& action);

enum class Comparison { Greater, GreaterEqual, Less, LessEqual };

std::string_view to_string(Comparison c);
std::optional<Comparison> comparison_from_string(std::string_view s);
bool compare(double lhs, Comparison c, double rhs);

struct LifecycleTrigger {
  LifecycleKind kind = LifecycleKind::NodeFailed;
};

/// Fires when `property` of the manager's own window summary satisfies the
/// comparison for `consecutive` windows in a row.
struct MetricTrigger {
  std::string property;
  Comparison op = Comparison::Greater;
  double threshold = 0.0;
  int consecutive = 1;
};

using Trigger = std::variant<LifecycleTrigger, MetricTrigger>;

struct ReplaceNodeTemplate {};
struct TuneTemplate {
  std::string name;
  double value = 0.0;
};
struct RebalanceTemplate {};
struct StopNodeTemplate {};

using ActionTemplate =
    std::variant<ReplaceNodeTemplate, TuneTemplate, RebalanceTemplate, StopNodeTemplate>;

struct ReactorRule {
  Domain domain = Domain::Repair;
  Trigger trigger;
  ActionTemplate response;
};

/// The text form used in scenario files, e.g.
/// "repair on node-failed do replace-node" or
/// "optimization on cpu_mean > 0.9 for 2 do rebalance".
ReactorRule parse_rule(std::string_view text);
std::string render(const ReactorRule& rule);

/// Repair on node failure plus the rebalance rule for sustained load.
std::vector<ReactorRule> default_rules();

/// What the reactor needs to know about its manager to instantiate actions.
class ReactorContext {
 public:
  virtual ~ReactorContext() = default;
  virtual std::vector<AppId> apps_on(const NodeId& node) const = 0;
  virtual std::optional<NodeId> hottest_child() const = 0;
  virtual std::optional<NodeId> coldest_child() const = 0;
  virtual std::optional<Rebind> rebalance_move() const = 0;
};

/// An instantiated action and the domain of the rule that produced it.
struct Decision {
  Domain domain = Domain::Repair;
  Action action;
};

class Reactor {
 public:
  explicit Reactor(std::vector<ReactorRule> rules,
                   std::set<Domain> enabled = {Domain::Repair, Domain::Optimization});

  std::vector<Decision> react(const LifecycleEvent& event, const ReactorContext& ctx);
  std::vector<Decision> react(const MetricEvent& event, const ReactorContext& ctx);

  const std::vector<ReactorRule>& rules() const { return rules_; }
  bool enabled(Domain d) const { return enabled_.contains(d); }

 private:
  std::optional<Action> instantiate(const ActionTemplate& response,
                                    const std::optional<NodeId>& subject,
                                    const ReactorContext& ctx) const;

  std::vector<ReactorRule> rules_;
  std::set<Domain> enabled_;
  std::vector<int> streak_;
};

}  // namespace hiermon
