#pragma once

// Boot / Mirror / Node composition. Every role is one Host actor whose
// services are switched on by role; a Mirror runs the full manager stack
// toward its children and the node-side stack toward its parent.

#include <map>
#include <memory>
#include <optional>
#include <set>
#include <stdexcept>
#include <string_view>
#include <vector>

#include "hiermon/allocation.hpp"
#include "hiermon/control.hpp"
#include "hiermon/descriptor.hpp"
#include "hiermon/membership.hpp"
#include "hiermon/messages.hpp"
#include "hiermon/monitoring.hpp"
#include "hiermon/system_representation.hpp"

namespace hiermon {

enum class NodeRole { Boot, Mirror, Node };

std::string_view to_string(NodeRole role);
std::optional<NodeRole> role_from_string(std::string_view s);

class TopologyError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct TopologyNode {
  NodeId id;
  NodeRole role = NodeRole::Node;
  std::optional<NodeId> parent;
  ResourceMap capacity{{kCpu, 4}};
  HeartbeatConfig heartbeat;
  AggregationSpec aggregation;
  SensorSpec sensor;
};

class HierarchyTopology {
 public:
  /// Throws TopologyError on a duplicate id. Structure is checked by
  /// validate().
  void add(TopologyNode node);

  /// Every structural problem, in a stable order. Empty iff valid.
  std::vector<std::string> violations() const;
  /// Throws TopologyError listing every violation.
  void validate() const;

  const TopologyNode* find(const NodeId& id) const;
  const TopologyNode& at(const NodeId& id) const;
  bool contains(const NodeId& id) const { return find(id) != nullptr; }
  const std::vector<TopologyNode>& nodes() const { return nodes_; }

  /// Children in insertion order.
  std::vector<NodeId> children(const NodeId& id) const;
  std::optional<NodeId> root() const;
  /// Root has depth 0.
  int depth(const NodeId& id) const;
  /// Longest path to a leaf below `id` (0 for a leaf).
  int height(const NodeId& id) const;
  /// `id` itself plus all its descendants.
  std::vector<NodeId> subtree(const NodeId& id) const;
  bool in_subtree(const NodeId& ancestor, const NodeId& id) const;

 private:
  std::vector<TopologyNode> nodes_;
  std::map<NodeId, std::size_t> index_;
};

/// Seven hosts: boot; m1 over n3, n4; m2 over n5, n6.
HierarchyTopology seven_node_topology(ResourceMap leaf_capacity = {{kCpu, 4}});

/// Settings shared by every host of one deployment.
struct HostSettings {
  Duration install_timeout{5000};
  /// Registration and subscription refresh period; entries live 3 periods.
  Duration refresh_period{1000};
  std::vector<ReactorRule> rules = default_rules();
  std::set<Domain> domains{Domain::Repair, Domain::Optimization};
  std::set<std::string> metrics{kCpu};
};

struct HostConfig {
  TopologyNode node;
  /// Level stamped on a window summary that had no inputs.
  int tier_level = 1;
  HostSettings settings;
};

class Host final : public Actor, private ReactorContext {
 public:
  explicit Host(HostConfig config);

  void on_start(Fabric& fabric) override;
  void on_message(Fabric& fabric, const Envelope& envelope) override;
  void on_timer(Fabric& fabric, TimerId id, const Envelope& envelope) override;

  const NodeId& id() const { return config_.node.id; }
  NodeRole role() const { return config_.node.role; }
  bool is_manager() const { return role() != NodeRole::Node; }
  const std::optional<NodeId>& parent() const { return parent_; }

  // Manager-side state; empty on a Node.
  const NodeTable& node_table() const { return state_->table; }
  const Allocator& allocator() const { return state_->allocator; }
  const DeploymentLedger& ledger() const { return state_->ledger; }
  const SystemRepresentation& representation() const { return state_->representation; }
  const Directory& directory() const { return state_->directory; }
  /// App -> manager that owns the deployment, for apps this manager
  /// originated but that were granted elsewhere.
  const std::map<AppId, NodeId>& forwarded() const { return state_->forwarded; }

  // Node-side state.
  const std::map<AppId, ResourceMap>& installed() const { return state_->installed; }
  std::optional<double> tuned(const std::string& name) const;
  const std::optional<MetricEvent>& latest() const { return state_->latest; }
  bool stopped() const { return state_->stopped; }

 private:
  struct State {
    State(const HostConfig& cfg, const std::optional<NodeId>& parent);

    NodeTable table;
    Allocator allocator;
    DeploymentLedger ledger;
    SystemRepresentation representation;
    Directory directory;
    WindowAggregator aggregator;
    Reactor reactor;
    SubscriberSet subscribers;
    std::map<AppId, NodeId> forwarded;
    std::map<std::uint64_t, TimerId> install_timers;
    std::uint64_t next_request = 1;
    std::uint64_t next_lookup = 1;

    std::map<AppId, ResourceMap> installed;
    std::map<std::string, double> tuned;
    std::optional<MetricEvent> latest;
    TimerId heartbeat_timer = 0;
    bool stopped = false;
    /// Apps this manager originated whose request has no terminal answer yet.
    std::set<AppId> pending;
  };

  Endpoint at(const char* port) const { return {id(), port}; }
  void note(Fabric& fabric, const char* port, Json payload) const;
  void tick(Fabric& fabric, msg::TickKind kind, Duration delay);

  // Node side.
  void emit_heartbeat(Fabric& fabric);
  CapacitySnapshot capacity_snapshot() const;
  void refresh_registration(Fabric& fabric);
  void sample(Fabric& fabric);
  void publish(Fabric& fabric, const MetricEvent& event);
  void on_install(Fabric& fabric, const Envelope& env, const msg::Install& m);
  void on_uninstall(Fabric& fabric, const msg::Uninstall& m);
  void on_tune(Fabric& fabric, const Envelope& env, const msg::Tune& m);
  void on_stop(Fabric& fabric);
  void on_reattach(Fabric& fabric, const msg::Reattach& m);

  // Manager side: membership and monitoring.
  void on_heartbeat(Fabric& fabric, const msg::Heartbeat& m);
  void sweep(Fabric& fabric);
  void on_lifecycle(Fabric& fabric, const LifecycleEvent& event);
  void on_lookup(Fabric& fabric, const msg::Lookup& m);
  void discover(Fabric& fabric);
  void close_window(Fabric& fabric);
  std::set<std::string> wanted_properties() const;
  std::set<std::string> offered_properties() const;

  // Manager side: allocation and deployment.
  std::vector<Candidate> candidates() const;
  void allocate(Fabric& fabric, AllocationRequest req);
  void grant(Fabric& fabric, const AllocationRequest& req, const NodeId& node);
  void install(Fabric& fabric, DeploymentRecord rec);
  void report(Fabric& fabric, const NodeId& origin, msg::DeployResult result);
  void on_result(Fabric& fabric, const msg::DeployResult& m);
  void on_deploy(Fabric& fabric, const msg::DeployCommand& m);
  void on_release(Fabric& fabric, const msg::ReleaseCommand& m);
  void on_ack(Fabric& fabric, const msg::InstallAck& m);
  void on_install_timeout(Fabric& fabric, const msg::InstallTimeout& m);
  void end_record(Fabric& fabric, std::uint64_t seq, DeploymentState to, bool uninstall);
  void note_record(Fabric& fabric, const DeploymentRecord& rec) const;
  void note_reservation(Fabric& fabric, const NodeId& node) const;
  std::string new_request_id();

  // Manager side: control loops.
  void apply(Fabric& fabric, const Decision& decision);
  bool leaf_child(const NodeId& node) const;
  double load(const NodeId& node) const;

  std::vector<AppId> apps_on(const NodeId& node) const override;
  std::optional<NodeId> hottest_child() const override;
  std::optional<NodeId> coldest_child() const override;
  std::optional<Rebind> rebalance_move() const override;

  HostConfig config_;
  std::optional<NodeId> parent_;
  std::unique_ptr<State> state_;
};

class DeploymentError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A topology instantiated on its own fabric.
class Deployment {
 public:
  /// Throws TopologyError if the topology is invalid.
  Deployment(HierarchyTopology topology, std::uint64_t seed, HostSettings settings = {});

  /// Starts every host of the topology.
  void build();

  /// Starts the hosts named by a resolved descriptor. The template is one of
  /// jadeBoot, jadeMirror, jadeNode (every host must have that role) or jade
  /// (role taken from the topology). All hosts are checked before any is
  /// created. Returns the started actor ids in plan order.
  std::vector<ActorId> launch(const LaunchPlan& plan, std::string_view host_template);

  /// Topology hosts not started yet.
  std::vector<NodeId> pending() const;

  Fabric& fabric() { return fabric_; }
  const Fabric& fabric() const { return fabric_; }
  const HierarchyTopology& topology() const { return topology_; }
  const Host* host(const NodeId& id) const;
  void run_until(SimTime t) { fabric_.run_until(t); }

  /// Union of the representations of `manager` and every manager below it
  /// in the topology.
  SystemRepresentation snapshot(const NodeId& manager) const;

 private:
  void start(const TopologyNode& node);

  HierarchyTopology topology_;
  HostSettings settings_;
  Fabric fabric_;
  std::map<NodeId, const Host*> hosts_;
};

}  // namespace hiermon
