#pragma once

// Manager-side node discovery: heartbeat bookkeeping and timeout sweeps.

#include <optional>
#include <string_view>
#include <vector>

#include "hiermon/types.hpp"

namespace hiermon {

struct HeartbeatConfig {
  Duration period{1000};
  Duration failure_timeout{3000};
  Duration sweep_interval{1000};

  /// Throws std::invalid_argument unless failure_timeout > period > 0 and
  /// 0 < sweep_interval <= failure_timeout.
  void validate() const;
};

enum class NodeStatus {
  Available,
  Suspected,  // reserved; the detector only moves between Available and Failed
  Failed,
};

std::string_view to_string(NodeStatus status);

/// What a heartbeat carries about its sender. Leaves report their own
/// capacity and installed components; managers report a subtree summary
/// (total capacity and the component-wise largest free amount on any one
/// available leaf).
struct CapacitySnapshot {
  bool manager = false;
  ResourceMap capacity;
  ResourceMap max_free;
  std::vector<AppId> installed;
};

Json to_json(const CapacitySnapshot& snapshot);

struct NodeRecord {
  NodeId node;
  SimTime last_heartbeat{0};
  NodeStatus status = NodeStatus::Available;
  CapacitySnapshot capacity;
};

enum class LifecycleKind { NodeAvailable, NodeFailed, NodeRecovered, NodeStopped };

std::string_view to_string(LifecycleKind kind);

struct LifecycleEvent {
  LifecycleKind kind;
  NodeId node;
  NodeId manager;
  SimTime at{0};
};

Json to_json(const LifecycleEvent& event);

/// The dynamic list of nodes known to one manager.
class NodeTable {
 public:
  NodeTable(NodeId manager, HeartbeatConfig config);

  /// Refreshes the node's soft state to `at`. Returns the lifecycle event to
  /// publish when the node is new (available) or was Failed (recovered).
  std::optional<LifecycleEvent> record_heartbeat(const NodeId& node, SimTime at,
                                                 CapacitySnapshot capacity);

  /// Marks every Available node whose silence exceeds the failure timeout as
  /// Failed and returns them in id order. Failed nodes are never re-reported.
  std::vector<NodeId> sweep(SimTime now);

  /// Administrative removal from the available set (no failure event).
  bool mark_stopped(const NodeId& node);

  const NodeRecord* find(const NodeId& node) const;
  bool is_available(const NodeId& node) const;
  std::vector<NodeId> available_nodes() const;
  const std::map<NodeId, NodeRecord>& records() const { return records_; }
  const HeartbeatConfig& config() const { return config_; }
  const NodeId& manager() const { return manager_; }

 private:
  NodeId manager_;
  HeartbeatConfig config_;
  std::map<NodeId, NodeRecord> records_;
};

}  // namespace hiermon
