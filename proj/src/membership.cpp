#include "hiermon/membership.hpp"

#include <stdexcept>

namespace hiermon {

void HeartbeatConfig::validate() const {
  if (period <= Duration::zero()) throw std::invalid_argument("heartbeat period must be > 0");
  if (failure_timeout <= period)
    throw std::invalid_argument("failure_timeout must exceed the heartbeat period");
  if (sweep_interval <= Duration::zero() || sweep_interval > failure_timeout)
    throw std::invalid_argument("sweep_interval must be in (0, failure_timeout]");
}

std::string_view to_string(NodeStatus status) {
  switch (status) {
    case NodeStatus::Available: return "available";
    case NodeStatus::Suspected: return "suspected";
    case NodeStatus::Failed: return "failed";
  }
  return "unknown";
}

std::string_view to_string(LifecycleKind kind) {
  switch (kind) {
    case LifecycleKind::NodeAvailable: return "node-available";
    case LifecycleKind::NodeFailed: return "node-failed";
    case LifecycleKind::NodeRecovered: return "node-recovered";
    case LifecycleKind::NodeStopped: return "node-stopped";
  }
  return "unknown";
}

Json to_json(const CapacitySnapshot& snapshot) {
  Json j;
  j["manager"] = snapshot.manager;
  j["capacity"] = to_json(snapshot.capacity);
  j["max_free"] = to_json(snapshot.max_free);
  j["installed"] = snapshot.installed;
  return j;
}

Json to_json(const LifecycleEvent& event) {
  Json j;
  j["type"] = "lifecycle";
  j["event"] = to_string(event.kind);
  j["node"] = event.node;
  j["manager"] = event.manager;
  return j;
}

NodeTable::NodeTable(NodeId manager, HeartbeatConfig config)
    : manager_(std::move(manager)), config_(config) {
  config_.validate();
}

std::optional<LifecycleEvent> NodeTable::record_heartbeat(const NodeId& node, SimTime at,
                                                          CapacitySnapshot capacity) {
  auto [it, inserted] = records_.try_emplace(node);
  NodeRecord& rec = it->second;
  rec.node = node;
  rec.last_heartbeat = at;
  rec.capacity = std::move(capacity);
  if (inserted) {
    rec.status = NodeStatus::Available;
    return LifecycleEvent{LifecycleKind::NodeAvailable, node, manager_, at};
  }
  if (rec.status == NodeStatus::Failed) {
    rec.status = NodeStatus::Available;
    return LifecycleEvent{LifecycleKind::NodeRecovered, node, manager_, at};
  }
  return std::nullopt;
}

std::vector<NodeId> NodeTable::sweep(SimTime now) {
  std::vector<NodeId> failed;
  for (auto& [id, rec] : records_) {
    if (rec.status != NodeStatus::Available) continue;
    if (now - rec.last_heartbeat > config_.failure_timeout) {
      rec.status = NodeStatus::Failed;
      failed.push_back(id);
    }
  }
  return failed;
}

bool NodeTable::mark_stopped(const NodeId& node) {
  auto it = records_.find(node);
  if (it == records_.end() || it->second.status == NodeStatus::Failed) return false;
  it->second.status = NodeStatus::Failed;
  return true;
}

const NodeRecord* NodeTable::find(const NodeId& node) const {
  auto it = records_.find(node);
  return it == records_.end() ? nullptr : &it->second;
}

bool NodeTable::is_available(const NodeId& node) const {
  const auto* rec = find(node);
  return rec != nullptr && rec->status == NodeStatus::Available;
}

std::vector<NodeId> NodeTable::available_nodes() const {
  std::vector<NodeId> out;
  for (const auto& [id, rec] : records_)
    if (rec.status == NodeStatus::Available) out.push_back(id);
  return out;
}

}  // namespace hiermon
