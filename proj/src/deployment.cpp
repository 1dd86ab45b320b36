#include <algorithm>

#include "hiermon/hierarchy.hpp"

namespace hiermon {

Deployment::Deployment(HierarchyTopology topology, std::uint64_t seed, HostSettings settings)
    : topology_(std::move(topology)), settings_(std::move(settings)), fabric_(seed) {
  topology_.validate();
}

void Deployment::start(const TopologyNode& node) {
  HostConfig cfg;
  cfg.node = node;
  cfg.tier_level = std::max(1, topology_.height(node.id));
  cfg.settings = settings_;
  auto host = std::make_unique<Host>(std::move(cfg));
  hosts_[node.id] = host.get();
  fabric_.add_actor(node.id, std::move(host));
}

void Deployment::build() {
  for (const auto& node : topology_.nodes())
    if (!hosts_.contains(node.id)) start(node);
}

std::vector<ActorId> Deployment::launch(const LaunchPlan& plan,
                                        std::string_view host_template) {
  std::optional<NodeRole> wanted;
  if (host_template == "jadeBoot") {
    wanted = NodeRole::Boot;
  } else if (host_template == "jadeMirror") {
    wanted = NodeRole::Mirror;
  } else if (host_template == "jadeNode") {
    wanted = NodeRole::Node;
  } else if (host_template != "jade") {
    throw DeploymentError("unknown host template '" + std::string(host_template) + "'");
  }

  std::vector<std::string> errors;
  if (plan.targets.empty()) errors.emplace_back("launch plan has no targets");
  std::set<NodeId> seen;
  for (const auto& host : plan.hosts()) {
    const auto* node = topology_.find(host);
    if (node == nullptr) {
      errors.push_back("host '" + host + "' is not in the topology");
    } else if (wanted && node->role != *wanted) {
      errors.push_back("host '" + host + "' is a " + std::string(to_string(node->role)) +
                       ", template " + std::string(host_template) + " needs a " +
                       std::string(to_string(*wanted)));
    }
    if (hosts_.contains(host)) errors.push_back("host '" + host + "' already launched");
    if (!seen.insert(host).second) errors.push_back("host '" + host + "' listed twice");
  }
  if (!errors.empty()) {
    std::string all = "launch failed:";
    for (const auto& e : errors) all += "\n  - " + e;
    throw DeploymentError(all);
  }
  auto ids = plan.hosts();
  for (const auto& host : ids) start(topology_.at(host));
  return ids;
}

std::vector<NodeId> Deployment::pending() const {
  std::vector<NodeId> out;
  for (const auto& node : topology_.nodes())
    if (!hosts_.contains(node.id)) out.push_back(node.id);
  return out;
}

const Host* Deployment::host(const NodeId& id) const {
  auto it = hosts_.find(id);
  return it == hosts_.end() ? nullptr : it->second;
}

SystemRepresentation Deployment::snapshot(const NodeId& manager) const {
  const auto& node = topology_.at(manager);
  if (node.role == NodeRole::Node)
    throw DeploymentError("'" + manager + "' is a leaf and keeps no representation");
  SystemRepresentation out;
  for (const auto& id : topology_.subtree(manager)) {
    const Host* h = host(id);
    if (h != nullptr && h->is_manager()) out.merge(h->representation());
  }
  return out;
}

}  // namespace hiermon
