#include <algorithm>
#include <functional>

#include "hiermon/hierarchy.hpp"

namespace hiermon {

std::string_view to_string(NodeRole role) {
  switch (role) {
    case NodeRole::Boot: return "boot";
    case NodeRole::Mirror: return "mirror";
    case NodeRole::Node: return "node";
  }
  return "unknown";
}

std::optional<NodeRole> role_from_string(std::string_view s) {
  for (NodeRole r : {NodeRole::Boot, NodeRole::Mirror, NodeRole::Node})
    if (to_string(r) == s) return r;
  return std::nullopt;
}

void HierarchyTopology::add(TopologyNode node) {
  if (index_.contains(node.id)) throw TopologyError("duplicate node '" + node.id + "'");
  index_[node.id] = nodes_.size();
  nodes_.push_back(std::move(node));
}

const TopologyNode* HierarchyTopology::find(const NodeId& id) const {
  auto it = index_.find(id);
  return it == index_.end() ? nullptr : &nodes_[it->second];
}

const TopologyNode& HierarchyTopology::at(const NodeId& id) const {
  const auto* n = find(id);
  if (n == nullptr) throw TopologyError("unknown node '" + id + "'");
  return *n;
}

std::vector<std::string> HierarchyTopology::violations() const {
  std::vector<std::string> out;
  if (nodes_.empty()) {
    out.emplace_back("topology is empty");
    return out;
  }

  std::vector<NodeId> roots;
  for (const auto& n : nodes_) {
    if (!n.parent) {
      roots.push_back(n.id);
      if (n.role != NodeRole::Boot)
        out.push_back("root '" + n.id + "' must be a boot, not a " + std::string(to_string(n.role)));
    } else {
      if (n.role == NodeRole::Boot) out.push_back("boot '" + n.id + "' must not have a parent");
      const auto* p = find(*n.parent);
      if (p == nullptr) {
        out.push_back("node '" + n.id + "' has unknown parent '" + *n.parent + "'");
      } else if (p->role == NodeRole::Node) {
        out.push_back("node '" + p->id + "' is a leaf and cannot parent '" + n.id + "'");
      }
    }
    try {
      n.heartbeat.validate();
      n.aggregation.validate();
      n.sensor.validate();
    } catch (const std::invalid_argument& e) {
      out.push_back("node '" + n.id + "': " + e.what());
    }
    for (const auto& [name, units] : n.capacity)
      if (units < 0) out.push_back("node '" + n.id + "' has negative capacity for '" + name + "'");
  }
  if (roots.empty()) out.emplace_back("topology has no root");
  if (roots.size() > 1) {
    std::string list;
    for (const auto& r : roots) list += (list.empty() ? "" : ", ") + r;
    out.push_back("topology has several roots: " + list);
  }

  // Any node whose parent chain never reaches a root sits on or under a cycle.
  std::set<NodeId> reported;
  for (const auto& n : nodes_) {
    std::vector<NodeId> chain{n.id};
    const TopologyNode* cur = &n;
    while (cur != nullptr && cur->parent) {
      cur = find(*cur->parent);
      if (cur == nullptr) break;
      if (std::find(chain.begin(), chain.end(), cur->id) != chain.end()) {
        auto start = std::find(chain.begin(), chain.end(), cur->id);
        std::vector<NodeId> cycle(start, chain.end());
        std::sort(cycle.begin(), cycle.end());
        if (reported.insert(cycle.front()).second) {
          std::string list;
          for (const auto& c : cycle) list += (list.empty() ? "" : " ") + c;
          out.push_back("cycle among: " + list);
        }
        break;
      }
      chain.push_back(cur->id);
    }
  }
  return out;
}

void HierarchyTopology::validate() const {
  auto v = violations();
  if (v.empty()) return;
  std::string all = "invalid topology:";
  for (const auto& s : v) all += "\n  - " + s;
  throw TopologyError(all);
}

std::vector<NodeId> HierarchyTopology::children(const NodeId& id) const {
  std::vector<NodeId> out;
  for (const auto& n : nodes_)
    if (n.parent == id) out.push_back(n.id);
  return out;
}

std::optional<NodeId> HierarchyTopology::root() const {
  for (const auto& n : nodes_)
    if (!n.parent) return n.id;
  return std::nullopt;
}

int HierarchyTopology::depth(const NodeId& id) const {
  int d = 0;
  const TopologyNode* cur = &at(id);
  while (cur->parent) {
    cur = &at(*cur->parent);
    if (++d > static_cast<int>(nodes_.size())) throw TopologyError("cycle above '" + id + "'");
  }
  return d;
}

int HierarchyTopology::height(const NodeId& id) const {
  int h = 0;
  for (const auto& c : children(id)) h = std::max(h, 1 + height(c));
  return h;
}

std::vector<NodeId> HierarchyTopology::subtree(const NodeId& id) const {
  std::vector<NodeId> out{id};
  for (std::size_t i = 0; i < out.size(); ++i)
    for (auto& c : children(out[i])) out.push_back(std::move(c));
  return out;
}

bool HierarchyTopology::in_subtree(const NodeId& ancestor, const NodeId& id) const {
  const TopologyNode* cur = find(id);
  for (std::size_t steps = 0; cur != nullptr && steps <= nodes_.size(); ++steps) {
    if (cur->id == ancestor) return true;
    if (!cur->parent) return false;
    cur = find(*cur->parent);
  }
  return false;
}

HierarchyTopology seven_node_topology(ResourceMap leaf_capacity) {
  auto make = [](NodeId id, NodeRole role, std::optional<NodeId> parent, ResourceMap cap) {
    TopologyNode n;
    n.id = std::move(id);
    n.role = role;
    n.parent = std::move(parent);
    n.capacity = std::move(cap);
    return n;
  };
  HierarchyTopology t;
  t.add(make("boot", NodeRole::Boot, std::nullopt, {}));
  for (const auto& [mirror, leaves] :
       std::vector<std::pair<NodeId, std::vector<NodeId>>>{{"m1", {"n3", "n4"}},
                                                           {"m2", {"n5", "n6"}}}) {
    t.add(make(mirror, NodeRole::Mirror, "boot", {}));
    for (const auto& leaf : leaves) t.add(make(leaf, NodeRole::Node, mirror, leaf_capacity));
  }
  return t;
}

}  // namespace hiermon
