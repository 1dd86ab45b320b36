#pragma once

#include <vector>

#include "hiermon/types.hpp"

namespace hiermon {

struct Placement {
  NodeId node;
  std::string name;
  Params params;

  bool operator==(const Placement&) const = default;
};

/// A manager's mirror of the application components it placed and where
/// they run. Only Running components appear here.
class SystemRepresentation {
 public:
  void place(const AppId& app, Placement placement, SimTime now);
  bool remove(const AppId& app, SimTime now);

  const Placement* find(const AppId& app) const;
  std::vector<AppId> apps_on(const NodeId& node) const;
  const std::map<AppId, Placement>& placements() const { return placements_; }
  SimTime last_updated() const { return last_updated_; }
  bool empty() const { return placements_.empty(); }

  /// Union used to present a manager's whole subtree. Throws
  /// std::logic_error if one app is placed in both.
  void merge(const SystemRepresentation& other);

 private:
  std::map<AppId, Placement> placements_;
  SimTime last_updated_{0};
};

Json to_json(const SystemRepresentation& rep);

}  // namespace hiermon
