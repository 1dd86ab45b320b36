#include "hiermon/system_representation.hpp"

#include <algorithm>
#include <stdexcept>

namespace hiermon {

void SystemRepresentation::place(const AppId& app, Placement placement, SimTime now) {
  placements_.insert_or_assign(app, std::move(placement));
  last_updated_ = now;
}

bool SystemRepresentation::remove(const AppId& app, SimTime now) {
  if (placements_.erase(app) == 0) return false;
  last_updated_ = now;
  return true;
}

const Placement* SystemRepresentation::find(const AppId& app) const {
  auto it = placements_.find(app);
  return it == placements_.end() ? nullptr : &it->second;
}

std::vector<AppId> SystemRepresentation::apps_on(const NodeId& node) const {
  std::vector<AppId> apps;
  for (const auto& [app, p] : placements_)
    if (p.node == node) apps.push_back(app);
  return apps;
}

void SystemRepresentation::merge(const SystemRepresentation& other) {
  for (const auto& [app, p] : other.placements_) {
    if (!placements_.emplace(app, p).second)
      throw std::logic_error("component '" + app + "' placed by two managers");
  }
  last_updated_ = std::max(last_updated_, other.last_updated_);
}

Json to_json(const SystemRepresentation& rep) {
  Json j;
  j["last_updated"] = rep.last_updated().count();
  Json placements = Json::object();
  for (const auto& [app, p] : rep.placements()) {
    Json entry;
    entry["node"] = p.node;
    entry["name"] = p.name;
    entry["params"] = p.params;
    placements[app] = std::move(entry);
  }
  j["placements"] = std::move(placements);
  return j;
}

}  // namespace hiermon
