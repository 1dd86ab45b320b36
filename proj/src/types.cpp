#include "hiermon/types.hpp"

namespace hiermon {

bool fits(const ResourceMap& free, const ResourceMap& demand) {
  for (const auto& [name, units] : demand) {
    auto it = free.find(name);
    std::int64_t have = it == free.end() ? 0 : it->second;
    if (have < units) return false;
  }
  return true;
}

ResourceMap add(ResourceMap a, const ResourceMap& b) {
  for (const auto& [name, units] : b) a[name] += units;
  return a;
}

ResourceMap subtract(ResourceMap a, const ResourceMap& b) {
  for (const auto& [name, units] : b) a[name] -= units;
  return a;
}

std::int64_t total_units(const ResourceMap& m) {
  std::int64_t sum = 0;
  for (const auto& [name, units] : m) sum += units;
  return sum;
}

Json to_json(const ResourceMap& m) {
  Json j = Json::object();
  for (const auto& [name, units] : m) j[name] = units;
  return j;
}

ResourceMap resource_map_from_json(const Json& j) {
  ResourceMap m;
  for (const auto& [name, units] : j.items()) m[name] = units.get<std::int64_t>();
  return m;
}

}  // namespace hiermon
