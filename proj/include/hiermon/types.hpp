#pragma once

#include <cstdint>
#include <map>
#include <string>

#include "hiermon/fabric.hpp"

namespace hiermon {

using NodeId = ActorId;
using AppId = std::string;

/// Resource name -> integer units ("cpu" by default).
using ResourceMap = std::map<std::string, std::int64_t>;

/// Free-form string parameters attached to deployed components.
using Params = std::map<std::string, std::string>;

inline constexpr const char* kCpu = "cpu";

/// true iff every demanded resource is available in at least that amount.
bool fits(const ResourceMap& free, const ResourceMap& demand);
ResourceMap add(ResourceMap a, const ResourceMap& b);
ResourceMap subtract(ResourceMap a, const ResourceMap& b);
std::int64_t total_units(const ResourceMap& m);

Json to_json(const ResourceMap& m);
ResourceMap resource_map_from_json(const Json& j);

// Service ports shared by every role.
namespace port {
inline constexpr const char* kDiscovery = "discovery";
inline constexpr const char* kDirectory = "directory";
inline constexpr const char* kProducer = "producer";
inline constexpr const char* kMonitor = "monitor";
inline constexpr const char* kDeployer = "deployer";
inline constexpr const char* kFactory = "factory";
inline constexpr const char* kActuator = "actuator";
inline constexpr const char* kHeartbeat = "heartbeat";
inline constexpr const char* kSensor = "sensor";
inline constexpr const char* kControl = "control";
}  // namespace port

}  // namespace hiermon
