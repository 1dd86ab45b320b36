#include "hiermon/messages.hpp"

namespace hiermon::msg {

namespace {

Json endpoints(const std::vector<Endpoint>& eps) {
  Json j = Json::array();
  for (const auto& ep : eps) j.push_back(ep.str());
  return j;
}

std::string_view tick_name(TickKind k) {
  switch (k) {
    case TickKind::Heartbeat: return "heartbeat";
    case TickKind::Sweep: return "sweep";
    case TickKind::Sensor: return "sensor";
    case TickKind::Window: return "window";
    case TickKind::Discovery: return "discovery";
    case TickKind::Refresh: return "refresh";
  }
  return "unknown";
}

}  // namespace

void describe(Json& j, const Heartbeat& m) {
  j["node"] = m.node;
  j["capacity"] = to_json(m.capacity);
}

void describe(Json& j, const Register& m) {
  j["subject"] = m.registration.subject.str();
  j["kind"] = to_string(m.registration.kind);
  j["properties"] = m.registration.properties;
  j["ttl"] = m.registration.ttl.count();
}

void describe(Json& j, const Lookup& m) {
  j["request"] = m.request;
  j["wanted"] = m.wanted;
  j["reply_to"] = m.reply_to.str();
  j["hierarchical"] = m.hierarchical;
}

void describe(Json& j, const LookupReply& m) {
  j["request"] = m.request;
  j["producers"] = endpoints(m.producers);
}

void describe(Json& j, const Subscribe& m) {
  j["consumer"] = m.consumer.str();
  j["ttl"] = m.ttl.count();
}

void describe(Json& j, const Metric& m) { j["event"] = to_json(m.event); }

void describe(Json& j, const QueryLatest& m) { j["reply_to"] = m.reply_to.str(); }

void describe(Json& j, const QueryReply& m) {
  j["event"] = m.event ? to_json(*m.event) : Json(nullptr);
}

void describe(Json& j, const DeployCommand& m) {
  j["app"] = m.app;
  j["demand"] = to_json(m.demand);
  j["params"] = m.params;
}

void describe(Json& j, const ReleaseCommand& m) { j["app"] = m.app; }

void describe(Json& j, const AllocateRequest& m) {
  j["domain"] = to_string(m.request.domain);
  j["request"] = to_json(m.request);
}

void describe(Json& j, const AllocateRefused& m) {
  j["domain"] = to_string(m.request.domain);
  j["request"] = to_json(m.request);
  j["refused_by"] = m.refused_by;
}

void describe(Json& j, const DeployResult& m) {
  j["domain"] = to_string(m.domain);
  j["request"] = m.request;
  j["app"] = m.app;
  j["state"] = m.state;
  j["node"] = m.node;
  j["owner"] = m.owner;
  j["reason"] = m.reason;
}

void describe(Json& j, const Install& m) {
  j["domain"] = to_string(m.domain);
  j["app"] = m.app;
  j["demand"] = to_json(m.demand);
  j["params"] = m.params;
  j["record"] = m.record;
}

void describe(Json& j, const InstallAck& m) {
  j["domain"] = to_string(m.domain);
  j["app"] = m.app;
  j["node"] = m.node;
  j["record"] = m.record;
}

void describe(Json& j, const Uninstall& m) {
  j["domain"] = to_string(m.domain);
  j["app"] = m.app;
}

void describe(Json& j, const Tune& m) {
  j["domain"] = "optimization";
  j["name"] = m.name;
  j["value"] = m.value;
}

void describe(Json& j, const TuneAck& m) {
  j["domain"] = "optimization";
  j["node"] = m.node;
  j["name"] = m.name;
  j["value"] = m.value;
}

void describe(Json&, const Stop&) {}

void describe(Json& j, const Reattach& m) { j["parent"] = m.parent; }

void describe(Json& j, const Tick& m) { j["tick"] = tick_name(m.kind); }

void describe(Json& j, const InstallTimeout& m) {
  j["app"] = m.app;
  j["record"] = m.record;
}

}  // namespace hiermon::msg
