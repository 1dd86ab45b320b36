#pragma once

// Wire vocabulary between roles. Bodies are plain aggregates; Wire<T>
// adapts them to the fabric's Message interface.

#include <optional>
#include <set>
#include <string_view>
#include <vector>

#include "hiermon/allocation.hpp"
#include "hiermon/membership.hpp"
#include "hiermon/monitoring.hpp"

namespace hiermon::msg {

struct Heartbeat {
  static constexpr std::string_view kType = "heartbeat";
  NodeId node;
  CapacitySnapshot capacity;
};

struct Register {
  static constexpr std::string_view kType = "register";
  Registration registration;
};

struct Lookup {
  static constexpr std::string_view kType = "lookup";
  std::uint64_t request = 0;
  std::set<std::string> wanted;
  Endpoint reply_to;
  /// Misses are forwarded to the parent directory.
  bool hierarchical = false;
};

struct LookupReply {
  static constexpr std::string_view kType = "lookup-reply";
  std::uint64_t request = 0;
  std::vector<Endpoint> producers;
};

struct Subscribe {
  static constexpr std::string_view kType = "subscribe";
  Endpoint consumer;
  Duration ttl{3000};
};

struct Metric {
  static constexpr std::string_view kType = "metric";
  MetricEvent event;
};

struct QueryLatest {
  static constexpr std::string_view kType = "query";
  Endpoint reply_to;
};

struct QueryReply {
  static constexpr std::string_view kType = "query-reply";
  std::optional<MetricEvent> event;
};

struct DeployCommand {
  static constexpr std::string_view kType = "deploy";
  AppId app;
  ResourceMap demand;
  Params params;
};

struct ReleaseCommand {
  static constexpr std::string_view kType = "release";
  AppId app;
};

struct AllocateRequest {
  static constexpr std::string_view kType = "allocate";
  AllocationRequest request;
};

struct AllocateRefused {
  static constexpr std::string_view kType = "allocate-refused";
  AllocationRequest request;
  NodeId refused_by;
};

/// Terminal answer to the manager that originated a request.
struct DeployResult {
  static constexpr std::string_view kType = "deploy-result";
  std::string request;
  AppId app;
  Domain domain = Domain::Deploy;
  /// "running", "lost" or "denied".
  std::string state;
  NodeId node;
  NodeId owner;
  std::string reason;
};

struct Install {
  static constexpr std::string_view kType = "install";
  AppId app;
  ResourceMap demand;
  Params params;
  Domain domain = Domain::Deploy;
  std::uint64_t record = 0;
};

struct InstallAck {
  static constexpr std::string_view kType = "install-ack";
  AppId app;
  NodeId node;
  Domain domain = Domain::Deploy;
  std::uint64_t record = 0;
};

struct Uninstall {
  static constexpr std::string_view kType = "uninstall";
  AppId app;
  Domain domain = Domain::Deploy;
};

struct Tune {
  static constexpr std::string_view kType = "tune";
  std::string name;
  double value = 0.0;
};

struct TuneAck {
  static constexpr std::string_view kType = "tune-ack";
  NodeId node;
  std::string name;
  double value = 0.0;
};

struct Stop {
  static constexpr std::string_view kType = "stop";
};

struct Reattach {
  static constexpr std::string_view kType = "reattach";
  NodeId parent;
};

enum class TickKind { Heartbeat, Sweep, Sensor, Window, Discovery, Refresh };

struct Tick {
  static constexpr std::string_view kType = "tick";
  TickKind kind = TickKind::Heartbeat;
};

struct InstallTimeout {
  static constexpr std::string_view kType = "install-timeout";
  AppId app;
  std::uint64_t record = 0;
};

void describe(Json& j, const Heartbeat& m);
void describe(Json& j, const Register& m);
void describe(Json& j, const Lookup& m);
void describe(Json& j, const LookupReply& m);
void describe(Json& j, const Subscribe& m);
void describe(Json& j, const Metric& m);
void describe(Json& j, const QueryLatest& m);
void describe(Json& j, const QueryReply& m);
void describe(Json& j, const DeployCommand& m);
void describe(Json& j, const ReleaseCommand& m);
void describe(Json& j, const AllocateRequest& m);
void describe(Json& j, const AllocateRefused& m);
void describe(Json& j, const DeployResult& m);
void describe(Json& j, const Install& m);
void describe(Json& j, const InstallAck& m);
void describe(Json& j, const Uninstall& m);
void describe(Json& j, const Tune& m);
void describe(Json& j, const TuneAck& m);
void describe(Json& j, const Stop& m);
void describe(Json& j, const Reattach& m);
void describe(Json& j, const Tick& m);
void describe(Json& j, const InstallTimeout& m);

template <class T>
class Wire final : public Message {
 public:
  explicit Wire(T body) : body_(std::move(body)) {}

  std::string_view type() const override { return T::kType; }
  Json summary() const override {
    Json j;
    j["type"] = T::kType;
    describe(j, body_);
    return j;
  }
  const T& body() const { return body_; }

 private:
  T body_;
};

template <class T>
Payload wrap(T body) {
  return std::make_shared<const Wire<T>>(std::move(body));
}

template <class T>
const T* unwrap(const Payload& p) {
  const auto* w = payload_as<Wire<T>>(p);
  return w == nullptr ? nullptr : &w->body();
}

}  // namespace hiermon::msg
