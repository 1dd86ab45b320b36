#pragma once

// Deterministic discrete-event substrate. Actors exchange messages over
// simulated links with configurable latency and loss; time is virtual and
// advances only when the event loop pops the next event.

#include <chrono>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <memory>
#include <queue>
#include <random>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <json.hpp>

namespace hiermon {

using SimTime = std::chrono::milliseconds;
using Duration = std::chrono::milliseconds;
using ActorId = std::string;
using TimerId = std::uint64_t;
using Json = nlohmann::ordered_json;

inline constexpr Duration kDefaultLatency{10};

class FabricError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// A service address inside an actor. The port selects the service that
/// handles the message; the actor is the unit of crash and restart.
struct Endpoint {
  ActorId actor;
  std::string port;

  std::string str() const;
  auto operator<=>(const Endpoint&) const = default;
};

class Message {
 public:
  virtual ~Message() = default;
  virtual std::string_view type() const = 0;
  /// Trace summary. The first key is always "type".
  virtual Json summary() const = 0;
};

using Payload = std::shared_ptr<const Message>;

template <class T>
const T* payload_as(const Payload& p) {
  return dynamic_cast<const T*>(p.get());
}

struct Envelope {
  Endpoint from;
  Endpoint to;
  Payload payload;
  SimTime send_time{0};
  SimTime deliver_time{0};
};

enum class TraceKind { Deliver, Drop, Timer, Crash, Restart, Note };

std::string_view to_string(TraceKind kind);

/// One line of the exported trace. Field order on export is fixed:
/// t, kind, from, to, payload, reason.
struct TraceRecord {
  SimTime time{0};
  TraceKind kind = TraceKind::Note;
  std::string from;
  std::string to;
  Json payload;
  std::string reason;
};

using EventTrace = std::vector<TraceRecord>;

std::string to_line(const TraceRecord& record);
void write_trace(std::ostream& out, const EventTrace& trace);

struct CrashFault {
  ActorId actor;
  SimTime at{0};
};

struct RestartFault {
  ActorId actor;
  SimTime at{0};
};

/// Directed link loss. "*" matches any actor on either side.
struct DropRateFault {
  ActorId from;
  ActorId to;
  double probability = 0.0;
  SimTime at{0};
};

/// Messages between the two groups are dropped while from <= now < until.
struct PartitionFault {
  std::set<ActorId> group_a;
  std::set<ActorId> group_b;
  SimTime from{0};
  SimTime until{0};
};

using FaultSpec = std::variant<CrashFault, RestartFault, DropRateFault, PartitionFault>;

class Fabric;

class Actor {
 public:
  virtual ~Actor() = default;

  virtual void on_start(Fabric& fabric) = 0;
  virtual void on_message(Fabric& fabric, const Envelope& envelope) = 0;
  /// Timer envelopes have from == to == the scheduled endpoint.
  virtual void on_timer(Fabric& fabric, TimerId id, const Envelope& envelope) = 0;
  /// Called when a crashed actor comes back. Volatile state is expected to
  /// be reset; the default starts the actor over.
  virtual void on_restart(Fabric& fabric) { on_start(fabric); }
};

class Fabric {
 public:
  explicit Fabric(std::uint64_t seed);

  Fabric(const Fabric&) = delete;
  Fabric& operator=(const Fabric&) = delete;

  /// Registers an actor; on_start runs at the current time after events
  /// already queued for it.
  Actor& add_actor(const ActorId& id, std::unique_ptr<Actor> actor);
  bool has_actor(const ActorId& id) const;
  bool is_crashed(const ActorId& id) const;
  Actor* find_actor(const ActorId& id);
  const Actor* find_actor(const ActorId& id) const;
  std::vector<ActorId> actor_ids() const;

  TimerId schedule(const Endpoint& target, Duration delay, Payload payload);
  bool cancel(TimerId id);

  void send(const Endpoint& from, const Endpoint& to, Payload payload);

  void inject(const FaultSpec& fault);

  void set_default_latency(Duration latency);
  void set_latency(const ActorId& from, const ActorId& to, Duration latency);
  Duration latency(const ActorId& from, const ActorId& to) const;
  Duration max_latency() const;
  double drop_probability(const ActorId& from, const ActorId& to) const;

  /// Processes every event with time <= t, then sets the clock to t.
  /// Returns the records appended by this call.
  EventTrace run_until(SimTime t);

  /// Component-level structured log record, appended to the trace.
  void note(const Endpoint& from, Json payload, std::string reason = {});

  SimTime now() const { return now_; }
  const EventTrace& trace() const { return trace_; }

  /// The single random source for everything running on this fabric.
  std::uint64_t next_random() { return rng_(); }
  /// Uniform in [0, 1): top 53 bits of the next 64-bit draw.
  double uniform01();

 private:
  enum class EventKind { Start, Deliver, Timer, Fault };

  // Faults carry phase 1 so they take effect after every ordinary event at
  // the same instant.
  struct Event {
    SimTime time{0};
    int phase = 0;
    std::uint64_t seq = 0;
    EventKind kind = EventKind::Deliver;
    Envelope envelope;
    TimerId timer = 0;
    std::uint64_t incarnation = 0;
    FaultSpec fault;
  };

  struct Later {
    bool operator()(const Event& a, const Event& b) const {
      if (a.time != b.time) return a.time > b.time;
      if (a.phase != b.phase) return a.phase > b.phase;
      return a.seq > b.seq;
    }
  };

  struct Slot {
    std::unique_ptr<Actor> actor;
    bool crashed = false;
    std::uint64_t incarnation = 0;
  };

  void push(Event event);
  void dispatch(Event& event);
  void apply_fault(const FaultSpec& fault);
  bool partitioned(const ActorId& a, const ActorId& b) const;
  void record(SimTime t, TraceKind kind, std::string from, std::string to, Json payload,
              std::string reason);

  template <class T>
  static const T* lookup_link(const std::map<std::pair<ActorId, ActorId>, T>& table,
                              const ActorId& from, const ActorId& to);

  SimTime now_{0};
  std::uint64_t next_seq_ = 0;
  TimerId next_timer_ = 1;
  std::priority_queue<Event, std::vector<Event>, Later> queue_;
  std::set<TimerId> cancelled_;
  std::map<ActorId, Slot> actors_;
  std::mt19937_64 rng_;

  Duration default_latency_ = kDefaultLatency;
  std::map<std::pair<ActorId, ActorId>, Duration> latency_;
  std::map<std::pair<ActorId, ActorId>, double> drop_rate_;
  std::map<std::pair<ActorId, ActorId>, SimTime> link_tail_;
  std::vector<PartitionFault> partitions_;

  EventTrace trace_;
};

}  // namespace hiermon
