#include "hiermon/fabric.hpp"

#include <algorithm>
#include <ostream>

namespace hiermon {

namespace {

constexpr std::string_view kWildcard = "*";

Json payload_summary(const Payload& p) {
  if (!p) return Json{{"type", "null"}};
  return p->summary();
}

}  // namespace

std::string Endpoint::str() const {
  if (port.empty()) return actor;
  return actor + "/" + port;
}

std::string_view to_string(TraceKind kind) {
  switch (kind) {
    case TraceKind::Deliver: return "deliver";
    case TraceKind::Drop: return "drop";
    case TraceKind::Timer: return "timer";
    case TraceKind::Crash: return "crash";
    case TraceKind::Restart: return "restart";
    case TraceKind::Note: return "note";
  }
  return "unknown";
}

std::string to_line(const TraceRecord& record) {
  Json line;
  line["t"] = record.time.count();
  line["kind"] = to_string(record.kind);
  line["from"] = record.from;
  line["to"] = record.to;
  line["payload"] = record.payload;
  line["reason"] = record.reason;
  return line.dump();
}

void write_trace(std::ostream& out, const EventTrace& trace) {
  for (const auto& record : trace) out << to_line(record) << '\n';
}

Fabric::Fabric(std::uint64_t seed) : rng_(seed) {}

Actor& Fabric::add_actor(const ActorId& id, std::unique_ptr<Actor> actor) {
  if (id.empty() || id == kWildcard) throw FabricError("invalid actor id '" + id + "'");
  if (actors_.contains(id)) throw FabricError("duplicate actor id '" + id + "'");
  Actor& ref = *actor;
  actors_.emplace(id, Slot{std::move(actor), false, 0});
  Event start;
  start.time = now_;
  start.kind = EventKind::Start;
  start.envelope.to = Endpoint{id, {}};
  push(std::move(start));
  return ref;
}

bool Fabric::has_actor(const ActorId& id) const { return actors_.contains(id); }

bool Fabric::is_crashed(const ActorId& id) const {
  auto it = actors_.find(id);
  return it != actors_.end() && it->second.crashed;
}

Actor* Fabric::find_actor(const ActorId& id) {
  auto it = actors_.find(id);
  return it == actors_.end() ? nullptr : it->second.actor.get();
}

const Actor* Fabric::find_actor(const ActorId& id) const {
  auto it = actors_.find(id);
  return it == actors_.end() ? nullptr : it->second.actor.get();
}

std::vector<ActorId> Fabric::actor_ids() const {
  std::vector<ActorId> ids;
  ids.reserve(actors_.size());
  for (const auto& [id, slot] : actors_) ids.push_back(id);
  return ids;
}

TimerId Fabric::schedule(const Endpoint& target, Duration delay, Payload payload) {
  auto it = actors_.find(target.actor);
  if (it == actors_.end()) throw FabricError("schedule: unknown actor '" + target.actor + "'");
  if (delay < Duration::zero()) throw FabricError("schedule: negative delay");
  Event ev;
  ev.time = now_ + delay;
  ev.kind = EventKind::Timer;
  ev.envelope = Envelope{target, target, std::move(payload), now_, now_ + delay};
  ev.timer = next_timer_++;
  ev.incarnation = it->second.incarnation;
  TimerId id = ev.timer;
  push(std::move(ev));
  return id;
}

bool Fabric::cancel(TimerId id) { return cancelled_.insert(id).second; }

void Fabric::send(const Endpoint& from, const Endpoint& to, Payload payload) {
  if (!actors_.contains(to.actor)) {
    record(now_, TraceKind::Drop, from.str(), to.str(), payload_summary(payload),
           "unknown-destination");
    return;
  }
  if (partitioned(from.actor, to.actor)) {
    record(now_, TraceKind::Drop, from.str(), to.str(), payload_summary(payload), "partition");
    return;
  }
  if (double p = drop_probability(from.actor, to.actor); p > 0.0) {
    if (uniform01() < p) {
      record(now_, TraceKind::Drop, from.str(), to.str(), payload_summary(payload), "loss");
      return;
    }
  }
  SimTime deliver = now_ + latency(from.actor, to.actor);
  // Per-link FIFO even if a link's latency is lowered mid-run.
  auto& tail = link_tail_[{from.actor, to.actor}];
  deliver = std::max(deliver, tail);
  tail = deliver;

  Event ev;
  ev.time = deliver;
  ev.kind = EventKind::Deliver;
  ev.envelope = Envelope{from, to, std::move(payload), now_, deliver};
  push(std::move(ev));
}

void Fabric::inject(const FaultSpec& fault) {
  std::visit(
      [this](const auto& f) {
        using T = std::decay_t<decltype(f)>;
        if constexpr (std::is_same_v<T, CrashFault> || std::is_same_v<T, RestartFault>) {
          if (!actors_.contains(f.actor))
            throw FabricError("fault targets unknown actor '" + f.actor + "'");
        }
        if constexpr (std::is_same_v<T, DropRateFault>) {
          if (!(f.probability >= 0.0 && f.probability <= 1.0))
            throw FabricError("drop probability must be in [0,1]");
        }
        if constexpr (std::is_same_v<T, PartitionFault>) {
          if (f.until < f.from) throw FabricError("partition ends before it starts");
          partitions_.push_back(f);
          return;
        } else {
          if (f.at < now_) throw FabricError("fault scheduled in the past");
          Event ev;
          ev.time = f.at;
          ev.phase = 1;
          ev.kind = EventKind::Fault;
          ev.fault = f;
          push(std::move(ev));
        }
      },
      fault);
}

void Fabric::set_default_latency(Duration latency) {
  if (latency < Duration::zero()) throw FabricError("negative latency");
  default_latency_ = latency;
}

void Fabric::set_latency(const ActorId& from, const ActorId& to, Duration latency) {
  if (latency < Duration::zero()) throw FabricError("negative latency");
  latency_[{from, to}] = latency;
}

template <class T>
const T* Fabric::lookup_link(const std::map<std::pair<ActorId, ActorId>, T>& table,
                             const ActorId& from, const ActorId& to) {
  const std::pair<ActorId, ActorId> keys[] = {
      {from, to}, {from, ActorId(kWildcard)}, {ActorId(kWildcard), to},
      {ActorId(kWildcard), ActorId(kWildcard)}};
  for (const auto& key : keys) {
    if (auto it = table.find(key); it != table.end()) return &it->second;
  }
  return nullptr;
}

Duration Fabric::latency(const ActorId& from, const ActorId& to) const {
  // Services inside one actor talk over loopback.
  if (from == to) return Duration::zero();
  if (const auto* d = lookup_link(latency_, from, to)) return *d;
  return default_latency_;
}

Duration Fabric::max_latency() const {
  Duration m = default_latency_;
  for (const auto& [link, d] : latency_) m = std::max(m, d);
  return m;
}

double Fabric::drop_probability(const ActorId& from, const ActorId& to) const {
  if (from == to) return 0.0;
  if (const auto* p = lookup_link(drop_rate_, from, to)) return *p;
  return 0.0;
}

bool Fabric::partitioned(const ActorId& a, const ActorId& b) const {
  for (const auto& p : partitions_) {
    if (now_ < p.from || now_ >= p.until) continue;
    if ((p.group_a.contains(a) && p.group_b.contains(b)) ||
        (p.group_b.contains(a) && p.group_a.contains(b)))
      return true;
  }
  return false;
}

double Fabric::uniform01() {
  return static_cast<double>(rng_() >> 11) * 0x1.0p-53;
}

void Fabric::note(const Endpoint& from, Json payload, std::string reason) {
  record(now_, TraceKind::Note, from.str(), {}, std::move(payload), std::move(reason));
}

EventTrace Fabric::run_until(SimTime t) {
  if (t < now_) throw FabricError("run_until: time is in the past");
  const std::size_t mark = trace_.size();
  while (!queue_.empty() && queue_.top().time <= t) {
    Event ev = queue_.top();
    queue_.pop();
    now_ = ev.time;
    dispatch(ev);
  }
  now_ = t;
  return EventTrace(trace_.begin() + static_cast<std::ptrdiff_t>(mark), trace_.end());
}

void Fabric::push(Event event) {
  event.seq = next_seq_++;
  queue_.push(std::move(event));
}

void Fabric::dispatch(Event& ev) {
  switch (ev.kind) {
    case EventKind::Fault:
      apply_fault(ev.fault);
      return;
    case EventKind::Start: {
      auto& slot = actors_.at(ev.envelope.to.actor);
      if (!slot.crashed) slot.actor->on_start(*this);
      return;
    }
    case EventKind::Timer: {
      if (cancelled_.erase(ev.timer) > 0) return;
      auto& slot = actors_.at(ev.envelope.to.actor);
      if (slot.crashed || slot.incarnation != ev.incarnation) return;
      record(now_, TraceKind::Timer, ev.envelope.to.str(), ev.envelope.to.str(),
             payload_summary(ev.envelope.payload), {});
      slot.actor->on_timer(*this, ev.timer, ev.envelope);
      return;
    }
    case EventKind::Deliver: {
      auto& slot = actors_.at(ev.envelope.to.actor);
      if (slot.crashed) {
        record(now_, TraceKind::Drop, ev.envelope.from.str(), ev.envelope.to.str(),
               payload_summary(ev.envelope.payload), "crashed");
        return;
      }
      record(now_, TraceKind::Deliver, ev.envelope.from.str(), ev.envelope.to.str(),
             payload_summary(ev.envelope.payload), {});
      slot.actor->on_message(*this, ev.envelope);
      return;
    }
  }
}

void Fabric::apply_fault(const FaultSpec& fault) {
  std::visit(
      [this](const auto& f) {
        using T = std::decay_t<decltype(f)>;
        if constexpr (std::is_same_v<T, CrashFault>) {
          auto& slot = actors_.at(f.actor);
          if (slot.crashed) return;
          slot.crashed = true;
          ++slot.incarnation;
          record(now_, TraceKind::Crash, f.actor, {}, Json{{"type", "crash"}}, {});
        } else if constexpr (std::is_same_v<T, RestartFault>) {
          auto& slot = actors_.at(f.actor);
          if (!slot.crashed) return;
          slot.crashed = false;
          record(now_, TraceKind::Restart, f.actor, {}, Json{{"type", "restart"}}, {});
          slot.actor->on_restart(*this);
        } else if constexpr (std::is_same_v<T, DropRateFault>) {
          drop_rate_[{f.from, f.to}] = f.probability;
        }
      },
      fault);
}

void Fabric::record(SimTime t, TraceKind kind, std::string from, std::string to, Json payload,
                    std::string reason) {
  trace_.push_back(TraceRecord{t, kind, std::move(from), std::move(to), std::move(payload),
                               std::move(reason)});
}

}  // namespace hiermon
