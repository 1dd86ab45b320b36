#include <algorithm>

#include "hiermon/hierarchy.hpp"

namespace hiermon {

using msg::TickKind;

namespace {

const char* tick_port(TickKind kind) {
  switch (kind) {
    case TickKind::Heartbeat: return port::kHeartbeat;
    case TickKind::Sweep: return port::kDiscovery;
    case TickKind::Sensor: return port::kSensor;
    case TickKind::Window:
    case TickKind::Discovery: return port::kMonitor;
    case TickKind::Refresh: return port::kProducer;
  }
  return port::kControl;
}

std::string_view action_for(Domain d) {
  switch (d) {
    case Domain::Deploy: return "deploy";
    case Domain::Repair: return "replace-node";
    case Domain::Optimization: return "rebind";
  }
  return "deploy";
}

ResourceMap component_max(ResourceMap a, const ResourceMap& b) {
  for (const auto& [name, units] : b) {
    auto [it, inserted] = a.try_emplace(name, units);
    if (!inserted) it->second = std::max(it->second, units);
  }
  return a;
}

}  // namespace

Host::State::State(const HostConfig& cfg, const std::optional<NodeId>& parent)
    : table(cfg.node.id, cfg.node.heartbeat),
      allocator(cfg.node.id, parent),
      aggregator(cfg.node.id, cfg.node.aggregation, cfg.settings.metrics, cfg.tier_level),
      reactor(cfg.settings.rules, cfg.settings.domains) {}

Host::Host(HostConfig config)
    : config_(std::move(config)),
      parent_(config_.node.parent),
      state_(std::make_unique<State>(config_, parent_)) {}

std::optional<double> Host::tuned(const std::string& name) const {
  auto it = state_->tuned.find(name);
  if (it == state_->tuned.end()) return std::nullopt;
  return it->second;
}

void Host::note(Fabric& fabric, const char* port, Json payload) const {
  fabric.note(at(port), std::move(payload));
}

void Host::tick(Fabric& fabric, TickKind kind, Duration delay) {
  TimerId t = fabric.schedule(at(tick_port(kind)), delay, msg::wrap(msg::Tick{kind}));
  if (kind == TickKind::Heartbeat) state_->heartbeat_timer = t;
}

void Host::on_start(Fabric& fabric) {
  state_ = std::make_unique<State>(config_, parent_);
  const auto refresh = config_.settings.refresh_period;

  if (parent_) {
    emit_heartbeat(fabric);
    refresh_registration(fabric);
    tick(fabric, TickKind::Refresh, refresh);
  }
  if (role() == NodeRole::Node) tick(fabric, TickKind::Sensor, config_.node.sensor.period);
  if (is_manager()) {
    tick(fabric, TickKind::Sweep, config_.node.heartbeat.sweep_interval);
    discover(fabric);
    tick(fabric, TickKind::Discovery, refresh);
    const auto w = config_.node.aggregation.window;
    tick(fabric, TickKind::Window, w - (fabric.now() % w));
  }
}

void Host::on_timer(Fabric& fabric, TimerId id, const Envelope& env) {
  if (const auto* t = msg::unwrap<msg::Tick>(env.payload)) {
    if (state_->stopped) return;
    switch (t->kind) {
      case TickKind::Heartbeat:
        if (id == state_->heartbeat_timer) emit_heartbeat(fabric);
        return;
      case TickKind::Sweep:
        sweep(fabric);
        tick(fabric, TickKind::Sweep, config_.node.heartbeat.sweep_interval);
        return;
      case TickKind::Sensor:
        sample(fabric);
        tick(fabric, TickKind::Sensor, config_.node.sensor.period);
        return;
      case TickKind::Window:
        close_window(fabric);
        tick(fabric, TickKind::Window, config_.node.aggregation.window);
        return;
      case TickKind::Discovery:
        discover(fabric);
        tick(fabric, TickKind::Discovery, config_.settings.refresh_period);
        return;
      case TickKind::Refresh:
        refresh_registration(fabric);
        tick(fabric, TickKind::Refresh, config_.settings.refresh_period);
        return;
    }
    return;
  }
  if (const auto* m = msg::unwrap<msg::InstallTimeout>(env.payload)) {
    on_install_timeout(fabric, *m);
    return;
  }
  // Scheduled operator commands arrive as timers on the control port.
  on_message(fabric, env);
}

void Host::on_message(Fabric& fabric, const Envelope& env) {
  const Payload& p = env.payload;
  const SimTime now = fabric.now();

  auto manager_only = [&](std::string_view what) {
    if (is_manager()) return true;
    Json w;
    w["type"] = "warning";
    w["host"] = id();
    w["message"] = std::string(what) + " sent to a leaf node";
    note(fabric, port::kControl, std::move(w));
    return false;
  };

  // Node-side services.
  if (const auto* m = msg::unwrap<msg::Subscribe>(p)) {
    state_->subscribers.subscribe(m->consumer, now, m->ttl);
  } else if (const auto* m = msg::unwrap<msg::QueryLatest>(p)) {
    fabric.send(at(port::kProducer), m->reply_to, msg::wrap(msg::QueryReply{state_->latest}));
  } else if (const auto* m = msg::unwrap<msg::Install>(p)) {
    on_install(fabric, env, *m);
  } else if (const auto* m = msg::unwrap<msg::Uninstall>(p)) {
    on_uninstall(fabric, *m);
  } else if (const auto* m = msg::unwrap<msg::Tune>(p)) {
    on_tune(fabric, env, *m);
  } else if (msg::unwrap<msg::Stop>(p) != nullptr) {
    on_stop(fabric);
  } else if (const auto* m = msg::unwrap<msg::Reattach>(p)) {
    on_reattach(fabric, *m);
  }
  // Manager-side services.
  else if (const auto* m = msg::unwrap<msg::Heartbeat>(p)) {
    if (manager_only("heartbeat")) on_heartbeat(fabric, *m);
  } else if (const auto* m = msg::unwrap<msg::Register>(p)) {
    if (manager_only("register")) {
      Registration reg = m->registration;
      reg.registered_at = now;
      state_->directory.purge(now);
      state_->directory.register_subject(std::move(reg));
    }
  } else if (const auto* m = msg::unwrap<msg::Lookup>(p)) {
    if (manager_only("lookup")) on_lookup(fabric, *m);
  } else if (const auto* m = msg::unwrap<msg::LookupReply>(p)) {
    for (const auto& producer : m->producers)
      if (producer.actor != id())
        fabric.send(at(port::kMonitor), producer,
                    msg::wrap(msg::Subscribe{at(port::kMonitor), 3 * config_.settings.refresh_period}));
  } else if (const auto* m = msg::unwrap<msg::Metric>(p)) {
    if (is_manager()) state_->aggregator.add(m->event, now);
  } else if (const auto* m = msg::unwrap<msg::DeployCommand>(p)) {
    if (manager_only("deploy")) on_deploy(fabric, *m);
  } else if (const auto* m = msg::unwrap<msg::ReleaseCommand>(p)) {
    if (manager_only("release")) on_release(fabric, *m);
  } else if (const auto* m = msg::unwrap<msg::AllocateRequest>(p)) {
    if (manager_only("allocate")) allocate(fabric, m->request);
  } else if (const auto* m = msg::unwrap<msg::AllocateRefused>(p)) {
    if (manager_only("allocate-refused")) {
      AllocationRequest req = m->request;
      if (!req.delegation_path.empty() && req.delegation_path.back() == id())
        req.delegation_path.pop_back();
      req.excluded.insert(m->refused_by);
      allocate(fabric, std::move(req));
    }
  } else if (const auto* m = msg::unwrap<msg::DeployResult>(p)) {
    if (manager_only("deploy-result")) on_result(fabric, *m);
  } else if (const auto* m = msg::unwrap<msg::InstallAck>(p)) {
    if (manager_only("install-ack")) on_ack(fabric, *m);
  } else if (const auto* m = msg::unwrap<msg::TuneAck>(p)) {
    Json r;
    r["type"] = "action-result";
    r["manager"] = id();
    r["domain"] = "optimization";
    r["action"] = "tune";
    r["node"] = m->node;
    r["name"] = m->name;
    r["value"] = m->value;
    r["result"] = "applied";
    note(fabric, port::kActuator, std::move(r));
  }
}

// ---- node side ------------------------------------------------------------

CapacitySnapshot Host::capacity_snapshot() const {
  CapacitySnapshot snap;
  if (!is_manager()) {
    ResourceMap used;
    for (const auto& [app, demand] : state_->installed) {
      used = add(std::move(used), demand);
      snap.installed.push_back(app);
    }
    snap.capacity = config_.node.capacity;
    snap.max_free = subtract(config_.node.capacity, used);
    return snap;
  }
  snap.manager = true;
  for (const auto& [child, rec] : state_->table.records()) {
    if (rec.status != NodeStatus::Available) continue;
    snap.capacity = add(std::move(snap.capacity), rec.capacity.capacity);
    ResourceMap free = rec.capacity.manager
                           ? rec.capacity.max_free
                           : subtract(rec.capacity.capacity, state_->allocator.reserved(child));
    snap.max_free = component_max(std::move(snap.max_free), free);
  }
  return snap;
}

void Host::emit_heartbeat(Fabric& fabric) {
  if (!parent_ || state_->stopped) return;
  fabric.send(at(port::kHeartbeat), {*parent_, port::kHeartbeat},
              msg::wrap(msg::Heartbeat{id(), capacity_snapshot()}));
  tick(fabric, TickKind::Heartbeat, config_.node.heartbeat.period);
}

std::set<std::string> Host::offered_properties() const {
  if (!is_manager()) return config_.settings.metrics;
  std::set<std::string> out;
  for (const auto& m : config_.settings.metrics)
    for (auto fn : config_.node.aggregation.functions) out.insert(aggregate_name(m, fn));
  return out;
}

std::set<std::string> Host::wanted_properties() const {
  std::set<std::string> out;
  for (const auto& m : config_.settings.metrics) {
    out.insert(m);
    for (auto fn : {AggFunction::Mean, AggFunction::Max, AggFunction::Min, AggFunction::Count,
                    AggFunction::Last})
      out.insert(aggregate_name(m, fn));
  }
  return out;
}

void Host::refresh_registration(Fabric& fabric) {
  if (!parent_) return;
  Registration reg;
  reg.subject = at(port::kProducer);
  reg.kind = RegistrationKind::Producer;
  reg.properties = offered_properties();
  reg.registered_at = fabric.now();
  reg.ttl = 3 * config_.settings.refresh_period;
  fabric.send(at(port::kProducer), {*parent_, port::kDirectory},
              msg::wrap(msg::Register{std::move(reg)}));
}

void Host::sample(Fabric& fabric) {
  const auto& spec = config_.node.sensor;
  double noise = 0.0;
  if (spec.noise > 0.0) noise = (2.0 * fabric.uniform01() - 1.0) * spec.noise;
  ResourceMap used;
  for (const auto& [app, demand] : state_->installed) used = add(std::move(used), demand);
  MetricEvent ev = sense(id(), fabric.now(), spec, used, config_.node.capacity, noise);

  Json n;
  n["type"] = "emit";
  n["source"] = id();
  n["level"] = 0;
  n["event"] = to_json(ev);
  note(fabric, port::kSensor, std::move(n));
  publish(fabric, ev);
}

void Host::publish(Fabric& fabric, const MetricEvent& event) {
  state_->latest = event;
  for (const auto& consumer : state_->subscribers.live(fabric.now()))
    fabric.send(at(port::kProducer), consumer, msg::wrap(msg::Metric{event}));
}

void Host::on_install(Fabric& fabric, const Envelope& env, const msg::Install& m) {
  state_->installed[m.app] = m.demand;
  fabric.send(at(port::kFactory), env.from,
              msg::wrap(msg::InstallAck{m.app, id(), m.domain, m.record}));
}

void Host::on_uninstall(Fabric&, const msg::Uninstall& m) { state_->installed.erase(m.app); }

void Host::on_tune(Fabric& fabric, const Envelope& env, const msg::Tune& m) {
  state_->tuned[m.name] = m.value;
  fabric.send(at(port::kActuator), env.from, msg::wrap(msg::TuneAck{id(), m.name, m.value}));
}

void Host::on_stop(Fabric& fabric) {
  state_->stopped = true;
  state_->installed.clear();
  if (state_->heartbeat_timer != 0) fabric.cancel(state_->heartbeat_timer);
}

void Host::on_reattach(Fabric& fabric, const msg::Reattach& m) {
  if (state_->stopped || role() == NodeRole::Boot) return;
  parent_ = m.parent;
  state_->allocator.set_parent(parent_);
  if (state_->heartbeat_timer != 0) fabric.cancel(state_->heartbeat_timer);
  emit_heartbeat(fabric);
  refresh_registration(fabric);
}

// ---- manager side: membership and monitoring ------------------------------

void Host::on_heartbeat(Fabric& fabric, const msg::Heartbeat& m) {
  if (auto ev = state_->table.record_heartbeat(m.node, fabric.now(), m.capacity))
    on_lifecycle(fabric, *ev);

  if (m.capacity.manager) return;
  std::set<AppId> live;
  for (const auto* rec : state_->ledger.live_on(m.node)) live.insert(rec->app);
  for (const auto& app : m.capacity.installed)
    if (!live.contains(app))
      fabric.send(at(port::kDeployer), {m.node, port::kFactory},
                  msg::wrap(msg::Uninstall{app, Domain::Deploy}));
}

void Host::sweep(Fabric& fabric) {
  for (const auto& node : state_->table.sweep(fabric.now()))
    on_lifecycle(fabric, LifecycleEvent{LifecycleKind::NodeFailed, node, id(), fabric.now()});
}

void Host::on_lifecycle(Fabric& fabric, const LifecycleEvent& event) {
  note(fabric, port::kDiscovery, to_json(event));
  for (const auto& d : state_->reactor.react(event, *this)) apply(fabric, d);
}

void Host::on_lookup(Fabric& fabric, const msg::Lookup& m) {
  auto found = state_->directory.lookup(m.wanted, fabric.now());
  if (found.empty() && m.hierarchical && parent_) {
    fabric.send(at(port::kDirectory), {*parent_, port::kDirectory}, msg::wrap(m));
    return;
  }
  fabric.send(at(port::kDirectory), m.reply_to,
              msg::wrap(msg::LookupReply{m.request, std::move(found)}));
}

void Host::discover(Fabric& fabric) {
  msg::Lookup lookup;
  lookup.request = state_->next_lookup++;
  lookup.wanted = wanted_properties();
  lookup.reply_to = at(port::kMonitor);
  fabric.send(at(port::kMonitor), at(port::kDirectory), msg::wrap(std::move(lookup)));
}

void Host::close_window(Fabric& fabric) {
  const SimTime close = fabric.now();
  const auto& spec = config_.node.aggregation;
  auto events = state_->aggregator.close_window(close);
  for (const auto& ev : events) {
    Json n;
    n["type"] = "emit";
    n["source"] = id();
    n["level"] = ev.level;
    n["window_start"] = (close - spec.window).count();
    n["window_end"] = close.count();
    n["group_by"] = to_string(spec.group_by);
    Json fns = Json::array();
    for (auto fn : spec.functions) fns.push_back(to_string(fn));
    n["functions"] = std::move(fns);
    n["event"] = to_json(ev);
    note(fabric, port::kMonitor, std::move(n));
    publish(fabric, ev);
  }
  for (const auto& ev : events)
    if (ev.source == id())
      for (const auto& d : state_->reactor.react(ev, *this)) apply(fabric, d);
}

// ---- manager side: allocation and deployment ------------------------------

std::string Host::new_request_id() {
  return id() + "#" + std::to_string(state_->next_request++);
}

std::vector<Candidate> Host::candidates() const {
  std::vector<Candidate> out;
  for (const auto& [child, rec] : state_->table.records()) {
    if (rec.status != NodeStatus::Available) continue;
    if (rec.capacity.manager) {
      out.push_back({child, true, rec.capacity.max_free});
    } else {
      out.push_back(
          {child, false, subtract(rec.capacity.capacity, state_->allocator.reserved(child))});
    }
  }
  return out;
}

void Host::allocate(Fabric& fabric, AllocationRequest req) {
  auto cands = candidates();
  auto outcome = state_->allocator.allocate(req, cands);

  Json n;
  n["type"] = "allocation";
  n["manager"] = id();
  n["domain"] = to_string(req.domain);
  n["request"] = req.id;
  n["app"] = req.app;
  n["origin"] = req.origin;
  n["hop_count"] = req.hop_count;
  n["outcome"] = to_json(outcome);
  note(fabric, port::kDeployer, std::move(n));

  std::visit(
      [&](const auto& o) {
        using T = std::decay_t<decltype(o)>;
        if constexpr (std::is_same_v<T, Granted>) {
          grant(fabric, req, o.node);
        } else if constexpr (std::is_same_v<T, Escalated>) {
          req.excluded.insert(id());
          ++req.hop_count;
          fabric.send(at(port::kDeployer), {o.to, port::kDeployer},
                      msg::wrap(msg::AllocateRequest{req}));
        } else if constexpr (std::is_same_v<T, Delegated>) {
          req.delegation_path.push_back(id());
          fabric.send(at(port::kDeployer), {o.to, port::kDeployer},
                      msg::wrap(msg::AllocateRequest{req}));
        } else if constexpr (std::is_same_v<T, Denied>) {
          if (o.reason == "refused") {
            fabric.send(at(port::kDeployer), {req.delegation_path.back(), port::kDeployer},
                        msg::wrap(msg::AllocateRefused{req, id()}));
          } else {
            report(fabric, req.origin,
                   {req.id, req.app, req.domain, "denied", "", "", o.reason});
          }
        }
      },
      outcome);
}

void Host::grant(Fabric& fabric, const AllocationRequest& req, const NodeId& node) {
  note_reservation(fabric, node);
  DeploymentRecord rec;
  rec.app = req.app;
  rec.node = node;
  rec.deployed_at = fabric.now();
  rec.demand = req.demand;
  rec.params = req.params;
  rec.domain = req.domain;
  rec.request_id = req.id;
  rec.origin = req.origin;
  install(fabric, std::move(rec));
}

void Host::install(Fabric& fabric, DeploymentRecord rec) {
  const auto& opened = state_->ledger.open(std::move(rec));
  note_record(fabric, opened);
  fabric.send(at(port::kDeployer), {opened.node, port::kFactory},
              msg::wrap(msg::Install{opened.app, opened.demand, opened.params, opened.domain,
                                     opened.seq}));
  state_->install_timers[opened.seq] =
      fabric.schedule(at(port::kDeployer), config_.settings.install_timeout,
                      msg::wrap(msg::InstallTimeout{opened.app, opened.seq}));
}

void Host::report(Fabric& fabric, const NodeId& origin, msg::DeployResult result) {
  if (origin == id()) {
    on_result(fabric, result);
  } else {
    fabric.send(at(port::kDeployer), {origin, port::kDeployer}, msg::wrap(std::move(result)));
  }
}

void Host::on_result(Fabric& fabric, const msg::DeployResult& m) {
  state_->pending.erase(m.app);
  if (m.state == "running" && m.owner != id()) {
    state_->forwarded[m.app] = m.owner;
  } else {
    state_->forwarded.erase(m.app);
  }
  Json r;
  r["type"] = "action-result";
  r["manager"] = id();
  r["domain"] = to_string(m.domain);
  r["action"] = action_for(m.domain);
  r["request"] = m.request;
  r["app"] = m.app;
  r["result"] = m.state;
  r["node"] = m.node;
  r["owner"] = m.owner;
  r["reason"] = m.reason;
  note(fabric, port::kDeployer, std::move(r));
}

void Host::on_deploy(Fabric& fabric, const msg::DeployCommand& m) {
  if (state_->ledger.running(m.app) || state_->ledger.deploying(m.app) ||
      state_->forwarded.contains(m.app) || state_->pending.contains(m.app)) {
    Json w;
    w["type"] = "warning";
    w["manager"] = id();
    w["message"] = "app already deployed";
    w["app"] = m.app;
    note(fabric, port::kControl, std::move(w));
    return;
  }
  AllocationRequest req;
  req.id = new_request_id();
  req.app = m.app;
  req.demand = m.demand;
  req.params = m.params;
  req.origin = id();
  state_->pending.insert(m.app);
  allocate(fabric, std::move(req));
}

void Host::on_release(Fabric& fabric, const msg::ReleaseCommand& m) {
  const DeploymentRecord* rec = state_->ledger.running(m.app);
  if (rec == nullptr) rec = state_->ledger.deploying(m.app);
  if (rec != nullptr) {
    end_record(fabric, rec->seq, DeploymentState::Stopped, true);
    return;
  }
  if (auto it = state_->forwarded.find(m.app); it != state_->forwarded.end()) {
    fabric.send(at(port::kControl), {it->second, port::kControl},
                msg::wrap(msg::ReleaseCommand{m.app}));
    state_->forwarded.erase(it);
    return;
  }
  Json w;
  w["type"] = "warning";
  w["manager"] = id();
  w["message"] = "release of unknown app";
  w["app"] = m.app;
  note(fabric, port::kControl, std::move(w));
}

void Host::on_ack(Fabric& fabric, const msg::InstallAck& m) {
  DeploymentRecord* rec = state_->ledger.find(m.record);
  if (rec == nullptr || rec->state != DeploymentState::Deploying) {
    // Late ack for a record already given up on.
    bool live_here = false;
    for (const auto* r : state_->ledger.live_on(m.node)) live_here |= r->app == m.app;
    if (!live_here && state_->table.is_available(m.node))
      fabric.send(at(port::kDeployer), {m.node, port::kFactory},
                  msg::wrap(msg::Uninstall{m.app, m.domain}));
    return;
  }
  if (auto it = state_->install_timers.find(rec->seq); it != state_->install_timers.end()) {
    fabric.cancel(it->second);
    state_->install_timers.erase(it);
  }
  if (rec->replaces) {
    // Make before break: the old copy stops only once the new one answered.
    const DeploymentRecord* old = state_->ledger.running(rec->app);
    if (old != nullptr && old->node == *rec->replaces)
      end_record(fabric, old->seq, DeploymentState::Stopped, true);
  }
  if (!state_->ledger.transition(rec->seq, DeploymentState::Running)) {
    Json w;
    w["type"] = "warning";
    w["manager"] = id();
    w["message"] = "app already running elsewhere";
    w["app"] = rec->app;
    note(fabric, port::kDeployer, std::move(w));
    end_record(fabric, rec->seq, DeploymentState::Stopped, true);
    return;
  }
  state_->representation.place(rec->app, Placement{rec->node, rec->app, rec->params},
                               fabric.now());
  note_record(fabric, *rec);
  report(fabric, rec->origin,
         {rec->request_id, rec->app, rec->domain, "running", rec->node, id(), ""});
}

void Host::on_install_timeout(Fabric& fabric, const msg::InstallTimeout& m) {
  state_->install_timers.erase(m.record);
  DeploymentRecord* rec = state_->ledger.find(m.record);
  if (rec == nullptr || rec->state != DeploymentState::Deploying) return;
  end_record(fabric, rec->seq, DeploymentState::Lost, true);
  report(fabric, rec->origin,
         {rec->request_id, rec->app, rec->domain, "lost", rec->node, id(), "install timeout"});
}

void Host::end_record(Fabric& fabric, std::uint64_t seq, DeploymentState to, bool uninstall) {
  DeploymentRecord* rec = state_->ledger.find(seq);
  if (rec == nullptr) return;
  const bool was_live = rec->live();
  const bool was_running = rec->state == DeploymentState::Running;
  if (!state_->ledger.transition(seq, to)) return;

  if (auto it = state_->install_timers.find(seq); it != state_->install_timers.end()) {
    fabric.cancel(it->second);
    state_->install_timers.erase(it);
  }
  if (was_live) {
    state_->allocator.release(rec->node, rec->demand);
    note_reservation(fabric, rec->node);
  }
  if (was_running) state_->representation.remove(rec->app, fabric.now());
  note_record(fabric, *rec);
  if (uninstall && state_->table.is_available(rec->node))
    fabric.send(at(port::kDeployer), {rec->node, port::kFactory},
                msg::wrap(msg::Uninstall{rec->app, rec->domain}));
}

void Host::note_record(Fabric& fabric, const DeploymentRecord& rec) const {
  Json j = to_json(rec);
  j["manager"] = id();
  note(fabric, port::kDeployer, std::move(j));
}

void Host::note_reservation(Fabric& fabric, const NodeId& node) const {
  Json j;
  j["type"] = "reservation";
  j["manager"] = id();
  j["node"] = node;
  j["reserved"] = to_json(state_->allocator.reserved(node));
  note(fabric, port::kDeployer, std::move(j));
}

// ---- manager side: control loops ------------------------------------------

void Host::apply(Fabric& fabric, const Decision& decision) {
  Json n;
  n["type"] = "action";
  n["manager"] = id();
  n["domain"] = to_string(decision.domain);
  Json fields = to_json(decision.action);
  for (auto& [k, v] : fields.items()) n[k] = v;
  note(fabric, port::kActuator, std::move(n));

  std::visit(
      [&](const auto& a) {
        using T = std::decay_t<decltype(a)>;
        if constexpr (std::is_same_v<T, ReplaceNode>) {
          for (const auto& app : a.apps) {
            const DeploymentRecord* old = state_->ledger.running(app);
            if (old == nullptr || old->node != a.failed) continue;
            AllocationRequest req;
            req.id = new_request_id();
            req.app = app;
            req.demand = old->demand;
            req.params = old->params;
            req.origin = id();
            req.domain = decision.domain;
            req.excluded.insert(a.failed);
            end_record(fabric, old->seq, DeploymentState::Lost, false);
            state_->pending.insert(app);
            allocate(fabric, std::move(req));
          }
        } else if constexpr (std::is_same_v<T, TuneParameter>) {
          fabric.send(at(port::kActuator), {a.node, port::kActuator},
                      msg::wrap(msg::Tune{a.name, a.value}));
        } else if constexpr (std::is_same_v<T, Rebind>) {
          const DeploymentRecord* old = state_->ledger.running(a.component);
          if (old == nullptr || old->node != a.from) return;
          state_->allocator.reserve(a.target, old->demand);
          note_reservation(fabric, a.target);
          DeploymentRecord rec;
          rec.app = old->app;
          rec.node = a.target;
          rec.deployed_at = fabric.now();
          rec.demand = old->demand;
          rec.params = old->params;
          rec.domain = decision.domain;
          rec.request_id = new_request_id();
          rec.origin = id();
          rec.replaces = a.from;
          state_->pending.insert(rec.app);
          install(fabric, std::move(rec));
        } else if constexpr (std::is_same_v<T, StopNode>) {
          if (!state_->table.mark_stopped(a.node)) return;
          note(fabric, port::kDiscovery,
               to_json(LifecycleEvent{LifecycleKind::NodeStopped, a.node, id(), fabric.now()}));
          std::vector<std::uint64_t> live;
          for (const auto* rec : state_->ledger.live_on(a.node)) live.push_back(rec->seq);
          for (auto seq : live) end_record(fabric, seq, DeploymentState::Stopped, false);
          fabric.send(at(port::kActuator), {a.node, port::kControl}, msg::wrap(msg::Stop{}));
        }
      },
      decision.action);
}

bool Host::leaf_child(const NodeId& node) const {
  const auto* rec = state_->table.find(node);
  return rec != nullptr && rec->status == NodeStatus::Available && !rec->capacity.manager;
}

double Host::load(const NodeId& node) const {
  const auto* rec = state_->table.find(node);
  if (rec == nullptr) return 0.0;
  return utilization(state_->allocator.reserved(node), rec->capacity.capacity);
}

std::vector<AppId> Host::apps_on(const NodeId& node) const {
  return state_->representation.apps_on(node);
}

std::optional<NodeId> Host::hottest_child() const {
  std::optional<NodeId> best;
  for (const auto& [child, rec] : state_->table.records())
    if (leaf_child(child) && (!best || load(child) > load(*best))) best = child;
  return best;
}

std::optional<NodeId> Host::coldest_child() const {
  std::optional<NodeId> best;
  for (const auto& [child, rec] : state_->table.records())
    if (leaf_child(child) && (!best || load(child) < load(*best))) best = child;
  return best;
}

std::optional<Rebind> Host::rebalance_move() const {
  for (const auto& rec : state_->ledger.records())
    if (rec.state == DeploymentState::Deploying && rec.replaces) return std::nullopt;

  auto source = hottest_child();
  if (!source) return std::nullopt;

  const DeploymentRecord* smallest = nullptr;
  for (const auto* rec : state_->ledger.live_on(*source)) {
    if (rec->state != DeploymentState::Running) continue;
    if (smallest == nullptr || total_units(rec->demand) < total_units(smallest->demand) ||
        (total_units(rec->demand) == total_units(smallest->demand) && rec->app < smallest->app))
      smallest = rec;
  }
  if (smallest == nullptr) return std::nullopt;

  const double source_load = load(*source);
  std::optional<NodeId> target;
  for (const auto& [child, rec] : state_->table.records()) {
    if (child == *source || !leaf_child(child)) continue;
    ResourceMap reserved = state_->allocator.reserved(child);
    if (!fits(subtract(rec.capacity.capacity, reserved), smallest->demand)) continue;
    double after = utilization(add(reserved, smallest->demand), rec.capacity.capacity);
    if (after >= source_load) continue;
    if (!target || load(child) < load(*target)) target = child;
  }
  if (!target) return std::nullopt;
  return Rebind{smallest->app, *source, *target};
}

}  // namespace hiermon
