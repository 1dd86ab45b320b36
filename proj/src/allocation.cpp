#include "hiermon/allocation.hpp"

#include <algorithm>
#include <stdexcept>

namespace hiermon {

std::string_view to_string(Domain d) {
  switch (d) {
    case Domain::Deploy: return "deploy";
    case Domain::Repair: return "repair";
    case Domain::Optimization: return "optimization";
  }
  return "unknown";
}

std::optional<Domain> domain_from_string(std::string_view s) {
  for (Domain d : {Domain::Deploy, Domain::Repair, Domain::Optimization})
    if (to_string(d) == s) return d;
  return std::nullopt;
}

Json to_json(const AllocationRequest& req) {
  Json j;
  j["id"] = req.id;
  j["app"] = req.app;
  j["demand"] = to_json(req.demand);
  j["origin"] = req.origin;
  j["hop_count"] = req.hop_count;
  j["domain"] = to_string(req.domain);
  j["excluded"] = req.excluded;
  j["delegation_path"] = req.delegation_path;
  return j;
}

Json to_json(const AllocationOutcome& outcome) {
  return std::visit(
      [](const auto& o) -> Json {
        using T = std::decay_t<decltype(o)>;
        if constexpr (std::is_same_v<T, Granted>) return Json{{"outcome", "granted"}, {"node", o.node}};
        if constexpr (std::is_same_v<T, Escalated>) return Json{{"outcome", "escalated"}, {"to", o.to}};
        if constexpr (std::is_same_v<T, Delegated>) return Json{{"outcome", "delegated"}, {"to", o.to}};
        if constexpr (std::is_same_v<T, Denied>) return Json{{"outcome", "denied"}, {"reason", o.reason}};
      },
      outcome);
}

std::optional<std::size_t> MostFreePolicy::pick(std::span<const Candidate> candidates,
                                                const ResourceMap& demand) const {
  auto score = [&demand](const Candidate& c) {
    if (demand.empty()) return total_units(c.free);
    std::int64_t s = 0;
    for (const auto& [name, units] : demand) {
      auto it = c.free.find(name);
      s += it == c.free.end() ? 0 : it->second;
    }
    return s;
  };
  std::optional<std::size_t> best;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    const auto& c = candidates[i];
    if (!fits(c.free, demand)) continue;
    if (!best) {
      best = i;
      continue;
    }
    const auto& b = candidates[*best];
    auto sc = score(c), sb = score(b);
    if (sc > sb || (sc == sb && c.node < b.node)) best = i;
  }
  return best;
}

Allocator::Allocator(NodeId self, std::optional<NodeId> parent,
                     std::shared_ptr<const AllocationPolicy> policy, int max_hops)
    : self_(std::move(self)),
      parent_(std::move(parent)),
      policy_(std::move(policy)),
      max_hops_(max_hops) {
  if (!policy_) throw std::invalid_argument("allocator needs a policy");
}

AllocationOutcome Allocator::allocate(const AllocationRequest& req,
                                      std::span<const Candidate> candidates) {
  std::vector<Candidate> open;
  for (const auto& c : candidates)
    if (!req.excluded.contains(c.node)) open.push_back(c);

  if (auto i = policy_->pick(open, req.demand)) {
    const Candidate& chosen = open[*i];
    if (chosen.manager) return Delegated{chosen.node};
    reserve(chosen.node, req.demand);
    return Granted{chosen.node};
  }
  if (!req.delegation_path.empty()) return Denied{"refused"};
  if (parent_ && req.hop_count < max_hops_) return Escalated{*parent_};
  if (parent_) return Denied{"hop-limit"};
  return Denied{"exhausted"};
}

void Allocator::reserve(const NodeId& node, const ResourceMap& demand) {
  auto& r = reserved_[node];
  r = add(std::move(r), demand);
}

void Allocator::release(const NodeId& node, const ResourceMap& demand) {
  auto& r = reserved_[node];
  r = subtract(std::move(r), demand);
  for (const auto& [name, units] : r)
    if (units < 0) throw std::logic_error("released more '" + name + "' than reserved on " + node);
}

ResourceMap Allocator::reserved(const NodeId& node) const {
  auto it = reserved_.find(node);
  return it == reserved_.end() ? ResourceMap{} : it->second;
}

std::string_view to_string(DeploymentState s) {
  switch (s) {
    case DeploymentState::Deploying: return "deploying";
    case DeploymentState::Running: return "running";
    case DeploymentState::Stopped: return "stopped";
    case DeploymentState::Lost: return "lost";
  }
  return "unknown";
}

Json to_json(const DeploymentRecord& rec) {
  Json j;
  j["type"] = "deployment";
  j["seq"] = rec.seq;
  j["app"] = rec.app;
  j["node"] = rec.node;
  j["state"] = to_string(rec.state);
  j["demand"] = to_json(rec.demand);
  j["domain"] = to_string(rec.domain);
  j["request"] = rec.request_id;
  j["origin"] = rec.origin;
  j["deployed_at"] = rec.deployed_at.count();
  if (rec.replaces) j["replaces"] = *rec.replaces;
  return j;
}

DeploymentRecord& DeploymentLedger::open(DeploymentRecord rec) {
  rec.seq = next_seq_++;
  rec.state = DeploymentState::Deploying;
  records_.push_back(std::move(rec));
  return records_.back();
}

bool DeploymentLedger::transition(std::uint64_t seq, DeploymentState to) {
  DeploymentRecord* rec = find(seq);
  if (rec == nullptr) return false;
  const auto from = rec->state;
  bool ok = false;
  switch (from) {
    case DeploymentState::Deploying: ok = to != DeploymentState::Deploying; break;
    case DeploymentState::Running:
      ok = to == DeploymentState::Stopped || to == DeploymentState::Lost;
      break;
    case DeploymentState::Stopped:
    case DeploymentState::Lost: ok = false; break;
  }
  if (ok && to == DeploymentState::Running && running(rec->app) != nullptr) ok = false;
  if (ok) rec->state = to;
  return ok;
}

DeploymentRecord* DeploymentLedger::find(std::uint64_t seq) {
  for (auto& r : records_)
    if (r.seq == seq) return &r;
  return nullptr;
}

const DeploymentRecord* DeploymentLedger::running(const AppId& app) const {
  for (const auto& r : records_)
    if (r.app == app && r.state == DeploymentState::Running) return &r;
  return nullptr;
}

const DeploymentRecord* DeploymentLedger::deploying(const AppId& app) const {
  for (const auto& r : records_)
    if (r.app == app && r.state == DeploymentState::Deploying) return &r;
  return nullptr;
}

std::vector<const DeploymentRecord*> DeploymentLedger::live_on(const NodeId& node) const {
  std::vector<const DeploymentRecord*> out;
  for (const auto& r : records_)
    if (r.node == node && r.live()) out.push_back(&r);
  return out;
}

ResourceMap DeploymentLedger::live_demand(const NodeId& node) const {
  ResourceMap sum;
  for (const auto* r : live_on(node)) sum = add(std::move(sum), r->demand);
  return sum;
}

std::map<AppId, NodeId> DeploymentLedger::mapping() const {
  std::map<AppId, NodeId> m;
  for (const auto& r : records_)
    if (r.state == DeploymentState::Running) m[r.app] = r.node;
  return m;
}

}  // namespace hiermon
