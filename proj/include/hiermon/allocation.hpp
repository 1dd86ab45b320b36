#pragma once

// Node selection, capacity reservation and the deployment ledger of one
// manager. Requests that cannot be satisfied below a manager travel up the
// hierarchy; subtrees advertised as feasible are consulted by delegation.

#include <memory>
#include <optional>
#include <set>
#include <span>
#include <string_view>
#include <variant>
#include <vector>

#include "hiermon/types.hpp"

namespace hiermon {

/// Which control activity caused a request. Carried on every allocation,
/// install and result message so traces can be filtered per domain.
enum class Domain { Deploy, Repair, Optimization };

std::string_view to_string(Domain d);
std::optional<Domain> domain_from_string(std::string_view s);

struct AllocationRequest {
  std::string id;
  AppId app;
  ResourceMap demand;
  Params params;
  NodeId origin;
  int hop_count = 0;
  Domain domain = Domain::Deploy;
  /// Nodes and subtrees already known not to fit this request.
  std::set<NodeId> excluded;
  /// Managers that delegated this request downward, innermost last.
  std::vector<NodeId> delegation_path;
};

Json to_json(const AllocationRequest& req);

struct Granted {
  NodeId node;
};
struct Escalated {
  NodeId to;
};
/// Forwarded to a child manager whose advertised subtree capacity fits.
struct Delegated {
  NodeId to;
};
struct Denied {
  std::string reason;
};

using AllocationOutcome = std::variant<Granted, Escalated, Delegated, Denied>;

Json to_json(const AllocationOutcome& outcome);

struct Candidate {
  NodeId node;
  bool manager = false;  // a child manager stands for its whole subtree
  ResourceMap free;
};

class AllocationPolicy {
 public:
  virtual ~AllocationPolicy() = default;
  virtual std::string_view name() const = 0;
  /// Index of the chosen feasible candidate, or nullopt.
  virtual std::optional<std::size_t> pick(std::span<const Candidate> candidates,
                                          const ResourceMap& demand) const = 0;
};

/// Maximum free units over the demanded resources; ties go to the lowest
/// node id.
class MostFreePolicy final : public AllocationPolicy {
 public:
  std::string_view name() const override { return "most-free"; }
  std::optional<std::size_t> pick(std::span<const Candidate> candidates,
                                  const ResourceMap& demand) const override;
};

class Allocator {
 public:
  Allocator(NodeId self, std::optional<NodeId> parent,
            std::shared_ptr<const AllocationPolicy> policy = std::make_shared<MostFreePolicy>(),
            int max_hops = 32);

  /// Grants reserve the demand on the chosen node before returning.
  /// A delegated request that finds nothing is Denied("refused"); a root
  /// that finds nothing answers Denied("exhausted").
  AllocationOutcome allocate(const AllocationRequest& req, std::span<const Candidate> candidates);

  void reserve(const NodeId& node, const ResourceMap& demand);
  void release(const NodeId& node, const ResourceMap& demand);
  ResourceMap reserved(const NodeId& node) const;
  const std::map<NodeId, ResourceMap>& reservations() const { return reserved_; }

  const AllocationPolicy& policy() const { return *policy_; }
  const std::optional<NodeId>& parent() const { return parent_; }
  void set_parent(std::optional<NodeId> parent) { parent_ = std::move(parent); }

 private:
  NodeId self_;
  std::optional<NodeId> parent_;
  std::shared_ptr<const AllocationPolicy> policy_;
  int max_hops_;
  std::map<NodeId, ResourceMap> reserved_;
};

enum class DeploymentState { Deploying, Running, Stopped, Lost };

std::string_view to_string(DeploymentState s);

struct DeploymentRecord {
  std::uint64_t seq = 0;
  AppId app;
  NodeId node;
  DeploymentState state = DeploymentState::Deploying;
  SimTime deployed_at{0};
  ResourceMap demand;
  Params params;
  Domain domain = Domain::Deploy;
  std::string request_id;
  NodeId origin;
  /// Set when this deployment moves a running component off another node.
  std::optional<NodeId> replaces;

  bool live() const {
    return state == DeploymentState::Deploying || state == DeploymentState::Running;
  }
};

Json to_json(const DeploymentRecord& rec);

/// History of every deployment this manager owns.
class DeploymentLedger {
 public:
  DeploymentRecord& open(DeploymentRecord rec);
  /// Enforces Deploying -> Running -> {Stopped, Lost}; a Deploying record
  /// may also end Stopped or Lost. Returns false on an illegal move.
  bool transition(std::uint64_t seq, DeploymentState to);

  DeploymentRecord* find(std::uint64_t seq);
  const DeploymentRecord* running(const AppId& app) const;
  const DeploymentRecord* deploying(const AppId& app) const;
  std::vector<const DeploymentRecord*> live_on(const NodeId& node) const;
  ResourceMap live_demand(const NodeId& node) const;
  /// app -> node over Running records.
  std::map<AppId, NodeId> mapping() const;
  const std::vector<DeploymentRecord>& records() const { return records_; }

 private:
  std::vector<DeploymentRecord> records_;
  std::uint64_t next_seq_ = 1;
};

}  // namespace hiermon
