#pragma once

// Deployment descriptors: virtual nodes mapped to process definitions whose
// host lists are expanded from ${VAR} placeholders.
//
// Grammar, one directive per line, '#' starts a comment, strings in double
// quotes (\" and \\ escape):
//
//   descriptor <name>
//   variable <NAME> [= "<default>"]
//   virtual-node <name> single|multiple [timeout <ms>]
//   map <virtual-node> -> <process-id>
//   process <id> launcher <kind> hostlist "<expr>"
//
// The launcher kind is recorded, never interpreted.

#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "hiermon/types.hpp"

namespace hiermon {

class DescriptorError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Multiplicity { Single, Multiple };

struct DescriptorVariable {
  std::string name;
  std::optional<std::string> default_value;

  bool operator==(const DescriptorVariable&) const = default;
};

struct VirtualNode {
  std::string name;
  Multiplicity multiplicity = Multiplicity::Multiple;
  Duration timeout{0};

  bool operator==(const VirtualNode&) const = default;
};

struct VirtualNodeMapping {
  std::string virtual_node;
  std::string process;

  bool operator==(const VirtualNodeMapping&) const = default;
};

struct ProcessDefinition {
  std::string id;
  std::string launcher_kind;
  std::string hostlist_expr;

  bool operator==(const ProcessDefinition&) const = default;
};

struct DeploymentDescriptor {
  std::string name;
  std::vector<DescriptorVariable> variables;
  std::vector<VirtualNode> virtual_nodes;
  std::vector<VirtualNodeMapping> mappings;
  std::vector<ProcessDefinition> processes;

  bool operator==(const DeploymentDescriptor&) const = default;

  const VirtualNode* find_virtual_node(std::string_view name) const;
  const ProcessDefinition* find_process(std::string_view id) const;
  const DescriptorVariable* find_variable(std::string_view name) const;
};

/// Throws DescriptorError (with the line number) on syntax errors, duplicate
/// names and dangling references.
DeploymentDescriptor parse_descriptor(std::string_view text);
DeploymentDescriptor load_descriptor(const std::string& path);
std::string render(const DeploymentDescriptor& desc);

/// Names referenced as ${NAME}, in order of appearance.
std::vector<std::string> placeholders(std::string_view expr);

/// One host the command runs on.
struct LaunchTarget {
  std::string host;
  std::string virtual_node;
  std::string launcher_kind;

  bool operator==(const LaunchTarget&) const = default;
};

struct LaunchPlan {
  /// Mapping order, then host-list order.
  std::vector<LaunchTarget> targets;
  std::string command;

  std::vector<std::string> hosts() const;
  std::vector<std::string> hosts(std::string_view virtual_node) const;
};

using Bindings = std::map<std::string, std::string>;

/// Parses "NAME=value" (as given after -D).
std::pair<std::string, std::string> parse_binding(std::string_view text);

/// Expands every mapped virtual node's host list. Bound values win over
/// defaults; whitespace separates host tokens and their order is kept.
LaunchPlan resolve(const DeploymentDescriptor& desc, const Bindings& bindings,
                   std::string command = {});

Json to_json(const DeploymentDescriptor& desc);
Json to_json(const LaunchPlan& plan);

}  // namespace hiermon
