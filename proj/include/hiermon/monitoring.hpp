#pragma once

// Producer/consumer monitoring with a soft-state directory and windowed
// republishers. The directory only matches endpoints; event data always
// travels producer -> consumer directly.

#include <optional>
#include <set>
#include <string_view>
#include <utility>
#include <vector>

#include "hiermon/types.hpp"

namespace hiermon {

struct Property {
  std::string name;
  double value = 0.0;

  bool operator==(const Property&) const = default;
};

/// A timestamped property list. Level 0 is a raw sensor reading; each
/// republisher hop adds one.
struct MetricEvent {
  NodeId source;
  SimTime timestamp{0};
  std::vector<Property> properties;
  int level = 0;

  std::optional<double> get(std::string_view name) const;
  /// Appends or overwrites, keeping names unique.
  void set(std::string name, double value);
};

Json to_json(const MetricEvent& event);
MetricEvent metric_from_json(const Json& j);

enum class RegistrationKind { Producer, Consumer };

std::string_view to_string(RegistrationKind kind);

struct Registration {
  Endpoint subject;
  RegistrationKind kind = RegistrationKind::Producer;
  std::set<std::string> properties;
  SimTime registered_at{0};
  Duration ttl{3000};
};

using RegistrationId = std::uint64_t;

/// Soft-state registry. A registration is visible at t iff its latest
/// refresh happened in (t - ttl, t].
class Directory {
 public:
  /// Registering an already-visible (subject, kind) refreshes it in place
  /// and keeps its id and position. Throws std::invalid_argument if ttl <= 0.
  RegistrationId register_subject(Registration reg);

  /// Visible producers whose offered set intersects `wanted`, in
  /// registration order.
  std::vector<Endpoint> lookup(const std::set<std::string>& wanted, SimTime now) const;

  static bool visible(const Registration& reg, SimTime now);
  std::vector<Registration> visible_registrations(SimTime now) const;

  /// Forgets expired entries. Lookup results do not depend on this.
  void purge(SimTime now);

 private:
  std::vector<std::pair<RegistrationId, Registration>> entries_;
  RegistrationId next_id_ = 1;
};

enum class AggFunction { Mean, Max, Min, Count, Last };
enum class GroupBy { Property, Source };

std::string_view to_string(AggFunction fn);
std::optional<AggFunction> agg_function_from_string(std::string_view s);
std::string_view to_string(GroupBy g);

struct AggregationSpec {
  Duration window{5000};
  std::vector<AggFunction> functions{AggFunction::Mean, AggFunction::Max, AggFunction::Min,
                                     AggFunction::Count};
  GroupBy group_by = GroupBy::Property;

  /// Throws std::invalid_argument if window <= 0 or no function is listed.
  void validate() const;
};

/// "<base>_<function>" for aggregated properties.
std::string aggregate_name(std::string_view base, AggFunction fn);

/// Splits "cpu_mean" into {"cpu", Mean}; a raw name yields {name, nullopt}.
std::pair<std::string, std::optional<AggFunction>> split_aggregate_name(std::string_view name);

/// Republisher core: buffers events delivered to it and summarizes each
/// aligned, closed-open window [close - window, close).
///
/// Rolling up already-aggregated inputs: mean is the unweighted mean of the
/// inputs' means, max/min/last combine the inputs' max/min/last, and count
/// sums the inputs' counts (a raw reading counts as 1).
class WindowAggregator {
 public:
  WindowAggregator(NodeId self, AggregationSpec spec, std::set<std::string> metrics,
                   int empty_level);

  void add(const MetricEvent& event, SimTime delivered_at);

  /// One summarized event per group: per metric when grouping by property,
  /// per source otherwise. A group without inputs carries only
  /// "<metric>_count" = 0; an empty window still emits.
  std::vector<MetricEvent> close_window(SimTime window_close);

  const AggregationSpec& spec() const { return spec_; }
  std::size_t buffered() const { return buffer_.size(); }

 private:
  struct Input {
    MetricEvent event;
    SimTime delivered_at;
  };

  MetricEvent summarize(const NodeId& source, const std::set<std::string>& metrics,
                        const std::vector<const Input*>& inputs, SimTime window_close) const;

  NodeId self_;
  AggregationSpec spec_;
  std::set<std::string> metrics_;
  int empty_level_;
  std::vector<Input> buffer_;
};

/// Producer-side subscriber list with soft-state expiry.
class SubscriberSet {
 public:
  void subscribe(const Endpoint& consumer, SimTime now, Duration ttl);
  std::vector<Endpoint> live(SimTime now);
  std::size_t size() const { return expiry_.size(); }

 private:
  std::map<Endpoint, SimTime> expiry_;
  std::vector<Endpoint> order_;
};

}  // namespace hiermon
