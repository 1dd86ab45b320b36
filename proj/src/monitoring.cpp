#include "hiermon/monitoring.hpp"

#include <algorithm>
#include <array>
#include <stdexcept>

namespace hiermon {

namespace {

constexpr std::array<AggFunction, 5> kCanonicalOrder{AggFunction::Mean, AggFunction::Max,
                                                     AggFunction::Min, AggFunction::Count,
                                                     AggFunction::Last};

bool carries_any(const MetricEvent& e, const std::set<std::string>& metrics) {
  for (const auto& p : e.properties)
    if (metrics.contains(split_aggregate_name(p.name).first)) return true;
  return false;
}

}  // namespace

std::optional<double> MetricEvent::get(std::string_view name) const {
  for (const auto& p : properties)
    if (p.name == name) return p.value;
  return std::nullopt;
}

void MetricEvent::set(std::string name, double value) {
  for (auto& p : properties) {
    if (p.name == name) {
      p.value = value;
      return;
    }
  }
  properties.push_back(Property{std::move(name), value});
}

Json to_json(const MetricEvent& event) {
  Json j;
  j["source"] = event.source;
  j["timestamp"] = event.timestamp.count();
  j["level"] = event.level;
  Json props = Json::array();
  for (const auto& p : event.properties) props.push_back(Json::array({p.name, p.value}));
  j["properties"] = std::move(props);
  return j;
}

MetricEvent metric_from_json(const Json& j) {
  MetricEvent e;
  e.source = j.at("source").get<std::string>();
  e.timestamp = SimTime{j.at("timestamp").get<std::int64_t>()};
  e.level = j.at("level").get<int>();
  for (const auto& p : j.at("properties"))
    e.properties.push_back(Property{p.at(0).get<std::string>(), p.at(1).get<double>()});
  return e;
}

std::string_view to_string(RegistrationKind kind) {
  return kind == RegistrationKind::Producer ? "producer" : "consumer";
}

RegistrationId Directory::register_subject(Registration reg) {
  if (reg.ttl <= Duration::zero()) throw std::invalid_argument("registration ttl must be > 0");
  for (auto it = entries_.begin(); it != entries_.end(); ++it) {
    auto& [id, existing] = *it;
    if (existing.subject != reg.subject || existing.kind != reg.kind) continue;
    if (visible(existing, reg.registered_at)) {
      existing = std::move(reg);
      return id;
    }
    entries_.erase(it);
    break;
  }
  RegistrationId id = next_id_++;
  entries_.emplace_back(id, std::move(reg));
  return id;
}

bool Directory::visible(const Registration& reg, SimTime now) {
  return reg.registered_at <= now && now - reg.registered_at < reg.ttl;
}

std::vector<Endpoint> Directory::lookup(const std::set<std::string>& wanted,
                                        SimTime now) const {
  std::vector<Endpoint> out;
  for (const auto& [id, reg] : entries_) {
    if (reg.kind != RegistrationKind::Producer || !visible(reg, now)) continue;
    bool match = std::any_of(wanted.begin(), wanted.end(),
                             [&](const std::string& w) { return reg.properties.contains(w); });
    if (match) out.push_back(reg.subject);
  }
  return out;
}

std::vector<Registration> Directory::visible_registrations(SimTime now) const {
  std::vector<Registration> out;
  for (const auto& [id, reg] : entries_)
    if (visible(reg, now)) out.push_back(reg);
  return out;
}

void Directory::purge(SimTime now) {
  std::erase_if(entries_, [now](const auto& e) { return !visible(e.second, now); });
}

std::string_view to_string(AggFunction fn) {
  switch (fn) {
    case AggFunction::Mean: return "mean";
    case AggFunction::Max: return "max";
    case AggFunction::Min: return "min";
    case AggFunction::Count: return "count";
    case AggFunction::Last: return "last";
  }
  return "unknown";
}

std::optional<AggFunction> agg_function_from_string(std::string_view s) {
  for (AggFunction fn : kCanonicalOrder)
    if (to_string(fn) == s) return fn;
  return std::nullopt;
}

std::string_view to_string(GroupBy g) { return g == GroupBy::Property ? "property" : "source"; }

void AggregationSpec::validate() const {
  if (window <= Duration::zero()) throw std::invalid_argument("aggregation window must be > 0");
  if (functions.empty()) throw std::invalid_argument("aggregation needs at least one function");
}

std::string aggregate_name(std::string_view base, AggFunction fn) {
  std::string name(base);
  name += '_';
  name += to_string(fn);
  return name;
}

std::pair<std::string, std::optional<AggFunction>> split_aggregate_name(std::string_view name) {
  auto pos = name.rfind('_');
  if (pos != std::string_view::npos) {
    if (auto fn = agg_function_from_string(name.substr(pos + 1)))
      return {std::string(name.substr(0, pos)), fn};
  }
  return {std::string(name), std::nullopt};
}

WindowAggregator::WindowAggregator(NodeId self, AggregationSpec spec,
                                   std::set<std::string> metrics, int empty_level)
    : self_(std::move(self)),
      spec_(std::move(spec)),
      metrics_(std::move(metrics)),
      empty_level_(empty_level) {
  spec_.validate();
}

void WindowAggregator::add(const MetricEvent& event, SimTime delivered_at) {
  buffer_.push_back(Input{event, delivered_at});
}

std::vector<MetricEvent> WindowAggregator::close_window(SimTime window_close) {
  const SimTime open = window_close - spec_.window;
  std::vector<const Input*> in_window;
  for (const auto& in : buffer_)
    if (in.delivered_at >= open && in.delivered_at < window_close) in_window.push_back(&in);

  std::vector<MetricEvent> out;
  if (spec_.group_by == GroupBy::Property) {
    for (const auto& metric : metrics_)
      out.push_back(summarize(self_, {metric}, in_window, window_close));
  } else if (in_window.empty()) {
    out.push_back(summarize(self_, metrics_, in_window, window_close));
  } else {
    std::map<NodeId, std::vector<const Input*>> by_source;
    for (const auto* in : in_window) by_source[in->event.source].push_back(in);
    for (const auto& [source, inputs] : by_source)
      out.push_back(summarize(source, metrics_, inputs, window_close));
  }

  std::erase_if(buffer_, [window_close](const Input& in) { return in.delivered_at < window_close; });
  return out;
}

MetricEvent WindowAggregator::summarize(const NodeId& source,
                                        const std::set<std::string>& metrics,
                                        const std::vector<const Input*>& inputs,
                                        SimTime window_close) const {
  MetricEvent ev;
  ev.source = source;
  ev.timestamp = window_close;
  ev.level = empty_level_;
  std::optional<int> max_level;
  for (const auto* in : inputs) {
    if (!carries_any(in->event, metrics)) continue;
    max_level = std::max(max_level.value_or(0), in->event.level);
  }
  if (max_level) ev.level = *max_level + 1;

  auto wants = [this](AggFunction fn) {
    return std::find(spec_.functions.begin(), spec_.functions.end(), fn) != spec_.functions.end();
  };

  for (const auto& metric : metrics) {
    std::vector<double> means, maxes, mins;
    std::optional<double> last;
    double count = 0;
    bool carried = false;
    for (const auto* in : inputs) {
      const MetricEvent& e = in->event;
      if (auto raw = e.get(metric)) {
        carried = true;
        means.push_back(*raw);
        maxes.push_back(*raw);
        mins.push_back(*raw);
        last = *raw;
        count += 1;
        continue;
      }
      if (!carries_any(e, {metric})) continue;
      carried = true;
      if (auto v = e.get(aggregate_name(metric, AggFunction::Mean))) means.push_back(*v);
      if (auto v = e.get(aggregate_name(metric, AggFunction::Max))) maxes.push_back(*v);
      if (auto v = e.get(aggregate_name(metric, AggFunction::Min))) mins.push_back(*v);
      if (auto v = e.get(aggregate_name(metric, AggFunction::Last))) last = *v;
      count += e.get(aggregate_name(metric, AggFunction::Count)).value_or(1.0);
    }

    if (!carried) {
      ev.set(aggregate_name(metric, AggFunction::Count), 0.0);
      continue;
    }
    for (AggFunction fn : kCanonicalOrder) {
      if (!wants(fn)) continue;
      switch (fn) {
        case AggFunction::Mean:
          if (!means.empty()) {
            double sum = 0;
            for (double v : means) sum += v;
            ev.set(aggregate_name(metric, fn), sum / static_cast<double>(means.size()));
          }
          break;
        case AggFunction::Max:
          if (!maxes.empty()) ev.set(aggregate_name(metric, fn), *std::max_element(maxes.begin(), maxes.end()));
          break;
        case AggFunction::Min:
          if (!mins.empty()) ev.set(aggregate_name(metric, fn), *std::min_element(mins.begin(), mins.end()));
          break;
        case AggFunction::Count:
          ev.set(aggregate_name(metric, fn), count);
          break;
        case AggFunction::Last:
          if (last) ev.set(aggregate_name(metric, fn), *last);
          break;
      }
    }
  }
  return ev;
}

void SubscriberSet::subscribe(const Endpoint& consumer, SimTime now, Duration ttl) {
  auto [it, inserted] = expiry_.insert_or_assign(consumer, now + ttl);
  if (inserted) order_.push_back(consumer);
}

std::vector<Endpoint> SubscriberSet::live(SimTime now) {
  std::vector<Endpoint> out;
  std::vector<Endpoint> kept;
  for (const auto& ep : order_) {
    auto it = expiry_.find(ep);
    if (it->second > now) {
      out.push_back(ep);
      kept.push_back(ep);
    } else {
      expiry_.erase(it);
    }
  }
  order_ = std::move(kept);
  return out;
}

}  // namespace hiermon
