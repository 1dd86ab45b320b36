#include "hiermon/oracles.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>

namespace hiermon {

namespace {

std::string actor_of(const std::string& endpoint) {
  return endpoint.substr(0, endpoint.find('/'));
}

bool is_note(const Json& r, std::string_view type) {
  return r.at("kind") == "note" && r.at("payload").value("type", "") == type;
}

std::string str(const Json& j, const char* key) { return j.value(key, std::string{}); }

OracleReport fail(OracleReport rep, std::size_t index, std::string message) {
  rep.pass = false;
  rep.line = index + 1;
  rep.message = "line " + std::to_string(index + 1) + ": " + std::move(message);
  return rep;
}

std::string fmt(double v) {
  std::ostringstream out;
  out.precision(17);
  out << v;
  return out.str();
}

// ---- aggregation -----------------------------------------------------------

const std::set<std::string> kFunctions{"mean", "max", "min", "count", "last"};

/// "cpu_mean" -> {"cpu", "mean"}; a raw name keeps an empty function.
std::pair<std::string, std::string> split(const std::string& name) {
  auto pos = name.rfind('_');
  if (pos != std::string::npos && kFunctions.contains(name.substr(pos + 1)))
    return {name.substr(0, pos), name.substr(pos + 1)};
  return {name, ""};
}

using Props = std::map<std::string, double>;

Props props_of(const Json& event) {
  Props p;
  for (const auto& pair : event.at("properties")) p[pair.at(0).get<std::string>()] = pair.at(1).get<double>();
  return p;
}

std::set<std::string> bases_of(const Props& p) {
  std::set<std::string> out;
  for (const auto& [name, v] : p) out.insert(split(name).first);
  return out;
}

struct Delivery {
  std::int64_t t;
  std::string from_actor;
  std::string source;
  std::int64_t timestamp;
  int level;
  Props props;
};

std::string key_of(const std::string& emitter, const std::string& source, std::int64_t ts,
                   const std::set<std::string>& bases) {
  std::string k = emitter + "|" + source + "|" + std::to_string(ts);
  for (const auto& b : bases) k += "|" + b;
  return k;
}

Props expected_for(const std::string& base, const std::vector<const Delivery*>& inputs,
                   const std::vector<std::string>& functions) {
  std::vector<double> means, maxes, mins;
  std::optional<double> last;
  double count = 0;
  bool carried = false;
  for (const auto* in : inputs) {
    bool has = false;
    for (const auto& [name, v] : in->props) has |= split(name).first == base;
    if (!has) continue;
    carried = true;
    if (auto it = in->props.find(base); it != in->props.end()) {
      means.push_back(it->second);
      maxes.push_back(it->second);
      mins.push_back(it->second);
      last = it->second;
      count += 1;
      continue;
    }
    auto get = [&](const char* fn) -> std::optional<double> {
      auto it = in->props.find(base + "_" + fn);
      if (it == in->props.end()) return std::nullopt;
      return it->second;
    };
    if (auto v = get("mean")) means.push_back(*v);
    if (auto v = get("max")) maxes.push_back(*v);
    if (auto v = get("min")) mins.push_back(*v);
    if (auto v = get("last")) last = *v;
    count += get("count").value_or(1.0);
  }

  Props out;
  if (!carried) {
    out[base + "_count"] = 0.0;
    return out;
  }
  for (const auto& fn : functions) {
    if (fn == "mean" && !means.empty()) {
      double s = 0;
      for (double v : means) s += v;
      out[base + "_mean"] = s / static_cast<double>(means.size());
    } else if (fn == "max" && !maxes.empty()) {
      out[base + "_max"] = *std::max_element(maxes.begin(), maxes.end());
    } else if (fn == "min" && !mins.empty()) {
      out[base + "_min"] = *std::min_element(mins.begin(), mins.end());
    } else if (fn == "count") {
      out[base + "_count"] = count;
    } else if (fn == "last" && last) {
      out[base + "_last"] = *last;
    }
  }
  return out;
}

bool close_enough(double a, double b) {
  double scale = std::max(std::fabs(a), std::fabs(b));
  return std::fabs(a - b) <= kAggregationTolerance * std::max(scale, 1e-300) ||
         std::fabs(a - b) < 1e-15;
}

// ---- conservation ----------------------------------------------------------

using Units = std::map<std::string, std::int64_t>;

Units units_of(const Json& j) {
  Units u;
  for (const auto& [k, v] : j.items())
    if (v.get<std::int64_t>() != 0) u[k] = v.get<std::int64_t>();
  return u;
}

std::string units_str(const Units& u) {
  Json j = Json::object();
  for (const auto& [k, v] : u) j[k] = v;
  return j.dump();
}

}  // namespace

Json to_json(const OracleReport& report) {
  Json j;
  j["oracle"] = report.oracle;
  j["pass"] = report.pass;
  j["checked"] = report.checked;
  j["line"] = report.line ? Json(*report.line) : Json(nullptr);
  j["message"] = report.message;
  return j;
}

std::vector<Json> read_trace(std::istream& in) {
  std::vector<Json> out;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.empty()) continue;
    Json j = Json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object() || !j.contains("t") || !j.contains("kind") ||
        !j.contains("payload"))
      throw std::runtime_error("trace line " + std::to_string(n) + " is not a trace record");
    out.push_back(std::move(j));
  }
  return out;
}

std::vector<Json> read_trace_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open trace '" + path + "'");
  return read_trace(in);
}

std::vector<Json> to_records(const EventTrace& trace) {
  std::vector<Json> out;
  out.reserve(trace.size());
  for (const auto& r : trace) out.push_back(Json::parse(to_line(r)));
  return out;
}

OracleReport verify_aggregation(const std::vector<Json>& records) {
  OracleReport rep;
  rep.oracle = "aggregation";
  std::map<std::string, std::vector<Delivery>> deliveries;  // consumer actor -> inputs
  std::map<std::string, Props> recomputed;

  for (std::size_t i = 0; i < records.size(); ++i) {
    const Json& r = records[i];
    const Json& p = r.at("payload");
    if (r.at("kind") == "deliver" && p.value("type", "") == "metric" &&
        str(r, "to").ends_with("/monitor")) {
      const Json& ev = p.at("event");
      Delivery d{r.at("t").get<std::int64_t>(), actor_of(str(r, "from")), str(ev, "source"),
                 ev.at("timestamp").get<std::int64_t>(), ev.at("level").get<int>(), props_of(ev)};
      if (d.level >= 1) {
        auto it = recomputed.find(key_of(d.from_actor, d.source, d.timestamp, bases_of(d.props)));
        if (it != recomputed.end()) d.props = it->second;
      }
      deliveries[actor_of(str(r, "to"))].push_back(std::move(d));
      continue;
    }
    if (!is_note(r, "emit") || !p.contains("window_start")) continue;

    const std::string emitter = actor_of(str(r, "from"));
    const std::int64_t ws = p.at("window_start").get<std::int64_t>();
    const std::int64_t we = p.at("window_end").get<std::int64_t>();
    const bool by_source = str(p, "group_by") == "source";
    std::vector<std::string> functions = p.at("functions").get<std::vector<std::string>>();
    const Json& ev = p.at("event");
    const std::string source = str(ev, "source");
    const Props emitted = props_of(ev);
    const auto bases = bases_of(emitted);

    std::vector<const Delivery*> inputs;
    for (const auto& d : deliveries[emitter]) {
      if (d.t < ws || d.t >= we) continue;
      if (by_source && source != emitter && d.source != source) continue;
      inputs.push_back(&d);
    }
    if (by_source && source == emitter && !inputs.empty())
      return fail(rep, i, "emit by " + emitter + " for window [" + std::to_string(ws) + ", " +
                              std::to_string(we) + ") has no source but " +
                              std::to_string(inputs.size()) + " inputs arrived");

    Props expected;
    std::optional<int> max_level;
    for (const auto& base : bases) {
      for (auto& [k, v] : expected_for(base, inputs, functions)) expected[k] = v;
      for (const auto* in : inputs)
        if (bases_of(in->props).contains(base))
          max_level = std::max(max_level.value_or(0), in->level);
    }

    for (const auto& [name, value] : expected) {
      auto it = emitted.find(name);
      if (it == emitted.end())
        return fail(rep, i, "emit by " + emitter + " at t=" + std::to_string(we) + " lacks " + name +
                                " (expected " + fmt(value) + ")");
      if (!close_enough(it->second, value))
        return fail(rep, i, "emit by " + emitter + " at t=" + std::to_string(we) + ": " + name +
                                " = " + fmt(it->second) + ", recomputed " + fmt(value));
      ++rep.checked;
    }
    for (const auto& [name, value] : emitted)
      if (!expected.contains(name))
        return fail(rep, i, "emit by " + emitter + " at t=" + std::to_string(we) +
                                " has unexpected property " + name);
    if (max_level && ev.at("level").get<int>() != *max_level + 1)
      return fail(rep, i, "emit by " + emitter + " at t=" + std::to_string(we) + " has level " +
                              std::to_string(ev.at("level").get<int>()) + ", expected " +
                              std::to_string(*max_level + 1));

    recomputed[key_of(emitter, source, ev.at("timestamp").get<std::int64_t>(), bases)] = expected;
  }
  rep.message = "checked " + std::to_string(rep.checked) + " aggregated values";
  return rep;
}

OracleReport verify_conservation(const std::vector<Json>& records) {
  OracleReport rep;
  rep.oracle = "conservation";
  struct Rec {
    std::string node;
    Units demand;
    bool live = false;
  };
  std::map<std::pair<std::string, std::int64_t>, Rec> recs;  // (manager, seq)
  std::map<std::pair<std::string, std::string>, Units> reserved;
  std::map<std::pair<std::string, std::string>, std::size_t> touched;  // -> last line

  auto check_instant = [&]() -> std::optional<std::pair<std::size_t, std::string>> {
    for (const auto& [key, line] : touched) {
      Units live;
      for (const auto& [rk, rec] : recs) {
        if (rk.first != key.first || rec.node != key.second || !rec.live) continue;
        for (const auto& [name, v] : rec.demand) live[name] += v;
      }
      std::erase_if(live, [](const auto& kv) { return kv.second == 0; });
      auto it = reserved.find(key);
      Units res = it == reserved.end() ? Units{} : it->second;
      ++rep.checked;
      if (res != live)
        return std::pair{line, "manager " + key.first + " reserves " + units_str(res) + " on " +
                                   key.second + " but live demand is " + units_str(live)};
    }
    touched.clear();
    return std::nullopt;
  };

  std::optional<std::int64_t> instant;
  for (std::size_t i = 0; i < records.size(); ++i) {
    const Json& r = records[i];
    std::int64_t t = r.at("t").get<std::int64_t>();
    if (instant && t != *instant)
      if (auto bad = check_instant()) return fail(rep, bad->first, bad->second);
    instant = t;

    const Json& p = r.at("payload");
    if (is_note(r, "deployment")) {
      auto& rec = recs[{str(p, "manager"), p.at("seq").get<std::int64_t>()}];
      rec.node = str(p, "node");
      rec.demand = units_of(p.at("demand"));
      std::string state = str(p, "state");
      rec.live = state == "deploying" || state == "running";
      touched[{str(p, "manager"), rec.node}] = i;
    } else if (is_note(r, "reservation")) {
      std::pair key{str(p, "manager"), str(p, "node")};
      reserved[key] = units_of(p.at("reserved"));
      touched[key] = i;
    }
  }
  if (auto bad = check_instant()) return fail(rep, bad->first, bad->second);
  rep.message = "checked " + std::to_string(rep.checked) + " (manager, node) balances";
  return rep;
}

OracleReport verify_repair(const std::vector<Json>& records) {
  OracleReport rep;
  rep.oracle = "repair";
  struct Episode {
    std::string manager;
    std::string failed;
    std::size_t line;
    bool closed = false;
  };
  std::map<std::pair<std::string, std::string>, Episode> episodes;  // (failed, app)
  std::map<std::string, std::pair<std::string, std::string>> open_by_app;  // app -> key
  std::map<std::string, std::set<std::string>> running;  // app -> "manager#seq"
  std::optional<std::int64_t> instant;
  std::size_t last_line = 0;

  auto check_running = [&]() -> std::optional<std::string> {
    for (const auto& [app, copies] : running)
      if (copies.size() > 1) return "app " + app + " is running " + std::to_string(copies.size()) + " times";
    return std::nullopt;
  };

  for (std::size_t i = 0; i < records.size(); ++i) {
    const Json& r = records[i];
    std::int64_t t = r.at("t").get<std::int64_t>();
    if (instant && t != *instant)
      if (auto bad = check_running()) return fail(rep, last_line, *bad);
    instant = t;
    const Json& p = r.at("payload");

    if (is_note(r, "deployment")) {
      std::string id = str(p, "manager") + "#" + std::to_string(p.at("seq").get<std::int64_t>());
      if (str(p, "state") == "running") {
        running[str(p, "app")].insert(id);
      } else {
        running[str(p, "app")].erase(id);
      }
      last_line = i;
    } else if (is_note(r, "action") && str(p, "action") == "replace-node") {
      for (const auto& app_json : p.at("apps")) {
        std::string app = app_json.get<std::string>();
        std::pair key{str(p, "failed"), app};
        if (episodes.contains(key))
          return fail(rep, i, "second replace-node for app " + app + " after failure of " + key.first);
        episodes[key] = Episode{str(p, "manager"), key.first, i};
        open_by_app[app] = key;
        ++rep.checked;
      }
    } else if (is_note(r, "action-result") && str(p, "domain") == "repair") {
      std::string app = str(p, "app");
      auto it = open_by_app.find(app);
      if (it == open_by_app.end())
        return fail(rep, i, "repair result for app " + app + " without a replace-node action");
      Episode& ep = episodes[it->second];
      if (str(p, "manager") != ep.manager)
        return fail(rep, i, "repair of " + app + " answered at " + str(p, "manager") +
                                ", action was taken by " + ep.manager);
      std::string result = str(p, "result");
      if (result == "running") {
        if (str(p, "node") == ep.failed)
          return fail(rep, i, "app " + app + " repaired onto the failed node " + ep.failed);
      } else if (result != "denied") {
        return fail(rep, i, "repair of " + app + " ended " + result);
      }
      ep.closed = true;
      open_by_app.erase(it);
    }
  }
  if (auto bad = check_running()) return fail(rep, last_line, *bad);
  for (const auto& [key, ep] : episodes)
    if (!ep.closed)
      return fail(rep, ep.line, "repair of app " + key.second + " after failure of " + key.first +
                                    " never finished");
  rep.message = "checked " + std::to_string(rep.checked) + " repaired apps";
  return rep;
}

OracleReport verify(const std::vector<Json>& records, std::string_view oracle) {
  if (oracle == "aggregation") return verify_aggregation(records);
  if (oracle == "conservation") return verify_conservation(records);
  if (oracle == "repair") return verify_repair(records);
  throw std::invalid_argument("unknown oracle '" + std::string(oracle) +
                              "' (expected aggregation, conservation or repair)");
}

}  // namespace hiermon
