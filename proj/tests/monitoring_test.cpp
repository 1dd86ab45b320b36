#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "hiermon/monitoring.hpp"

using namespace hiermon;
using namespace std::chrono_literals;

namespace {

Registration producer(std::string actor, std::set<std::string> offers, SimTime at,
                      Duration ttl = 5000ms) {
  return Registration{{std::move(actor), "producer"}, RegistrationKind::Producer, std::move(offers), at, ttl};
}

MetricEvent raw(std::string source, SimTime t, double cpu) {
  return MetricEvent{std::move(source), t, {{"cpu", cpu}}, 0};
}

bool close_to(double a, double b) { return std::abs(a - b) <= 1e-9 * std::max(1.0, std::abs(b)); }

}  // namespace

TEST_CASE("registration is visible strictly inside its ttl") {
  Directory d;
  d.register_subject(producer("n1", {"cpu"}, 0ms));
  CHECK(d.lookup({"cpu"}, 4000ms).size() == 1);
  CHECK(d.lookup({"cpu"}, 4999ms).size() == 1);
  CHECK(d.lookup({"cpu"}, 5000ms).empty());
  CHECK(d.lookup({"cpu"}, 6000ms).empty());
}

TEST_CASE("refresh restarts the ttl and keeps the id") {
  Directory d;
  auto id = d.register_subject(producer("n1", {"cpu"}, 0ms));
  CHECK(d.register_subject(producer("n1", {"cpu"}, 4000ms)) == id);
  CHECK(d.lookup({"cpu"}, 8000ms).size() == 1);
  CHECK(d.lookup({"cpu"}, 9000ms).empty());
}

TEST_CASE("lookup matches offered sets and keeps registration order") {
  Directory d;
  d.register_subject(producer("n2", {"cpu"}, 0ms));
  d.register_subject(producer("n1", {"mem"}, 0ms));
  d.register_subject(producer("n3", {"cpu", "disk"}, 0ms));
  d.register_subject(producer("n0", {"cpu"}, 0ms));
  auto found = d.lookup({"cpu"}, 10ms);
  REQUIRE(found.size() == 3);
  CHECK(found[0].actor == "n2");
  CHECK(found[1].actor == "n3");
  CHECK(found[2].actor == "n0");
  CHECK(d.lookup({"mem"}, 10ms).size() == 1);
  CHECK(d.lookup({"net"}, 10ms).empty());
}

TEST_CASE("consumers are not returned by lookup") {
  Directory d;
  auto reg = producer("c", {"cpu"}, 0ms);
  reg.kind = RegistrationKind::Consumer;
  d.register_subject(reg);
  CHECK(d.lookup({"cpu"}, 1ms).empty());
}

TEST_CASE("non-positive ttl is rejected") {
  Directory d;
  CHECK_THROWS_AS(d.register_subject(producer("n1", {"cpu"}, 0ms, 0ms)), std::invalid_argument);
}

TEST_CASE("property: visible(t) iff some refresh lies in (t - ttl, t]") {
  std::mt19937_64 rng(11);
  for (int round = 0; round < 30; ++round) {
    Directory d;
    std::vector<SimTime> refreshes;
    SimTime now{0};
    for (int step = 0; step < 200; ++step) {
      now += Duration(static_cast<std::int64_t>(rng() % 900));
      if (rng() % 3 == 0) {
        d.register_subject(producer("p", {"cpu"}, now, 2000ms));
        refreshes.push_back(now);
      }
      if (rng() % 5 == 0) d.purge(now);
      bool expected = std::any_of(refreshes.begin(), refreshes.end(), [&](SimTime r) {
        return r > now - 2000ms && r <= now;
      });
      CHECK((d.lookup({"cpu"}, now).size() == 1) == expected);
    }
  }
}

TEST_CASE("aggregate names round-trip") {
  CHECK(aggregate_name("cpu", AggFunction::Mean) == "cpu_mean");
  auto [base, fn] = split_aggregate_name("cpu_count");
  CHECK(base == "cpu");
  CHECK(fn == AggFunction::Count);
  auto [plain, none] = split_aggregate_name("cpu");
  CHECK(plain == "cpu");
  CHECK_FALSE(none);
}

TEST_CASE("aggregation spec invariants") {
  AggregationSpec s;
  CHECK_NOTHROW(s.validate());
  s.functions.clear();
  CHECK_THROWS_AS(s.validate(), std::invalid_argument);
  AggregationSpec zero;
  zero.window = 0ms;
  CHECK_THROWS_AS(zero.validate(), std::invalid_argument);
}

TEST_CASE("window mean of two readings") {
  WindowAggregator agg("m1", AggregationSpec{}, {"cpu"}, 1);
  agg.add(raw("n1", 1000ms, 0.2), 1010ms);
  agg.add(raw("n2", 1000ms, 0.4), 1010ms);
  auto out = agg.close_window(5000ms);
  REQUIRE(out.size() == 1);
  CHECK(close_to(*out[0].get("cpu_mean"), 0.3));
  CHECK(*out[0].get("cpu_count") == 2.0);
  CHECK(*out[0].get("cpu_max") == 0.4);
  CHECK(*out[0].get("cpu_min") == 0.2);
  CHECK(out[0].level == 1);
  CHECK(out[0].source == "m1");
  CHECK(out[0].timestamp == 5000ms);
}

TEST_CASE("empty window emits only a zero count") {
  WindowAggregator agg("m1", AggregationSpec{}, {"cpu"}, 2);
  auto out = agg.close_window(5000ms);
  REQUIRE(out.size() == 1);
  REQUIRE(out[0].properties.size() == 1);
  CHECK(out[0].properties[0] == Property{"cpu_count", 0.0});
  CHECK(out[0].level == 2);
}

TEST_CASE("windows are closed-open") {
  WindowAggregator agg("m1", AggregationSpec{}, {"cpu"}, 1);
  agg.add(raw("n1", 0ms, 0.1), 0ms);
  agg.add(raw("n1", 0ms, 0.9), 5000ms);
  auto first = agg.close_window(5000ms);
  CHECK(*first[0].get("cpu_count") == 1.0);
  auto second = agg.close_window(10'000ms);
  CHECK(*second[0].get("cpu_count") == 1.0);
  CHECK(*second[0].get("cpu_mean") == 0.9);
}

TEST_CASE("roll-up of summaries: mean of means, summed counts, next level") {
  WindowAggregator agg("boot", AggregationSpec{}, {"cpu"}, 2);
  agg.add(MetricEvent{"m1", 5000ms, {{"cpu_mean", 0.2}, {"cpu_max", 0.3}, {"cpu_min", 0.1}, {"cpu_count", 10}}, 1},
          5010ms);
  agg.add(MetricEvent{"m2", 5000ms, {{"cpu_mean", 0.6}, {"cpu_max", 0.9}, {"cpu_min", 0.5}, {"cpu_count", 10}}, 1},
          5010ms);
  auto out = agg.close_window(10'000ms);
  REQUIRE(out.size() == 1);
  CHECK(close_to(*out[0].get("cpu_mean"), 0.4));
  CHECK(*out[0].get("cpu_max") == 0.9);
  CHECK(*out[0].get("cpu_min") == 0.1);
  CHECK(*out[0].get("cpu_count") == 20.0);
  CHECK(out[0].level == 2);
}

TEST_CASE("uniform leaf values give that value at every level") {
  const double v = 0.37;
  WindowAggregator m1("m1", AggregationSpec{}, {"cpu"}, 1);
  WindowAggregator m2("m2", AggregationSpec{}, {"cpu"}, 1);
  WindowAggregator boot("boot", AggregationSpec{}, {"cpu"}, 2);
  for (int s = 0; s < 5; ++s) {
    SimTime t{1000 * s};
    m1.add(raw("n3", t, v), t);
    m1.add(raw("n4", t, v), t);
    m2.add(raw("n5", t, v), t);
  }
  boot.add(m1.close_window(5000ms)[0], 5010ms);
  boot.add(m2.close_window(5000ms)[0], 5010ms);
  auto top = boot.close_window(10'000ms);
  CHECK(close_to(*top[0].get("cpu_mean"), v));
  CHECK(*top[0].get("cpu_count") == 15.0);
}

TEST_CASE("group by source emits one summary per source") {
  AggregationSpec spec;
  spec.group_by = GroupBy::Source;
  spec.functions = {AggFunction::Mean, AggFunction::Last};
  WindowAggregator agg("m1", spec, {"cpu"}, 1);
  agg.add(raw("n2", 0ms, 0.5), 0ms);
  agg.add(raw("n1", 0ms, 0.1), 0ms);
  agg.add(raw("n1", 1000ms, 0.3), 1000ms);
  auto out = agg.close_window(5000ms);
  REQUIRE(out.size() == 2);
  CHECK(out[0].source == "n1");
  CHECK(close_to(*out[0].get("cpu_mean"), 0.2));
  CHECK(*out[0].get("cpu_last") == 0.3);
  CHECK_FALSE(out[0].get("cpu_count"));
  CHECK(out[1].source == "n2");
}

TEST_CASE("brute force: random raw inputs against a direct recomputation") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> value(0.0, 1.0);
  for (int round = 0; round < 200; ++round) {
    AggregationSpec spec;
    spec.functions = {AggFunction::Mean, AggFunction::Max, AggFunction::Min, AggFunction::Count,
                      AggFunction::Last};
    WindowAggregator agg("m", spec, {"cpu"}, 1);
    std::vector<std::pair<SimTime, double>> inputs;
    int n = static_cast<int>(rng() % 12);
    for (int i = 0; i < n; ++i) {
      SimTime at{static_cast<std::int64_t>(rng() % 15'000)};
      double v = value(rng);
      inputs.emplace_back(at, v);
      agg.add(raw("n" + std::to_string(rng() % 3), at, v), at);
    }
    for (SimTime close = 5000ms; close <= 15'000ms; close += 5000ms) {
      std::vector<double> in;
      for (auto& [at, v] : inputs)
        if (at >= close - 5000ms && at < close) in.push_back(v);
      auto out = agg.close_window(close);
      REQUIRE(out.size() == 1);
      const auto& e = out[0];
      CHECK(*e.get("cpu_count") == static_cast<double>(in.size()));
      if (in.empty()) {
        CHECK(e.properties.size() == 1);
        continue;
      }
      double sum = 0;
      for (double v : in) sum += v;
      CHECK(close_to(*e.get("cpu_mean"), sum / static_cast<double>(in.size())));
      CHECK(*e.get("cpu_max") == *std::max_element(in.begin(), in.end()));
      CHECK(*e.get("cpu_min") == *std::min_element(in.begin(), in.end()));
      CHECK(*e.get("cpu_last") == in.back());
      CHECK(e.level == 1);
    }
  }
}

TEST_CASE("subscribers expire unless renewed") {
  SubscriberSet s;
  s.subscribe({"m1", "monitor"}, 0ms, 3000ms);
  s.subscribe({"m2", "monitor"}, 0ms, 3000ms);
  CHECK(s.live(2999ms).size() == 2);
  s.subscribe({"m1", "monitor"}, 2000ms, 3000ms);
  auto live = s.live(3000ms);
  REQUIRE(live.size() == 1);
  CHECK(live[0].actor == "m1");
}

TEST_CASE("metric events keep property names unique") {
  MetricEvent e;
  e.set("cpu", 0.1);
  e.set("mem", 0.2);
  e.set("cpu", 0.3);
  CHECK(e.properties.size() == 2);
  CHECK(*e.get("cpu") == 0.3);
  CHECK(metric_from_json(to_json(e)).properties == e.properties);
}
