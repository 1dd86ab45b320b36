#include <doctest.h>

#include <random>

#include "hiermon/membership.hpp"

using namespace hiermon;
using namespace std::chrono_literals;

namespace {

NodeTable table() { return NodeTable("m", HeartbeatConfig{}); }

}  // namespace

TEST_CASE("heartbeat config invariants") {
  CHECK_NOTHROW(HeartbeatConfig{}.validate());
  CHECK_THROWS_AS((HeartbeatConfig{1000ms, 1000ms, 500ms}.validate()), std::invalid_argument);
  CHECK_THROWS_AS((HeartbeatConfig{1000ms, 3000ms, 4000ms}.validate()), std::invalid_argument);
  CHECK_THROWS_AS((HeartbeatConfig{0ms, 3000ms, 1000ms}.validate()), std::invalid_argument);
  CHECK_NOTHROW((HeartbeatConfig{1000ms, 3000ms, 3000ms}.validate()));
}

TEST_CASE("first heartbeat announces the node") {
  auto t = table();
  auto ev = t.record_heartbeat("n1", 0ms, {});
  REQUIRE(ev);
  CHECK(ev->kind == LifecycleKind::NodeAvailable);
  CHECK(ev->node == "n1");
  CHECK(ev->manager == "m");
  CHECK(t.is_available("n1"));
  CHECK_FALSE(t.record_heartbeat("n1", 1000ms, {}));
  CHECK(t.find("n1")->last_heartbeat == 1000ms);
}

TEST_CASE("sweep fails a node only once the timeout is exceeded") {
  auto t = table();
  t.record_heartbeat("n1", 0ms, {});
  CHECK(t.sweep(2500ms).empty());
  CHECK(t.sweep(3000ms).empty());
  CHECK(t.sweep(3500ms) == std::vector<NodeId>{"n1"});
  CHECK(t.find("n1")->status == NodeStatus::Failed);
  CHECK(t.sweep(10'000ms).empty());
  CHECK(t.available_nodes().empty());
}

TEST_CASE("a failed node that heartbeats again recovers") {
  auto t = table();
  t.record_heartbeat("n1", 0ms, {});
  t.sweep(4000ms);
  auto ev = t.record_heartbeat("n1", 5000ms, {});
  REQUIRE(ev);
  CHECK(ev->kind == LifecycleKind::NodeRecovered);
  CHECK(t.is_available("n1"));
}

TEST_CASE("stopped nodes leave the available set without a failure") {
  auto t = table();
  t.record_heartbeat("n1", 0ms, {});
  t.record_heartbeat("n2", 0ms, {});
  CHECK(t.mark_stopped("n1"));
  CHECK(t.available_nodes() == std::vector<NodeId>{"n2"});
  CHECK(t.sweep(5000ms) == std::vector<NodeId>{"n2"});
}

TEST_CASE("heartbeats carry the capacity snapshot") {
  auto t = table();
  t.record_heartbeat("n1", 0ms, {false, {{kCpu, 4}}, {{kCpu, 3}}, {"web"}});
  CHECK(t.find("n1")->capacity.max_free.at(kCpu) == 3);
  CHECK(t.find("n1")->capacity.installed == std::vector<AppId>{"web"});
}

TEST_CASE("property: Failed iff silence exceeded the timeout at some sweep") {
  std::mt19937_64 rng(5);
  for (int round = 0; round < 50; ++round) {
    auto t = table();
    std::map<NodeId, SimTime> last;
    std::map<NodeId, bool> failed;
    for (SimTime now = 0ms; now <= 30'000ms; now += 250ms) {
      for (const char* n : {"a", "b", "c"}) {
        if (rng() % 4 == 0) {
          bool was_failed = failed[n];
          auto ev = t.record_heartbeat(n, now, {});
          CHECK(ev.has_value() == (!last.contains(n) || was_failed));
          last[n] = now;
          failed[n] = false;
        }
      }
      if (now.count() % 1000 == 0) {
        std::vector<NodeId> expect;
        for (auto& [n, at] : last)
          if (!failed[n] && now - at > 3000ms) {
            expect.push_back(n);
            failed[n] = true;
          }
        CHECK(t.sweep(now) == expect);
      }
    }
  }
}
