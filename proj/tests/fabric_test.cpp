#include <doctest.h>

#include <random>
#include <sstream>

#include "support.hpp"

using namespace hiermon;
using namespace hiermon::test;
using namespace std::chrono_literals;

namespace {

struct Net {
  Fabric fabric{7};
  std::vector<Seen> log;
  Probe* a = nullptr;
  Probe* b = nullptr;

  Net() {
    a = static_cast<Probe*>(&fabric.add_actor("a", std::make_unique<Probe>(&log)));
    b = static_cast<Probe*>(&fabric.add_actor("b", std::make_unique<Probe>(&log)));
    fabric.run_until(0ms);
  }
};

}  // namespace

TEST_CASE("timer fires after its delay") {
  Net net;
  net.fabric.schedule({"a", "x"}, 1000ms, ping("tick"));
  net.fabric.run_until(999ms);
  CHECK(net.log.empty());
  net.fabric.run_until(1000ms);
  REQUIRE(net.log.size() == 1);
  CHECK(net.log[0].at == 1000ms);
  CHECK(net.log[0].timer);
}

TEST_CASE("zero-delay timer runs after events already queued for that instant") {
  Net net;
  net.fabric.run_until(5ms);
  net.fabric.schedule({"a", "x"}, 0ms, ping("first"));
  net.fabric.schedule({"b", "x"}, 0ms, ping("second"));
  net.fabric.run_until(5ms);
  REQUIRE(net.log.size() == 2);
  CHECK(net.log[0].label == "first");
  CHECK(net.log[1].label == "second");
  CHECK(net.log[1].at == 5ms);
}

TEST_CASE("schedule rejects unknown actors and negative delays") {
  Net net;
  CHECK_THROWS_AS(net.fabric.schedule({"ghost", "x"}, 1ms, ping("t")), FabricError);
  CHECK_THROWS_AS(net.fabric.schedule({"a", "x"}, -1ms, ping("t")), FabricError);
}

TEST_CASE("cancelled timers never fire") {
  Net net;
  auto id = net.fabric.schedule({"a", "x"}, 10ms, ping("t"));
  CHECK(net.fabric.cancel(id));
  net.fabric.run_until(100ms);
  CHECK(net.log.empty());
}

TEST_CASE("send uses link latency and records the delivery") {
  Net net;
  net.fabric.send({"a", "p"}, {"b", "q"}, ping("hello"));
  auto trace = net.fabric.run_until(100ms);
  REQUIRE(net.log.size() == 1);
  CHECK(net.log[0].at == 10ms);
  REQUIRE(trace.size() == 1);
  CHECK(trace[0].kind == TraceKind::Deliver);
  CHECK(trace[0].from == "a/p");
  CHECK(trace[0].to == "b/q");
  CHECK(trace[0].time == 10ms);
}

TEST_CASE("per-link latency overrides the default") {
  Net net;
  net.fabric.set_latency("a", "b", 25ms);
  CHECK(net.fabric.latency("a", "b") == 25ms);
  CHECK(net.fabric.latency("b", "a") == kDefaultLatency);
  CHECK(net.fabric.latency("a", "a") == 0ms);
}

TEST_CASE("unknown destination is traced, not fatal") {
  Net net;
  net.fabric.send({"a", "p"}, {"ghost", "q"}, ping("x"));
  const auto& trace = net.fabric.trace();
  REQUIRE(!trace.empty());
  CHECK(trace.back().kind == TraceKind::Drop);
  CHECK(trace.back().reason == "unknown-destination");
}

TEST_CASE("partition drops traffic in both directions while active") {
  Net net;
  net.fabric.inject(PartitionFault{{"a"}, {"b"}, 100ms, 200ms});
  net.fabric.run_until(150ms);
  net.fabric.send({"a", "p"}, {"b", "q"}, ping("x"));
  net.fabric.send({"b", "p"}, {"a", "q"}, ping("y"));
  net.fabric.run_until(199ms);
  CHECK(net.log.empty());
  int partition_drops = 0;
  for (const auto& r : net.fabric.trace())
    if (r.kind == TraceKind::Drop && r.reason == "partition") ++partition_drops;
  CHECK(partition_drops == 2);
  net.fabric.run_until(200ms);
  net.fabric.send({"a", "p"}, {"b", "q"}, ping("z"));
  net.fabric.run_until(300ms);
  REQUIRE(net.log.size() == 1);
  CHECK(net.log[0].label == "z");
}

TEST_CASE("loss draws replay from an independent generator with the same seed") {
  const std::uint64_t seed = 42;
  Fabric fabric(seed);
  std::vector<Seen> log;
  fabric.add_actor("a", std::make_unique<Probe>(&log));
  fabric.add_actor("b", std::make_unique<Probe>(&log));
  fabric.inject(DropRateFault{"a", "b", 0.5, 0ms});
  fabric.run_until(0ms);
  for (int i = 0; i < 1000; ++i) fabric.send({"a", "p"}, {"b", "q"}, ping("m"));
  fabric.run_until(1000ms);

  std::size_t dropped = 0;
  for (const auto& r : fabric.trace())
    if (r.kind == TraceKind::Drop && r.reason == "loss") ++dropped;

  std::mt19937_64 replay(seed);
  std::size_t expected = 0;
  for (int i = 0; i < 1000; ++i) {
    double u = static_cast<double>(replay() >> 11) / 9007199254740992.0;
    if (u < 0.5) ++expected;
  }
  CHECK(dropped == expected);
  CHECK(log.size() == 1000 - expected);
  CHECK(expected > 400);
  CHECK(expected < 600);
}

TEST_CASE("drop probability outside [0,1] is rejected") {
  Net net;
  CHECK_THROWS_AS(net.fabric.inject(DropRateFault{"a", "b", 1.5, 0ms}), FabricError);
}

TEST_CASE("a crashed actor receives nothing after the crash instant") {
  Net net;
  net.fabric.inject(CrashFault{"b", 50ms});
  net.fabric.schedule({"b", "x"}, 60ms, ping("late-timer"));
  net.fabric.run_until(45ms);
  net.fabric.send({"a", "p"}, {"b", "q"}, ping("in-flight"));
  net.fabric.run_until(40'000ms);
  CHECK(net.log.empty());
  CHECK(net.fabric.is_crashed("b"));
  bool crash_traced = false;
  for (const auto& r : net.fabric.trace()) {
    if (r.kind == TraceKind::Crash) crash_traced = r.time == 50ms;
    CHECK_FALSE((r.kind == TraceKind::Deliver && r.to.starts_with("b/") && r.time > 50ms));
  }
  CHECK(crash_traced);
}

TEST_CASE("restart brings the actor back and discards its old timers") {
  Net net;
  net.fabric.schedule({"b", "x"}, 500ms, ping("old"));
  net.fabric.inject(CrashFault{"b", 100ms});
  net.fabric.inject(RestartFault{"b", 200ms});
  net.fabric.run_until(1000ms);
  CHECK(net.b->starts == 2);
  CHECK(net.log.empty());
  net.fabric.send({"a", "p"}, {"b", "q"}, ping("new"));
  net.fabric.run_until(2000ms);
  REQUIRE(net.log.size() == 1);
  CHECK(net.log[0].label == "new");
}

TEST_CASE("run_until on an empty queue only moves the clock") {
  Fabric fabric(1);
  auto trace = fabric.run_until(100ms);
  CHECK(trace.empty());
  CHECK(fabric.now() == 100ms);
}

TEST_CASE("trace lines keep a fixed key order") {
  TraceRecord r{12ms, TraceKind::Deliver, "a/p", "b/q", Json{{"type", "x"}}, ""};
  CHECK(to_line(r) ==
        R"({"t":12,"kind":"deliver","from":"a/p","to":"b/q","payload":{"type":"x"},"reason":""})");
}

namespace {

std::string random_traffic(std::uint64_t seed) {
  Fabric fabric(seed);
  std::vector<Seen> log;
  for (const char* id : {"a", "b", "c"}) fabric.add_actor(id, std::make_unique<Probe>(&log));
  fabric.inject(DropRateFault{"*", "c", 0.3, 0ms});
  fabric.set_latency("a", "c", 3ms);
  fabric.run_until(0ms);
  const char* ids[] = {"a", "b", "c"};
  for (int step = 0; step < 200; ++step) {
    auto from = ids[fabric.next_random() % 3];
    auto to = ids[fabric.next_random() % 3];
    if (fabric.next_random() % 4 == 0) fabric.schedule({to, "t"}, Duration(fabric.next_random() % 20), ping("t"));
    else fabric.send({from, "p"}, {to, "q"}, ping("echo"));
    fabric.run_until(fabric.now() + Duration(fabric.next_random() % 7));
  }
  fabric.run_until(fabric.now() + 1000ms);
  std::ostringstream out;
  write_trace(out, fabric.trace());
  return out.str();
}

}  // namespace

TEST_CASE("property: equal seeds give byte-identical traces") {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) CHECK(random_traffic(seed) == random_traffic(seed));
  CHECK(random_traffic(1) != random_traffic(2));
}

TEST_CASE("property: causality and non-decreasing time on random traffic") {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    Fabric fabric(seed);
    std::vector<Seen> log;
    for (const char* id : {"a", "b", "c"}) fabric.add_actor(id, std::make_unique<Probe>(&log));
    fabric.set_latency("b", "c", 17ms);
    fabric.run_until(0ms);
    const char* ids[] = {"a", "b", "c"};
    for (int step = 0; step < 300; ++step) {
      fabric.send({ids[step % 3], "p"}, {ids[fabric.next_random() % 3], "q"}, ping("echo"));
      fabric.run_until(fabric.now() + Duration(fabric.next_random() % 5));
    }
    fabric.run_until(fabric.now() + 100ms);
    SimTime last{0};
    for (const auto& r : fabric.trace()) {
      CHECK(r.time >= last);
      last = r.time;
    }
    for (std::size_t i = 1; i < log.size(); ++i) CHECK(log[i].at >= log[i - 1].at);
    for (const auto& seen : log)
      if (!seen.timer) CHECK(seen.at >= seen.sent);
  }
}
