#pragma once

// Shared fixtures for the unit tests.

#include <filesystem>
#include <string>
#include <vector>

#include "hiermon/fabric.hpp"
#include "hiermon/messages.hpp"

namespace hiermon::test {

inline std::filesystem::path source_dir() { return HIERMON_SOURCE_DIR; }

/// Payload labelled with a string so tests can follow individual messages.
inline Payload ping(std::string label) { return msg::wrap(msg::ReleaseCommand{std::move(label)}); }

inline std::string label_of(const Payload& p) {
  const auto* body = msg::unwrap<msg::ReleaseCommand>(p);
  return body == nullptr ? std::string(p->type()) : body->app;
}

struct Seen {
  SimTime at;
  std::string from;
  std::string label;
  bool timer = false;
  SimTime sent{0};
};

/// Records what it receives and answers "echo" with "pong".
class Probe : public Actor {
 public:
  explicit Probe(std::vector<Seen>* log) : log_(log) {}

  void on_start(Fabric&) override { ++starts; }
  void on_message(Fabric& fabric, const Envelope& env) override {
    log_->push_back({fabric.now(), env.from.actor, label_of(env.payload), false, env.send_time});
    if (label_of(env.payload) == "echo") fabric.send(env.to, env.from, ping("pong"));
  }
  void on_timer(Fabric& fabric, TimerId, const Envelope& env) override {
    log_->push_back({fabric.now(), env.from.actor, label_of(env.payload), true, env.send_time});
  }

  int starts = 0;

 private:
  std::vector<Seen>* log_;
};

}  // namespace hiermon::test
