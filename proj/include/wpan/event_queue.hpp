// Deterministic discrete-event queue ordered by (time, seq).
#pragma once

#include <cstdint>
#include <functional>
#include <queue>
#include <stdexcept>
#include <string>
#include <vector>

#include "wpan/superframe.hpp"
#include "wpan/time_energy.hpp"

namespace wpan {

enum class EventKind : std::uint8_t {
  BeaconTx,
  FrameTxStart,
  FrameTxEnd,
  Cca,
  Wake,
  Sleep,
  MobilityTick,
  AppPacket,
  GtsWindow,
  DeadlineExpiry,
};

inline const char* to_string(EventKind k) {
  switch (k) {
    case EventKind::BeaconTx: return "beacon-tx";
    case EventKind::FrameTxStart: return "frame-tx-start";
    case EventKind::FrameTxEnd: return "frame-tx-end";
    case EventKind::Cca: return "cca";
    case EventKind::Wake: return "wake";
    case EventKind::Sleep: return "sleep";
    case EventKind::MobilityTick: return "mobility-tick";
    case EventKind::AppPacket: return "app-packet";
    case EventKind::GtsWindow: return "gts-window";
    case EventKind::DeadlineExpiry: return "deadline-expiry";
  }
  return "?";
}

struct Event {
  SimTime time;
  std::uint64_t seq = 0;
  EventKind kind = EventKind::Wake;
  NodeId node = -1;
  std::function<void()> action;
  std::string detail;
};

class EventQueue {
 public:
  SimTime now() const { return now_; }
  bool empty() const { return heap_.empty(); }
  std::size_t size() const { return heap_.size(); }
  std::uint64_t executed() const { return executed_; }

  std::uint64_t schedule(SimTime at, EventKind kind, NodeId node, std::function<void()> action,
                         std::string detail = {}) {
    if (at < now_) throw std::logic_error("event scheduled in the past");
    const auto seq = next_seq_++;
    heap_.push(Event{at, seq, kind, node, std::move(action), std::move(detail)});
    return seq;
  }

  /// Runs every event with time <= horizon. `observer` sees each event before
  /// it executes.
  template <class Observer>
  void run_until(SimTime horizon, Observer&& observer) {
    while (!heap_.empty() && heap_.top().time <= horizon) {
      Event e = heap_.top();
      heap_.pop();
      same_instant_ = e.time == now_ ? same_instant_ + 1 : 0;
      if (same_instant_ > kStormLimit) throw std::logic_error("event storm: simulated time stopped advancing");
      now_ = e.time;
      observer(e);
      ++executed_;
      if (e.action) e.action();
    }
    if (now_ < horizon) now_ = horizon;
  }

  void run_until(SimTime horizon) {
    run_until(horizon, [](const Event&) {});
  }

 private:
  struct Later {
    bool operator()(const Event& a, const Event& b) const {
      if (a.time != b.time) return a.time > b.time;
      return a.seq > b.seq;
    }
  };
  std::priority_queue<Event, std::vector<Event>, Later> heap_;
  SimTime now_;
  std::uint64_t next_seq_ = 0;
  std::uint64_t executed_ = 0;
  std::uint64_t same_instant_ = 0;
  static constexpr std::uint64_t kStormLimit = 1'000'000;
};

}  // namespace wpan
