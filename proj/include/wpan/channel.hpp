// Unit-disk radio channel with interval-overlap collisions and no capture.
#pragma once

#include <algorithm>
#include <cstdint>
#include <vector>

#include "wpan/cluster.hpp"
#include "wpan/time_energy.hpp"

namespace wpan {

struct Transmission {
  std::uint64_t id = 0;
  NodeId sender = 0;
  Position origin;
  SimTime start;
  SimTime end;

  bool overlaps(SimTime from, SimTime to) const { return start < to && from < end; }
};

struct Listener {
  NodeId id = 0;
  Position position;
};

struct Reception {
  NodeId receiver = 0;
  bool received = false;
};

struct ChannelModel {
  double range_m = 10.0;
  double arena_width_m = 100.0;
  double arena_height_m = 100.0;
};

class Channel {
 public:
  explicit Channel(ChannelModel model = {}) : model_(model) {}

  const ChannelModel& model() const { return model_; }

  const Transmission& begin(NodeId sender, Position origin, SimTime start, SimTime end) {
    log_.push_back(Transmission{next_id_++, sender, origin, start, end});
    return log_.back();
  }

  /// Energy detected at `where` during [from, to] from anyone but `self`.
  bool busy(NodeId self, Position where, SimTime from, SimTime to) const {
    return std::any_of(log_.begin(), log_.end(), [&](const Transmission& t) {
      return t.sender != self && t.start <= to && from < t.end &&
             in_range(t.origin, where, model_.range_m);
    });
  }

  /// Whether `tx` arrived intact at `listener`: in range, and no other
  /// transmission audible there (or sent by the listener) overlaps it.
  bool intact_at(const Transmission& tx, const Listener& listener) const {
    if (listener.id == tx.sender || !in_range(tx.origin, listener.position, model_.range_m)) return false;
    for (const auto& o : log_) {
      if (o.id == tx.id || !o.overlaps(tx.start, tx.end)) continue;
      if (o.sender == listener.id || in_range(o.origin, listener.position, model_.range_m)) return false;
    }
    return true;
  }

  /// Outcome for every listener in range; inaudible listeners are omitted.
  std::vector<Reception> deliver(const Transmission& tx, const std::vector<Listener>& listeners) const {
    std::vector<Reception> out;
    for (const auto& l : listeners) {
      if (l.id == tx.sender || !in_range(tx.origin, l.position, model_.range_m)) continue;
      out.push_back({l.id, intact_at(tx, l)});
    }
    return out;
  }

  /// Forgets transmissions that ended before `horizon`.
  void prune(SimTime horizon) {
    std::erase_if(log_, [&](const Transmission& t) { return t.end < horizon; });
  }

  std::size_t size() const { return log_.size(); }

 private:
  ChannelModel model_;
  std::vector<Transmission> log_;
  std::uint64_t next_id_ = 1;
};

}  // namespace wpan
