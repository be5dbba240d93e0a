// Single-PAN beacon-enabled MAC simulation: one coordinator (node 0) and its
// devices, slotted CSMA-CA in the CAP, GTS traffic in the CFP, indirect
// downlink transfers, and tracked/untracked beacon synchronization.
#pragma once

#include <algorithm>
#include <deque>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "wpan/channel.hpp"
#include "wpan/csma.hpp"
#include "wpan/event_queue.hpp"
#include "wpan/metrics.hpp"
#include "wpan/scenario.hpp"
#include "wpan/sim_common.hpp"
#include "wpan/superframe.hpp"
#include "wpan/sync_energy.hpp"

namespace wpan {

struct RunOutput {
  MetricsReport metrics;
  std::string trace;
};

class StarSimulation {
 public:
  StarSimulation(const Scenario& sc, std::uint64_t seed, bool keep_trace = false)
      : sc_(sc), seed_(seed), trace_(keep_trace), channel_(sc.channel) {
    bi_ = sc_.beacon_interval();
    offset_ = SimTime{sc_.cluster_offset};
    horizon_ = offset_ + bi_ * sc_.duration_intervals;
    max_beacon_air_ = frame_airtime(beacon_mpdu_bytes(kMaxGts, kMaxPending), sc_.phy);
    ack_air_ = frame_airtime(sc_.ack_bytes, sc_.phy);
    turnaround_ = SimTime{sc_.phy.turnaround};
    ub_ = SimTime{sc_.phy.unit_backoff};

    schedule_ = derive_schedule(sc_.superframe, sc_.phy, {});
    for (const auto& g : sc_.gts_requests) {
      auto r = allocate_gts(schedule_, GtsRequest{g.node, g.direction, g.slots}, sc_.phy);
      if (auto* denial = std::get_if<GtsDenial>(&r)) throw ConfigError("gts_requests", to_string(*denial));
    }
    gts_unused_.assign(schedule_.gts_list.size(), 0);
    gts_used_.assign(schedule_.gts_list.size(), false);

    for (const auto& n : sc_.nodes) {
      Node node;
      node.id = n.id;
      node.pos = n.position;
      node.mode = sc_.sync_of(n.id);
      node.rng = node_stream(seed_, n.id);
      index_[n.id] = nodes_.size();
      nodes_.push_back(std::move(node));
    }
  }

  RunOutput run() {
    start();
    queue_.run_until(horizon_, [this](const Event& e) { trace_.record(e); });
    return finish();
  }

 private:
  static constexpr std::size_t kMaxPending = 7;

  enum class FrameType : std::uint8_t { Beacon, Data, Ack, DataRequest };

  struct BeaconPayload {
    SimTime start;
    SuperframeSchedule schedule;
  };

  struct Frame {
    FrameType type = FrameType::Data;
    NodeId src = 0;
    NodeId dst = kBroadcast;
    std::uint64_t packet = 0;
    bool pending = false;
    bool gts = false;
    std::shared_ptr<const BeaconPayload> beacon;
  };

  struct Packet {
    std::uint64_t id = 0;  // 0 marks a data-request command
    NodeId src = 0;
    NodeId dst = 0;
    int size = 0;
    SimTime created;
    std::optional<SimTime> deadline;
    bool gts = false;
    int retries = 0;
  };

  struct PacketState {
    SimTime created;
    int size = 0;
    bool delivered = false;
    bool closed = false;  // delivered, failed or expired
  };

  enum class Activity : std::uint8_t {
    Asleep,
    BeaconListen,
    Acquire,
    IdleListen,
    Csma,
    Transmit,
    AwaitAck,
    AwaitData,
    SendAck,
  };

  struct Node {
    NodeId id = 0;
    Position pos;
    SyncMode mode = SyncMode::Tracked;
    Radio radio;
    std::mt19937_64 rng;
    std::int64_t frames_tx = 0;
    std::int64_t frames_rx = 0;
    std::int64_t caf = 0;

    // device side
    Activity act = Activity::Asleep;
    std::uint64_t token = 0;
    std::deque<Packet> capq;
    std::deque<Packet> gtsq;
    bool attempt_active = false;
    bool paused = false;
    CsmaAttempt attempt;
    int backoff_left = 0;
    bool have_sync = false;
    SimTime cur_beacon;
    SimTime synced_until;
    std::shared_ptr<const BeaconPayload> view;
    std::optional<SimTime> gts_event_at;
    SimTime last_beacon_heard{-1};
    SimTime wake_pending_for{-1};
    int lost = 0;
    bool tracking = true;
    std::uint64_t awaited_packet = 0;
    bool gts_in_flight = false;
    SimTime deferred_in{-1};  // beacon of the CAP that could not fit the head frame

    // coordinator side
    std::map<NodeId, std::deque<std::pair<Packet, std::int64_t>>> pending;
    std::optional<NodeId> indirect_to;
  };

  // ---------------------------------------------------------------------
  // helpers

  Node& node(NodeId id) { return nodes_[index_.at(id)]; }
  Node& coord() { return node(0); }

  SimTime beacon_at(std::int64_t k) const { return offset_ + bi_ * k; }
  std::int64_t interval_of(SimTime t) const { return t < offset_ ? -1 : (t - offset_).ticks / bi_.ticks; }

  void set_radio(Node& n, RadioState s) { n.radio.set(s, queue_.now(), sc_.power, sc_.phy); }

  void schedule(SimTime at, EventKind kind, NodeId who, std::function<void()> fn, std::string detail = {}) {
    if (at > horizon_) return;
    queue_.schedule(at, kind, who, std::move(fn), std::move(detail));
  }

  std::uint64_t next_packet_id() { return packets_.size() + 1; }

  void close_packet(std::uint64_t id, bool delivered, bool expired) {
    if (id == 0) return;
    auto& p = packets_.at(id - 1);
    if (p.closed) return;
    p.closed = true;
    if (delivered) {
      p.delivered = true;
      ++report_.delivered;
      report_.latencies_ms.push_back(sc_.phy.to_ms(queue_.now() - p.created));
      report_.delivered_bits += p.size * 8.0;
    } else if (expired) {
      ++report_.expired;
    } else {
      ++report_.failed;
    }
  }

  SimTime data_transaction(const Packet& p) const {
    if (p.id == 0)
      return frame_airtime(sc_.data_request_bytes, sc_.phy) + turnaround_ + ack_air_ + turnaround_ +
             frame_airtime(127, sc_.phy) + turnaround_ + ack_air_;
    return frame_airtime(p.size, sc_.phy) + turnaround_ + ack_air_;
  }

  // ---------------------------------------------------------------------
  // setup

  void start() {
    for (auto& n : nodes_) n.radio.since = SimTime{0};
    schedule(beacon_at(0), EventKind::BeaconTx, 0, [this] { coordinator_beacon(0); }, "k=0");
    for (auto& n : nodes_) {
      if (n.id == 0) continue;
      if (n.mode == SyncMode::Tracked) schedule_wake(n, beacon_at(0));
    }
    for (std::size_t i = 0; i < sc_.workload.size(); ++i) {
      const auto& w = sc_.workload[i];
      for (const auto& a : generate_arrivals(w, i, sc_, offset_, horizon_, seed_)) {
        schedule(a.at, EventKind::AppPacket, w.src, [this, i] { app_packet(i); }, "workload=" + std::to_string(i));
      }
    }
  }

  // ---------------------------------------------------------------------
  // transmission and reception

  void transmit(Node& sender, Frame f, SimTime air, std::function<void()> after) {
    set_radio(sender, RadioState::Tx);
    ++sender.frames_tx;
    const Transmission tx = channel_.begin(sender.id, sender.pos, queue_.now(), queue_.now() + air);
    auto shared = std::make_shared<Frame>(std::move(f));
    schedule(
        tx.end, EventKind::FrameTxEnd, sender.id,
        [this, tx, shared, after = std::move(after)] {
          after();
          resolve(tx, *shared);
          channel_.prune(queue_.now() - SimTime{4096});
        },
        frame_detail(*shared));
  }

  static std::string frame_detail(const Frame& f) {
    const char* names[] = {"beacon", "data", "ack", "data-request"};
    std::string d = names[static_cast<int>(f.type)];
    d += " dst=" + std::to_string(f.dst);
    if (f.packet) d += " pkt=" + std::to_string(f.packet);
    if (f.gts) d += " gts";
    if (f.pending) d += " pending";
    return d;
  }

  void resolve(const Transmission& tx, const Frame& f) {
    for (auto& n : nodes_) {
      if (n.id == tx.sender || !in_range(tx.origin, n.pos, channel_.model().range_m)) continue;
      const bool intended = f.type == FrameType::Beacon || f.dst == n.id;
      if (!n.radio.listening_since(tx.start)) continue;
      if (!channel_.intact_at(tx, Listener{n.id, n.pos})) {
        if (intended) {
          ++report_.collisions;
          if (f.gts) ++report_.gts_collisions;
        }
        continue;
      }
      if (!intended) continue;
      ++n.frames_rx;
      if (n.id == 0)
        coordinator_receive(f);
      else
        device_receive(n, f);
    }
  }

  // ---------------------------------------------------------------------
  // coordinator

  void coordinator_beacon(std::int64_t k) {
    auto& c = coord();
    // Drop indirect frames that waited too long.
    std::vector<NodeId> listed;
    for (auto& [dst, q] : c.pending) {
      while (!q.empty() && k - q.front().second >= sc_.pending_expiry_intervals) {
        close_packet(q.front().first.id, false, true);
        q.pop_front();
      }
      if (!q.empty() && listed.size() < kMaxPending) listed.push_back(dst);
    }
    auto payload = std::make_shared<BeaconPayload>();
    payload->start = queue_.now();
    payload->schedule = derive_schedule(sc_.superframe, sc_.phy, schedule_.gts_list, listed);
    const SimTime air = payload->schedule.beacon_window.length();
    const SimTime active_end = queue_.now() + schedule_.active_duration;

    Frame f{FrameType::Beacon, 0, kBroadcast, 0, false, false, payload};
    transmit(c, std::move(f), air, [this] { set_radio(coord(), RadioState::Rx); });
    schedule(active_end, EventKind::Sleep, 0, [this, k] { coordinator_active_end(k); }, "active-end");
    if (k + 1 < sc_.duration_intervals)
      schedule(beacon_at(k + 1), EventKind::BeaconTx, 0, [this, k] { coordinator_beacon(k + 1); },
               "k=" + std::to_string(k + 1));
  }

  void coordinator_active_end(std::int64_t) {
    auto& c = coord();
    if (c.radio.state != RadioState::Tx) set_radio(c, RadioState::Sleep);
    // GTS bookkeeping: count idle windows and reclaim stale descriptors.
    std::vector<NodeId> reclaim;
    for (std::size_t i = 0; i < schedule_.gts_list.size(); ++i) {
      const auto& d = schedule_.gts_list[i];
      if (gts_used_[i]) {
        gts_unused_[i] = 0;
      } else {
        report_.gts_waste_ms += sc_.phy.to_ms(schedule_.slot_duration * d.length_slots);
        if (++gts_unused_[i] >= sc_.gts_expiry_intervals) reclaim.push_back(d.device_id);
      }
      gts_used_[i] = false;
    }
    for (NodeId dev : reclaim) {
      std::vector<int> unused;
      for (std::size_t i = 0; i < schedule_.gts_list.size(); ++i)
        if (schedule_.gts_list[i].device_id != dev) unused.push_back(gts_unused_[i]);
      deallocate_gts(schedule_, dev, sc_.phy);
      gts_unused_ = unused;
      gts_used_.assign(schedule_.gts_list.size(), false);
    }
  }

  bool coordinator_active(SimTime t) const {
    const auto k = interval_of(t);
    return k >= 0 && t < beacon_at(k) + schedule_.active_duration;
  }

  void coordinator_after_tx() {
    auto& c = coord();
    set_radio(c, coordinator_active(queue_.now()) ? RadioState::Rx : RadioState::Sleep);
  }

  void coordinator_send(Frame f, SimTime air, std::function<void()> after) {
    auto& c = coord();
    if (c.radio.state == RadioState::Tx) return;  // busy: the frame is lost
    transmit(c, std::move(f), air, [this, after = std::move(after)] {
      coordinator_after_tx();
      if (after) after();
    });
  }

  void coordinator_receive(const Frame& f) {
    const NodeId from = f.src;
    switch (f.type) {
      case FrameType::Data: {
        if (f.gts) {
          for (std::size_t i = 0; i < schedule_.gts_list.size(); ++i)
            if (schedule_.gts_list[i].device_id == from) gts_used_[i] = true;
          if (!packets_.at(f.packet - 1).delivered) ++report_.gts_frames;
        }
        close_packet(f.packet, true, false);
        const std::uint64_t pkt = f.packet;
        schedule(
            queue_.now() + turnaround_, EventKind::FrameTxStart, 0,
            [this, from, pkt] { coordinator_send(Frame{FrameType::Ack, 0, from, pkt, false, false, {}}, ack_air_, {}); },
            "ack");
        break;
      }
      case FrameType::DataRequest: {
        auto& q = coord().pending[from];
        const bool has = !q.empty();
        schedule(
            queue_.now() + turnaround_, EventKind::FrameTxStart, 0,
            [this, from, has] {
              coordinator_send(Frame{FrameType::Ack, 0, from, 0, has, false, {}}, ack_air_, [this, from, has] {
                if (has) send_indirect(from);
              });
            },
            "ack");
        break;
      }
      case FrameType::Ack: {
        if (coord().indirect_to && *coord().indirect_to == from) {
          auto& q = coord().pending[from];
          if (!q.empty() && q.front().first.id == f.packet) q.pop_front();
          coord().indirect_to.reset();
        }
        break;
      }
      case FrameType::Beacon: break;
    }
  }

  void send_indirect(NodeId dst) {
    schedule(
        queue_.now() + turnaround_, EventKind::FrameTxStart, 0,
        [this, dst] {
          auto& q = coord().pending[dst];
          if (q.empty()) return;
          const Packet& p = q.front().first;
          coord().indirect_to = dst;
          coordinator_send(Frame{FrameType::Data, 0, dst, p.id, false, false, {}}, frame_airtime(p.size, sc_.phy), {});
        },
        "indirect-data");
  }

  // ---------------------------------------------------------------------
  // device: synchronization

  void schedule_wake(Node& n, SimTime beacon) {
    if (beacon >= horizon_ || n.wake_pending_for == beacon) return;
    n.wake_pending_for = beacon;
    const SimTime guard{sc_.beacon_guard};
    const SimTime at = beacon - guard < queue_.now() ? queue_.now() : beacon - guard;
    const NodeId id = n.id;
    schedule(at, EventKind::Wake, id, [this, id, beacon] { wake_for_beacon(node(id), beacon); }, "beacon-wake");
    schedule(
        beacon + max_beacon_air_ + SimTime{1}, EventKind::DeadlineExpiry, id,
        [this, id, beacon] { beacon_timeout(node(id), beacon); }, "beacon-timeout");
  }

  void wake_for_beacon(Node& n, SimTime) {
    if (n.act == Activity::Asleep || n.act == Activity::IdleListen) {
      n.act = Activity::BeaconListen;
      ++n.token;
      set_radio(n, RadioState::Rx);
    }
  }

  void beacon_timeout(Node& n, SimTime beacon) {
    if (n.wake_pending_for == beacon) n.wake_pending_for = SimTime{-1};
    if (n.last_beacon_heard == beacon) return;
    ++n.lost;
    n.have_sync = false;
    if (n.mode == SyncMode::Tracked && n.lost >= sc_.max_lost_beacons) {
      n.tracking = false;
      if (n.act == Activity::BeaconListen || n.act == Activity::Asleep || n.act == Activity::IdleListen) {
        n.act = Activity::Acquire;
        ++n.token;
        set_radio(n, RadioState::Rx);
      }
      return;
    }
    if (n.mode == SyncMode::Tracked && n.tracking) schedule_wake(n, beacon + bi_);
    if (n.act == Activity::BeaconListen) {
      n.act = Activity::Asleep;
      decide(n);
    }
  }

  void on_beacon(Node& n, const Frame& f) {
    const auto& payload = *f.beacon;
    n.last_beacon_heard = payload.start;
    n.lost = 0;
    n.have_sync = true;
    n.cur_beacon = payload.start;
    n.view = f.beacon;
    // An untracked device only trusts the schedule of the beacon it just heard; new
    // traffic after that active portion means listening for a beacon again.
    n.synced_until = payload.start + (n.mode == SyncMode::Tracked ? bi_ : payload.schedule.active_duration);
    if (n.mode == SyncMode::Tracked) {
      n.tracking = true;
      schedule_wake(n, payload.start + bi_);
    }
    if (std::find(payload.schedule.pending_addresses.begin(), payload.schedule.pending_addresses.end(), n.id) !=
        payload.schedule.pending_addresses.end()) {
      const bool queued = std::any_of(n.capq.begin(), n.capq.end(), [](const Packet& p) { return p.id == 0; });
      if (!queued) n.capq.push_front(Packet{0, n.id, 0, sc_.data_request_bytes, queue_.now(), {}, false, 0});
    }
    n.gts_event_at.reset();
    if (!n.gtsq.empty()) {
      if (auto w = locate_gts(payload.schedule, n.id)) {
        plan_gts(n, payload.start + w->begin);
      } else {
        while (!n.gtsq.empty()) {
          n.gtsq.front().gts = false;
          n.capq.push_back(n.gtsq.front());
          n.gtsq.pop_front();
        }
      }
    }
    if (n.act == Activity::BeaconListen || n.act == Activity::Acquire || n.act == Activity::IdleListen ||
        n.act == Activity::Asleep) {
      n.act = Activity::Asleep;
      decide(n);
    }
  }

  // ---------------------------------------------------------------------
  // device: scheduling decisions

  bool in_cap(const Node& n, SimTime t) const {
    if (!n.have_sync || !n.view || t >= n.synced_until) return false;
    const auto& s = n.view->schedule;
    return t >= n.cur_beacon + s.cap.begin && t < n.cur_beacon + s.cap.end;
  }

  SimTime cap_end(const Node& n) const { return n.cur_beacon + n.view->schedule.cap.end; }
  SimTime active_end(const Node& n) const { return n.cur_beacon + n.view->schedule.active_duration; }

  bool busy(const Node& n) const {
    return n.act == Activity::Csma || n.act == Activity::Transmit || n.act == Activity::AwaitAck ||
           n.act == Activity::AwaitData || n.act == Activity::SendAck;
  }

  void go_sleep(Node& n) {
    n.act = Activity::Asleep;
    ++n.token;
    set_radio(n, RadioState::Sleep);
  }

  /// Called whenever a device is free: pick the next thing to do.
  void decide(Node& n) {
    const SimTime now = queue_.now();
    if (busy(n)) return;
    if (n.wake_pending_for.ticks >= 0 && now >= n.wake_pending_for - SimTime{sc_.beacon_guard} &&
        now <= n.wake_pending_for) {
      n.act = Activity::BeaconListen;
      ++n.token;
      set_radio(n, RadioState::Rx);
      return;
    }
    drop_expired(n);
    // The next backoff boundary must still fall inside the CAP.
    if (!n.capq.empty() && in_cap(n, now) && align(n, now) < cap_end(n) && n.deferred_in != n.cur_beacon) {
      start_attempt(n);
      return;
    }
    if (n.gts_event_at && *n.gts_event_at >= now) {
      go_sleep(n);
      return;
    }
    if (!sc_.sleep_after_ack && n.have_sync && now < n.synced_until && now < active_end(n)) {
      n.act = Activity::IdleListen;
      ++n.token;
      set_radio(n, RadioState::Rx);
      const NodeId id = n.id;
      const auto tok = n.token;
      schedule(active_end(n), EventKind::Sleep, id, [this, id, tok] {
        auto& m = node(id);
        if (m.token == tok && m.act == Activity::IdleListen) {
          m.act = Activity::Asleep;
          decide(m);
        }
      });
      return;
    }
    go_sleep(n);
    if (!n.capq.empty()) {
      if (n.have_sync && now < n.synced_until) {
        schedule_wake(n, n.cur_beacon + bi_);
      } else if (n.wake_pending_for.ticks < 0) {
        n.act = Activity::Acquire;
        ++n.token;
        set_radio(n, RadioState::Rx);
      }
    }
  }

  void drop_expired(Node& n) {
    const SimTime now = queue_.now();
    while (!n.attempt_active && !n.capq.empty() && n.capq.front().deadline && *n.capq.front().deadline < now) {
      close_packet(n.capq.front().id, false, true);
      n.capq.pop_front();
    }
  }

  void app_packet(std::size_t wi) {
    const auto& w = sc_.workload[wi];
    Packet p;
    p.id = next_packet_id();
    p.src = w.src;
    p.dst = w.dst;
    p.size = w.size;
    p.created = queue_.now();
    if (w.validity_ms > 0) p.deadline = queue_.now() + ms_to_time(w.validity_ms, sc_.phy);
    p.gts = w.gts;
    packets_.push_back(PacketState{p.created, p.size, false, false});
    ++report_.generated;

    if (w.src == 0) {
      coord().pending[w.dst].emplace_back(p, std::max<std::int64_t>(interval_of(queue_.now()), 0));
      return;
    }
    auto& n = node(w.src);
    if (p.gts) {
      const auto window = locate_gts(schedule_, n.id);
      if (!window || frame_airtime(p.size, sc_.phy) + turnaround_ + ack_air_ > window->length()) {
        close_packet(p.id, false, false);  // window-overflow
        return;
      }
      n.gtsq.push_back(p);
      if (n.have_sync && n.view && !n.gts_event_at) {
        if (auto w2 = locate_gts(n.view->schedule, n.id)) {
          const SimTime at = n.cur_beacon + w2->begin;
          if (at >= queue_.now()) plan_gts(n, at);
        }
      }
      if (n.act == Activity::Asleep && !n.have_sync && n.mode == SyncMode::Untracked) decide_acquire(n);
      return;
    }
    n.capq.push_back(p);
    if (n.act == Activity::Asleep || n.act == Activity::IdleListen) {
      n.act = Activity::Asleep;
      decide(n);
    }
  }

  void decide_acquire(Node& n) {
    n.act = Activity::Acquire;
    ++n.token;
    set_radio(n, RadioState::Rx);
  }

  // ---------------------------------------------------------------------
  // device: slotted CSMA-CA

  void start_attempt(Node& n) {
    if (!n.attempt_active) {
      n.attempt = init_attempt(sc_.csma);
      n.attempt_active = true;
      n.paused = false;
    }
    n.act = Activity::Csma;
    ++n.token;
    backoff_from(n, queue_.now(), !n.paused);
  }

  SimTime align(const Node& n, SimTime t) const {
    const auto rel = (t - n.cur_beacon).ticks;
    const auto periods = (rel + ub_.ticks - 1) / ub_.ticks;
    return n.cur_beacon + ub_ * periods;
  }

  void backoff_from(Node& n, SimTime t, bool draw) {
    const SimTime b = align(n, t);
    if (draw) {
      n.attempt.phase = CsmaPhase::BackingOff;
      n.backoff_left = draw_backoff(n.attempt, n.rng);
    }
    n.paused = false;
    if (b >= cap_end(n)) {
      pause(n);
      return;
    }
    if (b > queue_.now()) set_radio(n, RadioState::Idle);
    const NodeId id = n.id;
    const auto tok = n.token;
    schedule(b, EventKind::Cca, id, [this, id, tok] {
      auto& m = node(id);
      if (m.token == tok) countdown(m);
    }, "backoff");
  }

  void countdown(Node& n) {
    set_radio(n, RadioState::Idle);  // receiver only comes on for CCA
    const SimTime now = queue_.now();
    const auto avail = (cap_end(n) - now).ticks / ub_.ticks;
    const NodeId id = n.id;
    const auto tok = n.token;
    if (n.backoff_left <= avail) {
      schedule(now + ub_ * n.backoff_left, EventKind::Cca, id, [this, id, tok] {
        auto& m = node(id);
        if (m.token == tok) backoff_done(m);
      }, "backoff-done");
    } else {
      n.backoff_left -= static_cast<int>(avail);
      schedule(now + ub_ * avail, EventKind::Sleep, id, [this, id, tok] {
        auto& m = node(id);
        if (m.token == tok) pause(m);
      }, "backoff-pause");
    }
  }

  void pause(Node& n) {
    n.paused = true;
    n.act = Activity::Asleep;
    ++n.token;
    decide(n);
  }

  void backoff_done(Node& n) {
    const SimTime now = queue_.now();
    const Packet& p = n.capq.front();
    n.attempt = on_backoff_done(n.attempt);
    if (!fits_in_cap(now, ub_ * 2 + data_transaction(p), cap_end(n))) {
      ++report_.deferrals;
      n.deferred_in = n.cur_beacon;
      n.attempt_active = false;
      n.act = Activity::Asleep;
      ++n.token;
      decide(n);
      return;
    }
    cca(n);
  }

  void cca(Node& n) {
    const SimTime start = queue_.now();
    set_radio(n, RadioState::Rx);
    const NodeId id = n.id;
    const auto tok = n.token;
    schedule(start + SimTime{sc_.phy.cca_duration}, EventKind::Cca, id, [this, id, tok, start] {
      auto& m = node(id);
      if (m.token == tok) cca_end(m, start);
    }, "cca");
  }

  void cca_end(Node& n, SimTime start) {
    const SimTime now = queue_.now();
    const bool busy_channel = channel_.busy(n.id, n.pos, start, now);
    n.attempt = on_cca(n.attempt, busy_channel, sc_.csma);
    const NodeId id = n.id;
    const auto tok = n.token;
    switch (n.attempt.phase) {
      case CsmaPhase::Cca:
        schedule(start + ub_, EventKind::Cca, id, [this, id, tok] {
          auto& m = node(id);
          if (m.token == tok) cca(m);
        }, "cca-next");
        break;
      case CsmaPhase::Transmitting:
        schedule(start + ub_, EventKind::FrameTxStart, id, [this, id, tok] {
          auto& m = node(id);
          if (m.token == tok) send_head(m);
        }, "head");
        break;
      case CsmaPhase::BackingOff:
        backoff_from(n, now, true);
        break;
      case CsmaPhase::DoneFailure: {
        ++n.caf;
        ++report_.channel_access_failures;
        Packet p = n.capq.front();
        n.capq.pop_front();
        n.attempt_active = false;
        close_packet(p.id, false, false);
        after_transaction(n);
        break;
      }
      case CsmaPhase::DoneSuccess: break;
    }
  }

  void send_head(Node& n) {
    const Packet& p = n.capq.front();
    n.act = Activity::Transmit;
    const NodeId id = n.id;
    const auto tok = n.token;
    Frame f;
    f.src = n.id;
    f.dst = 0;
    SimTime air;
    if (p.id == 0) {
      f.type = FrameType::DataRequest;
      air = frame_airtime(sc_.data_request_bytes, sc_.phy);
    } else {
      f.type = FrameType::Data;
      f.packet = p.id;
      air = frame_airtime(p.size, sc_.phy);
    }
    n.awaited_packet = p.id;
    transmit(n, f, air, [this, id, tok] {
      auto& m = node(id);
      set_radio(m, RadioState::Rx);
      m.act = Activity::AwaitAck;
      schedule(queue_.now() + turnaround_ + ack_air_ + SimTime{1}, EventKind::DeadlineExpiry, id,
               [this, id, tok] {
                 auto& k = node(id);
                 if (k.token == tok && k.act == Activity::AwaitAck) ack_missing(k);
               },
               "ack-timeout");
    });
  }

  void ack_missing(Node& n) {
    ++n.token;
    n.attempt_active = false;
    Packet& p = n.capq.front();
    if (++p.retries > sc_.max_frame_retries) {
      const auto id = p.id;
      n.capq.pop_front();
      close_packet(id, false, false);
    }
    after_transaction(n);
  }

  void after_transaction(Node& n) {
    n.act = Activity::Asleep;
    ++n.token;
    decide(n);
  }

  void device_receive(Node& n, const Frame& f) {
    switch (f.type) {
      case FrameType::Beacon: on_beacon(n, f); break;
      case FrameType::Ack: {
        if (n.act != Activity::AwaitAck || f.packet != n.awaited_packet) return;
        ++n.token;
        if (n.gts_in_flight) {
          n.gts_in_flight = false;
          n.gtsq.pop_front();
          after_transaction(n);
          return;
        }
        n.attempt_active = false;
        Packet p = n.capq.front();
        n.capq.pop_front();
        if (p.id == 0 && f.pending) {
          n.act = Activity::AwaitData;
          const NodeId id = n.id;
          const auto tok = n.token;
          schedule(queue_.now() + turnaround_ + frame_airtime(127, sc_.phy) + SimTime{1}, EventKind::DeadlineExpiry,
                   id, [this, id, tok] {
                     auto& m = node(id);
                     if (m.token == tok && m.act == Activity::AwaitData) after_transaction(m);
                   },
                   "data-timeout");
          return;
        }
        after_transaction(n);
        break;
      }
      case FrameType::Data: {
        if (n.act != Activity::AwaitData) return;
        close_packet(f.packet, true, false);
        n.act = Activity::SendAck;
        ++n.token;
        const NodeId id = n.id;
        const std::uint64_t pkt = f.packet;
        schedule(queue_.now() + turnaround_, EventKind::FrameTxStart, id, [this, id, pkt] {
          auto& m = node(id);
          transmit(m, Frame{FrameType::Ack, id, 0, pkt, false, false, {}}, ack_air_, [this, id] {
            auto& k = node(id);
            set_radio(k, RadioState::Rx);
            after_transaction(k);
          });
        }, "ack");
        break;
      }
      case FrameType::DataRequest: break;
    }
  }

  // ---------------------------------------------------------------------
  // device: GTS

  void plan_gts(Node& n, SimTime at) {
    if (at < queue_.now()) return;
    n.gts_event_at = at;
    const NodeId id = n.id;
    schedule(at, EventKind::GtsWindow, id, [this, id] { gts_window(node(id)); }, "gts-window");
  }

  void gts_window(Node& n) {
    n.gts_event_at.reset();
    if (n.gtsq.empty() || busy(n)) return;
    const Packet& p = n.gtsq.front();
    n.act = Activity::Transmit;
    ++n.token;
    n.gts_in_flight = true;
    n.awaited_packet = p.id;
    const NodeId id = n.id;
    const auto tok = n.token;
    Frame f{FrameType::Data, n.id, 0, p.id, false, true, {}};
    transmit(n, f, frame_airtime(p.size, sc_.phy), [this, id, tok] {
      auto& m = node(id);
      set_radio(m, RadioState::Rx);
      m.act = Activity::AwaitAck;
      schedule(queue_.now() + turnaround_ + ack_air_ + SimTime{1}, EventKind::DeadlineExpiry, id,
               [this, id, tok] {
                 auto& k = node(id);
                 if (k.token == tok && k.act == Activity::AwaitAck) {
                   k.gts_in_flight = false;
                   Packet& q = k.gtsq.front();
                   if (++q.retries > sc_.max_frame_retries) {
                     const auto pid = q.id;
                     k.gtsq.pop_front();
                     close_packet(pid, false, false);
                   }
                   after_transaction(k);
                 }
               },
               "ack-timeout");
    });
  }

  // ---------------------------------------------------------------------

  RunOutput finish() {
    for (auto& n : nodes_) n.radio.close(horizon_, sc_.power, sc_.phy);
    report_.horizon = horizon_;
    report_.intervals = sc_.duration_intervals;
    std::int64_t closed = 0;
    for (const auto& p : packets_) closed += p.closed ? 1 : 0;
    report_.in_flight = report_.generated - closed;
    for (const auto& n : nodes_) {
      NodeMetrics m;
      m.id = n.id;
      m.role = n.id == 0 ? "coordinator" : "device";
      m.sync_mode = n.id == 0 ? "none" : to_string(n.mode);
      m.ledger = n.radio.ledger;
      m.frames_tx = n.frames_tx;
      m.frames_rx = n.frames_rx;
      m.caf_count = n.caf;
      report_.nodes.push_back(std::move(m));
    }
    return RunOutput{std::move(report_), trace_.take()};
  }

  const Scenario& sc_;
  std::uint64_t seed_;
  TraceLog trace_;
  EventQueue queue_;
  Channel channel_;
  SimTime bi_;
  SimTime offset_;
  SimTime horizon_;
  SimTime max_beacon_air_;
  SimTime ack_air_;
  SimTime turnaround_;
  SimTime ub_;
  SuperframeSchedule schedule_;
  std::vector<int> gts_unused_;
  std::vector<bool> gts_used_;
  std::vector<Node> nodes_;
  std::map<NodeId, std::size_t> index_;
  std::vector<PacketState> packets_;
  MetricsReport report_;
};

}  // namespace wpan
