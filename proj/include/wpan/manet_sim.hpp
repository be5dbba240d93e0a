// Cluster-based MANET simulation: lowest-id clusters, clusterhead/gateway
// flooding over a shared unit-disk channel, node mobility and topology repair.
#pragma once

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "wpan/channel.hpp"
#include "wpan/cluster.hpp"
#include "wpan/csma.hpp"
#include "wpan/event_queue.hpp"
#include "wpan/metrics.hpp"
#include "wpan/scenario.hpp"
#include "wpan/sim_common.hpp"
#include "wpan/star_sim.hpp"

namespace wpan {

class ManetSimulation {
 public:
  ManetSimulation(const Scenario& sc, std::uint64_t seed, bool keep_trace = false)
      : sc_(sc), seed_(seed), trace_(keep_trace), channel_(sc.channel) {
    bi_ = sc_.beacon_interval();
    horizon_ = bi_ * sc_.duration_intervals;
    ub_ = SimTime{sc_.phy.unit_backoff};
    replay_window_ = bi_ * sc_.replay_window_intervals;

    std::vector<NodeSpec> specs;
    for (const auto& n : sc_.nodes) specs.push_back({n.id, n.position});
    topo_ = form_clusters(specs, sc_.channel.range_m);
    for (const auto& n : sc_.nodes) {
      Node node;
      node.id = n.id;
      node.router = RouterState{DedupCache(sc_.dedup_capacity), {}};
      node.rng = node_stream(seed_, n.id);
      node.move_rng = node_stream(seed_, n.id, 200);
      index_[n.id] = nodes_.size();
      nodes_.push_back(std::move(node));
    }
  }

  RunOutput run() {
    start();
    queue_.run_until(horizon_, [this](const Event& e) { trace_.record(e); });
    return finish();
  }

  const ClusterTopology& topology() const { return topo_; }

 private:
  struct Pending {
    RoutedFrame frame;
    int retries = 0;
  };

  struct MsgState {
    Message msg;
    std::optional<int> min_cost;
    bool delivered = false;
    bool failed = false;
    int transmissions = 0;
  };

  struct Node {
    NodeId id = 0;
    RouterState router;
    Radio radio;
    std::mt19937_64 rng;
    std::mt19937_64 move_rng;
    std::deque<Pending> txq;
    bool busy = false;
    CsmaAttempt attempt;
    std::uint64_t token = 0;
    std::int64_t frames_tx = 0;
    std::int64_t frames_rx = 0;
    std::int64_t caf = 0;
    // random waypoint
    Position target;
    double speed = 0.0;
    SimTime pause_until;
    bool has_target = false;
  };

  Node& node(NodeId id) { return nodes_[index_.at(id)]; }

  void schedule(SimTime at, EventKind kind, NodeId who, std::function<void()> fn, std::string detail = {}) {
    if (at > horizon_) return;
    queue_.schedule(at, kind, who, std::move(fn), std::move(detail));
  }

  void set_radio(Node& n, RadioState s) { n.radio.set(s, queue_.now(), sc_.power, sc_.phy); }

  // ---------------------------------------------------------------------

  void start() {
    for (auto& n : nodes_) {
      n.radio.state = RadioState::Rx;
      n.radio.since = SimTime{0};
    }
    for (std::size_t i = 0; i < sc_.workload.size(); ++i) {
      const auto& w = sc_.workload[i];
      for (const auto& a : generate_arrivals(w, i, sc_, SimTime{0}, horizon_, seed_))
        schedule(a.at, EventKind::AppPacket, w.src, [this, i] { app_packet(i); }, "workload=" + std::to_string(i));
    }
    switch (sc_.mobility.model) {
      case MobilityModel::Static: break;
      case MobilityModel::Scripted: {
        auto wps = sc_.mobility.waypoints;
        std::stable_sort(wps.begin(), wps.end(), [](const Waypoint& a, const Waypoint& b) { return a.t_ms < b.t_ms; });
        for (const auto& wp : wps) {
          schedule(ms_to_time(wp.t_ms, sc_.phy), EventKind::MobilityTick, wp.node, [this, wp] {
            topo_.set_position(wp.node, wp.position);
            repair();
          }, "waypoint");
        }
        break;
      }
      case MobilityModel::RandomWaypoint:
        schedule(ms_to_time(sc_.mobility.tick_ms, sc_.phy), EventKind::MobilityTick, -1, [this] { mobility_tick(); },
                 "tick");
        break;
    }
  }

  void mobility_tick() {
    const double dt_s = sc_.mobility.tick_ms / 1000.0;
    const auto& m = sc_.mobility;
    for (auto& n : nodes_) {
      if (queue_.now() < n.pause_until) continue;
      if (!n.has_target) {
        std::uniform_real_distribution<double> ux(0.0, sc_.channel.arena_width_m);
        std::uniform_real_distribution<double> uy(0.0, sc_.channel.arena_height_m);
        std::uniform_real_distribution<double> us(m.speed_min, m.speed_max);
        n.target = {ux(n.move_rng), uy(n.move_rng)};
        n.speed = us(n.move_rng);
        n.has_target = true;
      }
      const Position p = topo_.node(n.id).position;
      const double d = distance(p, n.target);
      const double step = n.speed * dt_s;
      if (step >= d) {
        topo_.set_position(n.id, n.target);
        n.has_target = false;
        n.pause_until = queue_.now() + ms_to_time(m.pause_ms, sc_.phy);
      } else {
        topo_.set_position(n.id, {p.x + (n.target.x - p.x) * step / d, p.y + (n.target.y - p.y) * step / d});
      }
    }
    repair();
    schedule(queue_.now() + ms_to_time(m.tick_ms, sc_.phy), EventKind::MobilityTick, -1, [this] { mobility_tick(); },
             "tick");
  }

  void repair() {
    const auto joins = repair_topology(topo_, sc_.fixed_clusterheads);
    if (sc_.replay_window_intervals <= 0) return;
    for (const auto& j : joins) {
      auto frames = join_cluster(topo_, j.node, j.clusterhead, node(j.clusterhead).router, queue_.now(), replay_window_);
      for (auto& f : frames) enqueue(node(j.clusterhead), std::move(f));
    }
  }

  // ---------------------------------------------------------------------

  void app_packet(std::size_t wi) {
    const auto& w = sc_.workload[wi];
    MsgState st;
    st.msg.id = msgs_.size() + 1;
    st.msg.src = w.src;
    st.msg.dst = w.dst;
    st.msg.size_bytes = w.size;
    st.msg.created_at = queue_.now();
    st.msg.validity_deadline = w.validity_ms > 0 ? queue_.now() + ms_to_time(w.validity_ms, sc_.phy)
                                                 : SimTime{std::numeric_limits<std::int64_t>::max() / 2};
    if (w.dst != kBroadcast) st.min_cost = min_backbone_cost(topo_, w.src, w.dst);
    if (sc_.fixed_clusterheads && w.dst != kBroadcast) {
      st.msg.route = backbone_route(topo_, w.src, w.dst);
      if (st.msg.route.empty()) st.failed = true;
    }
    msgs_.push_back(st);
    ++report_.generated;
    if (st.failed) return;
    const auto r = originate(topo_, w.src, st.msg, node(w.src).router, queue_.now());
    if (r.deliver) deliver(w.src, st.msg);
    if (r.transmit) enqueue(node(w.src), *r.transmit);
  }

  void deliver(NodeId at, const Message& msg) {
    auto& st = msgs_.at(msg.id - 1);
    if (st.delivered) return;
    if (msg.dst != kBroadcast && msg.dst != at) return;
    st.delivered = true;
    ++report_.delivered;
    report_.latencies_ms.push_back(sc_.phy.to_ms(queue_.now() - msg.created_at));
    report_.delivered_bits += msg.size_bytes * 8.0;
  }

  void enqueue(Node& n, RoutedFrame f) {
    n.txq.push_back(Pending{std::move(f), 0});
    if (!n.busy) start_access(n);
  }

  // Unslotted random access: backoff, one CCA, transmit.
  void start_access(Node& n) {
    while (!n.txq.empty() && n.txq.front().frame.msg.expired(queue_.now())) n.txq.pop_front();
    if (n.txq.empty()) {
      n.busy = false;
      return;
    }
    n.busy = true;
    n.attempt = init_attempt(sc_.csma);
    backoff(n);
  }

  void backoff(Node& n) {
    const int slots = draw_backoff(n.attempt, n.rng);
    n.attempt = on_backoff_done(n.attempt);
    const NodeId id = n.id;
    const auto tok = ++n.token;
    schedule(queue_.now() + ub_ * slots, EventKind::Cca, id, [this, id, tok] {
      auto& m = node(id);
      if (m.token != tok) return;
      const SimTime from = queue_.now();
      schedule(from + SimTime{sc_.phy.cca_duration}, EventKind::Cca, id, [this, id, tok, from] {
        auto& k = node(id);
        if (k.token == tok) cca_end(k, from);
      }, "cca");
    }, "backoff");
  }

  void cca_end(Node& n, SimTime from) {
    const bool busy_channel = channel_.busy(n.id, topo_.node(n.id).position, from, queue_.now());
    if (busy_channel) {
      n.attempt = on_cca(n.attempt, true, sc_.csma);
      if (n.attempt.phase == CsmaPhase::DoneFailure) {
        ++n.caf;
        ++report_.channel_access_failures;
        n.txq.pop_front();
        start_access(n);
        return;
      }
      backoff(n);
      return;
    }
    // Decide now whether the frame may still go out, so a dropped frame never shows as a start.
    const SimTime start = queue_.now() + SimTime{sc_.phy.turnaround};
    if (n.txq.front().frame.msg.expired(start)) {
      n.txq.pop_front();
      start_access(n);
      return;
    }
    const NodeId id = n.id;
    const auto tok = n.token;
    schedule(start, EventKind::FrameTxStart, id, [this, id, tok] {
      auto& m = node(id);
      if (m.token == tok) send(m);
    }, std::string(to_string(n.txq.front().frame.kind)) + " msg=" + std::to_string(n.txq.front().frame.msg.id));
  }

  void send(Node& n) {
    Pending p = n.txq.front();
    if (p.frame.msg.expired(queue_.now())) {
      n.txq.pop_front();
      start_access(n);
      return;
    }
    set_radio(n, RadioState::Tx);
    ++n.frames_tx;
    ++msgs_.at(p.frame.msg.id - 1).transmissions;
    const SimTime air = frame_airtime(p.frame.msg.size_bytes, sc_.phy);
    const Transmission tx = channel_.begin(n.id, topo_.node(n.id).position, queue_.now(), queue_.now() + air);
    const NodeId id = n.id;
    std::string detail = std::string(to_string(p.frame.kind)) + " msg=" + std::to_string(p.frame.msg.id);
    if (p.frame.kind == FrameKind::Unicast) detail += " to=" + std::to_string(p.frame.next_hop);
    schedule(tx.end, EventKind::FrameTxEnd, id, [this, id, tx] { tx_end(node(id), tx); }, std::move(detail));
  }

  void tx_end(Node& n, const Transmission& tx) {
    set_radio(n, RadioState::Rx);
    Pending p = n.txq.front();
    n.txq.pop_front();
    const RoutedFrame& f = p.frame;
    bool reached = f.kind != FrameKind::Unicast;
    std::vector<std::pair<NodeId, Reaction>> reactions;
    for (const auto& rec : topo_.nodes()) {
      if (rec.id == n.id || !in_range(tx.origin, rec.position, sc_.channel.range_m)) continue;
      auto& m = node(rec.id);
      const bool intended = f.kind != FrameKind::Unicast || f.next_hop == rec.id;
      if (!m.radio.listening_since(tx.start)) continue;
      if (!channel_.intact_at(tx, Listener{rec.id, rec.position})) {
        if (intended) ++report_.collisions;
        continue;
      }
      ++m.frames_rx;
      if (f.kind == FrameKind::Unicast && f.next_hop == rec.id) reached = true;
      reactions.emplace_back(rec.id, handle_frame(topo_, rec.id, f, m.router, queue_.now()));
    }
    for (auto& [id, r] : reactions) {
      if (r.deliver) deliver(id, f.msg);
      if (r.transmit) enqueue(node(id), *r.transmit);
    }
    if (!reached && ++p.retries <= sc_.max_frame_retries) n.txq.push_front(p);
    channel_.prune(queue_.now() - SimTime{4096});
    start_access(n);
  }

  // ---------------------------------------------------------------------

  RunOutput finish() {
    for (auto& n : nodes_) n.radio.close(horizon_, sc_.power, sc_.phy);
    report_.horizon = horizon_;
    report_.intervals = sc_.duration_intervals;
    for (const auto& st : msgs_) {
      if (st.delivered) {
        if (st.min_cost && st.msg.dst != kBroadcast)
          report_.redundant_transmissions += std::max(0, st.transmissions - *st.min_cost);
      } else if (st.failed) {
        ++report_.failed;
      } else if (st.msg.validity_deadline < horizon_) {
        ++report_.expired;
      } else {
        ++report_.in_flight;
      }
    }
    for (const auto& n : nodes_) {
      NodeMetrics m;
      m.id = n.id;
      m.role = to_string(topo_.node(n.id).role);
      m.sync_mode = "none";
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
  ClusterTopology topo_;
  SimTime bi_;
  SimTime horizon_;
  SimTime ub_;
  SimTime replay_window_;
  std::vector<Node> nodes_;
  std::map<NodeId, std::size_t> index_;
  std::vector<MsgState> msgs_;
  MetricsReport report_;
};

}  // namespace wpan
