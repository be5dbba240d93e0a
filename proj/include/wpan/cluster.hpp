// Two-tier cluster topology (clusterheads, gateways, ordinary nodes) and the
// broadcast forwarding rules run on top of it.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <limits>
#include <map>
#include <optional>
#include <queue>
#include <set>
#include <stdexcept>
#include <unordered_set>
#include <vector>

#include "wpan/superframe.hpp"
#include "wpan/time_energy.hpp"

namespace wpan {

struct Position {
  double x = 0.0;
  double y = 0.0;
  friend bool operator==(const Position&, const Position&) = default;
};

inline double distance(Position a, Position b) { return std::hypot(a.x - b.x, a.y - b.y); }

/// Unit-disk reception rule, boundary inclusive.
inline bool in_range(Position a, Position b, double range) {
  const double dx = a.x - b.x;
  const double dy = a.y - b.y;
  return dx * dx + dy * dy <= range * range;
}

enum class Role : std::uint8_t { Clusterhead, Gateway, Ordinary };

inline const char* to_string(Role r) {
  switch (r) {
    case Role::Clusterhead: return "clusterhead";
    case Role::Gateway: return "gateway";
    case Role::Ordinary: return "ordinary";
  }
  return "?";
}

inline constexpr NodeId kNoCluster = -1;

struct NodeRecord {
  NodeId id = 0;
  Position position;
  Role role = Role::Ordinary;
  NodeId cluster_id = kNoCluster;
  std::set<NodeId> member_table;  // clusterheads only
};

struct NodeSpec {
  NodeId id = 0;
  Position position;
};

class ClusterTopology {
 public:
  ClusterTopology() = default;
  ClusterTopology(std::vector<NodeRecord> nodes, double radio_range) : nodes_(std::move(nodes)), range_(radio_range) {
    std::sort(nodes_.begin(), nodes_.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
      if (!index_.emplace(nodes_[i].id, i).second) throw std::invalid_argument("duplicate node id");
    }
  }

  double radio_range() const { return range_; }
  const std::vector<NodeRecord>& nodes() const { return nodes_; }
  std::vector<NodeRecord>& nodes() { return nodes_; }

  bool contains(NodeId id) const { return index_.count(id) != 0; }
  const NodeRecord& node(NodeId id) const { return nodes_.at(index_.at(id)); }
  NodeRecord& node(NodeId id) { return nodes_.at(index_.at(id)); }

  bool adjacent(NodeId a, NodeId b) const {
    return a != b && in_range(node(a).position, node(b).position, range_);
  }

  std::vector<NodeId> neighbors(NodeId id) const {
    std::vector<NodeId> out;
    const auto p = node(id).position;
    for (const auto& n : nodes_)
      if (n.id != id && in_range(p, n.position, range_)) out.push_back(n.id);
    return out;
  }

  bool is_clusterhead(NodeId id) const { return node(id).role == Role::Clusterhead; }

  std::vector<NodeId> clusterheads() const {
    std::vector<NodeId> out;
    for (const auto& n : nodes_)
      if (n.role == Role::Clusterhead) out.push_back(n.id);
    return out;
  }

  void set_position(NodeId id, Position p) { node(id).position = p; }

  void rebuild_member_tables() {
    for (auto& n : nodes_) n.member_table.clear();
    for (const auto& n : nodes_)
      if (n.role != Role::Clusterhead && n.cluster_id != kNoCluster && contains(n.cluster_id))
        node(n.cluster_id).member_table.insert(n.id);
  }

 private:
  std::vector<NodeRecord> nodes_;
  std::map<NodeId, std::size_t> index_;
  double range_ = 10.0;
};

/// A non-clusterhead becomes a gateway iff it hears a node of another cluster.
inline void classify_gateways(ClusterTopology& topo) {
  for (auto& n : topo.nodes()) {
    if (n.role == Role::Clusterhead) continue;
    bool foreign = false;
    for (NodeId v : topo.neighbors(n.id)) {
      if (topo.node(v).cluster_id != n.cluster_id) {
        foreign = true;
        break;
      }
    }
    n.role = foreign ? Role::Gateway : Role::Ordinary;
  }
}

/// Lowest-id clustering: scanning ids in increasing order, every still
/// undecided node becomes a clusterhead and captures its undecided neighbors.
inline ClusterTopology form_clusters(const std::vector<NodeSpec>& specs, double radio_range) {
  if (specs.empty()) throw std::invalid_argument("form_clusters: no nodes");
  std::vector<NodeRecord> records;
  records.reserve(specs.size());
  for (const auto& s : specs) records.push_back(NodeRecord{s.id, s.position, Role::Ordinary, kNoCluster, {}});
  ClusterTopology topo(std::move(records), radio_range);

  for (auto& n : topo.nodes()) {
    if (n.cluster_id != kNoCluster) continue;
    n.role = Role::Clusterhead;
    n.cluster_id = n.id;
    for (NodeId v : topo.neighbors(n.id)) {
      auto& m = topo.node(v);
      if (m.cluster_id == kNoCluster) m.cluster_id = n.id;
    }
  }
  topo.rebuild_member_tables();
  classify_gateways(topo);
  return topo;
}

struct JoinEvent {
  NodeId node;
  NodeId clusterhead;
};

/// Nearest clusterhead in range of `id` other than itself; ties go to the lower id.
inline std::optional<NodeId> nearest_clusterhead(const ClusterTopology& topo, NodeId id) {
  std::optional<NodeId> best;
  double best_d = std::numeric_limits<double>::infinity();
  const auto p = topo.node(id).position;
  for (const auto& n : topo.nodes()) {
    if (n.id == id || n.role != Role::Clusterhead || !in_range(p, n.position, topo.radio_range())) continue;
    const double d = distance(p, n.position);
    if (d < best_d) {
      best_d = d;
      best = n.id;
    }
  }
  return best;
}

/// Re-homes one node whose clusterhead is gone or out of range. Returns the
/// join it performed, or nothing if it elected itself clusterhead.
inline std::optional<JoinEvent> reaffiliate(ClusterTopology& topo, NodeId id) {
  auto target = nearest_clusterhead(topo, id);
  auto& n = topo.node(id);
  if (n.role == Role::Clusterhead) {
    for (NodeId m : std::vector<NodeId>(n.member_table.begin(), n.member_table.end())) {
      auto& member = topo.node(m);
      if (member.cluster_id == id) member.cluster_id = kNoCluster;
    }
    n.member_table.clear();
  }
  if (target) {
    n.role = Role::Ordinary;
    n.cluster_id = *target;
    topo.node(*target).member_table.insert(id);
    return JoinEvent{id, *target};
  }
  n.role = Role::Clusterhead;
  n.cluster_id = id;
  return std::nullopt;
}

/// Restores the topology invariants after a mobility step. Adjacent
/// clusterheads are resolved by demoting the higher id unless clusterheads are
/// pinned; then every orphaned node re-homes in increasing id order.
inline std::vector<JoinEvent> repair_topology(ClusterTopology& topo, bool fixed_clusterheads = false) {
  std::vector<JoinEvent> joins;
  if (!fixed_clusterheads) {
    bool changed = true;
    while (changed) {
      changed = false;
      for (const auto& n : topo.nodes()) {
        if (n.role != Role::Clusterhead) continue;
        bool demote = false;
        for (NodeId v : topo.neighbors(n.id))
          if (v < n.id && topo.is_clusterhead(v)) demote = true;
        if (demote) {
          auto& self = topo.node(n.id);
          for (NodeId m : self.member_table)
            if (topo.node(m).cluster_id == n.id) topo.node(m).cluster_id = kNoCluster;
          self.member_table.clear();
          self.role = Role::Ordinary;
          self.cluster_id = kNoCluster;
          changed = true;
          break;
        }
      }
    }
  }
  for (const auto& n : topo.nodes()) {
    if (n.role == Role::Clusterhead) continue;
    const bool orphan = n.cluster_id == kNoCluster || !topo.contains(n.cluster_id) ||
                        !topo.is_clusterhead(n.cluster_id) || !topo.adjacent(n.id, n.cluster_id);
    if (!orphan) continue;
    if (n.cluster_id != kNoCluster && topo.contains(n.cluster_id)) topo.node(n.cluster_id).member_table.erase(n.id);
    if (auto j = reaffiliate(topo, n.id)) joins.push_back(*j);
  }
  topo.rebuild_member_tables();
  classify_gateways(topo);
  return joins;
}

// ---------------------------------------------------------------------------
// Messages and forwarding

inline constexpr NodeId kBroadcast = -1;

struct Message {
  std::uint64_t id = 0;
  NodeId src = 0;
  NodeId dst = kBroadcast;
  int size_bytes = 50;
  SimTime created_at;
  SimTime validity_deadline;
  std::vector<NodeId> hop_trace;
  std::vector<NodeId> route;  // precomputed path, fixed-clusterhead mode only

  bool expired(SimTime now) const { return now > validity_deadline; }
};

enum class FrameKind : std::uint8_t { Unicast, ClusterBroadcast, GatewayRelay };

inline const char* to_string(FrameKind k) {
  switch (k) {
    case FrameKind::Unicast: return "unicast";
    case FrameKind::ClusterBroadcast: return "cluster-broadcast";
    case FrameKind::GatewayRelay: return "gateway-relay";
  }
  return "?";
}

struct RoutedFrame {
  Message msg;
  NodeId sender = 0;
  NodeId sender_cluster = kNoCluster;
  FrameKind kind = FrameKind::Unicast;
  NodeId next_hop = kBroadcast;  // unicast only
};

/// Bounded set of recently seen message ids, oldest evicted first.
class DedupCache {
 public:
  explicit DedupCache(std::size_t capacity = 256) : capacity_(capacity) {}

  bool contains(std::uint64_t id) const { return ids_.count(id) != 0; }

  /// Returns false if the id was already present.
  bool insert(std::uint64_t id, SimTime now) {
    if (contains(id)) return false;
    if (capacity_ == 0) return true;
    if (order_.size() == capacity_) {
      ids_.erase(order_.front().first);
      order_.pop_front();
    }
    order_.emplace_back(id, now);
    ids_.insert(id);
    return true;
  }

  std::size_t size() const { return order_.size(); }

 private:
  std::size_t capacity_;
  std::deque<std::pair<std::uint64_t, SimTime>> order_;
  std::unordered_set<std::uint64_t> ids_;
};

/// Messages a clusterhead broadcast recently, kept for replay to joining nodes.
class ReplayCache {
 public:
  void record(const Message& m, SimTime now) { entries_.push_back({m, now}); }

  /// Unexpired messages for `node` broadcast within `window`; purges stale entries.
  std::vector<Message> take_for(NodeId node, SimTime now, SimTime window) {
    purge(now, window);
    std::vector<Message> out;
    for (auto it = entries_.begin(); it != entries_.end();) {
      if (it->msg.dst == node) {
        out.push_back(it->msg);
        it = entries_.erase(it);
      } else {
        ++it;
      }
    }
    return out;
  }

  void purge(SimTime now, SimTime window) {
    std::erase_if(entries_, [&](const Entry& e) { return e.msg.expired(now) || now - e.at > window; });
  }

  std::size_t size() const { return entries_.size(); }

 private:
  struct Entry {
    Message msg;
    SimTime at;
  };
  std::vector<Entry> entries_;
};

struct RouterState {
  DedupCache dedup;
  ReplayCache replay;
};

/// Outcome of applying the forwarding rules at one node for one event.
struct Reaction {
  bool deliver = false;
  bool dropped_expired = false;
  std::optional<RoutedFrame> transmit;
};

inline RoutedFrame make_frame(const ClusterTopology& topo, NodeId self, Message msg, FrameKind kind,
                              NodeId next_hop = kBroadcast) {
  msg.hop_trace.push_back(self);
  return RoutedFrame{std::move(msg), self, topo.node(self).cluster_id, kind, next_hop};
}

namespace detail {
inline Reaction follow_route(const ClusterTopology& topo, NodeId self, const Message& msg) {
  Reaction r;
  auto it = std::find(msg.route.begin(), msg.route.end(), self);
  if (it == msg.route.end()) return r;
  if (std::next(it) == msg.route.end()) {
    r.deliver = msg.dst == self;
    return r;
  }
  r.transmit = make_frame(topo, self, msg, FrameKind::Unicast, *std::next(it));
  return r;
}
}  // namespace detail

/// Clusterhead rule: unicast to a member destination, otherwise broadcast to
/// the cluster. Broadcast messages are remembered for join replay.
inline Reaction clusterhead_dispatch(const ClusterTopology& topo, NodeId ch, const Message& msg, RouterState& state,
                                     SimTime now) {
  Reaction r;
  if (msg.expired(now)) {
    r.dropped_expired = true;
    return r;
  }
  if (!msg.route.empty()) return detail::follow_route(topo, ch, msg);
  if (msg.dst == ch) {
    r.deliver = true;
    return r;
  }
  const auto& rec = topo.node(ch);
  if (msg.dst != kBroadcast && rec.member_table.count(msg.dst)) {
    r.transmit = make_frame(topo, ch, msg, FrameKind::Unicast, msg.dst);
    return r;
  }
  if (msg.dst == kBroadcast) r.deliver = true;
  state.replay.record(msg, now);
  r.transmit = make_frame(topo, ch, msg, FrameKind::ClusterBroadcast);
  return r;
}

/// Source rule: hand the message to the own clusterhead.
inline Reaction originate(const ClusterTopology& topo, NodeId node, const Message& msg, RouterState& state,
                          SimTime now) {
  Reaction r;
  if (msg.expired(now)) {
    r.dropped_expired = true;
    return r;
  }
  if (!msg.route.empty()) {
    state.dedup.insert(msg.id, now);
    return detail::follow_route(topo, node, msg);
  }
  const auto& rec = topo.node(node);
  if (rec.role == Role::Clusterhead) {
    state.dedup.insert(msg.id, now);
    auto d = clusterhead_dispatch(topo, node, msg, state, now);
    if (msg.dst == kBroadcast) d.deliver = false;  // the source does not deliver to itself
    return d;
  }
  r.transmit = make_frame(topo, node, msg, FrameKind::Unicast, rec.cluster_id);
  return r;
}

/// Gateway rule: relay first copies across the cluster border, or hand copies
/// arriving from another cluster to the own clusterhead.
inline Reaction gateway_relay(const ClusterTopology& topo, NodeId gw, const Message& msg, bool from_own_cluster,
                              RouterState& state, SimTime now) {
  Reaction r;
  if (msg.expired(now)) {
    r.dropped_expired = true;
    return r;
  }
  if (!state.dedup.insert(msg.id, now)) return r;
  if (msg.src != gw && (msg.dst == gw || msg.dst == kBroadcast)) r.deliver = true;
  if (msg.dst == gw) return r;
  if (from_own_cluster)
    r.transmit = make_frame(topo, gw, msg, FrameKind::GatewayRelay);
  else
    r.transmit = make_frame(topo, gw, msg, FrameKind::Unicast, topo.node(gw).cluster_id);
  return r;
}

/// Applies the forwarding rules to a frame successfully received by `self`.
inline Reaction handle_frame(const ClusterTopology& topo, NodeId self, const RoutedFrame& f, RouterState& state,
                             SimTime now) {
  const auto& rec = topo.node(self);
  const Message& msg = f.msg;
  const bool addressed = f.kind == FrameKind::Unicast && f.next_hop == self;

  if (!msg.route.empty()) {
    if (!addressed) return {};
    if (msg.expired(now)) return Reaction{false, true, std::nullopt};
    if (!state.dedup.insert(msg.id, now)) return {};
    return detail::follow_route(topo, self, msg);
  }

  const bool from_foreign = f.sender_cluster != rec.cluster_id;
  // A foreign gateway handing a first copy to its own clusterhead. That gateway
  // will ignore its clusterhead's rebroadcast as a duplicate, so whoever
  // overhears the handoff across the border has to carry it on.
  const bool overheard_relay = f.kind == FrameKind::Unicast && from_foreign && !addressed &&
                               topo.contains(f.sender) && topo.node(f.sender).role == Role::Gateway &&
                               f.next_hop == f.sender_cluster;
  if (rec.role == Role::Clusterhead) {
    // Copies from members, or from a gateway of another cluster.
    const bool relevant =
        addressed || (from_foreign && f.kind == FrameKind::GatewayRelay) || overheard_relay;
    if (!relevant) return {};
    if (msg.expired(now)) return Reaction{false, true, std::nullopt};
    if (!state.dedup.insert(msg.id, now)) return {};
    return clusterhead_dispatch(topo, self, msg, state, now);
  }

  if (addressed) {
    // Only destinations receive unicasts in flooding mode.
    Reaction r;
    if (msg.expired(now)) return Reaction{false, true, std::nullopt};
    if (msg.dst == self && state.dedup.insert(msg.id, now)) r.deliver = true;
    return r;
  }
  if (rec.role == Role::Gateway && overheard_relay && msg.dst != self)
    return gateway_relay(topo, self, msg, false, state, now);
  if (f.kind == FrameKind::Unicast) {
    Reaction r;
    if (msg.dst == self && state.dedup.insert(msg.id, now)) r.deliver = true;
    return r;
  }
  if (msg.src == self && f.kind == FrameKind::ClusterBroadcast && rec.role != Role::Gateway) return {};

  if (rec.role == Role::Gateway) {
    const bool own_broadcast = f.kind == FrameKind::ClusterBroadcast && !from_foreign;
    if (own_broadcast) return gateway_relay(topo, self, msg, true, state, now);
    if (from_foreign) return gateway_relay(topo, self, msg, false, state, now);
    return {};
  }

  // Ordinary node: consume first copies addressed to it.
  Reaction r;
  if (f.kind == FrameKind::ClusterBroadcast && !from_foreign && (msg.dst == self || msg.dst == kBroadcast)) {
    if (msg.expired(now)) return Reaction{false, true, std::nullopt};
    if (state.dedup.insert(msg.id, now)) r.deliver = true;
  }
  return r;
}

/// Clusterhead replay when `node` joins `ch`.
inline std::vector<RoutedFrame> join_cluster(const ClusterTopology& topo, NodeId node, NodeId ch, RouterState& ch_state,
                                             SimTime now, SimTime replay_window) {
  std::vector<RoutedFrame> out;
  for (auto& m : ch_state.replay.take_for(node, now, replay_window))
    out.push_back(make_frame(topo, ch, std::move(m), FrameKind::Unicast, node));
  return out;
}

// ---------------------------------------------------------------------------
// Backbone paths

/// Hop sequence over the clusterhead/gateway structure: member to own
/// clusterhead, clusterhead to member or to any gateway it hears, gateway to a
/// node of another cluster.
inline std::vector<NodeId> backbone_route(const ClusterTopology& topo, NodeId src, NodeId dst) {
  if (src == dst) return {src};
  auto allowed = [&](NodeId u, NodeId v) {
    const auto& a = topo.node(u);
    const auto& b = topo.node(v);
    if (!topo.adjacent(u, v)) return false;
    if (a.role != Role::Clusterhead && a.cluster_id == v) return true;
    if (a.role == Role::Clusterhead && (b.cluster_id == u || b.role == Role::Gateway)) return true;
    if (a.role == Role::Gateway && b.cluster_id != a.cluster_id) return true;
    return false;
  };
  std::map<NodeId, NodeId> parent;
  std::queue<NodeId> q;
  parent[src] = src;
  q.push(src);
  while (!q.empty()) {
    NodeId u = q.front();
    q.pop();
    if (u == dst) break;
    for (NodeId v : topo.neighbors(u)) {
      if (parent.count(v) || !allowed(u, v)) continue;
      parent[v] = u;
      q.push(v);
    }
  }
  if (!parent.count(dst)) return {};
  std::vector<NodeId> path{dst};
  while (path.back() != src) path.push_back(parent[path.back()]);
  std::reverse(path.begin(), path.end());
  return path;
}

/// Minimum transmissions to carry a unicast from src to dst over the backbone.
inline std::optional<int> min_backbone_cost(const ClusterTopology& topo, NodeId src, NodeId dst) {
  auto path = backbone_route(topo, src, dst);
  if (path.empty()) return std::nullopt;
  return static_cast<int>(path.size()) - 1;
}

struct PropagationResult {
  std::map<NodeId, int> deliveries;
  std::map<NodeId, int> transmissions;
  int total_transmissions = 0;
};

/// Lossless, in-order execution of the forwarding rules on a static topology.
inline PropagationResult ideal_propagation(const ClusterTopology& topo, Message msg, std::size_t dedup_capacity = 256) {
  PropagationResult res;
  std::map<NodeId, RouterState> states;
  for (const auto& n : topo.nodes()) states.emplace(n.id, RouterState{DedupCache(dedup_capacity), {}});
  const SimTime now = msg.created_at;
  std::queue<RoutedFrame> pending;

  auto apply = [&](NodeId self, const Reaction& r) {
    if (r.deliver) ++res.deliveries[self];
    if (r.transmit) {
      ++res.transmissions[self];
      ++res.total_transmissions;
      pending.push(*r.transmit);
    }
  };
  apply(msg.src, originate(topo, msg.src, msg, states.at(msg.src), now));
  while (!pending.empty()) {
    RoutedFrame f = pending.front();
    pending.pop();
    for (NodeId v : topo.neighbors(f.sender)) apply(v, handle_frame(topo, v, f, states.at(v), now));
  }
  return res;
}

}  // namespace wpan
