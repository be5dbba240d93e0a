// Scenario document: JSON schema, loading and validation.
//
// Top-level keys (all optional unless noted):
//   kind                      "star" | "manet"                 (default "star")
//   duration_intervals        beacon intervals to simulate     (required, > 0)
//   seed                      64-bit seed (the CLI flag wins)
//   phy                       "2450mhz"
//   power                     {i_tx_ma, i_rx_ma, i_idle_ma, i_sleep_ma, supply_v}
//   bo, so, ble               superframe orders and battery life extension
//   mac_min_be, a_max_be, mac_max_csma_backoffs, max_frame_retries
//   sleep_after_ack, sync_mode ("tracked" | "untracked"), beacon_guard (symbols),
//   max_lost_beacons, pending_expiry_intervals, gts_expiry_intervals
//   ack_bytes, data_request_bytes
//   gts_requests              [{node, direction, slots}]
//   nodes                     [{id, x, y, sync_mode?}]  or  node_count
//   radio_range_m, arena      {width, height}
//   mobility                  {model: static|random_waypoint|scripted, speed_min, speed_max,
//                              pause_ms, tick_ms, waypoints: [{node, t_ms, x, y}]}
//   fixed_clusterheads, replay_window_intervals, dedup_capacity, cluster_offset
//   workload                  [{src, dst, size, kind: bernoulli|poisson|periodic|oneshot,
//                               p, rate_pps, period_intervals, time_ms, validity_ms, gts}]
//
// In a star scenario node 0 is the PAN coordinator. In a manet scenario dst
// may be -1 for a network-wide broadcast.
#pragma once

#include <cmath>
#include <random>
#include <type_traits>
#include <cstdint>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "wpan/channel.hpp"
#include "wpan/cluster.hpp"
#include "wpan/csma.hpp"
#include "wpan/superframe.hpp"
#include "wpan/sync_energy.hpp"
#include "wpan/time_energy.hpp"

namespace wpan {

/// A scenario constraint violation, naming the offending key.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string key, const std::string& constraint)
      : std::runtime_error(key + ": " + constraint), key_(std::move(key)) {}
  const std::string& key() const { return key_; }

 private:
  std::string key_;
};

enum class ScenarioKind : std::uint8_t { Star, Manet };
enum class TrafficKind : std::uint8_t { Bernoulli, Poisson, Periodic, Oneshot };
enum class MobilityModel : std::uint8_t { Static, RandomWaypoint, Scripted };

struct WorkloadSpec {
  NodeId src = 1;
  NodeId dst = 0;
  int size = 50;
  TrafficKind kind = TrafficKind::Periodic;
  double p = 0.0;
  double rate_pps = 0.0;
  int period_intervals = 1;
  double time_ms = 0.0;
  double validity_ms = 0.0;  // 0 = never expires
  bool gts = false;
};

struct GtsRequestSpec {
  NodeId node = 1;
  GtsDirection direction = GtsDirection::NodeToCoordinator;
  int slots = 1;
};

struct NodeEntry {
  NodeId id = 0;
  Position position;
  std::optional<SyncMode> sync_mode;
};

struct Waypoint {
  NodeId node = 0;
  double t_ms = 0.0;
  Position position;
};

struct MobilitySpec {
  MobilityModel model = MobilityModel::Static;
  double speed_min = 1.0;  // m/s
  double speed_max = 2.0;
  double pause_ms = 0.0;
  double tick_ms = 100.0;
  std::vector<Waypoint> waypoints;
};

struct Scenario {
  ScenarioKind kind = ScenarioKind::Star;
  std::int64_t duration_intervals = 0;
  std::optional<std::uint64_t> seed;
  PhyProfile phy = phy_2450mhz();
  RadioPowerProfile power;
  SuperframeConfig superframe;
  CsmaParams csma;
  int max_frame_retries = 3;
  bool sleep_after_ack = true;
  SyncMode sync_mode = SyncMode::Tracked;
  std::int64_t beacon_guard = 60;
  int max_lost_beacons = 4;
  int pending_expiry_intervals = 4;
  int gts_expiry_intervals = 4;
  int ack_bytes = 11;
  int data_request_bytes = 10;
  std::vector<GtsRequestSpec> gts_requests;
  std::vector<NodeEntry> nodes;
  ChannelModel channel;
  MobilitySpec mobility;
  bool fixed_clusterheads = false;
  int replay_window_intervals = 4;
  std::size_t dedup_capacity = 256;
  std::int64_t cluster_offset = 0;
  std::vector<WorkloadSpec> workload;

  SimTime beacon_interval() const { return wpan::beacon_interval(superframe.bo, phy); }
  SimTime horizon() const { return beacon_interval() * duration_intervals; }

  SyncMode sync_of(NodeId id) const {
    for (const auto& n : nodes)
      if (n.id == id && n.sync_mode) return *n.sync_mode;
    return sync_mode;
  }
};

namespace detail {

using nlohmann::json;

inline void reject_unknown(const json& obj, const std::set<std::string>& allowed, const std::string& prefix) {
  if (!obj.is_object()) throw ConfigError(prefix.empty() ? "<root>" : prefix, "must be an object");
  for (auto it = obj.begin(); it != obj.end(); ++it)
    if (!allowed.count(it.key())) throw ConfigError(prefix + it.key(), "unknown key");
}

template <class T>
T get(const json& obj, const std::string& key, const std::string& path, T fallback) {
  auto it = obj.find(key);
  if (it == obj.end()) return fallback;
  try {
    if constexpr (std::is_same_v<T, bool>) {
      if (!it->is_boolean()) throw ConfigError(path + key, "must be a boolean");
    } else if constexpr (std::is_integral_v<T>) {
      if (!it->is_number_integer()) throw ConfigError(path + key, "must be an integer");
    } else if constexpr (std::is_floating_point_v<T>) {
      if (!it->is_number()) throw ConfigError(path + key, "must be a number");
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (!it->is_string()) throw ConfigError(path + key, "must be a string");
    }
    return it->get<T>();
  } catch (const json::exception&) {
    throw ConfigError(path + key, "has the wrong type");
  }
}

inline SyncMode parse_sync(const std::string& s, const std::string& key) {
  if (s == "tracked") return SyncMode::Tracked;
  if (s == "untracked") return SyncMode::Untracked;
  throw ConfigError(key, "must be \"tracked\" or \"untracked\"");
}

inline void require(bool ok, const std::string& key, const std::string& constraint) {
  if (!ok) throw ConfigError(key, constraint);
}

}  // namespace detail

inline const std::set<std::string>& scenario_keys() {
  static const std::set<std::string> keys{
      "kind", "duration_intervals", "seed", "phy", "power", "bo", "so", "ble", "mac_min_be", "a_max_be",
      "mac_max_csma_backoffs", "max_frame_retries", "sleep_after_ack", "sync_mode", "beacon_guard",
      "max_lost_beacons", "pending_expiry_intervals", "gts_expiry_intervals", "ack_bytes", "data_request_bytes",
      "gts_requests", "nodes", "node_count", "radio_range_m", "arena", "mobility", "fixed_clusterheads",
      "replay_window_intervals", "dedup_capacity", "cluster_offset", "workload"};
  return keys;
}

/// Builds and validates a scenario. `placement_seed` positions generated nodes.
inline Scenario parse_scenario(const nlohmann::json& doc, std::uint64_t placement_seed = 1) {
  using detail::get;
  using detail::require;
  detail::reject_unknown(doc, scenario_keys(), "");
  Scenario sc;

  const auto kind = get<std::string>(doc, "kind", "", "star");
  if (kind == "star")
    sc.kind = ScenarioKind::Star;
  else if (kind == "manet")
    sc.kind = ScenarioKind::Manet;
  else
    throw ConfigError("kind", "must be \"star\" or \"manet\"");

  require(doc.contains("duration_intervals"), "duration_intervals", "is required");
  sc.duration_intervals = get<std::int64_t>(doc, "duration_intervals", "", 0);
  require(sc.duration_intervals > 0, "duration_intervals", "must be > 0");
  if (doc.contains("seed")) {
    require(doc["seed"].is_number_integer(), "seed", "must be an integer");
    sc.seed = doc["seed"].get<std::uint64_t>();
  }
  require(get<std::string>(doc, "phy", "", "2450mhz") == "2450mhz", "phy", "only \"2450mhz\" is supported");

  if (doc.contains("power")) {
    const auto& p = doc["power"];
    detail::reject_unknown(p, {"i_tx_ma", "i_rx_ma", "i_idle_ma", "i_sleep_ma", "supply_v"}, "power.");
    sc.power.i_tx = get<double>(p, "i_tx_ma", "power.", sc.power.i_tx);
    sc.power.i_rx = get<double>(p, "i_rx_ma", "power.", sc.power.i_rx);
    sc.power.i_idle = get<double>(p, "i_idle_ma", "power.", sc.power.i_idle);
    sc.power.i_sleep = get<double>(p, "i_sleep_ma", "power.", sc.power.i_sleep);
    sc.power.supply_voltage = get<double>(p, "supply_v", "power.", 0.0);
  }
  try {
    sc.power.validate();
  } catch (const InvalidProfile& e) {
    throw ConfigError("power", e.what());
  }

  sc.superframe.bo = get<int>(doc, "bo", "", 3);
  sc.superframe.so = get<int>(doc, "so", "", sc.superframe.bo);
  sc.superframe.ble = get<bool>(doc, "ble", "", false);
  require(sc.superframe.bo >= 0 && sc.superframe.bo <= kMaxOrder, "bo", "must be in 0..14");
  require(sc.superframe.so >= 0 && sc.superframe.so <= kMaxOrder, "so", "must be in 0..14");
  require(sc.superframe.so <= sc.superframe.bo, "so", "so ≤ bo required");

  sc.csma.mac_min_be = get<int>(doc, "mac_min_be", "", 3);
  sc.csma.a_max_be = get<int>(doc, "a_max_be", "", 5);
  sc.csma.mac_max_csma_backoffs = get<int>(doc, "mac_max_csma_backoffs", "", 4);
  sc.csma.ble = sc.superframe.ble;
  require(sc.csma.a_max_be >= 0 && sc.csma.a_max_be <= 8, "a_max_be", "must be in 0..8");
  require(sc.csma.mac_min_be >= 0 && sc.csma.mac_min_be <= sc.csma.a_max_be, "mac_min_be",
          "0 ≤ mac_min_be ≤ a_max_be required");
  require(sc.csma.mac_max_csma_backoffs >= 0 && sc.csma.mac_max_csma_backoffs <= 5, "mac_max_csma_backoffs",
          "must be in 0..5");

  sc.max_frame_retries = get<int>(doc, "max_frame_retries", "", 3);
  require(sc.max_frame_retries >= 0 && sc.max_frame_retries <= 7, "max_frame_retries", "must be in 0..7");
  sc.sleep_after_ack = get<bool>(doc, "sleep_after_ack", "", true);
  sc.sync_mode = detail::parse_sync(get<std::string>(doc, "sync_mode", "", "tracked"), "sync_mode");
  sc.beacon_guard = get<std::int64_t>(doc, "beacon_guard", "", 60);
  require(sc.beacon_guard >= 0, "beacon_guard", "must be >= 0");
  sc.max_lost_beacons = get<int>(doc, "max_lost_beacons", "", 4);
  require(sc.max_lost_beacons >= 1, "max_lost_beacons", "must be >= 1");
  sc.pending_expiry_intervals = get<int>(doc, "pending_expiry_intervals", "", 4);
  require(sc.pending_expiry_intervals >= 1, "pending_expiry_intervals", "must be >= 1");
  sc.gts_expiry_intervals = get<int>(doc, "gts_expiry_intervals", "", 4);
  require(sc.gts_expiry_intervals >= 1, "gts_expiry_intervals", "must be >= 1");
  sc.ack_bytes = get<int>(doc, "ack_bytes", "", 11);
  require(sc.ack_bytes >= 1 && sc.ack_bytes <= 127, "ack_bytes", "must be in 1..127");
  sc.data_request_bytes = get<int>(doc, "data_request_bytes", "", 10);
  require(sc.data_request_bytes >= 1 && sc.data_request_bytes <= 127, "data_request_bytes", "must be in 1..127");

  sc.channel.range_m = get<double>(doc, "radio_range_m", "", 10.0);
  require(sc.channel.range_m > 0, "radio_range_m", "must be > 0");
  if (doc.contains("arena")) {
    const auto& a = doc["arena"];
    detail::reject_unknown(a, {"width", "height"}, "arena.");
    sc.channel.arena_width_m = get<double>(a, "width", "arena.", 100.0);
    sc.channel.arena_height_m = get<double>(a, "height", "arena.", 100.0);
    require(sc.channel.arena_width_m > 0 && sc.channel.arena_height_m > 0, "arena", "dimensions must be > 0");
  }

  require(!(doc.contains("nodes") && doc.contains("node_count")), "nodes", "give either nodes or node_count");
  if (doc.contains("nodes")) {
    require(doc["nodes"].is_array() && !doc["nodes"].empty(), "nodes", "must be a non-empty array");
    std::set<NodeId> seen;
    for (std::size_t i = 0; i < doc["nodes"].size(); ++i) {
      const auto& n = doc["nodes"][i];
      const std::string path = "nodes[" + std::to_string(i) + "].";
      detail::reject_unknown(n, {"id", "x", "y", "sync_mode"}, path);
      require(n.contains("id"), path + "id", "is required");
      NodeEntry e;
      e.id = get<NodeId>(n, "id", path, 0);
      require(e.id >= 0, path + "id", "must be >= 0");
      require(seen.insert(e.id).second, path + "id", "must be unique");
      e.position = {get<double>(n, "x", path, 0.0), get<double>(n, "y", path, 0.0)};
      if (n.contains("sync_mode"))
        e.sync_mode = detail::parse_sync(get<std::string>(n, "sync_mode", path, ""), path + "sync_mode");
      sc.nodes.push_back(e);
    }
  } else {
    const int count = get<int>(doc, "node_count", "", 2);
    require(count >= 1, "node_count", "must be >= 1");
    auto rng = node_stream(placement_seed, -1, 7);
    std::uniform_real_distribution<double> ux(0.0, sc.channel.arena_width_m);
    std::uniform_real_distribution<double> uy(0.0, sc.channel.arena_height_m);
    const double cx = sc.channel.arena_width_m / 2;
    const double cy = sc.channel.arena_height_m / 2;
    for (int i = 0; i < count; ++i) {
      NodeEntry e;
      e.id = i;
      if (sc.kind == ScenarioKind::Star) {
        // Devices on a circle of diameter range around the coordinator: everyone hears everyone.
        const double r = i == 0 ? 0.0 : sc.channel.range_m / 2;
        const double a = 6.283185307179586 * i / count;
        e.position = {cx + r * std::cos(a), cy + r * std::sin(a)};
      } else {
        e.position = {ux(rng), uy(rng)};
      }
      sc.nodes.push_back(e);
    }
  }
  std::set<NodeId> ids;
  for (const auto& n : sc.nodes) ids.insert(n.id);
  if (sc.kind == ScenarioKind::Star) require(ids.count(0) == 1, "nodes", "a star needs coordinator id 0");

  if (doc.contains("mobility")) {
    const auto& m = doc["mobility"];
    detail::reject_unknown(m, {"model", "speed_min", "speed_max", "pause_ms", "tick_ms", "waypoints"}, "mobility.");
    const auto model = get<std::string>(m, "model", "mobility.", "static");
    if (model == "static")
      sc.mobility.model = MobilityModel::Static;
    else if (model == "random_waypoint")
      sc.mobility.model = MobilityModel::RandomWaypoint;
    else if (model == "scripted")
      sc.mobility.model = MobilityModel::Scripted;
    else
      throw ConfigError("mobility.model", "must be static, random_waypoint or scripted");
    sc.mobility.speed_min = get<double>(m, "speed_min", "mobility.", 1.0);
    sc.mobility.speed_max = get<double>(m, "speed_max", "mobility.", 2.0);
    sc.mobility.pause_ms = get<double>(m, "pause_ms", "mobility.", 0.0);
    sc.mobility.tick_ms = get<double>(m, "tick_ms", "mobility.", 100.0);
    require(sc.mobility.speed_min > 0 && sc.mobility.speed_min <= sc.mobility.speed_max, "mobility.speed_min",
            "0 < speed_min ≤ speed_max required");
    require(sc.mobility.pause_ms >= 0, "mobility.pause_ms", "must be >= 0");
    require(sc.mobility.tick_ms > 0, "mobility.tick_ms", "must be > 0");
    if (m.contains("waypoints")) {
      require(m["waypoints"].is_array(), "mobility.waypoints", "must be an array");
      for (std::size_t i = 0; i < m["waypoints"].size(); ++i) {
        const auto& w = m["waypoints"][i];
        const std::string path = "mobility.waypoints[" + std::to_string(i) + "].";
        detail::reject_unknown(w, {"node", "t_ms", "x", "y"}, path);
        Waypoint wp{get<NodeId>(w, "node", path, 0), get<double>(w, "t_ms", path, 0.0),
                    {get<double>(w, "x", path, 0.0), get<double>(w, "y", path, 0.0)}};
        require(ids.count(wp.node) == 1, path + "node", "unknown node");
        require(wp.t_ms >= 0, path + "t_ms", "must be >= 0");
        sc.mobility.waypoints.push_back(wp);
      }
    }
  }

  sc.fixed_clusterheads = get<bool>(doc, "fixed_clusterheads", "", false);
  sc.replay_window_intervals = get<int>(doc, "replay_window_intervals", "", 4);
  require(sc.replay_window_intervals >= 0, "replay_window_intervals", "must be >= 0");
  const auto dedup = get<std::int64_t>(doc, "dedup_capacity", "", 256);
  require(dedup >= 1, "dedup_capacity", "must be >= 1");
  sc.dedup_capacity = static_cast<std::size_t>(dedup);
  sc.cluster_offset = get<std::int64_t>(doc, "cluster_offset", "", 0);
  require(sc.cluster_offset >= 0, "cluster_offset", "must be >= 0");

  if (doc.contains("gts_requests")) {
    require(doc["gts_requests"].is_array(), "gts_requests", "must be an array");
    for (std::size_t i = 0; i < doc["gts_requests"].size(); ++i) {
      const auto& g = doc["gts_requests"][i];
      const std::string path = "gts_requests[" + std::to_string(i) + "].";
      detail::reject_unknown(g, {"node", "direction", "slots"}, path);
      GtsRequestSpec r;
      r.node = get<NodeId>(g, "node", path, 1);
      require(ids.count(r.node) == 1 && r.node != 0, path + "node", "must name a device");
      const auto dir = get<std::string>(g, "direction", path, "node_to_coordinator");
      if (dir == "node_to_coordinator")
        r.direction = GtsDirection::NodeToCoordinator;
      else if (dir == "coordinator_to_node")
        r.direction = GtsDirection::CoordinatorToNode;
      else
        throw ConfigError(path + "direction", "must be node_to_coordinator or coordinator_to_node");
      r.slots = get<int>(g, "slots", path, 1);
      require(r.slots >= 1 && r.slots <= 15, path + "slots", "must be in 1..15");
      sc.gts_requests.push_back(r);
    }
    require(sc.gts_requests.size() <= static_cast<std::size_t>(kMaxGts), "gts_requests", "at most 7 GTS");
  }

  if (doc.contains("workload")) {
    require(doc["workload"].is_array(), "workload", "must be an array");
    for (std::size_t i = 0; i < doc["workload"].size(); ++i) {
      const auto& w = doc["workload"][i];
      const std::string path = "workload[" + std::to_string(i) + "].";
      detail::reject_unknown(w,
                             {"src", "dst", "size", "kind", "p", "rate_pps", "period_intervals", "time_ms",
                              "validity_ms", "gts"},
                             path);
      WorkloadSpec s;
      s.src = get<NodeId>(w, "src", path, 1);
      s.dst = get<NodeId>(w, "dst", path, 0);
      require(ids.count(s.src) == 1, path + "src", "unknown node");
      require(ids.count(s.dst) == 1 || (sc.kind == ScenarioKind::Manet && s.dst == kBroadcast), path + "dst",
              "unknown node");
      require(s.src != s.dst, path + "dst", "must differ from src");
      if (sc.kind == ScenarioKind::Star)
        require(s.src == 0 || s.dst == 0, path + "dst", "star traffic goes to or from the coordinator");
      s.size = get<int>(w, "size", path, 50);
      require(s.size >= 1 && s.size <= 127, path + "size", "must be in 1..127 bytes");
      const auto k = get<std::string>(w, "kind", path, "periodic");
      if (k == "bernoulli")
        s.kind = TrafficKind::Bernoulli;
      else if (k == "poisson")
        s.kind = TrafficKind::Poisson;
      else if (k == "periodic")
        s.kind = TrafficKind::Periodic;
      else if (k == "oneshot")
        s.kind = TrafficKind::Oneshot;
      else
        throw ConfigError(path + "kind", "must be bernoulli, poisson, periodic or oneshot");
      s.p = get<double>(w, "p", path, 0.0);
      require(s.p >= 0 && s.p <= 1, path + "p", "must be in [0,1]");
      s.rate_pps = get<double>(w, "rate_pps", path, 0.0);
      require(s.rate_pps >= 0, path + "rate_pps", "must be >= 0");
      s.period_intervals = get<int>(w, "period_intervals", path, 1);
      require(s.period_intervals >= 1, path + "period_intervals", "must be >= 1");
      s.time_ms = get<double>(w, "time_ms", path, 0.0);
      require(s.time_ms >= 0, path + "time_ms", "must be >= 0");
      s.validity_ms = get<double>(w, "validity_ms", path, 0.0);
      require(s.validity_ms >= 0, path + "validity_ms", "must be >= 0");
      s.gts = get<bool>(w, "gts", path, false);
      if (s.gts) {
        require(sc.kind == ScenarioKind::Star && s.dst == 0, path + "gts", "GTS traffic must go to the coordinator");
        bool has = false;
        for (const auto& g : sc.gts_requests) has = has || g.node == s.src;
        require(has, path + "gts", "source holds no GTS request");
      }
      sc.workload.push_back(s);
    }
  }
  return sc;
}

}  // namespace wpan
