#include <gtest/gtest.h>

#include <map>
#include <nlohmann/json.hpp>
#include <random>
#include <sstream>

#include "support/oracles.hpp"
#include "wpan/sim.hpp"

using namespace wpan;
using nlohmann::json;

namespace {

const PhyProfile kPhy = phy_2450mhz();

json manet(std::int64_t intervals, json nodes) {
  return {{"kind", "manet"}, {"duration_intervals", intervals}, {"bo", 4}, {"so", 4},
          {"radio_range_m", 10}, {"nodes", std::move(nodes)}};
}

json grid(int side, double spacing) {
  json out = json::array();
  for (int r = 0; r < side; ++r)
    for (int c = 0; c < side; ++c) out.push_back({{"id", r * side + c}, {"x", c * spacing}, {"y", r * spacing}});
  return out;
}

json line(int n, double spacing) {
  json out = json::array();
  for (int i = 0; i < n; ++i) out.push_back({{"id", i}, {"x", i * spacing}, {"y", 0}});
  return out;
}

RunOutput go(const json& doc, std::uint64_t seed = 1, bool trace = false) {
  return run(parse_scenario(doc, seed), seed, trace);
}

void expect_accounting(const MetricsReport& m) {
  EXPECT_EQ(m.delivered + m.expired + m.in_flight + m.failed, m.generated);
  for (const auto& n : m.nodes) EXPECT_EQ(n.ledger.total_time(), m.horizon) << "node " << n.id;
}

// msg id -> transmissions seen in the trace
std::map<std::uint64_t, int> tx_per_msg(const std::string& trace) {
  std::map<std::uint64_t, int> out;
  for (const auto& l : test::parse_trace(trace)) {
    if (l.kind != "frame-tx-end") continue;
    const auto at = l.detail.find("msg=");
    if (at != std::string::npos) ++out[std::stoull(l.detail.substr(at + 4))];
  }
  return out;
}

}  // namespace

TEST(ManetSim, LineUnicastDelivered) {
  auto d = manet(40, line(8, 8));
  d["workload"] = json::array({{{"src", 7}, {"dst", 0}, {"kind", "periodic"}, {"period_intervals", 10}, {"time_ms", 5}}});
  const auto out = go(d);
  EXPECT_EQ(out.metrics.generated, 4);
  EXPECT_EQ(out.metrics.delivered, 4);
  expect_accounting(out.metrics);
}

TEST(ManetSim, MemberShortCircuit) {
  // 1 and 2 are both members of clusterhead 0: source hop plus one direct hop.
  auto d = manet(4, json::array({{{"id", 0}, {"x", 0}, {"y", 0}}, {{"id", 1}, {"x", 6}, {"y", 0}},
                                 {{"id", 2}, {"x", -6}, {"y", 0}}}));
  d["workload"] = json::array({{{"src", 1}, {"dst", 2}, {"kind", "oneshot"}, {"time_ms", 10}}});
  const auto out = go(d, 1, true);
  EXPECT_EQ(out.metrics.delivered, 1);
  EXPECT_EQ(tx_per_msg(out.trace).at(1), 2);
  EXPECT_EQ(out.metrics.redundant_transmissions, 0);
}

// On a chain each hop waits for the previous one, so nothing is lost. Denser
// layouts can lose copies to hidden terminals; lossless reach is checked
// against the ideal propagation oracle instead.
TEST(ManetSim, BroadcastReachesEveryoneOnChain) {
  auto d = manet(10, line(9, 8));
  d["workload"] = json::array({{{"src", 4}, {"dst", -1}, {"kind", "oneshot"}, {"time_ms", 10}}});
  const auto out = go(d, 1, true);
  EXPECT_EQ(out.metrics.delivered, 1);
  for (const auto& n : out.metrics.nodes) {
    if (n.id != 4) { EXPECT_GE(n.frames_rx, 1) << n.id; }
  }
}

TEST(ManetSim, FloodingIsRedundantWithManyClusters) {
  auto d = manet(20, grid(3, 8));
  d["workload"] = json::array({{{"src", 1}, {"dst", 8}, {"kind", "periodic"}, {"period_intervals", 4}, {"time_ms", 5}}});
  const auto sc = parse_scenario(d, 1);
  std::vector<NodeSpec> specs;
  for (const auto& n : sc.nodes) specs.push_back({n.id, n.position});
  const auto topo = form_clusters(specs, 10);
  ASSERT_GT(topo.clusterheads().size(), 2u);
  const auto out = go(d);
  EXPECT_EQ(out.metrics.delivered, out.metrics.generated);
  EXPECT_GT(out.metrics.redundant_transmissions, 0);
  int gateways = 0;
  for (const auto& n : topo.nodes()) gateways += n.role == Role::Gateway ? 1 : 0;
  const auto clusters = static_cast<std::int64_t>(topo.clusterheads().size());
  EXPECT_LE(out.metrics.redundant_transmissions, out.metrics.delivered * clusters * (1 + gateways));
}

TEST(ManetSim, FixedClusterheadsAreMinimal) {
  auto d = manet(20, grid(3, 8));
  d["fixed_clusterheads"] = true;
  d["workload"] = json::array({{{"src", 1}, {"dst", 8}, {"kind", "periodic"}, {"period_intervals", 4}, {"time_ms", 5}}});
  const auto out = go(d);
  EXPECT_EQ(out.metrics.delivered, out.metrics.generated);
  EXPECT_EQ(out.metrics.redundant_transmissions, 0);
}

TEST(ManetSim, NothingForwardedAfterDeadline) {
  auto d = manet(20, grid(4, 8));
  // 3 ms is long enough for a couple of hops only.
  d["workload"] = json::array({{{"src", 0}, {"dst", 15}, {"kind", "periodic"}, {"period_intervals", 2},
                                {"time_ms", 5}, {"validity_ms", 3.0}}});
  const auto out = go(d, 1, true);
  EXPECT_GT(out.metrics.expired, 0);
  expect_accounting(out.metrics);
  const auto bi_ms = kPhy.to_ms(beacon_interval(4, kPhy));
  const auto air = frame_airtime(50, kPhy).ticks;
  for (const auto& l : test::parse_trace(out.trace)) {
    if (l.kind != "frame-tx-end") continue;
    const auto id = std::stoull(l.detail.substr(l.detail.find("msg=") + 4));
    // Message k (1-based) is created at 5 ms + 2(k-1) intervals.
    const double created_ms = 5.0 + 2.0 * bi_ms * static_cast<double>(id - 1);
    const auto deadline = ms_to_time(created_ms + 3.0, kPhy);
    EXPECT_LE(l.time - air, deadline.ticks) << l.detail;
  }
}

TEST(ManetSim, JoinReplayDeliversLateArrival) {
  auto nodes = json::array({{{"id", 0}, {"x", 0}, {"y", 0}}, {{"id", 1}, {"x", 8}, {"y", 0}},
                            {{"id", 2}, {"x", 60}, {"y", 0}}});
  auto d = manet(8, nodes);
  d["mobility"] = {{"model", "scripted"}, {"waypoints", json::array({{{"node", 2}, {"t_ms", 300}, {"x", 0}, {"y", 6}}})}};
  d["workload"] = json::array({{{"src", 1}, {"dst", 2}, {"kind", "oneshot"}, {"time_ms", 100}, {"validity_ms", 1500}}});
  d["replay_window_intervals"] = 4;
  const auto with = go(d);
  EXPECT_EQ(with.metrics.delivered, 1);
  d["replay_window_intervals"] = 0;
  const auto without = go(d);
  EXPECT_EQ(without.metrics.delivered, 0);
  EXPECT_EQ(without.metrics.expired, 1);
}

TEST(ManetSim, ReplayRespectsValidity) {
  auto nodes = json::array({{{"id", 0}, {"x", 0}, {"y", 0}}, {{"id", 1}, {"x", 8}, {"y", 0}},
                            {{"id", 2}, {"x", 60}, {"y", 0}}});
  auto d = manet(8, nodes);
  d["mobility"] = {{"model", "scripted"}, {"waypoints", json::array({{{"node", 2}, {"t_ms", 300}, {"x", 0}, {"y", 6}}})}};
  d["workload"] = json::array({{{"src", 1}, {"dst", 2}, {"kind", "oneshot"}, {"time_ms", 100}, {"validity_ms", 150}}});
  const auto out = go(d);
  EXPECT_EQ(out.metrics.delivered, 0);
  EXPECT_EQ(out.metrics.expired, 1);
}

TEST(ManetSim, Deterministic) {
  auto d = manet(30, json::array());
  d.erase("nodes");
  d["node_count"] = 25;
  d["arena"] = {{"width", 40}, {"height", 40}};
  d["mobility"] = {{"model", "random_waypoint"}, {"speed_min", 1}, {"speed_max", 3}, {"tick_ms", 200}};
  d["workload"] = json::array({{{"src", 3}, {"dst", 17}, {"kind", "poisson"}, {"rate_pps", 2}},
                               {{"src", 9}, {"dst", -1}, {"kind", "bernoulli"}, {"p", 0.3}}});
  const auto a = go(d, 5, true);
  const auto b = go(d, 5, true);
  EXPECT_EQ(a.trace, b.trace);
  EXPECT_EQ(a.metrics.redundant_transmissions, b.metrics.redundant_transmissions);
  expect_accounting(a.metrics);
}

TEST(ManetSimProperty, RandomConfigurationsTerminate) {
  std::mt19937_64 rng(123);
  auto pick = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };
  for (int trial = 0; trial < 60; ++trial) {
    const int n = pick(2, 30);
    auto d = manet(pick(3, 20), json::array());
    d.erase("nodes");
    d["node_count"] = n;
    d["arena"] = {{"width", pick(10, 60)}, {"height", pick(10, 60)}};
    d["fixed_clusterheads"] = pick(0, 1) == 1;
    d["replay_window_intervals"] = pick(0, 4);
    d["mac_min_be"] = pick(0, 3);
    if (pick(0, 1)) d["mobility"] = {{"model", "random_waypoint"}, {"speed_min", 1}, {"speed_max", pick(1, 10)},
                                     {"tick_ms", pick(50, 500)}, {"pause_ms", pick(0, 300)}};
    d["workload"] = json::array();
    for (int k = pick(1, 4); k > 0; --k) {
      const int src = pick(0, n - 1);
      int dst = pick(-1, n - 1);
      if (dst == src) dst = -1;
      json w{{"src", src}, {"dst", dst}, {"kind", pick(0, 1) ? "poisson" : "bernoulli"}, {"rate_pps", pick(1, 10)},
             {"p", pick(1, 9) / 10.0}};
      if (pick(0, 1)) w["validity_ms"] = pick(1, 1000);
      d["workload"].push_back(w);
    }
    SCOPED_TRACE(d.dump());
    const auto out = go(d, trial + 1);
    expect_accounting(out.metrics);
    EXPECT_GE(out.metrics.redundant_transmissions, 0);
  }
}
