#include <gtest/gtest.h>

#include <nlohmann/json.hpp>

#include "wpan/scenario.hpp"

using namespace wpan;
using nlohmann::json;

namespace {

json base() {
  return json::parse(R"({"kind":"star","duration_intervals":10,"bo":6,"so":3,"node_count":3})");
}

std::string key_of(const json& doc) {
  try {
    parse_scenario(doc);
  } catch (const ConfigError& e) {
    return e.key();
  }
  return "";
}

}  // namespace

TEST(Scenario, ParsesDefaults) {
  const auto sc = parse_scenario(base());
  EXPECT_EQ(sc.kind, ScenarioKind::Star);
  EXPECT_EQ(sc.superframe.bo, 6);
  EXPECT_EQ(sc.superframe.so, 3);
  EXPECT_EQ(sc.nodes.size(), 3u);
  EXPECT_EQ(sc.beacon_guard, 60);
  EXPECT_EQ(sc.max_lost_beacons, 4);
  EXPECT_EQ(sc.horizon(), SimTime{960 * 64 * 10});
}

TEST(Scenario, SoAboveBoNamesKey) {
  auto d = base();
  d["so"] = 7;
  try {
    parse_scenario(d);
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.key(), "so");
    EXPECT_NE(std::string(e.what()).find("so ≤ bo"), std::string::npos);
  }
}

TEST(Scenario, UnknownKeyNamed) {
  auto d = base();
  d["bogus"] = 1;
  EXPECT_EQ(key_of(d), "bogus");
  auto w = base();
  w["workload"] = json::array({{{"src", 1}, {"dst", 0}, {"colour", 1}}});
  EXPECT_EQ(key_of(w), "workload[0].colour");
}

TEST(Scenario, WrongTypeNamed) {
  auto d = base();
  d["bo"] = "six";
  EXPECT_EQ(key_of(d), "bo");
}

TEST(Scenario, MissingDuration) {
  auto d = base();
  d.erase("duration_intervals");
  EXPECT_EQ(key_of(d), "duration_intervals");
}

TEST(Scenario, StarNeedsCoordinator) {
  auto d = base();
  d.erase("node_count");
  d["nodes"] = json::array({{{"id", 1}}, {{"id", 2}}});
  EXPECT_EQ(key_of(d), "nodes");
}

TEST(Scenario, DuplicateNodeId) {
  auto d = base();
  d.erase("node_count");
  d["nodes"] = json::array({{{"id", 0}}, {{"id", 1}}, {{"id", 1}}});
  EXPECT_EQ(key_of(d), "nodes[2].id");
}

TEST(Scenario, StarTrafficTouchesCoordinator) {
  auto d = base();
  d["workload"] = json::array({{{"src", 1}, {"dst", 2}, {"kind", "periodic"}}});
  EXPECT_EQ(key_of(d), "workload[0].dst");
}

TEST(Scenario, BadOrders) {
  auto d = base();
  d["bo"] = 15;
  EXPECT_EQ(key_of(d), "bo");
  auto e = base();
  e["so"] = -1;
  EXPECT_EQ(key_of(e), "so");
}

TEST(Scenario, PowerOrderingEnforced) {
  auto d = base();
  d["power"] = {{"i_idle_ma", 30.0}};
  EXPECT_EQ(key_of(d), "power");
}

TEST(Scenario, GtsLimit) {
  auto d = base();
  d["node_count"] = 10;
  d["gts_requests"] = json::array();
  for (int i = 1; i <= 8; ++i) d["gts_requests"].push_back({{"node", i}, {"slots", 1}});
  EXPECT_EQ(key_of(d), "gts_requests");
}

TEST(Scenario, ManetBroadcastDst) {
  auto d = json::parse(R"({"kind":"manet","duration_intervals":5,"bo":4,"so":4,"node_count":4,
    "workload":[{"src":1,"dst":-1,"kind":"oneshot","time_ms":10}]})");
  const auto sc = parse_scenario(d);
  EXPECT_EQ(sc.workload.at(0).dst, kBroadcast);
  EXPECT_EQ(sc.workload.at(0).kind, TrafficKind::Oneshot);
}

TEST(Scenario, PerNodeSyncOverride) {
  auto d = base();
  d.erase("node_count");
  d["sync_mode"] = "tracked";
  d["nodes"] = json::array({{{"id", 0}}, {{"id", 1}, {"sync_mode", "untracked"}}});
  const auto sc = parse_scenario(d);
  EXPECT_EQ(sc.sync_of(1), SyncMode::Untracked);
  EXPECT_EQ(sc.sync_of(0), SyncMode::Tracked);
}

TEST(Scenario, PlacementIsSeeded) {
  auto d = json::parse(R"({"kind":"manet","duration_intervals":5,"bo":4,"so":4,"node_count":6})");
  const auto a = parse_scenario(d, 3);
  const auto b = parse_scenario(d, 3);
  for (std::size_t i = 0; i < a.nodes.size(); ++i) EXPECT_EQ(a.nodes[i].position, b.nodes[i].position);
}

TEST(Scenario, AllTopLevelKeysKnown) {
  for (const char* k : {"kind", "bo", "so", "workload", "mobility", "gts_requests", "seed", "nodes"})
    EXPECT_TRUE(scenario_keys().count(k)) << k;
}
