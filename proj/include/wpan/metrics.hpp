// Run metrics: per-node radio ledgers and network-wide counters.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "wpan/superframe.hpp"
#include "wpan/time_energy.hpp"

namespace wpan {

struct NodeMetrics {
  NodeId id = 0;
  std::string role;
  std::string sync_mode;
  EnergyLedger ledger;
  std::int64_t frames_tx = 0;
  std::int64_t frames_rx = 0;
  std::int64_t caf_count = 0;
};

struct MetricsReport {
  std::vector<NodeMetrics> nodes;
  SimTime horizon;
  std::int64_t intervals = 0;

  std::int64_t generated = 0;
  std::int64_t delivered = 0;
  std::int64_t expired = 0;
  std::int64_t failed = 0;
  std::int64_t in_flight = 0;

  std::vector<double> latencies_ms;
  std::int64_t collisions = 0;
  std::int64_t channel_access_failures = 0;
  std::int64_t deferrals = 0;
  std::int64_t redundant_transmissions = 0;
  std::int64_t gts_frames = 0;
  std::int64_t gts_collisions = 0;
  double gts_waste_ms = 0.0;
  double delivered_bits = 0.0;

  double horizon_s(const PhyProfile& phy) const { return phy.to_s(horizon); }

  double effective_throughput_bps(const PhyProfile& phy) const {
    const double s = horizon_s(phy);
    return s > 0 ? delivered_bits / s : 0.0;
  }

  double mean_latency_ms() const {
    if (latencies_ms.empty()) return 0.0;
    double sum = 0.0;
    for (double l : latencies_ms) sum += l;
    return sum / static_cast<double>(latencies_ms.size());
  }

  /// Nearest-rank 95th percentile.
  double p95_latency_ms() const {
    if (latencies_ms.empty()) return 0.0;
    auto v = latencies_ms;
    std::sort(v.begin(), v.end());
    const auto rank = static_cast<std::size_t>(std::ceil(0.95 * static_cast<double>(v.size())));
    return v[std::max<std::size_t>(rank, 1) - 1];
  }

  const NodeMetrics* node(NodeId id) const {
    for (const auto& n : nodes)
      if (n.id == id) return &n;
    return nullptr;
  }
};

}  // namespace wpan
