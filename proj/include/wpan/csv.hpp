// Metrics and analysis CSV output. Numbers are written with std::to_chars so
// output never depends on the locale.
#pragma once

#include <charconv>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "wpan/metrics.hpp"
#include "wpan/sync_energy.hpp"

namespace wpan {

inline constexpr std::string_view kToolVersion = "wpansim 0.1.0";

inline std::string fmt(double v) {
  if (v == 0.0) v = 0.0;  // no "-0.000000"
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::fixed, 6);
  return std::string(buf, res.ptr);
}

inline std::string fmt(std::int64_t v) { return std::to_string(v); }

/// 64-bit FNV-1a.
inline std::uint64_t fnv1a(std::string_view data) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : data) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  char buf[17];
  auto res = std::to_chars(buf, buf + sizeof buf, v, 16);
  std::string s(buf, res.ptr);
  return std::string(16 - s.size(), '0') + s;
}

inline const std::vector<std::string>& node_columns() {
  static const std::vector<std::string> cols{"node_id",  "role",     "sync_mode", "t_tx_ms",   "t_rx_ms",
                                             "t_idle_ms", "t_sleep_ms", "q_tx_uc", "q_rx_uc",   "q_idle_uc",
                                             "q_sleep_uc", "frames_tx", "frames_rx", "caf_count"};
  return cols;
}

inline const std::vector<std::string>& summary_columns() {
  static const std::vector<std::string> cols{"generated",      "delivered",      "expired",
                                             "failed",         "collisions",     "redundant_tx",
                                             "mean_latency_ms", "p95_latency_ms", "effective_throughput_bps",
                                             "gts_waste_ms"};
  return cols;
}

/// Summary metric values in summary_columns() order.
inline std::vector<double> summary_values(const MetricsReport& m, const PhyProfile& phy) {
  return {static_cast<double>(m.generated),
          static_cast<double>(m.delivered),
          static_cast<double>(m.expired),
          static_cast<double>(m.failed),
          static_cast<double>(m.collisions),
          static_cast<double>(m.redundant_transmissions),
          m.mean_latency_ms(),
          m.p95_latency_ms(),
          m.effective_throughput_bps(phy),
          m.gts_waste_ms};
}

inline std::string metrics_csv(const MetricsReport& m, const PhyProfile& phy, std::uint64_t seed,
                               std::uint64_t scenario_hash) {
  std::string out;
  out += "# tool=" + std::string(kToolVersion) + "\n";
  out += "# seed=" + std::to_string(seed) + "\n";
  out += "# scenario_hash=" + hex64(scenario_hash) + "\n";
  bool first = true;
  for (const auto* cols : {&node_columns(), &summary_columns()})
    for (const auto& c : *cols) {
      if (!first) out += ',';
      out += c;
      first = false;
    }
  out += '\n';
  const std::string blank_summary(summary_columns().size(), ',');

  std::int64_t tx = 0, rx = 0, caf = 0;
  double t_ms[4] = {}, q[4] = {};
  for (const auto& n : m.nodes) {
    out += std::to_string(n.id) + ',' + n.role + ',' + n.sync_mode;
    for (auto s : kRadioStates) out += ',' + fmt(phy.to_ms(n.ledger.time(s)));
    for (auto s : kRadioStates) out += ',' + fmt(n.ledger.charge_uc(s));
    out += ',' + fmt(n.frames_tx) + ',' + fmt(n.frames_rx) + ',' + fmt(n.caf_count);
    out += blank_summary + '\n';
    for (std::size_t i = 0; i < 4; ++i) {
      t_ms[i] += phy.to_ms(n.ledger.time(kRadioStates[i]));
      q[i] += n.ledger.charge_uc(kRadioStates[i]);
    }
    tx += n.frames_tx;
    rx += n.frames_rx;
    caf += n.caf_count;
  }
  out += "all,summary,";
  for (double v : t_ms) out += ',' + fmt(v);
  for (double v : q) out += ',' + fmt(v);
  out += ',' + fmt(tx) + ',' + fmt(rx) + ',' + fmt(caf);
  const auto vals = summary_values(m, phy);
  for (std::size_t i = 0; i < vals.size(); ++i) out += ',' + (i < 6 ? fmt(static_cast<std::int64_t>(vals[i])) : fmt(vals[i]));
  out += '\n';
  return out;
}

inline std::string analysis_csv(const std::vector<EnergyRow>& rows) {
  std::string out = "bo,so,duty_cycle,rate_bps,p,e_tracked_uc,e_untracked_uc,mode\n";
  for (const auto& r : rows) {
    out += std::to_string(r.bo) + ',' + std::to_string(r.so) + ',' + fmt(r.duty_cycle) + ',' + fmt(r.rate_bps) + ',' +
           fmt(r.p) + ',' + fmt(r.e_tracked) + ',' + fmt(r.e_untracked) + ',' + to_string(r.recommended_mode) + '\n';
  }
  return out;
}

}  // namespace wpan
