// Pieces shared by the simulators: radio bookkeeping, tracing, traffic arrivals.
#pragma once

#include <charconv>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "wpan/cluster.hpp"
#include "wpan/csma.hpp"
#include "wpan/event_queue.hpp"
#include "wpan/metrics.hpp"
#include "wpan/scenario.hpp"
#include "wpan/time_energy.hpp"

namespace wpan {

/// Radio state of one node plus its energy ledger. Charge for a state is
/// booked when the state is left.
struct Radio {
  RadioState state = RadioState::Sleep;
  SimTime since;
  EnergyLedger ledger;

  void set(RadioState s, SimTime now, const RadioPowerProfile& power, const PhyProfile& phy) {
    if (s == state) return;
    ledger.accrue(state, now - since, power, phy);
    state = s;
    since = now;
  }

  void close(SimTime horizon, const RadioPowerProfile& power, const PhyProfile& phy) {
    ledger.accrue(state, horizon - since, power, phy);
    since = horizon;
  }

  /// Listening continuously since `t` (inclusive).
  bool listening_since(SimTime t) const { return state == RadioState::Rx && since <= t; }
};

/// Event trace, one tab-separated line per executed event.
class TraceLog {
 public:
  explicit TraceLog(bool enabled) : enabled_(enabled) {}
  bool enabled() const { return enabled_; }

  void record(const Event& e) {
    if (!enabled_) return;
    text_ += std::to_string(e.time.ticks);
    text_ += '\t';
    text_ += std::to_string(e.seq);
    text_ += '\t';
    text_ += std::to_string(e.node);
    text_ += '\t';
    text_ += to_string(e.kind);
    text_ += '\t';
    text_ += e.detail;
    text_ += '\n';
  }

  const std::string& text() const { return text_; }
  std::string take() { return std::move(text_); }

 private:
  bool enabled_;
  std::string text_;
};

struct Arrival {
  SimTime at;
  std::size_t workload = 0;
};

/// Arrival times of one workload entry over [start, horizon).
inline std::vector<Arrival> generate_arrivals(const WorkloadSpec& w, std::size_t index, const Scenario& sc,
                                              SimTime start, SimTime horizon, std::uint64_t seed) {
  std::vector<Arrival> out;
  auto rng = node_stream(seed, w.src, 100 + static_cast<std::uint32_t>(index));
  const SimTime bi = sc.beacon_interval();
  const double symbol_us = sc.phy.symbol_period_us;
  switch (w.kind) {
    case TrafficKind::Bernoulli: {
      std::bernoulli_distribution coin(w.p);
      std::uniform_int_distribution<std::int64_t> offset(0, bi.ticks - 1);
      for (std::int64_t k = 0; k < sc.duration_intervals; ++k) {
        const bool hit = coin(rng);
        const auto off = offset(rng);
        if (hit) out.push_back({start + bi * k + SimTime{off}, index});
      }
      break;
    }
    case TrafficKind::Poisson: {
      if (w.rate_pps <= 0) break;
      std::exponential_distribution<double> gap(w.rate_pps);
      double t_us = static_cast<double>(start.ticks) * symbol_us;
      while (true) {
        t_us += gap(rng) * 1e6;
        const auto ticks = static_cast<std::int64_t>(t_us / symbol_us);
        if (ticks >= horizon.ticks) break;
        out.push_back({SimTime{ticks}, index});
      }
      break;
    }
    case TrafficKind::Periodic: {
      const auto off = static_cast<std::int64_t>(w.time_ms * 1000.0 / symbol_us);
      for (std::int64_t k = 0; k < sc.duration_intervals; k += w.period_intervals) {
        const SimTime t = start + bi * k + SimTime{off};
        if (t < horizon) out.push_back({t, index});
      }
      break;
    }
    case TrafficKind::Oneshot: {
      const SimTime t{static_cast<std::int64_t>(w.time_ms * 1000.0 / symbol_us)};
      if (t < horizon) out.push_back({t, index});
      break;
    }
  }
  return out;
}

inline SimTime ms_to_time(double ms, const PhyProfile& phy) {
  return SimTime{static_cast<std::int64_t>(std::llround(ms * 1000.0 / phy.symbol_period_us))};
}

}  // namespace wpan
