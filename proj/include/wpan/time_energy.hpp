// Time base, PHY timing constants, radio currents and per-node charge accounting.
#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

namespace wpan {

/// Simulated time as an integer count of PHY symbol periods.
struct SimTime {
  std::int64_t ticks = 0;

  constexpr SimTime() = default;
  constexpr explicit SimTime(std::int64_t t) : ticks(t) {}

  friend constexpr auto operator<=>(SimTime, SimTime) = default;
  friend constexpr SimTime operator+(SimTime a, SimTime b) { return SimTime{a.ticks + b.ticks}; }
  friend constexpr SimTime operator-(SimTime a, SimTime b) { return SimTime{a.ticks - b.ticks}; }
  friend constexpr SimTime operator*(SimTime a, std::int64_t k) { return SimTime{a.ticks * k}; }
  friend constexpr SimTime operator*(std::int64_t k, SimTime a) { return SimTime{a.ticks * k}; }
  constexpr SimTime& operator+=(SimTime o) {
    ticks += o.ticks;
    return *this;
  }
  constexpr SimTime& operator-=(SimTime o) {
    ticks -= o.ticks;
    return *this;
  }
};

constexpr SimTime symbols(std::int64_t n) { return SimTime{n}; }

struct PhyProfile {
  double symbol_period_us = 16.0;
  int bits_per_symbol = 4;
  int phy_overhead_bytes = 6;  // preamble + SFD + PHY header
  std::int64_t base_slot = 60;
  std::int64_t num_slots = 16;
  std::int64_t unit_backoff = 20;
  std::int64_t cca_duration = 8;
  std::int64_t turnaround = 12;

  constexpr std::int64_t base_superframe() const { return base_slot * num_slots; }

  double to_us(SimTime t) const { return static_cast<double>(t.ticks) * symbol_period_us; }
  double to_ms(SimTime t) const { return to_us(t) / 1000.0; }
  double to_s(SimTime t) const { return to_us(t) / 1e6; }

  /// Rounds up to whole symbols.
  SimTime from_us(double us) const {
    auto whole = static_cast<std::int64_t>(us / symbol_period_us);
    if (static_cast<double>(whole) * symbol_period_us < us) ++whole;
    return SimTime{whole};
  }

  void validate() const {
    if (bits_per_symbol <= 0) throw std::invalid_argument("phy: bits_per_symbol must be > 0");
    if (!(symbol_period_us > 0.0) || base_slot <= 0 || num_slots <= 0 || unit_backoff <= 0 ||
        cca_duration <= 0 || turnaround < 0 || phy_overhead_bytes < 0)
      throw std::invalid_argument("phy: all durations must be > 0");
  }
};

/// Default 2.4 GHz O-QPSK profile: 62.5 ksymbol/s, 4 bits per symbol.
inline PhyProfile phy_2450mhz() { return PhyProfile{}; }

enum class RadioState : std::uint8_t { Tx = 0, Rx = 1, Idle = 2, Sleep = 3 };
inline constexpr std::array<RadioState, 4> kRadioStates{RadioState::Tx, RadioState::Rx, RadioState::Idle,
                                                        RadioState::Sleep};

inline std::string_view to_string(RadioState s) {
  switch (s) {
    case RadioState::Tx: return "TX";
    case RadioState::Rx: return "RX";
    case RadioState::Idle: return "IDLE";
    case RadioState::Sleep: return "SLEEP";
  }
  return "?";
}

class InvalidProfile : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Radio currents in mA.
struct RadioPowerProfile {
  double i_tx = 17.4;
  double i_rx = 19.7;
  double i_idle = 0.426;
  double i_sleep = 0.020;
  double supply_voltage = 0.0;  // 0 = unknown; charge is reported, energy is not

  double current(RadioState s) const {
    switch (s) {
      case RadioState::Tx: return i_tx;
      case RadioState::Rx: return i_rx;
      case RadioState::Idle: return i_idle;
      case RadioState::Sleep: return i_sleep;
    }
    return 0.0;
  }

  void validate() const {
    if (!(i_tx > 0.0)) throw InvalidProfile("i_tx_ma must be > 0");
    if (!(i_sleep > 0.0 && i_idle > i_sleep && i_rx > i_idle))
      throw InvalidProfile("currents must satisfy i_rx_ma > i_idle_ma > i_sleep_ma > 0");
    if (supply_voltage < 0.0) throw InvalidProfile("supply_v must be >= 0");
  }
};

/// Airtime of one PPDU carrying `mpdu_bytes` of MAC payload.
inline SimTime frame_airtime(int mpdu_bytes, const PhyProfile& phy) {
  if (mpdu_bytes < 1) throw std::invalid_argument("frame_airtime: mpdu_bytes must be >= 1");
  const std::int64_t bits = static_cast<std::int64_t>(phy.phy_overhead_bytes + mpdu_bytes) * 8;
  return SimTime{(bits + phy.bits_per_symbol - 1) / phy.bits_per_symbol};
}

struct PowerRatios {
  double rx_over_idle;
  double rx_over_sleep;
};

inline PowerRatios power_ratios(const RadioPowerProfile& p) {
  if (p.i_idle == 0.0 || p.i_sleep == 0.0) throw InvalidProfile("power_ratios: zero divisor");
  return {p.i_rx / p.i_idle, p.i_rx / p.i_sleep};
}

/// Per-radio-state time and charge (µC = mA × ms) of one node.
///
/// Charge is recomputed from the accumulated time on every update, so
/// charge(s) == current(s) * time(s) holds exactly for a fixed profile.
class EnergyLedger {
 public:
  void accrue(RadioState s, SimTime duration, const RadioPowerProfile& profile, const PhyProfile& phy) {
    if (duration.ticks < 0) throw std::invalid_argument("accrue: negative duration");
    if (duration.ticks == 0) return;
    auto i = index(s);
    time_[i] += duration;
    charge_[i] = profile.current(s) * phy.to_ms(time_[i]);
  }

  SimTime time(RadioState s) const { return time_[index(s)]; }
  double charge_uc(RadioState s) const { return charge_[index(s)]; }

  SimTime total_time() const {
    SimTime t;
    for (auto s : kRadioStates) t += time(s);
    return t;
  }
  double total_charge_uc() const {
    double q = 0.0;
    for (auto s : kRadioStates) q += charge_uc(s);
    return q;
  }
  /// Charge spent with the radio awake (everything except SLEEP).
  double awake_charge_uc() const { return total_charge_uc() - charge_uc(RadioState::Sleep); }

  friend bool operator==(const EnergyLedger&, const EnergyLedger&) = default;

 private:
  static constexpr std::size_t index(RadioState s) { return static_cast<std::size_t>(s); }
  std::array<SimTime, 4> time_{};
  std::array<double, 4> charge_{};
};

/// Functional form of EnergyLedger::accrue.
inline EnergyLedger accrue(EnergyLedger ledger, RadioState s, SimTime duration, const RadioPowerProfile& profile,
                           const PhyProfile& phy) {
  ledger.accrue(s, duration, profile, phy);
  return ledger;
}

}  // namespace wpan
