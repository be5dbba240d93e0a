// Closed-form per-beacon-interval charge of beacon-tracking and non-tracking
// synchronization, and the BO/SO/rate sweep built on it.
#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "wpan/superframe.hpp"
#include "wpan/time_energy.hpp"

namespace wpan {

/// Currents in mA, durations in µs, rate in bit/s, packet size in bits.
struct SyncEnergyParams {
  double p_t = 17.4;  // transmit draw
  double p_r = 19.7;  // receive draw
  double p_i = 19.7;  // idle-listening draw
  double t_b_us = 0.0;
  double t_d_us = 0.0;
  double t_a_us = 0.0;
  double t_i_us = 0.0;
  double bi_us = 15360.0;
  double r_bps = 0.0;
  double k_bits = 1016.0;
  // Charge the data frame at p_i, exactly as the printed tracked formula reads.
  bool strict_paper_formula = false;

  void validate() const {
    if (!(p_t > 0 && p_r > 0 && p_i > 0)) throw std::invalid_argument("sync params: currents must be > 0");
    if (t_b_us < 0 || t_d_us < 0 || t_a_us < 0 || t_i_us < 0 || bi_us < 0)
      throw std::invalid_argument("sync params: durations must be >= 0");
    if (!(k_bits > 0)) throw std::invalid_argument("sync params: k must be > 0");
    if (r_bps < 0) throw std::invalid_argument("sync params: rate must be >= 0");
  }

  double data_current() const { return strict_paper_formula ? p_i : p_t; }
};

namespace detail {
inline double uc(double ma, double us) { return ma * us / 1000.0; }
}  // namespace detail

/// Expected packets per beacon interval, clamped to a probability.
inline double packet_prob(double r_bps, double k_bits, double bi_us) {
  if (!(k_bits > 0)) throw std::invalid_argument("packet_prob: k must be > 0");
  if (!(bi_us > 0)) throw std::invalid_argument("packet_prob: beacon interval must be > 0");
  return std::clamp(r_bps * (bi_us / 1e6) / k_bits, 0.0, 1.0);
}

/// Charge of one transaction (backoff, data, ack) excluding any synchronization cost.
inline double transaction_charge(const SyncEnergyParams& s) {
  using detail::uc;
  return uc(s.data_current(), s.t_d_us) + uc(s.p_r, s.t_a_us) + uc(s.p_i, s.t_i_us);
}

inline double energy_tracked(const SyncEnergyParams& s, double p) {
  if (p < 0.0 || p > 1.0) throw std::invalid_argument("energy_tracked: p outside [0,1]");
  return detail::uc(s.p_r, s.t_b_us) + p * transaction_charge(s);
}

inline double energy_untracked(const SyncEnergyParams& s, double p) {
  if (p < 0.0 || p > 1.0) throw std::invalid_argument("energy_untracked: p outside [0,1]");
  return p * (detail::uc(s.p_i, s.bi_us / 2.0) + transaction_charge(s));
}

/// Probability at which both modes cost the same; tracking wins above it.
inline double crossover_p(const SyncEnergyParams& s) {
  if (!(s.p_i > 0) || !(s.bi_us > 0)) throw std::invalid_argument("crossover_p: need p_i > 0 and bi > 0");
  return 2.0 * s.p_r * s.t_b_us / (s.p_i * s.bi_us);
}

enum class SyncMode : std::uint8_t { Tracked, Untracked };

inline const char* to_string(SyncMode m) { return m == SyncMode::Tracked ? "tracked" : "untracked"; }

struct EnergyRow {
  int bo = 0;
  int so = 0;
  double duty_cycle = 1.0;
  double rate_bps = 0.0;
  double p = 0.0;
  double e_tracked = 0.0;
  double e_untracked = 0.0;
  SyncMode recommended_mode = SyncMode::Tracked;
};

inline SyncMode recommend(double e_tracked, double e_untracked) {
  return e_tracked <= e_untracked ? SyncMode::Tracked : SyncMode::Untracked;
}

struct OrderRange {
  int lo = 0;
  int hi = -1;  // inclusive; hi < lo means empty
};

/// One row per (bo, so, rate) with so <= bo, beacon interval recomputed from bo.
inline std::vector<EnergyRow> sweep(const SyncEnergyParams& base, OrderRange bo_range, OrderRange so_range,
                                    const std::vector<double>& rates, const PhyProfile& phy = phy_2450mhz()) {
  auto in_range = [](OrderRange r) { return r.hi < r.lo || (r.lo >= 0 && r.hi <= kMaxOrder); };
  if (!in_range(bo_range) || !in_range(so_range)) throw std::invalid_argument("sweep: orders must lie in 0..14");
  std::vector<EnergyRow> rows;
  for (int bo = bo_range.lo; bo <= bo_range.hi; ++bo) {
    for (int so = so_range.lo; so <= std::min(so_range.hi, bo); ++so) {
      for (double r : rates) {
        SyncEnergyParams s = base;
        s.bi_us = phy.to_us(beacon_interval(bo, phy));
        s.r_bps = r;
        EnergyRow row;
        row.bo = bo;
        row.so = so;
        row.duty_cycle = duty_cycle({bo, so, false});
        row.rate_bps = r;
        row.p = packet_prob(r, s.k_bits, s.bi_us);
        row.e_tracked = energy_tracked(s, row.p);
        row.e_untracked = energy_untracked(s, row.p);
        row.recommended_mode = recommend(row.e_tracked, row.e_untracked);
        rows.push_back(row);
      }
    }
  }
  return rows;
}

/// Model parameters matching the simulator's frame sizes and default backoff.
///
/// t_i is the mean random backoff (2^BE - 1)/2 periods at BE = mac_min_be.
inline SyncEnergyParams default_sync_params(const PhyProfile& phy, const RadioPowerProfile& power, int data_bytes,
                                            int ack_bytes = 11, int mac_min_be = 3, int bo = 0) {
  SyncEnergyParams s;
  s.p_t = power.i_tx;
  s.p_r = power.i_rx;
  s.p_i = power.i_rx;  // idle listening keeps the receiver on
  s.t_b_us = phy.to_us(frame_airtime(beacon_mpdu_bytes(0, 0), phy));
  s.t_d_us = phy.to_us(frame_airtime(data_bytes, phy));
  s.t_a_us = phy.to_us(frame_airtime(ack_bytes, phy));
  s.t_i_us = ((std::ldexp(1.0, mac_min_be) - 1.0) / 2.0) * phy.to_us(SimTime{phy.unit_backoff});
  s.bi_us = phy.to_us(beacon_interval(bo, phy));
  s.k_bits = data_bytes * 8.0;
  return s;
}

}  // namespace wpan
