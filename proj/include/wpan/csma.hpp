// Slotted CSMA-CA channel access state machine.
#pragma once

#include <algorithm>
#include <cstdint>
#include <random>
#include <stdexcept>

#include "wpan/time_energy.hpp"

namespace wpan {

struct CsmaParams {
  int mac_min_be = 3;
  int a_max_be = 5;
  int mac_max_csma_backoffs = 4;
  bool ble = false;

  void validate() const {
    if (mac_min_be < 0 || mac_min_be > a_max_be || a_max_be > 8)
      throw std::invalid_argument("csma: require 0 <= mac_min_be <= a_max_be <= 8");
    if (mac_max_csma_backoffs < 0) throw std::invalid_argument("csma: mac_max_csma_backoffs must be >= 0");
  }

  /// Ceiling on BE. Battery life extension limits it to 2.
  int be_cap() const { return ble ? std::min(2, a_max_be) : a_max_be; }
};

enum class CsmaPhase : std::uint8_t { BackingOff, Cca, Transmitting, DoneSuccess, DoneFailure };

struct CsmaAttempt {
  int nb = 0;
  int cw = 2;
  int be = 3;
  CsmaPhase phase = CsmaPhase::BackingOff;

  friend bool operator==(const CsmaAttempt&, const CsmaAttempt&) = default;
};

enum class TxResult : std::uint8_t { Delivered, ChannelAccessFailure, NoAck, DeferredToNextCap };

struct TxOutcome {
  TxResult result = TxResult::Delivered;
  int attempts_used = 0;
  SimTime total_backoff;
};

inline CsmaAttempt init_attempt(const CsmaParams& p) {
  return CsmaAttempt{0, 2, p.ble ? std::min(2, p.mac_min_be) : p.mac_min_be, CsmaPhase::BackingOff};
}

/// Random backoff in unit backoff periods, uniform over [0, 2^BE - 1].
template <class Rng>
int draw_backoff(const CsmaAttempt& a, Rng& rng) {
  if (a.phase != CsmaPhase::BackingOff) throw std::logic_error("draw_backoff outside backing-off phase");
  if (a.be <= 0) return 0;
  std::uniform_int_distribution<int> dist(0, (1 << a.be) - 1);
  return dist(rng);
}

inline SimTime backoff_to_time(int periods, const PhyProfile& phy) { return SimTime{periods * phy.unit_backoff}; }

/// Backoff countdown finished; the next step is a CCA.
inline CsmaAttempt on_backoff_done(CsmaAttempt a) {
  a.phase = CsmaPhase::Cca;
  return a;
}

inline CsmaAttempt on_cca(CsmaAttempt a, bool channel_busy, const CsmaParams& p) {
  if (a.phase != CsmaPhase::Cca) throw std::logic_error("on_cca outside cca phase");
  if (channel_busy) {
    a.nb += 1;
    a.be = std::min(a.be + 1, p.be_cap());
    a.cw = 2;
    a.phase = a.nb > p.mac_max_csma_backoffs ? CsmaPhase::DoneFailure : CsmaPhase::BackingOff;
  } else {
    a.cw -= 1;
    if (a.cw == 0) a.phase = CsmaPhase::Transmitting;
  }
  return a;
}

/// Whether a transaction started at `now` completes before the CAP ends.
inline bool fits_in_cap(SimTime now, SimTime remaining_transaction, SimTime cap_end) {
  if (now > cap_end) throw std::invalid_argument("fits_in_cap: now is past cap_end");
  return now + remaining_transaction <= cap_end;
}

/// Deterministic per-node random stream.
inline std::mt19937_64 node_stream(std::uint64_t seed, std::int64_t node_id, std::uint32_t purpose = 0) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(node_id), static_cast<std::uint32_t>(node_id >> 32), purpose};
  return std::mt19937_64(seq);
}

}  // namespace wpan
