// Beacon-enabled superframe layout, GTS allocation and duty cycle.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "wpan/time_energy.hpp"

namespace wpan {

using NodeId = std::int32_t;

inline constexpr int kMaxOrder = 14;
inline constexpr int kMaxGts = 7;
inline constexpr std::int64_t kMinCapLength = 440;  // aMinCAPLength, symbols

struct SuperframeConfig {
  int bo = 3;
  int so = 3;
  bool ble = false;

  void validate() const {
    if (bo < 0 || bo > kMaxOrder) throw std::invalid_argument("bo must be in 0..14");
    if (so < 0 || so > kMaxOrder) throw std::invalid_argument("so must be in 0..14");
    if (so > bo) throw std::invalid_argument("so ≤ bo violated");
  }

  friend bool operator==(const SuperframeConfig&, const SuperframeConfig&) = default;
};

/// Active fraction of the beacon interval, 2^(so - bo).
inline double duty_cycle(const SuperframeConfig& c) { return std::ldexp(1.0, c.so - c.bo); }

inline SimTime beacon_interval(int bo, const PhyProfile& phy) { return SimTime{phy.base_superframe() << bo}; }
inline SimTime superframe_duration(int so, const PhyProfile& phy) { return SimTime{phy.base_superframe() << so}; }

enum class GtsDirection : std::uint8_t { NodeToCoordinator, CoordinatorToNode };

struct GtsDescriptor {
  NodeId device_id = 0;
  GtsDirection direction = GtsDirection::NodeToCoordinator;
  int start_slot = 0;
  int length_slots = 1;

  friend bool operator==(const GtsDescriptor&, const GtsDescriptor&) = default;
};

struct TimeRange {
  SimTime begin;
  SimTime end;

  SimTime length() const { return end - begin; }
  bool empty() const { return end <= begin; }
  bool contains(SimTime t) const { return begin <= t && t < end; }
  friend bool operator==(const TimeRange&, const TimeRange&) = default;
};

/// Offsets are relative to the start of the beacon interval.
struct SuperframeSchedule {
  SuperframeConfig config;
  SimTime beacon_interval;
  SimTime active_duration;
  SimTime slot_duration;
  TimeRange beacon_window;
  TimeRange cap;
  TimeRange cfp;
  TimeRange inactive;
  std::vector<GtsDescriptor> gts_list;
  std::vector<NodeId> pending_addresses;

  friend bool operator==(const SuperframeSchedule&, const SuperframeSchedule&) = default;
};

class GtsOverflow : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Simplified beacon MPDU size: fixed header plus per-descriptor and per-address cost.
inline int beacon_mpdu_bytes(std::size_t gts_count, std::size_t pending_count) {
  return 15 + 3 * static_cast<int>(gts_count) + 2 * static_cast<int>(pending_count);
}

namespace detail {

// Validates descriptors and returns the first CFP slot (num_slots when empty).
inline int check_gts_layout(const std::vector<GtsDescriptor>& gts, int num_slots) {
  if (gts.size() > static_cast<std::size_t>(kMaxGts)) throw std::invalid_argument("more than 7 GTS descriptors");
  std::vector<int> owner(static_cast<std::size_t>(num_slots), -1);
  int first = num_slots;
  for (std::size_t i = 0; i < gts.size(); ++i) {
    const auto& d = gts[i];
    if (d.length_slots < 1 || d.start_slot < 0 || d.start_slot + d.length_slots > num_slots)
      throw std::invalid_argument("GTS descriptor outside the superframe slots");
    for (int s = d.start_slot; s < d.start_slot + d.length_slots; ++s) {
      if (owner[static_cast<std::size_t>(s)] != -1) throw std::invalid_argument("overlapping GTS descriptors");
      owner[static_cast<std::size_t>(s)] = static_cast<int>(i);
    }
    first = std::min(first, d.start_slot);
  }
  for (int s = first; s < num_slots; ++s)
    if (owner[static_cast<std::size_t>(s)] == -1) throw std::invalid_argument("GTS descriptors must pack the CFP");
  return first;
}

}  // namespace detail

inline SuperframeSchedule derive_schedule(const SuperframeConfig& config, const PhyProfile& phy,
                                          std::vector<GtsDescriptor> gts, std::vector<NodeId> pending = {}) {
  config.validate();
  const int num_slots = static_cast<int>(phy.num_slots);
  const int first_cfp_slot = detail::check_gts_layout(gts, num_slots);

  SuperframeSchedule s;
  s.config = config;
  s.beacon_interval = beacon_interval(config.bo, phy);
  s.active_duration = superframe_duration(config.so, phy);
  s.slot_duration = SimTime{phy.base_slot << config.so};

  const SimTime beacon_len = frame_airtime(beacon_mpdu_bytes(gts.size(), pending.size()), phy);
  const SimTime cfp_start = s.slot_duration * first_cfp_slot;
  s.beacon_window = {SimTime{0}, beacon_len};
  s.cap = {beacon_len, cfp_start};
  s.cfp = {cfp_start, s.active_duration};
  s.inactive = {s.active_duration, s.beacon_interval};
  if (s.cap.length().ticks < (gts.empty() ? 1 : kMinCapLength))
    throw GtsOverflow("CAP would be shorter than " + std::to_string(kMinCapLength) + " symbols");

  s.gts_list = std::move(gts);
  s.pending_addresses = std::move(pending);
  return s;
}

struct GtsRequest {
  NodeId device_id = 0;
  GtsDirection direction = GtsDirection::NodeToCoordinator;
  int length_slots = 1;
};

enum class GtsDenial : std::uint8_t { GtsLimitReached, CapTooShort };

inline const char* to_string(GtsDenial d) {
  return d == GtsDenial::GtsLimitReached ? "gts-limit-reached" : "cap-too-short";
}

/// Appends a descriptor directly in front of the current CFP. The schedule is
/// left untouched on denial.
inline std::variant<GtsDescriptor, GtsDenial> allocate_gts(SuperframeSchedule& schedule, const GtsRequest& req,
                                                           const PhyProfile& phy) {
  if (req.length_slots < 1) throw std::invalid_argument("GTS request length must be >= 1");
  if (schedule.gts_list.size() >= static_cast<std::size_t>(kMaxGts)) return GtsDenial::GtsLimitReached;

  const int first = static_cast<int>(schedule.cfp.begin.ticks / schedule.slot_duration.ticks);
  const int start = first - req.length_slots;
  if (start < 1) return GtsDenial::CapTooShort;

  GtsDescriptor d{req.device_id, req.direction, start, req.length_slots};
  auto gts = schedule.gts_list;
  gts.push_back(d);
  try {
    schedule = derive_schedule(schedule.config, phy, std::move(gts), schedule.pending_addresses);
  } catch (const GtsOverflow&) {
    return GtsDenial::CapTooShort;
  }
  return d;
}

/// Removes every descriptor owned by `device` and repacks the rest against the
/// end of the active portion, preserving allocation order.
inline bool deallocate_gts(SuperframeSchedule& schedule, NodeId device, const PhyProfile& phy) {
  std::vector<GtsDescriptor> kept;
  for (const auto& d : schedule.gts_list)
    if (d.device_id != device) kept.push_back(d);
  if (kept.size() == schedule.gts_list.size()) return false;
  int next_end = static_cast<int>(phy.num_slots);
  for (auto& d : kept) {
    d.start_slot = next_end - d.length_slots;
    next_end = d.start_slot;
  }
  schedule = derive_schedule(schedule.config, phy, std::move(kept), schedule.pending_addresses);
  return true;
}

inline std::optional<TimeRange> locate_gts(const SuperframeSchedule& schedule, NodeId device) {
  for (const auto& d : schedule.gts_list) {
    if (d.device_id == device)
      return TimeRange{schedule.slot_duration * d.start_slot, schedule.slot_duration * (d.start_slot + d.length_slots)};
  }
  return std::nullopt;
}

}  // namespace wpan
