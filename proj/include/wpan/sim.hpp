// Entry point for running a scenario.
#pragma once

#include <cstdint>

#include "wpan/manet_sim.hpp"
#include "wpan/scenario.hpp"
#include "wpan/star_sim.hpp"

namespace wpan {

inline RunOutput run(const Scenario& sc, std::uint64_t seed, bool trace = false) {
  if (sc.kind == ScenarioKind::Manet) return ManetSimulation(sc, seed, trace).run();
  return StarSimulation(sc, seed, trace).run();
}

}  // namespace wpan
