#pragma once

#include <cstdint>

namespace instloc {

using Label = std::uint32_t;

// Panoptic label ids. Stuff classes occupy the low ids; every building
// carries a globally unique instance id starting at kFirstInstanceLabel.
inline constexpr Label kVoidLabel = 0;
inline constexpr Label kSkyLabel = 1;
inline constexpr Label kRoadLabel = 2;
inline constexpr Label kNumClassLabels = 3;
inline constexpr Label kFirstInstanceLabel = 1000;

inline constexpr bool IsInstanceLabel(Label l) { return l >= kFirstInstanceLabel; }

}  // namespace instloc
