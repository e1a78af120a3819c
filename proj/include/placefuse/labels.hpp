#pragma once

#include <cstdint>

#include "placefuse/voxel.hpp"

namespace placefuse {

enum class PairLabel : std::uint8_t { positive, negative, ignore };

/// Ground-truth thresholds for pair labeling.
struct LabelRules {
  double positive_distance = 5.0;     // meters, strict
  double positive_heading_deg = 30.0;  // degrees, strict
  double negative_distance = 20.0;    // meters, strict
};

/// positive: planar distance < 5 m and heading difference < 30 deg;
/// negative: distance > 20 m; everything else is ignore (including close
/// pairs facing different directions).
PairLabel label_pair(const Pose& a, const Pose& b, const LabelRules& rules = {});

/// Retrieval ground truth: planar distance below 20 m, heading ignored.
bool within_retrieval_radius(const Pose& a, const Pose& b, const LabelRules& rules = {});

}  // namespace placefuse
