#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "placefuse/tensor.hpp"
#include "placefuse/voxel.hpp"

namespace placefuse {

/// One place sample: an image, the voxel grid of its structural submap,
/// and the ground-truth pose it was captured at.
struct Observation {
  std::uint64_t frame_id = 0;
  std::size_t sequence = 0;
  Pose pose;
  std::optional<Tensor> image;  // [C,H,W], values in [0,1]
  std::optional<VoxelGrid> grid;
  std::string condition;
};

}  // namespace placefuse
