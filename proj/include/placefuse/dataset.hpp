#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "placefuse/config.hpp"
#include "placefuse/observation.hpp"
#include "placefuse/synth.hpp"
#include "placefuse/voxel.hpp"

namespace placefuse {

enum class WindowPolicy : std::uint8_t { footprint, fixed };

/// How a frame's submap is cut and discretized.
struct VoxelOptions {
  GridMethod method = GridMethod::binary_occupancy;
  GridResolution resolution;
  Point3 extents{40.0, 40.0, 20.0};
  WindowPolicy policy = WindowPolicy::footprint;
  std::size_t window = 20;  // cap for footprint, length for fixed

  /// Keys: grid_method, grid_resolution (nx,ny,nz), box_extents (x,y,z),
  /// window_policy (footprint|fixed), window.
  static VoxelOptions from_config(const Config& cfg);
  void validate() const;
};

/// First pose of every keyframe id, ascending by id.
std::vector<Pose> keyframes_of(std::span<const Pose> poses);

VoxelGrid voxelize_frame(const PointCloud& cloud, std::span<const Pose> keyframes,
                         const Pose& pose, const VoxelOptions& options);

/// One grid per pose. Throws InputError if `require_points` is set and a
/// submap is empty.
std::vector<VoxelGrid> voxelize_traversal(const PointCloud& cloud, std::span<const Pose> poses,
                                          const VoxelOptions& options, std::size_t threads = 1,
                                          bool require_points = false);

struct TraversalEntry {
  std::string name;
  std::string condition;
  std::filesystem::path dir;
};

/// Parsed manifest.txt of a dataset directory.
struct DatasetIndex {
  std::filesystem::path root;
  Config manifest;
  std::vector<TraversalEntry> traversals;

  /// Throws InputError if no traversal has this name.
  std::size_t find(std::string_view name) const;
};

DatasetIndex read_manifest(const std::filesystem::path& path_or_dir);

struct TraversalFiles {
  std::vector<Pose> poses;
  PointCloud cloud;
  std::vector<Split> splits;
};

TraversalFiles load_traversal(const DatasetIndex& index, std::size_t traversal);
std::filesystem::path image_path(const DatasetIndex& index, std::size_t traversal,
                                 std::uint64_t frame_id);

struct ObservationRequest {
  Split split = Split::test;
  bool images = true;
  bool grids = true;
};

/// Observations of one split from every traversal; the sequence field is
/// the traversal's position in the manifest.
std::vector<Observation> load_observations(const DatasetIndex& index, const ObservationRequest& req,
                                           const VoxelOptions& options, std::size_t threads = 1);
std::vector<Observation> load_observations(const DatasetIndex& index, std::size_t traversal,
                                           const ObservationRequest& req,
                                           const VoxelOptions& options, std::size_t threads = 1);

/// Same observations built from an in-memory synthetic dataset.
std::vector<Observation> synth_observations(const SynthDataset& data, const ObservationRequest& req,
                                            const VoxelOptions& options, std::size_t threads = 1);

}  // namespace placefuse
