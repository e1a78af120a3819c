#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "placefuse/tensor.hpp"

namespace placefuse {

struct Point3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  friend bool operator==(const Point3&, const Point3&) = default;
};

/// Wraps an angle to (-pi, pi].
double wrap_angle(double radians);

/// Camera pose: position in the world frame, heading about the world z axis.
struct Pose {
  Point3 position;
  double yaw = 0.0;
  std::uint64_t frame_id = 0;
  std::uint64_t keyframe_id = 0;
};

double planar_distance(const Pose& a, const Pose& b);
/// |wrap(yaw_a - yaw_b)| in radians.
double heading_difference(const Pose& a, const Pose& b);

/// World-frame points, each tagged with the keyframe that hosts it.
struct PointCloud {
  std::vector<Point3> points;
  std::vector<std::uint64_t> keyframe_ids;

  std::size_t size() const { return points.size(); }
  void add(const Point3& p, std::uint64_t keyframe_id);
};

struct SubmapSpec {
  Point3 extents{40.0, 40.0, 20.0};
  /// Number of keyframes in the window ending at the pose's keyframe.
  std::size_t window = 20;

  void validate() const;
};

/// Points hosted by keyframes [kf - window + 1, kf], expressed in the
/// yaw-aligned box frame p' = Rz(-yaw) (p - position), cropped to the
/// half-open box [-L/2, L/2) on every axis.
std::vector<Point3> extract_submap(const PointCloud& cloud, const Pose& pose,
                                   const SubmapSpec& spec);

/// Default window policy: walks back over `keyframes` (ordered by id, one
/// pose per keyframe) from the pose's keyframe and counts consecutive
/// keyframes whose positions lie inside the box footprint, up to `cap`.
std::size_t footprint_window(std::span<const Pose> keyframes, const Pose& pose,
                             const Point3& extents, std::size_t cap);

enum class GridMethod : std::uint8_t { binary_occupancy = 0, point_count = 1, soft_occupancy = 2 };

std::string_view grid_method_name(GridMethod method);
GridMethod parse_grid_method(std::string_view name);

struct GridResolution {
  std::size_t nx = 96;
  std::size_t ny = 96;
  std::size_t nz = 48;

  std::size_t voxels() const { return nx * ny * nz; }
  friend bool operator==(const GridResolution&, const GridResolution&) = default;
};

/// Box-frame voxel grid, x fastest: index = (k * ny + j) * nx + i.
struct VoxelGrid {
  GridResolution resolution;
  Point3 extents{40.0, 40.0, 20.0};
  GridMethod method = GridMethod::binary_occupancy;
  std::vector<double> values;

  std::size_t index(std::size_t i, std::size_t j, std::size_t k) const {
    return (k * resolution.ny + j) * resolution.nx + i;
  }
  double at(std::size_t i, std::size_t j, std::size_t k) const { return values[index(i, j, k)]; }
  double sum() const;
};

/// One trilinear contribution of a point to a voxel center. `inside` is
/// false when the addressed center lies outside the grid.
struct TrilinearTap {
  std::array<std::ptrdiff_t, 3> cell;
  double weight;
  bool inside;
};

/// Splits unit weight among the eight voxel centers surrounding `p`.
/// Voxel centers sit at ((i + 0.5) / n - 0.5) * L on each axis.
std::array<TrilinearTap, 8> trilinear_taps(const Point3& p, const GridResolution& res,
                                           const Point3& extents);

/// Cell of a box-frame point under half-open binning; false if outside.
bool cell_of(const Point3& p, const GridResolution& res, const Point3& extents,
             std::array<std::size_t, 3>& cell);

/// Discretizes box-frame points. Points outside the box are skipped.
VoxelGrid populate(std::span<const Point3> local_points, const GridResolution& res,
                   const Point3& extents, GridMethod method);

/// [1, nz, ny, nx] tensor holding the grid values unchanged.
Tensor grid_to_tensor(const VoxelGrid& grid);
VoxelGrid tensor_to_grid(const Tensor& tensor, const Point3& extents, GridMethod method);

// File formats.
PointCloud read_point_cloud_csv(const std::filesystem::path& path);
void write_point_cloud_csv(const std::filesystem::path& path, const PointCloud& cloud);
std::vector<Pose> read_trajectory_csv(const std::filesystem::path& path);
void write_trajectory_csv(const std::filesystem::path& path, std::span<const Pose> poses);
void write_voxel_grid(const std::filesystem::path& path, const VoxelGrid& grid);
VoxelGrid read_voxel_grid(const std::filesystem::path& path);

}  // namespace placefuse
