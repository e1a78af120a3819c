#include "placefuse/voxel.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numbers>
#include <sstream>

#include "placefuse/binary_io.hpp"
#include "placefuse/csv.hpp"
#include "placefuse/errors.hpp"

namespace placefuse {

double wrap_angle(double radians) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  double a = std::fmod(radians, two_pi);
  if (a <= -std::numbers::pi) a += two_pi;
  if (a > std::numbers::pi) a -= two_pi;
  return a;
}

double planar_distance(const Pose& a, const Pose& b) {
  return std::hypot(a.position.x - b.position.x, a.position.y - b.position.y);
}

double heading_difference(const Pose& a, const Pose& b) {
  return std::abs(wrap_angle(a.yaw - b.yaw));
}

void PointCloud::add(const Point3& p, std::uint64_t keyframe_id) {
  if (!std::isfinite(p.x) || !std::isfinite(p.y) || !std::isfinite(p.z)) {
    throw InputError("point cloud coordinates must be finite");
  }
  points.push_back(p);
  keyframe_ids.push_back(keyframe_id);
}

void SubmapSpec::validate() const {
  if (!(extents.x > 0 && extents.y > 0 && extents.z > 0)) {
    throw ConfigError("submap box extents must be positive");
  }
  if (window < 1) throw ConfigError("submap keyframe window must be at least 1");
}

namespace {

Point3 to_box_frame(const Point3& p, const Pose& pose) {
  const double c = std::cos(pose.yaw), s = std::sin(pose.yaw);
  const double dx = p.x - pose.position.x;
  const double dy = p.y - pose.position.y;
  return {c * dx + s * dy, -s * dx + c * dy, p.z - pose.position.z};
}

bool in_half_open(double v, double extent) { return v >= -0.5 * extent && v < 0.5 * extent; }

bool in_box(const Point3& p, const Point3& extents) {
  return in_half_open(p.x, extents.x) && in_half_open(p.y, extents.y) &&
         in_half_open(p.z, extents.z);
}

}  // namespace

std::vector<Point3> extract_submap(const PointCloud& cloud, const Pose& pose,
                                   const SubmapSpec& spec) {
  spec.validate();
  if (cloud.keyframe_ids.size() != cloud.points.size()) {
    throw InputError("point cloud has mismatched keyframe id count");
  }
  const std::uint64_t last = pose.keyframe_id;
  const std::uint64_t first = last + 1 >= spec.window ? last + 1 - spec.window : 0;
  std::vector<Point3> local;
  for (std::size_t i = 0; i < cloud.points.size(); ++i) {
    const std::uint64_t kf = cloud.keyframe_ids[i];
    if (kf < first || kf > last) continue;
    const Point3 q = to_box_frame(cloud.points[i], pose);
    if (in_box(q, spec.extents)) local.push_back(q);
  }
  return local;
}

std::size_t footprint_window(std::span<const Pose> keyframes, const Pose& pose,
                             const Point3& extents, std::size_t cap) {
  if (cap < 1) throw ConfigError("keyframe window cap must be at least 1");
  auto it = std::find_if(keyframes.begin(), keyframes.end(), [&](const Pose& k) {
    return k.keyframe_id == pose.keyframe_id;
  });
  if (it == keyframes.end()) return 1;
  std::size_t count = 0;
  for (auto idx = static_cast<std::ptrdiff_t>(it - keyframes.begin()); idx >= 0 && count < cap;
       --idx) {
    const Point3 q = to_box_frame(keyframes[static_cast<std::size_t>(idx)].position, pose);
    if (!(in_half_open(q.x, extents.x) && in_half_open(q.y, extents.y))) break;
    ++count;
  }
  return std::max<std::size_t>(count, 1);
}

std::string_view grid_method_name(GridMethod method) {
  switch (method) {
    case GridMethod::binary_occupancy:
      return "bo";
    case GridMethod::point_count:
      return "ptc";
    case GridMethod::soft_occupancy:
      return "so";
  }
  return "?";
}

GridMethod parse_grid_method(std::string_view name) {
  if (name == "bo") return GridMethod::binary_occupancy;
  if (name == "ptc") return GridMethod::point_count;
  if (name == "so") return GridMethod::soft_occupancy;
  throw ConfigError("unknown grid method '" + std::string(name) + "' (expected bo, ptc or so)");
}

double VoxelGrid::sum() const {
  double acc = 0.0;
  for (double v : values) acc += v;
  return acc;
}

namespace {

void check_resolution(const GridResolution& res) {
  if (res.nx == 0 || res.ny == 0 || res.nz == 0) {
    throw ConfigError("grid resolution must be positive on every axis");
  }
}

// Continuous voxel coordinate with voxel centers at integer values.
double center_coordinate(double v, double extent, std::size_t n) {
  return (v + 0.5 * extent) / extent * static_cast<double>(n) - 0.5;
}

std::size_t bin(double v, double extent, std::size_t n) {
  const double u = (v + 0.5 * extent) / extent * static_cast<double>(n);
  const auto i = static_cast<std::ptrdiff_t>(std::floor(u));
  return static_cast<std::size_t>(std::clamp<std::ptrdiff_t>(i, 0, static_cast<std::ptrdiff_t>(n) - 1));
}

}  // namespace

bool cell_of(const Point3& p, const GridResolution& res, const Point3& extents,
             std::array<std::size_t, 3>& cell) {
  if (!in_box(p, extents)) return false;
  cell = {bin(p.x, extents.x, res.nx), bin(p.y, extents.y, res.ny), bin(p.z, extents.z, res.nz)};
  return true;
}

std::array<TrilinearTap, 8> trilinear_taps(const Point3& p, const GridResolution& res,
                                           const Point3& extents) {
  const std::array<double, 3> u = {center_coordinate(p.x, extents.x, res.nx),
                                   center_coordinate(p.y, extents.y, res.ny),
                                   center_coordinate(p.z, extents.z, res.nz)};
  const std::array<std::size_t, 3> n = {res.nx, res.ny, res.nz};
  std::array<std::ptrdiff_t, 3> base{};
  std::array<double, 3> frac{};
  for (int a = 0; a < 3; ++a) {
    const double fl = std::floor(u[a]);
    base[a] = static_cast<std::ptrdiff_t>(fl);
    frac[a] = u[a] - fl;
  }
  std::array<TrilinearTap, 8> taps{};
  for (int corner = 0; corner < 8; ++corner) {
    TrilinearTap& t = taps[corner];
    t.weight = 1.0;
    t.inside = true;
    for (int a = 0; a < 3; ++a) {
      const int up = (corner >> a) & 1;
      t.cell[a] = base[a] + up;
      t.weight *= up ? frac[a] : 1.0 - frac[a];
      if (t.cell[a] < 0 || t.cell[a] >= static_cast<std::ptrdiff_t>(n[a])) t.inside = false;
    }
  }
  return taps;
}

VoxelGrid populate(std::span<const Point3> local_points, const GridResolution& res,
                   const Point3& extents, GridMethod method) {
  check_resolution(res);
  VoxelGrid grid;
  grid.resolution = res;
  grid.extents = extents;
  grid.method = method;
  grid.values.assign(res.voxels(), 0.0);

  for (const Point3& p : local_points) {
    std::array<std::size_t, 3> cell{};
    if (!cell_of(p, res, extents, cell)) continue;
    switch (method) {
      case GridMethod::binary_occupancy:
        grid.values[grid.index(cell[0], cell[1], cell[2])] = 1.0;
        break;
      case GridMethod::point_count:
        grid.values[grid.index(cell[0], cell[1], cell[2])] += 1.0;
        break;
      case GridMethod::soft_occupancy:
        for (const TrilinearTap& t : trilinear_taps(p, res, extents)) {
          if (!t.inside || t.weight == 0.0) continue;
          grid.values[grid.index(static_cast<std::size_t>(t.cell[0]),
                                 static_cast<std::size_t>(t.cell[1]),
                                 static_cast<std::size_t>(t.cell[2]))] += t.weight;
        }
        break;
    }
  }
  return grid;
}

Tensor grid_to_tensor(const VoxelGrid& grid) {
  const auto& r = grid.resolution;
  return Tensor({1, r.nz, r.ny, r.nx}, grid.values);
}

VoxelGrid tensor_to_grid(const Tensor& tensor, const Point3& extents, GridMethod method) {
  if (tensor.rank() != 4 || tensor.extent(0) != 1) {
    throw ShapeError("voxel tensor must have shape [1,nz,ny,nx]");
  }
  VoxelGrid grid;
  grid.resolution = {tensor.extent(3), tensor.extent(2), tensor.extent(1)};
  grid.extents = extents;
  grid.method = method;
  grid.values = tensor.values();
  return grid;
}

PointCloud read_point_cloud_csv(const std::filesystem::path& path) {
  CsvReader reader(path, {"keyframe_id", "x", "y", "z"});
  PointCloud cloud;
  std::vector<std::string_view> fields;
  while (reader.next(fields)) {
    cloud.add({reader.to_double(fields[1]), reader.to_double(fields[2]), reader.to_double(fields[3])},
              reader.to_u64(fields[0]));
  }
  return cloud;
}

void write_point_cloud_csv(const std::filesystem::path& path, const PointCloud& cloud) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  os << "keyframe_id,x,y,z\n" << std::setprecision(std::numeric_limits<double>::max_digits10);
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const Point3& p = cloud.points[i];
    os << cloud.keyframe_ids[i] << ',' << p.x << ',' << p.y << ',' << p.z << '\n';
  }
}

std::vector<Pose> read_trajectory_csv(const std::filesystem::path& path) {
  CsvReader reader(path, {"frame_id", "keyframe_id", "x", "y", "z", "yaw"});
  std::vector<Pose> poses;
  std::vector<std::string_view> fields;
  while (reader.next(fields)) {
    Pose p;
    p.frame_id = reader.to_u64(fields[0]);
    p.keyframe_id = reader.to_u64(fields[1]);
    p.position = {reader.to_double(fields[2]), reader.to_double(fields[3]),
                  reader.to_double(fields[4])};
    p.yaw = wrap_angle(reader.to_double(fields[5]));
    poses.push_back(p);
  }
  return poses;
}

void write_trajectory_csv(const std::filesystem::path& path, std::span<const Pose> poses) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  os << "frame_id,keyframe_id,x,y,z,yaw\n"
     << std::setprecision(std::numeric_limits<double>::max_digits10);
  for (const Pose& p : poses) {
    os << p.frame_id << ',' << p.keyframe_id << ',' << p.position.x << ',' << p.position.y << ','
       << p.position.z << ',' << p.yaw << '\n';
  }
}

void write_voxel_grid(const std::filesystem::path& path, const VoxelGrid& grid) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  binio::write_bytes(os, "VXG1");
  binio::write<std::uint8_t>(os, static_cast<std::uint8_t>(grid.method));
  for (std::size_t n : {grid.resolution.nx, grid.resolution.ny, grid.resolution.nz}) {
    binio::write<std::uint32_t>(os, static_cast<std::uint32_t>(n));
  }
  for (double e : {grid.extents.x, grid.extents.y, grid.extents.z}) {
    binio::write<float>(os, static_cast<float>(e));
  }
  for (double v : grid.values) binio::write<float>(os, static_cast<float>(v));
  if (!os) throw std::runtime_error("failed writing " + path.string());
}

VoxelGrid read_voxel_grid(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw InputError("cannot open voxel grid: " + path.string());
  binio::expect_magic(is, "VXG1");
  VoxelGrid grid;
  const auto method = binio::read<std::uint8_t>(is, "method");
  if (method > 2) throw FormatError("unknown grid method code " + std::to_string(method));
  grid.method = static_cast<GridMethod>(method);
  grid.resolution.nx = binio::read<std::uint32_t>(is, "nx");
  grid.resolution.ny = binio::read<std::uint32_t>(is, "ny");
  grid.resolution.nz = binio::read<std::uint32_t>(is, "nz");
  grid.extents.x = binio::read<float>(is, "extent");
  grid.extents.y = binio::read<float>(is, "extent");
  grid.extents.z = binio::read<float>(is, "extent");
  grid.values.resize(grid.resolution.voxels());
  for (double& v : grid.values) v = binio::read<float>(is, "voxel value");
  return grid;
}

}  // namespace placefuse
