#include "placefuse/dataset.hpp"

#include <algorithm>
#include <cstdio>

#include "placefuse/csv.hpp"
#include "placefuse/errors.hpp"
#include "placefuse/parallel.hpp"

namespace placefuse {

VoxelOptions VoxelOptions::from_config(const Config& cfg) {
  VoxelOptions o;
  o.method = parse_grid_method(cfg.get_string("grid_method", grid_method_name(o.method)));
  const auto res = cfg.get_size_list("grid_resolution", {o.resolution.nx, o.resolution.ny, o.resolution.nz});
  if (res.size() != 3) throw ConfigError("grid_resolution needs three values nx,ny,nz");
  o.resolution = {res[0], res[1], res[2]};
  const auto ext = cfg.get_double_list("box_extents", {o.extents.x, o.extents.y, o.extents.z});
  if (ext.size() != 3) throw ConfigError("box_extents needs three values x,y,z");
  o.extents = {ext[0], ext[1], ext[2]};
  const std::string policy = cfg.get_string("window_policy", "footprint");
  if (policy == "footprint") {
    o.policy = WindowPolicy::footprint;
  } else if (policy == "fixed") {
    o.policy = WindowPolicy::fixed;
  } else {
    throw ConfigError("window_policy must be footprint or fixed, got '" + policy + "'");
  }
  o.window = cfg.get_size("window", o.window);
  o.validate();
  return o;
}

void VoxelOptions::validate() const {
  if (resolution.nx == 0 || resolution.ny == 0 || resolution.nz == 0) {
    throw ConfigError("grid resolution must be positive on every axis");
  }
  SubmapSpec{extents, window}.validate();
}

std::vector<Pose> keyframes_of(std::span<const Pose> poses) {
  std::vector<Pose> out;
  for (const Pose& p : poses) {
    auto it = std::lower_bound(out.begin(), out.end(), p.keyframe_id,
                               [](const Pose& a, std::uint64_t id) { return a.keyframe_id < id; });
    if (it == out.end() || it->keyframe_id != p.keyframe_id) out.insert(it, p);
  }
  return out;
}

VoxelGrid voxelize_frame(const PointCloud& cloud, std::span<const Pose> keyframes, const Pose& pose,
                         const VoxelOptions& options) {
  SubmapSpec spec{options.extents, options.window};
  if (options.policy == WindowPolicy::footprint) {
    spec.window = footprint_window(keyframes, pose, options.extents, options.window);
  }
  const std::vector<Point3> local = extract_submap(cloud, pose, spec);
  return populate(local, options.resolution, options.extents, options.method);
}

std::vector<VoxelGrid> voxelize_traversal(const PointCloud& cloud, std::span<const Pose> poses,
                                          const VoxelOptions& options, std::size_t threads,
                                          bool require_points) {
  options.validate();
  const std::vector<Pose> keyframes = keyframes_of(poses);
  std::vector<VoxelGrid> grids(poses.size());
  parallel_for(poses.size(), threads, [&](std::size_t i) {
    grids[i] = voxelize_frame(cloud, keyframes, poses[i], options);
    if (require_points && grids[i].sum() <= 0.0) {
      throw InputError("frame " + std::to_string(poses[i].frame_id) + " has an empty submap");
    }
  });
  return grids;
}

std::size_t DatasetIndex::find(std::string_view name) const {
  for (std::size_t i = 0; i < traversals.size(); ++i) {
    if (traversals[i].name == name) return i;
  }
  throw InputError("dataset has no traversal named '" + std::string(name) + "'");
}

DatasetIndex read_manifest(const std::filesystem::path& path_or_dir) {
  namespace fs = std::filesystem;
  const fs::path file =
      fs::is_directory(path_or_dir) ? path_or_dir / "manifest.txt" : path_or_dir;
  if (!fs::exists(file)) throw InputError("dataset manifest not found: " + file.string());
  DatasetIndex index;
  index.root = file.parent_path();
  index.manifest = Config::from_file(file);
  for (const std::string& name : index.manifest.get_string_list("traversals", {})) {
    TraversalEntry e;
    e.name = name;
    e.condition = index.manifest.get_string("traversal." + name + ".condition", "");
    e.dir = index.root / name;
    index.traversals.push_back(std::move(e));
  }
  if (index.traversals.empty()) throw InputError("manifest lists no traversals: " + file.string());
  return index;
}

TraversalFiles load_traversal(const DatasetIndex& index, std::size_t traversal) {
  const TraversalEntry& e = index.traversals.at(traversal);
  TraversalFiles tf;
  for (const char* name : {"trajectory.csv", "cloud.csv", "frames.csv"}) {
    if (!std::filesystem::exists(e.dir / name)) {
      throw InputError("traversal '" + e.name + "' is missing " + (e.dir / name).string());
    }
  }
  tf.poses = read_trajectory_csv(e.dir / "trajectory.csv");
  tf.cloud = read_point_cloud_csv(e.dir / "cloud.csv");
  CsvReader frames(e.dir / "frames.csv", {"frame_id", "split"});
  std::vector<std::string_view> fields;
  std::size_t row = 0;
  while (frames.next(fields)) {
    if (row >= tf.poses.size() || frames.to_u64(fields[0]) != tf.poses[row].frame_id) {
      throw FormatError((e.dir / "frames.csv").string() + ": frame ids do not follow trajectory.csv");
    }
    tf.splits.push_back(parse_split(fields[1]));
    ++row;
  }
  if (tf.splits.size() != tf.poses.size()) {
    throw FormatError((e.dir / "frames.csv").string() + ": frame count differs from trajectory.csv");
  }
  return tf;
}

std::filesystem::path image_path(const DatasetIndex& index, std::size_t traversal,
                                 std::uint64_t frame_id) {
  char name[32];
  std::snprintf(name, sizeof name, "%06llu.pgm", static_cast<unsigned long long>(frame_id));
  return index.traversals.at(traversal).dir / "images" / name;
}

namespace {

// Builds observations for the frames of one traversal that fall in the
// requested split; `image_of(f)` supplies the image of frame index f.
template <typename ImageFn>
std::vector<Observation> build(std::span<const Pose> poses, const PointCloud& cloud,
                               std::span<const Split> splits, std::size_t sequence,
                               const std::string& condition, const ObservationRequest& req,
                               const VoxelOptions& options, std::size_t threads, ImageFn image_of) {
  std::vector<std::size_t> frames;
  for (std::size_t f = 0; f < poses.size(); ++f) {
    if (splits[f] == req.split) frames.push_back(f);
  }
  const std::vector<Pose> keyframes = keyframes_of(poses);
  if (req.grids) options.validate();
  std::vector<Observation> out(frames.size());
  parallel_for(frames.size(), threads, [&](std::size_t i) {
    const std::size_t f = frames[i];
    Observation& o = out[i];
    o.frame_id = poses[f].frame_id;
    o.sequence = sequence;
    o.pose = poses[f];
    o.condition = condition;
    if (req.images) o.image = image_of(f);
    if (req.grids) o.grid = voxelize_frame(cloud, keyframes, poses[f], options);
  });
  return out;
}

}  // namespace

std::vector<Observation> load_observations(const DatasetIndex& index, std::size_t traversal,
                                           const ObservationRequest& req,
                                           const VoxelOptions& options, std::size_t threads) {
  const TraversalFiles tf = load_traversal(index, traversal);
  return build(tf.poses, tf.cloud, tf.splits, traversal, index.traversals[traversal].condition, req,
               options, threads, [&](std::size_t f) {
                 return read_pgm(image_path(index, traversal, tf.poses[f].frame_id));
               });
}

std::vector<Observation> load_observations(const DatasetIndex& index, const ObservationRequest& req,
                                           const VoxelOptions& options, std::size_t threads) {
  std::vector<Observation> all;
  for (std::size_t t = 0; t < index.traversals.size(); ++t) {
    auto part = load_observations(index, t, req, options, threads);
    std::move(part.begin(), part.end(), std::back_inserter(all));
  }
  return all;
}

std::vector<Observation> synth_observations(const SynthDataset& data, const ObservationRequest& req,
                                            const VoxelOptions& options, std::size_t threads) {
  std::vector<Observation> all;
  for (std::size_t t = 0; t < data.traversals.size(); ++t) {
    const Traversal& tr = data.traversals[t];
    auto part = build(tr.poses, tr.cloud, data.splits.assignment[t], t, tr.condition.name, req,
                      options, threads, [&](std::size_t f) { return tr.images[f]; });
    std::move(part.begin(), part.end(), std::back_inserter(all));
  }
  return all;
}

}  // namespace placefuse
