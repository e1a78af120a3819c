#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "placefuse/config.hpp"
#include "placefuse/tensor.hpp"
#include "placefuse/voxel.hpp"

namespace placefuse {

/// Appearance and structure perturbation applied to one traversal.
struct ConditionSpec {
  std::string name = "reference";
  // Appearance: v -> gain * v^gamma + offset, then shadow, warp and noise.
  double gain = 1.0;
  double offset = 0.0;
  double gamma = 1.0;
  double shadow = 0.0;        // darkening factor of a per-frame shadow region
  double pixel_noise = 0.0;   // std of additive pixel noise
  double texture_warp = 0.0;  // relative change of texture frequencies
  // Structure.
  double jitter = 0.0;   // std of per-point displacement in meters
  double dropout = 0.0;  // probability of dropping a non-curb point
  double clutter = 0.0;  // extra random points, as a fraction of points per place

  /// "reference" (no perturbation), "mild" or "severe".
  static ConditionSpec preset(std::string_view name);
  void validate() const;
};

struct WorldSpec {
  std::uint64_t seed = 7;
  std::size_t n_places = 64;
  double place_length = 8.0;   // meters of loop per place
  double pose_spacing = 0.5;   // meters between frames
  std::size_t keyframe_stride = 2;
  std::size_t points_per_place = 400;
  double curb_spacing = 0.25;  // meters between guaranteed curb points
  double curb_offset = 4.0;    // lateral offset of the two curb lines
  double host_lead = 8.0;      // points are hosted by the keyframe this far behind them
  std::size_t texture_palette = 8;
  std::size_t layout_palette = 8;
  std::size_t image_width = 64;
  std::size_t image_height = 64;
  double camera_height = 1.5;

  void validate() const;
  double circumference() const { return static_cast<double>(n_places) * place_length; }
  std::size_t frame_count() const;
  std::size_t curb_points_per_place() const;
};

struct Box {
  Point3 center;
  Point3 half;
};

struct TextureCode {
  std::array<double, 2> orientation{};  // radians
  std::array<double, 2> frequency{};    // cycles per image width
  std::array<double, 2> phase{};
  double contrast = 1.0;
  double mean = 0.5;
};

struct Place {
  std::size_t index = 0;
  double arc_start = 0.0;
  std::size_t texture_code = 0;
  std::size_t layout_code = 0;
  std::vector<Box> boxes;
  std::vector<Point3> points;  // exactly points_per_place, curb points first
  std::size_t curb_points = 0;
};

/// Closed circular loop of places, centered at the origin, traversed
/// counter-clockwise.
struct World {
  WorldSpec spec;
  double radius = 0.0;
  std::vector<Place> places;
  std::vector<TextureCode> textures;
};

/// Places get texture code p mod texture_palette and layout code
/// (p / texture_palette) mod layout_palette, so each modality alone
/// repeats along the loop while the pair is unique per place when
/// n_places <= texture_palette * layout_palette.
World generate_world(const WorldSpec& spec);

struct Traversal {
  std::string name;
  ConditionSpec condition;
  std::uint64_t seed = 0;
  std::vector<Pose> poses;      // one per frame, frame ids from 0
  std::vector<Pose> keyframes;  // one per keyframe id, ascending
  PointCloud cloud;
  std::vector<Tensor> images;   // [1, H, W], quantized to 8 bits
};

/// Arc position (meters, in [0, circumference)) of a world point.
double arc_position(const World& world, const Point3& p);

/// Renders the grayscale view at arc position `arc` under `condition`.
/// Pixel noise and shadow placement are drawn from `rng_seed`.
Tensor render_image(const World& world, double arc, const ConditionSpec& condition,
                    std::uint64_t rng_seed);

Traversal generate_traversal(const World& world, const ConditionSpec& condition,
                             std::uint64_t seed, std::string name = {});

enum class Split : std::uint8_t { train = 0, validation = 1, test = 2, excluded = 3 };

std::string_view split_name(Split s);
Split parse_split(std::string_view name);

struct SplitPlan {
  std::array<double, 3> fractions{0.6, 0.15, 0.25};
  std::array<double, 3> boundaries{};  // arc start of train, validation, test
  double trim = 0.0;                   // arc half-width excluded around boundaries
  std::vector<std::vector<Split>> assignment;  // per traversal, per frame
};

/// Partitions the loop by arc length. Frames near a boundary between two
/// non-empty splits are excluded until every cross-split pose pair is more
/// than `buffer` meters apart. Throws ConfigError when the fractions are
/// negative or do not sum to 1, ContractError if the audit fails.
SplitPlan split_dataset(const World& world, std::span<const Traversal> traversals,
                        std::array<double, 3> fractions, double buffer = 20.0);

/// Whole synthetic dataset as configured by gen-synth.
struct SynthConfig {
  WorldSpec world;
  std::vector<ConditionSpec> conditions;
  std::array<double, 3> fractions{0.6, 0.15, 0.25};

  /// Keys: seed, n_places, place_length, pose_spacing, keyframe_stride,
  /// points_per_place, curb_spacing, curb_offset, host_lead, texture_palette,
  /// layout_palette, image_width, image_height, camera_height, conditions
  /// (preset names), condition.<name>.<field> overrides, split.
  static SynthConfig from_config(const Config& cfg);
  void validate() const;
};

struct SynthDataset {
  World world;
  std::vector<Traversal> traversals;
  SplitPlan splits;
};

SynthDataset generate_dataset(const SynthConfig& cfg);

// Binary 8-bit PGM (P5).
void write_pgm(const std::filesystem::path& path, const Tensor& image);
Tensor read_pgm(const std::filesystem::path& path);

/// Writes manifest.txt plus one directory per traversal holding
/// trajectory.csv, cloud.csv, frames.csv and images/NNNNNN.pgm.
void write_dataset(const std::filesystem::path& dir, const SynthDataset& data,
                   const std::string& header_comment = {});

}  // namespace placefuse
