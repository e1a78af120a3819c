#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string_view>
#include <vector>

#include "placefuse/config.hpp"
#include "placefuse/observation.hpp"
#include "placefuse/parameters.hpp"
#include "placefuse/sequential.hpp"

namespace placefuse {

enum class Modality : std::uint8_t { appearance = 0, structure = 1, composite = 2 };

std::string_view modality_name(Modality m);
Modality parse_modality(std::string_view name);

struct Descriptor {
  std::vector<double> values;
  Modality modality = Modality::composite;
  std::uint64_t frame_id = 0;

  std::size_t dim() const { return values.size(); }
};

/// 2D extraction network: 3x3 conv + ReLU per layer, 2x2 max pooling after
/// the listed (1-based) layers, global average pooling at the end.
struct VisualNetConfig {
  std::size_t conv_layers = 12;
  std::vector<std::size_t> channel_plan;
  std::vector<std::size_t> pool_after;
  std::size_t input_channels = 1;

  /// Twelve layers, 64 channels for layers 1-6 and 128 for 7-12, pooling
  /// after every even layer.
  static VisualNetConfig defaults();
  void validate(std::size_t descriptor_width) const;
};

/// 3D extraction network: 3x3x3 conv + ReLU per layer, 2x2x2 average
/// pooling after the listed (1-based) layers, global average pooling.
struct StructuralNetConfig {
  std::size_t conv_layers = 9;
  std::vector<std::size_t> channel_plan;
  std::vector<std::size_t> pool_after;

  /// Default plan for depth d: two 32-channel layers, round(d/3) layers of
  /// 128 channels at the end, 64 channels in between; pooling after layers
  /// 2, 4, 6, 8 where such a layer exists and is not the last one.
  /// d = 9 gives 2x32, 4x64, 3x128 with pools after 2, 4, 6, 8.
  static StructuralNetConfig for_depth(std::size_t depth);
  static StructuralNetConfig defaults() { return for_depth(9); }
  void validate(std::size_t descriptor_width) const;
};

/// Checks that every pooled extent is even. `extents` are the spatial
/// extents of the network input (H,W or D,H,W). Throws ConfigError naming
/// the offending layer.
void check_pool_extents(std::span<const std::size_t> pool_after,
                        std::vector<std::size_t> extents, std::string_view net_name);

enum class FusionMethod : std::uint8_t { concat, weighted_concat, linear, mlp };

std::string_view fusion_method_name(FusionMethod m);
FusionMethod parse_fusion_method(std::string_view name);

struct FusionConfig {
  FusionMethod method = FusionMethod::concat;
  std::size_t c_f = 128;
  std::size_t dim_f = 256;
  std::vector<std::size_t> mlp_units{256, 256};

  std::size_t output_dim() const;
  void validate() const;
};

/// Which branches a model carries and how they are shaped.
struct ModelConfig {
  Modality mode = Modality::composite;
  VisualNetConfig visual = VisualNetConfig::defaults();
  StructuralNetConfig structural = StructuralNetConfig::defaults();
  FusionConfig fusion;
  std::uint64_t init_seed = 1;

  /// Keys: mode, fusion, c_f, dim_f, mlp_units, visual_channels,
  /// visual_pool_after, structural_depth, structural_channels,
  /// structural_pool_after, init_seed (falls back to seed).
  static ModelConfig from_config(const Config& cfg);

  bool has_visual() const { return mode != Modality::structure; }
  bool has_structural() const { return mode != Modality::appearance; }
  void validate() const;
};

/// Appends the visual network's parameters to `params` (zero-initialized)
/// under `prefix`.
Sequential build_visual_net(const VisualNetConfig& cfg, std::size_t descriptor_width,
                            ParameterSet& params, std::string_view prefix = "visual");
/// As above for the structural network. If `input_extents` (D,H,W) is given
/// the pool placement is checked against it.
Sequential build_structural_net(const StructuralNetConfig& cfg, std::size_t descriptor_width,
                                ParameterSet& params, std::string_view prefix = "structural",
                                const std::array<std::size_t, 3>* input_extents = nullptr);

/// Per-sample intermediate values of a fusion head forward pass.
struct FusionTrace {
  std::vector<double> g_a;
  std::vector<double> g_s;
  Tape mlp;
};

/// Combines appearance and structure descriptors into one composite vector.
class FusionHead {
 public:
  FusionHead() = default;
  FusionHead(const FusionConfig& cfg, ParameterSet& params);

  const FusionConfig& config() const { return cfg_; }

  std::vector<double> forward(const ParameterSet& params, std::span<const double> g_a,
                              std::span<const double> g_s, FusionTrace* trace = nullptr) const;
  /// Accumulates head gradients and returns the gradients of g_a and g_s.
  std::pair<std::vector<double>, std::vector<double>> backward(const ParameterSet& params,
                                                               const FusionTrace& trace,
                                                               std::span<const double> grad,
                                                               GradientSet& grads) const;

 private:
  FusionConfig cfg_;
  std::size_t w_a_ = 0;
  std::size_t w_s_ = 0;
  std::size_t projection_ = 0;
  Sequential mlp_;
};

/// Fuses two single-modality descriptors. Throws ShapeError if either is
/// not c_f long.
Descriptor fuse(const Descriptor& g_a, const Descriptor& g_s, const FusionHead& head,
                const ParameterSet& params);

/// He-style fan-in scaled normal weights, zero biases, unit fusion scales.
void initialize_parameters(ParameterSet& params, std::uint64_t seed);

/// Extraction networks plus optional fusion head sharing one parameter set.
class DescriptorModel {
 public:
  explicit DescriptorModel(ModelConfig cfg);

  const ModelConfig& config() const { return cfg_; }
  ParameterSet& parameters() { return params_; }
  const ParameterSet& parameters() const { return params_; }
  const FusionHead& fusion_head() const { return fusion_; }

  std::size_t output_dim(Modality mode) const;
  /// Throws InputError if the model lacks a branch needed for `mode`.
  void check_mode(Modality mode) const;

  struct Trace {
    Modality mode = Modality::composite;
    Tape visual;
    Tape structural;
    FusionTrace fusion;
  };

  std::vector<double> forward(const Observation& obs, Modality mode, Trace* trace = nullptr) const;
  void backward(const Trace& trace, std::span<const double> grad, GradientSet& grads) const;

  Descriptor extract(const Observation& obs, Modality mode) const;
  std::vector<Descriptor> extract_all(std::span<const Observation> observations, Modality mode,
                                      std::size_t threads = 1) const;

 private:
  ModelConfig cfg_;
  ParameterSet params_;
  Sequential visual_;
  Sequential structural_;
  FusionHead fusion_;
};

/// DSC1 descriptor database.
struct DescriptorDb {
  Modality modality = Modality::composite;
  std::size_t dim = 0;
  std::vector<Descriptor> records;
};

void write_descriptor_db(const std::filesystem::path& path, const DescriptorDb& db);
DescriptorDb read_descriptor_db(const std::filesystem::path& path);

}  // namespace placefuse
