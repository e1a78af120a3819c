#include "placefuse/nets.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <string>

#include "placefuse/binary_io.hpp"
#include "placefuse/errors.hpp"
#include "placefuse/parallel.hpp"
#include "placefuse/random.hpp"

namespace placefuse {

std::string_view modality_name(Modality m) {
  switch (m) {
    case Modality::appearance:
      return "appearance";
    case Modality::structure:
      return "structure";
    case Modality::composite:
      return "composite";
  }
  return "?";
}

Modality parse_modality(std::string_view name) {
  if (name == "appearance") return Modality::appearance;
  if (name == "structure") return Modality::structure;
  if (name == "composite") return Modality::composite;
  throw ConfigError("unknown modality '" + std::string(name) +
                    "' (expected appearance, structure or composite)");
}

std::string_view fusion_method_name(FusionMethod m) {
  switch (m) {
    case FusionMethod::concat:
      return "concat";
    case FusionMethod::weighted_concat:
      return "weighted_concat";
    case FusionMethod::linear:
      return "linear";
    case FusionMethod::mlp:
      return "mlp";
  }
  return "?";
}

FusionMethod parse_fusion_method(std::string_view name) {
  if (name == "concat") return FusionMethod::concat;
  if (name == "weighted_concat") return FusionMethod::weighted_concat;
  if (name == "linear") return FusionMethod::linear;
  if (name == "mlp") return FusionMethod::mlp;
  throw ConfigError("unknown fusion method '" + std::string(name) + "'");
}

namespace {

void validate_stack(std::string_view net, std::size_t layers, const std::vector<std::size_t>& plan,
                    const std::vector<std::size_t>& pools, std::size_t descriptor_width) {
  const std::string name(net);
  if (layers == 0) throw ConfigError(name + ": at least one conv layer is required");
  if (plan.size() != layers) {
    throw ConfigError(name + ": channel plan has " + std::to_string(plan.size()) +
                      " entries for " + std::to_string(layers) + " layers");
  }
  for (std::size_t c : plan) {
    if (c == 0) throw ConfigError(name + ": channel counts must be positive");
  }
  if (pools.size() > layers) throw ConfigError(name + ": more pools than conv layers");
  for (std::size_t i = 0; i < pools.size(); ++i) {
    if (pools[i] < 1 || pools[i] > layers) {
      throw ConfigError(name + ": pool position " + std::to_string(pools[i]) + " out of range");
    }
    if (i > 0 && pools[i] <= pools[i - 1]) {
      throw ConfigError(name + ": pool positions must be strictly increasing");
    }
  }
  if (plan.back() != descriptor_width) {
    throw ConfigError(name + ": last layer has " + std::to_string(plan.back()) +
                      " channels but the descriptor width c_f is " +
                      std::to_string(descriptor_width));
  }
}

bool pools_after(const std::vector<std::size_t>& pools, std::size_t layer) {
  return std::find(pools.begin(), pools.end(), layer) != pools.end();
}

}  // namespace

VisualNetConfig VisualNetConfig::defaults() {
  VisualNetConfig cfg;
  cfg.conv_layers = 12;
  cfg.channel_plan.assign(6, 64);
  cfg.channel_plan.resize(12, 128);
  cfg.pool_after = {2, 4, 6, 8, 10, 12};
  cfg.input_channels = 1;
  return cfg;
}

void VisualNetConfig::validate(std::size_t descriptor_width) const {
  validate_stack("visual net", conv_layers, channel_plan, pool_after, descriptor_width);
  if (input_channels == 0) throw ConfigError("visual net: input channels must be positive");
}

StructuralNetConfig StructuralNetConfig::for_depth(std::size_t depth) {
  if (depth < 3) throw ConfigError("structural net depth must be at least 3");
  StructuralNetConfig cfg;
  cfg.conv_layers = depth;
  const std::size_t wide = static_cast<std::size_t>(std::lround(static_cast<double>(depth) / 3.0));
  const std::size_t mid = depth - 2 - wide;
  cfg.channel_plan.assign(2, 32);
  cfg.channel_plan.insert(cfg.channel_plan.end(), mid, 64);
  cfg.channel_plan.insert(cfg.channel_plan.end(), wide, 128);
  for (std::size_t layer : {2, 4, 6, 8}) {
    if (layer < depth) cfg.pool_after.push_back(layer);
  }
  return cfg;
}

void StructuralNetConfig::validate(std::size_t descriptor_width) const {
  validate_stack("structural net", conv_layers, channel_plan, pool_after, descriptor_width);
}

void check_pool_extents(std::span<const std::size_t> pool_after, std::vector<std::size_t> extents,
                        std::string_view net_name) {
  for (std::size_t layer : pool_after) {
    for (std::size_t& e : extents) {
      if (e % 2 != 0) {
        throw ConfigError(std::string(net_name) + ": pooling after layer " +
                          std::to_string(layer) + " would halve odd extent " + std::to_string(e));
      }
      e /= 2;
    }
  }
}

std::size_t FusionConfig::output_dim() const {
  switch (method) {
    case FusionMethod::concat:
    case FusionMethod::weighted_concat:
      return 2 * c_f;
    case FusionMethod::linear:
      return dim_f;
    case FusionMethod::mlp:
      return mlp_units.back();
  }
  return 0;
}

void FusionConfig::validate() const {
  if (c_f == 0) throw ConfigError("descriptor width c_f must be positive");
  if (method == FusionMethod::linear && dim_f == 0) throw ConfigError("dim_f must be positive");
  if (method == FusionMethod::mlp) {
    if (mlp_units.empty()) throw ConfigError("mlp fusion needs at least one layer");
    for (std::size_t u : mlp_units) {
      if (u == 0) throw ConfigError("mlp layer widths must be positive");
    }
  }
}

ModelConfig ModelConfig::from_config(const Config& c) {
  ModelConfig m;
  m.mode = parse_modality(c.get_string("mode", modality_name(m.mode)));
  m.fusion.method = parse_fusion_method(c.get_string("fusion", fusion_method_name(m.fusion.method)));
  m.fusion.c_f = c.get_size("c_f", m.fusion.c_f);
  m.fusion.dim_f = c.get_size("dim_f", m.fusion.dim_f);
  m.fusion.mlp_units = c.get_size_list("mlp_units", m.fusion.mlp_units);
  if (c.has("visual_channels")) {
    m.visual.channel_plan = c.get_size_list("visual_channels", {});
    m.visual.conv_layers = m.visual.channel_plan.size();
  }
  m.visual.pool_after = c.get_size_list("visual_pool_after", m.visual.pool_after);
  if (c.has("structural_depth")) {
    m.structural = StructuralNetConfig::for_depth(c.get_size("structural_depth", 9));
  }
  if (c.has("structural_channels")) {
    m.structural.channel_plan = c.get_size_list("structural_channels", {});
    m.structural.conv_layers = m.structural.channel_plan.size();
  }
  m.structural.pool_after = c.get_size_list("structural_pool_after", m.structural.pool_after);
  m.init_seed = c.get_u64("init_seed", c.get_u64("seed", m.init_seed));
  return m;
}

void ModelConfig::validate() const {
  fusion.validate();
  if (has_visual()) visual.validate(fusion.c_f);
  if (has_structural()) structural.validate(fusion.c_f);
}

namespace {

Sequential build_conv_stack(bool volumetric, std::size_t in_channels,
                            const std::vector<std::size_t>& plan,
                            const std::vector<std::size_t>& pools, ParameterSet& params,
                            std::string_view prefix) {
  Sequential net;
  std::size_t channels = in_channels;
  for (std::size_t layer = 1; layer <= plan.size(); ++layer) {
    const std::size_t out = plan[layer - 1];
    const std::string base = std::string(prefix) + ".conv" + std::to_string(layer);
    Shape kshape = volumetric ? Shape{out, channels, 3, 3, 3} : Shape{out, channels, 3, 3};
    const std::size_t w = params.add(base + ".weight", Tensor(std::move(kshape)));
    const std::size_t b = params.add(base + ".bias", Tensor(Shape{out}));
    if (volumetric) {
      net.append(stage::Conv3d{w, b});
    } else {
      net.append(stage::Conv2d{w, b});
    }
    net.append(stage::Relu{});
    if (pools_after(pools, layer)) {
      if (volumetric) {
        net.append(stage::AvgPool3d{});
      } else {
        net.append(stage::MaxPool2d{});
      }
    }
    channels = out;
  }
  net.append(stage::GlobalAvgPool{});
  return net;
}

}  // namespace

Sequential build_visual_net(const VisualNetConfig& cfg, std::size_t descriptor_width,
                            ParameterSet& params, std::string_view prefix) {
  cfg.validate(descriptor_width);
  return build_conv_stack(false, cfg.input_channels, cfg.channel_plan, cfg.pool_after, params,
                          prefix);
}

Sequential build_structural_net(const StructuralNetConfig& cfg, std::size_t descriptor_width,
                                ParameterSet& params, std::string_view prefix,
                                const std::array<std::size_t, 3>* input_extents) {
  cfg.validate(descriptor_width);
  if (input_extents) {
    check_pool_extents(cfg.pool_after, {input_extents->begin(), input_extents->end()},
                       "structural net");
  }
  return build_conv_stack(true, 1, cfg.channel_plan, cfg.pool_after, params, prefix);
}

FusionHead::FusionHead(const FusionConfig& cfg, ParameterSet& params) : cfg_(cfg) {
  cfg_.validate();
  switch (cfg_.method) {
    case FusionMethod::concat:
      break;
    case FusionMethod::weighted_concat:
      w_a_ = params.add("fusion.w_a", Tensor(Shape{1}, 1.0));
      w_s_ = params.add("fusion.w_s", Tensor(Shape{1}, 1.0));
      break;
    case FusionMethod::linear:
      projection_ = params.add("fusion.linear.weight", Tensor(Shape{cfg_.dim_f, 2 * cfg_.c_f}));
      break;
    case FusionMethod::mlp: {
      std::size_t in = 2 * cfg_.c_f;
      for (std::size_t i = 0; i < cfg_.mlp_units.size(); ++i) {
        const std::string base = "fusion.mlp" + std::to_string(i + 1);
        const std::size_t out = cfg_.mlp_units[i];
        const std::size_t w = params.add(base + ".weight", Tensor(Shape{out, in}));
        const std::size_t b = params.add(base + ".bias", Tensor(Shape{out}));
        mlp_.append(stage::Linear{w, b});
        mlp_.append(stage::Relu{});
        in = out;
      }
      break;
    }
  }
}

std::vector<double> FusionHead::forward(const ParameterSet& params, std::span<const double> g_a,
                                        std::span<const double> g_s, FusionTrace* trace) const {
  const std::size_t c = cfg_.c_f;
  if (g_a.size() != c || g_s.size() != c) {
    throw ShapeError("fusion expects two descriptors of width " + std::to_string(c) + ", got " +
                     std::to_string(g_a.size()) + " and " + std::to_string(g_s.size()));
  }
  if (trace) {
    trace->g_a.assign(g_a.begin(), g_a.end());
    trace->g_s.assign(g_s.begin(), g_s.end());
  }
  std::vector<double> joint(g_a.begin(), g_a.end());
  joint.insert(joint.end(), g_s.begin(), g_s.end());

  switch (cfg_.method) {
    case FusionMethod::concat:
      return joint;
    case FusionMethod::weighted_concat: {
      const double wa = params[w_a_].tensor[0], ws = params[w_s_].tensor[0];
      for (std::size_t i = 0; i < c; ++i) {
        joint[i] *= wa;
        joint[c + i] *= ws;
      }
      return joint;
    }
    case FusionMethod::linear: {
      const Tensor& w = params[projection_].tensor;
      const std::size_t rows = cfg_.dim_f, cols = 2 * c;
      std::vector<double> out(rows, 0.0);
      for (std::size_t r = 0; r < rows; ++r) {
        double acc = 0.0;
        for (std::size_t k = 0; k < cols; ++k) acc += w[r * cols + k] * joint[k];
        out[r] = acc;
      }
      return out;
    }
    case FusionMethod::mlp: {
      Tensor out = mlp_.forward(params, Tensor(Shape{2 * c}, std::move(joint)),
                                trace ? &trace->mlp : nullptr);
      return out.values();
    }
  }
  return {};
}

std::pair<std::vector<double>, std::vector<double>> FusionHead::backward(
    const ParameterSet& params, const FusionTrace& trace, std::span<const double> grad,
    GradientSet& grads) const {
  const std::size_t c = cfg_.c_f;
  if (grad.size() != cfg_.output_dim()) throw ShapeError("fusion backward: gradient size mismatch");
  std::vector<double> ga(c, 0.0), gs(c, 0.0);
  switch (cfg_.method) {
    case FusionMethod::concat:
      std::copy(grad.begin(), grad.begin() + static_cast<std::ptrdiff_t>(c), ga.begin());
      std::copy(grad.begin() + static_cast<std::ptrdiff_t>(c), grad.end(), gs.begin());
      break;
    case FusionMethod::weighted_concat: {
      const double wa = params[w_a_].tensor[0], ws = params[w_s_].tensor[0];
      double dwa = 0.0, dws = 0.0;
      for (std::size_t i = 0; i < c; ++i) {
        dwa += grad[i] * trace.g_a[i];
        dws += grad[c + i] * trace.g_s[i];
        ga[i] = wa * grad[i];
        gs[i] = ws * grad[c + i];
      }
      grads[w_a_][0] += dwa;
      grads[w_s_][0] += dws;
      break;
    }
    case FusionMethod::linear: {
      const Tensor& w = params[projection_].tensor;
      Tensor& gw = grads[projection_];
      const std::size_t cols = 2 * c;
      for (std::size_t r = 0; r < cfg_.dim_f; ++r) {
        const double g = grad[r];
        for (std::size_t k = 0; k < cols; ++k) {
          const double x = k < c ? trace.g_a[k] : trace.g_s[k - c];
          gw[r * cols + k] += g * x;
          (k < c ? ga[k] : gs[k - c]) += w[r * cols + k] * g;
        }
      }
      break;
    }
    case FusionMethod::mlp: {
      Tensor g_in = mlp_.backward(params, trace.mlp,
                                  Tensor(Shape{grad.size()}, {grad.begin(), grad.end()}), grads,
                                  true);
      std::copy(g_in.data().begin(), g_in.data().begin() + static_cast<std::ptrdiff_t>(c), ga.begin());
      std::copy(g_in.data().begin() + static_cast<std::ptrdiff_t>(c), g_in.data().end(), gs.begin());
      break;
    }
  }
  return {std::move(ga), std::move(gs)};
}

Descriptor fuse(const Descriptor& g_a, const Descriptor& g_s, const FusionHead& head,
                const ParameterSet& params) {
  Descriptor out;
  out.values = head.forward(params, g_a.values, g_s.values);
  out.modality = Modality::composite;
  out.frame_id = g_a.frame_id;
  return out;
}

void initialize_parameters(ParameterSet& params, std::uint64_t seed) {
  Rng rng(seed);
  for (auto& p : params) {
    const Shape& s = p.tensor.shape();
    const bool is_scale = p.name == "fusion.w_a" || p.name == "fusion.w_s";
    if (is_scale) {
      p.tensor[0] = 1.0;
    } else if (s.size() >= 2) {
      const std::size_t fan_in = p.tensor.size() / s[0];
      const double stddev = std::sqrt(2.0 / static_cast<double>(fan_in));
      for (double& v : p.tensor.data()) v = stddev * rng.normal();
    } else {
      for (double& v : p.tensor.data()) v = 0.0;
    }
  }
}

DescriptorModel::DescriptorModel(ModelConfig cfg) : cfg_(std::move(cfg)) {
  cfg_.validate();
  if (cfg_.has_visual()) visual_ = build_visual_net(cfg_.visual, cfg_.fusion.c_f, params_);
  if (cfg_.has_structural()) structural_ = build_structural_net(cfg_.structural, cfg_.fusion.c_f, params_);
  if (cfg_.mode == Modality::composite) fusion_ = FusionHead(cfg_.fusion, params_);
  initialize_parameters(params_, cfg_.init_seed);
}

std::size_t DescriptorModel::output_dim(Modality mode) const {
  check_mode(mode);
  return mode == Modality::composite ? cfg_.fusion.output_dim() : cfg_.fusion.c_f;
}

void DescriptorModel::check_mode(Modality mode) const {
  const bool ok = mode == Modality::appearance   ? cfg_.has_visual()
                  : mode == Modality::structure ? cfg_.has_structural()
                                                : cfg_.mode == Modality::composite;
  if (!ok) {
    throw InputError("model trained for " + std::string(modality_name(cfg_.mode)) +
                     " cannot produce " + std::string(modality_name(mode)) + " descriptors");
  }
}

std::vector<double> DescriptorModel::forward(const Observation& obs, Modality mode,
                                             Trace* trace) const {
  check_mode(mode);
  const bool need_image = mode != Modality::structure;
  const bool need_grid = mode != Modality::appearance;
  if (need_image && !obs.image) {
    throw InputError("observation " + std::to_string(obs.frame_id) + " has no image");
  }
  if (need_grid && !obs.grid) {
    throw InputError("observation " + std::to_string(obs.frame_id) + " has no voxel grid");
  }
  if (trace) trace->mode = mode;

  std::vector<double> g_a, g_s;
  if (need_image) {
    g_a = visual_.forward(params_, *obs.image, trace ? &trace->visual : nullptr).values();
  }
  if (need_grid) {
    g_s = structural_.forward(params_, grid_to_tensor(*obs.grid), trace ? &trace->structural : nullptr)
              .values();
  }
  if (mode == Modality::appearance) return g_a;
  if (mode == Modality::structure) return g_s;
  return fusion_.forward(params_, g_a, g_s, trace ? &trace->fusion : nullptr);
}

void DescriptorModel::backward(const Trace& trace, std::span<const double> grad,
                               GradientSet& grads) const {
  const std::size_t c = cfg_.fusion.c_f;
  auto as_tensor = [c](std::span<const double> v) {
    if (v.size() != c) throw ShapeError("descriptor gradient has wrong length");
    return Tensor(Shape{c}, {v.begin(), v.end()});
  };
  switch (trace.mode) {
    case Modality::appearance:
      visual_.backward(params_, trace.visual, as_tensor(grad), grads);
      break;
    case Modality::structure:
      structural_.backward(params_, trace.structural, as_tensor(grad), grads);
      break;
    case Modality::composite: {
      auto [ga, gs] = fusion_.backward(params_, trace.fusion, grad, grads);
      visual_.backward(params_, trace.visual, as_tensor(ga), grads);
      structural_.backward(params_, trace.structural, as_tensor(gs), grads);
      break;
    }
  }
}

Descriptor DescriptorModel::extract(const Observation& obs, Modality mode) const {
  Descriptor d;
  d.values = forward(obs, mode);
  d.modality = mode;
  d.frame_id = obs.frame_id;
  return d;
}

std::vector<Descriptor> DescriptorModel::extract_all(std::span<const Observation> observations,
                                                     Modality mode, std::size_t threads) const {
  std::vector<Descriptor> out(observations.size());
  parallel_for(observations.size(), threads,
               [&](std::size_t i) { out[i] = extract(observations[i], mode); });
  return out;
}

void write_descriptor_db(const std::filesystem::path& path, const DescriptorDb& db) {
  for (const auto& r : db.records) {
    if (r.dim() != db.dim) throw ShapeError("descriptor database records must share one dimension");
  }
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  binio::write_bytes(os, "DSC1");
  binio::write<std::uint32_t>(os, static_cast<std::uint32_t>(db.records.size()));
  binio::write<std::uint32_t>(os, static_cast<std::uint32_t>(db.dim));
  binio::write<std::uint8_t>(os, static_cast<std::uint8_t>(db.modality));
  for (const auto& r : db.records) {
    binio::write<std::uint64_t>(os, r.frame_id);
    for (double v : r.values) binio::write<float>(os, static_cast<float>(v));
  }
  if (!os) throw std::runtime_error("failed writing " + path.string());
}

DescriptorDb read_descriptor_db(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw InputError("cannot open descriptor database: " + path.string());
  binio::expect_magic(is, "DSC1");
  DescriptorDb db;
  const auto count = binio::read<std::uint32_t>(is, "count");
  db.dim = binio::read<std::uint32_t>(is, "dim");
  const auto code = binio::read<std::uint8_t>(is, "modality");
  if (code > 2) throw FormatError("unknown modality code " + std::to_string(code));
  db.modality = static_cast<Modality>(code);
  db.records.resize(count);
  for (auto& r : db.records) {
    r.frame_id = binio::read<std::uint64_t>(is, "frame id");
    r.modality = db.modality;
    r.values.resize(db.dim);
    for (double& v : r.values) v = binio::read<float>(is, "descriptor value");
  }
  return db;
}

}  // namespace placefuse
