#include "placefuse/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <sstream>

#include "placefuse/errors.hpp"
#include "placefuse/random.hpp"

namespace placefuse {
namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.15g", v);
  return buf;
}

double clamp01(double v) { return std::clamp(v, 0.0, 1.0); }

// Place-local coordinates (along-arc offset from the place start, lateral
// offset outward from the loop, height) to world coordinates.
Point3 local_to_world(const World& w, const Place& place, double along, double lateral, double z) {
  const double theta = (place.arc_start + along) / w.radius;
  const double r = w.radius + lateral;
  return {r * std::cos(theta), r * std::sin(theta), z};
}

// A point on one of the twelve edges (or, with probability face_share, on
// one of the six faces) of an axis-aligned local box.
Point3 sample_box_surface(const Box& b, Rng& rng, double face_share) {
  const double c[3] = {b.center.x, b.center.y, b.center.z};
  const double h[3] = {b.half.x, b.half.y, b.half.z};
  double p[3];
  if (rng.uniform() < face_share) {
    const std::size_t axis = rng.index(3);
    const double side = rng.index(2) == 0 ? -1.0 : 1.0;
    for (std::size_t a = 0; a < 3; ++a) p[a] = c[a] + h[a] * rng.uniform(-1.0, 1.0);
    p[axis] = c[axis] + side * h[axis];
  } else {
    const std::size_t free_axis = rng.index(3);
    for (std::size_t a = 0; a < 3; ++a) {
      p[a] = a == free_axis ? c[a] + h[a] * rng.uniform(-1.0, 1.0)
                            : c[a] + (rng.index(2) == 0 ? -h[a] : h[a]);
    }
  }
  return {p[0], p[1], p[2]};
}

std::vector<Box> layout_boxes(const WorldSpec& spec, std::size_t code) {
  Rng rng(mix_seed(spec.seed, 2000 + code));
  const std::size_t count = 3 + rng.index(3);
  std::vector<Box> boxes;
  for (std::size_t i = 0; i < count; ++i) {
    Box b;
    const double side = rng.index(2) == 0 ? -1.0 : 1.0;
    b.half.x = rng.uniform(0.4, 0.25 * spec.place_length);
    b.half.y = rng.uniform(0.4, 2.0);
    b.half.z = rng.uniform(0.5, 3.0);
    b.center.x = rng.uniform(b.half.x, spec.place_length - b.half.x);
    b.center.y = side * (spec.curb_offset + 1.0 + b.half.y + rng.uniform(0.0, 5.0));
    b.center.z = b.half.z;
    boxes.push_back(b);
  }
  return boxes;
}

TextureCode texture_code(const WorldSpec& spec, std::size_t code) {
  Rng rng(mix_seed(spec.seed, 1000 + code));
  const double palette = static_cast<double>(std::max<std::size_t>(spec.texture_palette, 1));
  TextureCode t;
  t.orientation[0] = std::numbers::pi * static_cast<double>(code) / palette + rng.uniform(-0.1, 0.1);
  t.orientation[1] = t.orientation[0] + 0.5 * std::numbers::pi + rng.uniform(-0.4, 0.4);
  // Spread frequencies with a stride coprime to most palette sizes so that
  // neighbouring codes differ in both orientation and scale.
  const double slot = static_cast<double>((code * 3) % static_cast<std::size_t>(palette)) / palette;
  t.frequency[0] = 1.5 + 5.0 * slot + rng.uniform(0.0, 0.3);
  t.frequency[1] = 1.0 + rng.uniform(0.0, 3.0);
  t.phase[0] = rng.uniform(0.0, kTwoPi);
  t.phase[1] = rng.uniform(0.0, kTwoPi);
  t.contrast = rng.uniform(0.7, 1.0);
  t.mean = rng.uniform(0.4, 0.6);
  return t;
}

double texture_value(const TextureCode& t, double x, double y, double warp) {
  double v = 0.0;
  const double weight[2] = {0.65, 0.35};
  for (std::size_t i = 0; i < 2; ++i) {
    const double f = t.frequency[i] * (1.0 + warp);
    const double u = x * std::cos(t.orientation[i]) + y * std::sin(t.orientation[i]);
    v += weight[i] * std::sin(kTwoPi * f * u + t.phase[i]);
  }
  return t.mean + 0.5 * t.contrast * v;
}

std::size_t positive_mod(std::int64_t v, std::size_t m) {
  const auto mm = static_cast<std::int64_t>(m);
  return static_cast<std::size_t>(((v % mm) + mm) % mm);
}

}  // namespace

ConditionSpec ConditionSpec::preset(std::string_view name) {
  ConditionSpec c;
  c.name = std::string(name);
  if (name == "reference") return c;
  if (name == "mild") {
    c.gain = 0.85;
    c.offset = 0.05;
    c.gamma = 1.15;
    c.shadow = 0.2;
    c.pixel_noise = 0.02;
    c.texture_warp = 0.04;
    c.jitter = 0.02;
    c.dropout = 0.05;
    c.clutter = 0.02;
    return c;
  }
  if (name == "severe") {
    c.gain = 0.55;
    c.offset = 0.2;
    c.gamma = 1.7;
    c.shadow = 0.5;
    c.pixel_noise = 0.08;
    c.texture_warp = 0.12;
    c.jitter = 0.05;
    c.dropout = 0.1;
    c.clutter = 0.05;
    return c;
  }
  throw ConfigError("unknown condition preset '" + std::string(name) +
                    "' (expected reference, mild or severe)");
}

void ConditionSpec::validate() const {
  if (name.empty()) throw ConfigError("condition needs a name");
  if (!(gain > 0.0) || !(gamma > 0.0)) throw ConfigError("condition gain and gamma must be > 0");
  if (!(shadow >= 0.0 && shadow <= 1.0)) throw ConfigError("condition shadow must lie in [0, 1]");
  if (!(pixel_noise >= 0.0) || !(jitter >= 0.0) || !(clutter >= 0.0)) {
    throw ConfigError("condition noise, jitter and clutter must be >= 0");
  }
  if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("condition dropout must lie in [0, 1)");
  if (!(texture_warp > -1.0)) throw ConfigError("condition texture_warp must be > -1");
}

void WorldSpec::validate() const {
  if (!(place_length > 0.0) || !(pose_spacing > 0.0)) {
    throw ConfigError("place_length and pose_spacing must be > 0");
  }
  if (keyframe_stride < 1) throw ConfigError("keyframe_stride must be >= 1");
  if (!(curb_spacing > 0.0) || curb_spacing > place_length) {
    throw ConfigError("curb_spacing must lie in (0, place_length]");
  }
  if (points_per_place < curb_points_per_place()) {
    throw ConfigError("points_per_place must be at least the " +
                      std::to_string(curb_points_per_place()) + " curb points of a place");
  }
  if (texture_palette < 1 || layout_palette < 1) throw ConfigError("palettes must be non-empty");
  if (image_width < 1 || image_height < 1) throw ConfigError("image size must be positive");
  if (!(host_lead >= 0.0)) throw ConfigError("host_lead must be >= 0");
}

std::size_t WorldSpec::frame_count() const {
  return static_cast<std::size_t>(std::floor(circumference() / pose_spacing + 1e-9));
}

std::size_t WorldSpec::curb_points_per_place() const {
  return 2 * static_cast<std::size_t>(std::floor(place_length / curb_spacing + 1e-9));
}

World generate_world(const WorldSpec& spec) {
  spec.validate();
  World w;
  w.spec = spec;
  if (spec.n_places == 0) return w;
  w.radius = spec.circumference() / kTwoPi;
  for (std::size_t c = 0; c < spec.texture_palette; ++c) w.textures.push_back(texture_code(spec, c));
  std::vector<std::vector<Box>> layouts;
  for (std::size_t c = 0; c < spec.layout_palette; ++c) layouts.push_back(layout_boxes(spec, c));

  const std::size_t curb_per_side = spec.curb_points_per_place() / 2;
  for (std::size_t p = 0; p < spec.n_places; ++p) {
    Place place;
    place.index = p;
    place.arc_start = static_cast<double>(p) * spec.place_length;
    place.texture_code = p % spec.texture_palette;
    place.layout_code = (p / spec.texture_palette) % spec.layout_palette;
    place.boxes = layouts[place.layout_code];
    for (std::size_t i = 0; i < curb_per_side; ++i) {
      const double along = (static_cast<double>(i) + 0.5) * spec.curb_spacing;
      place.points.push_back(local_to_world(w, place, along, -spec.curb_offset, 0.0));
      place.points.push_back(local_to_world(w, place, along, spec.curb_offset, 0.0));
    }
    place.curb_points = place.points.size();
    Rng rng(mix_seed(spec.seed, 3000 + p));
    while (place.points.size() < spec.points_per_place) {
      const Box& b = place.boxes[rng.index(place.boxes.size())];
      const Point3 q = sample_box_surface(b, rng, 0.2);
      place.points.push_back(local_to_world(w, place, q.x, q.y, q.z));
    }
    w.places.push_back(std::move(place));
  }
  return w;
}

double arc_position(const World& world, const Point3& p) {
  if (world.places.empty()) return 0.0;
  double phi = std::atan2(p.y, p.x);
  if (phi < 0.0) phi += kTwoPi;
  double s = phi * world.radius;
  const double c = world.spec.circumference();
  if (s >= c) s -= c;
  return s;
}

Tensor render_image(const World& world, double arc, const ConditionSpec& cond,
                    std::uint64_t rng_seed) {
  const WorldSpec& spec = world.spec;
  const std::size_t h = spec.image_height;
  const std::size_t wd = spec.image_width;
  Tensor img(Shape{1, h, wd});
  if (world.places.empty()) return img;

  // Blend linearly between the textures of the two nearest place centers.
  const double u = arc / spec.place_length - 0.5;
  const double base = std::floor(u);
  const double t = u - base;
  const std::size_t n = world.places.size();
  const auto& t0 = world.textures[world.places[positive_mod(static_cast<std::int64_t>(base), n)].texture_code];
  const auto& t1 =
      world.textures[world.places[positive_mod(static_cast<std::int64_t>(base) + 1, n)].texture_code];
  // Slow horizontal drift of the pattern as the camera moves.
  const double shift = 0.02 * arc;

  Rng rng(rng_seed);
  double shadow_edge = 0.0, shadow_slope = 0.0;
  if (cond.shadow > 0.0) {
    shadow_edge = rng.uniform(0.2, 0.8);
    shadow_slope = rng.uniform(-0.5, 0.5);
  }
  for (std::size_t r = 0; r < h; ++r) {
    const double y = (static_cast<double>(r) + 0.5) / static_cast<double>(h);
    for (std::size_t c = 0; c < wd; ++c) {
      const double x = (static_cast<double>(c) + 0.5) / static_cast<double>(wd);
      double v = (1.0 - t) * texture_value(t0, x + shift, y, cond.texture_warp) +
                 t * texture_value(t1, x + shift, y, cond.texture_warp);
      v = cond.gain * std::pow(clamp01(v), cond.gamma) + cond.offset;
      if (cond.shadow > 0.0 && x < shadow_edge + shadow_slope * (y - 0.5)) v *= 1.0 - cond.shadow;
      if (cond.pixel_noise > 0.0) v += cond.pixel_noise * rng.normal();
      img[r * wd + c] = std::round(clamp01(v) * 255.0) / 255.0;
    }
  }
  return img;
}

Traversal generate_traversal(const World& world, const ConditionSpec& condition,
                             std::uint64_t seed, std::string name) {
  condition.validate();
  const WorldSpec& spec = world.spec;
  Traversal tr;
  tr.name = name.empty() ? condition.name : std::move(name);
  tr.condition = condition;
  tr.seed = seed;
  if (world.places.empty()) return tr;

  const std::size_t frames = spec.frame_count();
  for (std::size_t f = 0; f < frames; ++f) {
    const double s = static_cast<double>(f) * spec.pose_spacing;
    const double theta = s / world.radius;
    Pose p;
    p.position = {world.radius * std::cos(theta), world.radius * std::sin(theta), spec.camera_height};
    p.yaw = wrap_angle(theta + 0.5 * std::numbers::pi);
    p.frame_id = f;
    p.keyframe_id = f / spec.keyframe_stride;
    tr.poses.push_back(p);
    if (f % spec.keyframe_stride == 0) tr.keyframes.push_back(p);
    tr.images.push_back(render_image(world, s, condition, mix_seed(seed, f)));
  }

  const std::size_t keyframes = tr.keyframes.size();
  const double kf_spacing = spec.pose_spacing * static_cast<double>(spec.keyframe_stride);
  auto host_of = [&](const Point3& q) {
    const double s = arc_position(world, q) - spec.host_lead;
    return static_cast<std::uint64_t>(
        positive_mod(static_cast<std::int64_t>(std::llround(s / kf_spacing)), keyframes));
  };
  Rng rng(mix_seed(seed, 77));
  const auto clutter = static_cast<std::size_t>(
      std::llround(condition.clutter * static_cast<double>(spec.points_per_place)));
  for (const Place& place : world.places) {
    for (std::size_t i = 0; i < place.points.size(); ++i) {
      if (i >= place.curb_points && condition.dropout > 0.0 && rng.uniform() < condition.dropout) {
        continue;
      }
      Point3 q = place.points[i];
      if (condition.jitter > 0.0) {
        q.x += condition.jitter * rng.normal();
        q.y += condition.jitter * rng.normal();
        q.z += condition.jitter * rng.normal();
      }
      tr.cloud.add(q, host_of(q));
    }
    for (std::size_t i = 0; i < clutter; ++i) {
      const Point3 q = local_to_world(world, place, rng.uniform(0.0, spec.place_length),
                                      rng.uniform(-12.0, 12.0), rng.uniform(0.0, 3.0));
      tr.cloud.add(q, host_of(q));
    }
  }
  return tr;
}

std::string_view split_name(Split s) {
  switch (s) {
    case Split::train:
      return "train";
    case Split::validation:
      return "validation";
    case Split::test:
      return "test";
    case Split::excluded:
      return "excluded";
  }
  return "?";
}

Split parse_split(std::string_view name) {
  if (name == "train") return Split::train;
  if (name == "validation" || name == "val") return Split::validation;
  if (name == "test") return Split::test;
  if (name == "excluded") return Split::excluded;
  throw ConfigError("unknown split '" + std::string(name) + "'");
}

SplitPlan split_dataset(const World& world, std::span<const Traversal> traversals,
                        std::array<double, 3> fractions, double buffer) {
  double sum = 0.0;
  for (double f : fractions) {
    if (!(f >= 0.0)) throw ConfigError("split fractions must be >= 0");
    sum += f;
  }
  if (std::abs(sum - 1.0) > 1e-9) {
    throw ConfigError("split fractions must sum to 1, got " + fmt(sum));
  }
  SplitPlan plan;
  plan.fractions = fractions;
  const double c = world.spec.circumference();
  plan.boundaries = {0.0, fractions[0] * c, (fractions[0] + fractions[1]) * c};

  auto base_split = [&](double s) {
    if (s < plan.boundaries[1]) return Split::train;
    if (s < plan.boundaries[2]) return Split::validation;
    return Split::test;
  };
  std::vector<double> cuts;
  std::size_t nonempty = 0;
  for (double f : fractions) nonempty += f > 0.0 ? 1 : 0;
  if (nonempty > 1) {
    for (std::size_t i = 0; i < 3; ++i) {
      if (fractions[i] > 0.0) cuts.push_back(plan.boundaries[i]);
    }
  }

  std::vector<std::vector<double>> arcs;
  for (const auto& tr : traversals) {
    std::vector<double> a;
    for (const auto& p : tr.poses) a.push_back(arc_position(world, p.position));
    arcs.push_back(std::move(a));
  }
  auto cyclic = [c](double a, double b) {
    const double d = std::abs(a - b);
    return std::min(d, c - d);
  };

  double trim = cuts.empty() ? 0.0 : 0.5 * buffer;
  for (;;) {
    plan.assignment.assign(traversals.size(), {});
    struct Tagged {
      Point3 p;
      Split s;
    };
    std::vector<Tagged> kept;
    for (std::size_t t = 0; t < traversals.size(); ++t) {
      for (std::size_t f = 0; f < arcs[t].size(); ++f) {
        Split s = base_split(arcs[t][f]);
        for (double cut : cuts) {
          if (cyclic(arcs[t][f], cut) < trim) s = Split::excluded;
        }
        plan.assignment[t].push_back(s);
        if (s != Split::excluded) kept.push_back({traversals[t].poses[f].position, s});
      }
    }
    bool ok = true;
    for (std::size_t i = 0; i < kept.size() && ok; ++i) {
      for (std::size_t j = i + 1; j < kept.size(); ++j) {
        if (kept[i].s == kept[j].s) continue;
        if (std::hypot(kept[i].p.x - kept[j].p.x, kept[i].p.y - kept[j].p.y) <= buffer) {
          ok = false;
          break;
        }
      }
    }
    if (ok) break;
    trim += world.spec.pose_spacing;
    if (trim > 0.5 * c) throw ContractError("cannot separate splits by the required buffer");
  }
  plan.trim = trim;
  return plan;
}

SynthConfig SynthConfig::from_config(const Config& cfg) {
  SynthConfig s;
  WorldSpec& w = s.world;
  w.seed = cfg.get_u64("seed", w.seed);
  w.n_places = cfg.get_size("n_places", w.n_places);
  w.place_length = cfg.get_double("place_length", w.place_length);
  w.pose_spacing = cfg.get_double("pose_spacing", w.pose_spacing);
  w.keyframe_stride = cfg.get_size("keyframe_stride", w.keyframe_stride);
  w.points_per_place = cfg.get_size("points_per_place", w.points_per_place);
  w.curb_spacing = cfg.get_double("curb_spacing", w.curb_spacing);
  w.curb_offset = cfg.get_double("curb_offset", w.curb_offset);
  w.host_lead = cfg.get_double("host_lead", w.host_lead);
  w.texture_palette = cfg.get_size("texture_palette", w.texture_palette);
  w.layout_palette = cfg.get_size("layout_palette", w.layout_palette);
  w.image_width = cfg.get_size("image_width", w.image_width);
  w.image_height = cfg.get_size("image_height", w.image_height);
  w.camera_height = cfg.get_double("camera_height", w.camera_height);

  for (const std::string& name : cfg.get_string_list("conditions", {"reference", "severe"})) {
    ConditionSpec c = ConditionSpec::preset(name);
    const std::string p = "condition." + name + ".";
    c.gain = cfg.get_double(p + "gain", c.gain);
    c.offset = cfg.get_double(p + "offset", c.offset);
    c.gamma = cfg.get_double(p + "gamma", c.gamma);
    c.shadow = cfg.get_double(p + "shadow", c.shadow);
    c.pixel_noise = cfg.get_double(p + "pixel_noise", c.pixel_noise);
    c.texture_warp = cfg.get_double(p + "texture_warp", c.texture_warp);
    c.jitter = cfg.get_double(p + "jitter", c.jitter);
    c.dropout = cfg.get_double(p + "dropout", c.dropout);
    c.clutter = cfg.get_double(p + "clutter", c.clutter);
    s.conditions.push_back(c);
  }
  const auto split = cfg.get_double_list("split", {0.6, 0.15, 0.25});
  if (split.size() != 3) throw ConfigError("split needs three fractions (train, validation, test)");
  s.fractions = {split[0], split[1], split[2]};
  return s;
}

void SynthConfig::validate() const {
  world.validate();
  for (const auto& c : conditions) c.validate();
  double sum = 0.0;
  for (double f : fractions) {
    if (!(f >= 0.0)) throw ConfigError("split fractions must be >= 0");
    sum += f;
  }
  if (std::abs(sum - 1.0) > 1e-9) throw ConfigError("split fractions must sum to 1, got " + fmt(sum));
}

SynthDataset generate_dataset(const SynthConfig& cfg) {
  cfg.validate();
  SynthDataset data;
  data.world = generate_world(cfg.world);
  for (std::size_t i = 0; i < cfg.conditions.size(); ++i) {
    const auto& c = cfg.conditions[i];
    data.traversals.push_back(generate_traversal(data.world, c, mix_seed(cfg.world.seed, 100 + i),
                                                 "seq" + std::to_string(i) + "_" + c.name));
  }
  data.splits = split_dataset(data.world, data.traversals, cfg.fractions);
  return data;
}

void write_pgm(const std::filesystem::path& path, const Tensor& image) {
  if (image.rank() != 3 || image.extent(0) != 1) {
    throw ShapeError("PGM export needs a [1,H,W] image, got " + shape_to_string(image.shape()));
  }
  const std::size_t h = image.extent(1), w = image.extent(2);
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  os << "P5\n" << w << ' ' << h << "\n255\n";
  std::string bytes(h * w, '\0');
  for (std::size_t i = 0; i < h * w; ++i) {
    bytes[i] = static_cast<char>(static_cast<unsigned char>(std::lround(clamp01(image[i]) * 255.0)));
  }
  os.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

Tensor read_pgm(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw InputError("cannot open image " + path.string());
  auto token = [&]() {
    std::string tok;
    char ch;
    while (is.get(ch)) {
      if (ch == '#') {
        std::string skip;
        std::getline(is, skip);
        continue;
      }
      if (std::isspace(static_cast<unsigned char>(ch))) {
        if (!tok.empty()) break;
        continue;
      }
      tok += ch;
    }
    return tok;
  };
  if (token() != "P5") throw FormatError(path.string() + ": not a binary PGM (P5)");
  std::size_t w = 0, h = 0, maxval = 0;
  try {
    w = std::stoul(token());
    h = std::stoul(token());
    maxval = std::stoul(token());
  } catch (const std::exception&) {
    throw FormatError(path.string() + ": malformed PGM header");
  }
  if (w == 0 || h == 0 || maxval != 255) {
    throw FormatError(path.string() + ": only 8-bit PGM images with positive size are supported");
  }
  std::string bytes(w * h, '\0');
  is.read(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (is.gcount() != static_cast<std::streamsize>(bytes.size())) {
    throw FormatError(path.string() + ": truncated pixel data");
  }
  Tensor img(Shape{1, h, w});
  for (std::size_t i = 0; i < w * h; ++i) {
    img[i] = static_cast<double>(static_cast<unsigned char>(bytes[i])) / 255.0;
  }
  return img;
}

void write_dataset(const std::filesystem::path& dir, const SynthDataset& data,
                   const std::string& header_comment) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  const WorldSpec& w = data.world.spec;
  std::ostringstream m;
  m << header_comment;
  m << "format = placefuse-dataset-1\n";
  m << "seed = " << w.seed << "\n";
  m << "n_places = " << w.n_places << "\n";
  m << "place_length = " << fmt(w.place_length) << "\n";
  m << "pose_spacing = " << fmt(w.pose_spacing) << "\n";
  m << "keyframe_stride = " << w.keyframe_stride << "\n";
  m << "points_per_place = " << w.points_per_place << "\n";
  m << "image_width = " << w.image_width << "\n";
  m << "image_height = " << w.image_height << "\n";
  m << "circumference = " << fmt(w.circumference()) << "\n";
  m << "split = " << fmt(data.splits.fractions[0]) << "," << fmt(data.splits.fractions[1]) << ","
    << fmt(data.splits.fractions[2]) << "\n";
  m << "split_boundaries = " << fmt(data.splits.boundaries[0]) << ","
    << fmt(data.splits.boundaries[1]) << "," << fmt(data.splits.boundaries[2]) << "\n";
  m << "split_trim = " << fmt(data.splits.trim) << "\n";
  std::string names;
  for (const auto& tr : data.traversals) names += (names.empty() ? "" : ",") + tr.name;
  m << "traversals = " << names << "\n";

  for (std::size_t t = 0; t < data.traversals.size(); ++t) {
    const Traversal& tr = data.traversals[t];
    const ConditionSpec& c = tr.condition;
    const std::string key = "traversal." + tr.name + ".";
    m << key << "condition = " << c.name << "\n";
    m << key << "frames = " << tr.poses.size() << "\n";
    m << key << "points = " << tr.cloud.size() << "\n";
    m << key << "appearance = gain " << fmt(c.gain) << " offset " << fmt(c.offset) << " gamma "
      << fmt(c.gamma) << " shadow " << fmt(c.shadow) << " noise " << fmt(c.pixel_noise)
      << " warp " << fmt(c.texture_warp) << "\n";
    m << key << "structure = jitter " << fmt(c.jitter) << " dropout " << fmt(c.dropout)
      << " clutter " << fmt(c.clutter) << "\n";

    const fs::path tdir = dir / tr.name;
    fs::create_directories(tdir / "images");
    write_trajectory_csv(tdir / "trajectory.csv", tr.poses);
    write_point_cloud_csv(tdir / "cloud.csv", tr.cloud);
    std::ofstream frames(tdir / "frames.csv", std::ios::trunc);
    if (!frames) throw std::runtime_error("cannot write " + (tdir / "frames.csv").string());
    frames << "frame_id,split\n";
    for (std::size_t f = 0; f < tr.poses.size(); ++f) {
      frames << tr.poses[f].frame_id << ',' << split_name(data.splits.assignment[t][f]) << '\n';
    }
    for (std::size_t f = 0; f < tr.images.size(); ++f) {
      char name[32];
      std::snprintf(name, sizeof name, "%06zu.pgm", static_cast<std::size_t>(tr.poses[f].frame_id));
      write_pgm(tdir / "images" / name, tr.images[f]);
    }
  }
  std::ofstream os(dir / "manifest.txt", std::ios::trunc);
  if (!os) throw std::runtime_error("cannot write " + (dir / "manifest.txt").string());
  os << m.str();
}

}  // namespace placefuse
