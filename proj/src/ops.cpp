#include "placefuse/ops.hpp"

#include <algorithm>
#include <cmath>

#include "placefuse/errors.hpp"

namespace placefuse {
namespace {

// Volume view used by both convolution flavours; 2D maps are treated as
// volumes of depth 1 with a kernel of depth 1.
struct VolumeDims {
  std::size_t channels;
  std::size_t depth;
  std::size_t height;
  std::size_t width;

  std::size_t plane() const { return depth * height * width; }
};

struct Span1d {
  std::ptrdiff_t begin;
  std::ptrdiff_t end;
};

// Output range along one axis for which input index (o + offset) is valid.
Span1d valid_range(std::size_t extent, std::ptrdiff_t offset) {
  const auto n = static_cast<std::ptrdiff_t>(extent);
  return {std::max<std::ptrdiff_t>(0, -offset), std::min<std::ptrdiff_t>(n, n - offset)};
}

VolumeDims conv_dims(const Tensor& input, const Tensor& kernel, const Tensor* bias,
                     bool volumetric, std::size_t& out_channels) {
  const std::size_t spatial = volumetric ? 3 : 2;
  const char* name = volumetric ? "conv3d" : "conv2d";
  if (input.rank() != spatial + 1) {
    throw ShapeError(std::string(name) + ": input must have rank " +
                     std::to_string(spatial + 1) + ", got " + shape_to_string(input.shape()));
  }
  if (kernel.rank() != spatial + 2) {
    throw ShapeError(std::string(name) + ": kernel must have rank " +
                     std::to_string(spatial + 2));
  }
  for (std::size_t a = 2; a < kernel.rank(); ++a) {
    if (kernel.extent(a) != 3) throw ShapeError(std::string(name) + ": kernel must be 3-wide");
  }
  if (kernel.extent(1) != input.extent(0)) {
    throw ShapeError(std::string(name) + ": kernel expects " + std::to_string(kernel.extent(1)) +
                     " input channels, input has " + std::to_string(input.extent(0)));
  }
  out_channels = kernel.extent(0);
  if (bias && (bias->rank() != 1 || bias->extent(0) != out_channels)) {
    throw ShapeError(std::string(name) + ": bias must have shape [" +
                     std::to_string(out_channels) + "]");
  }
  if (volumetric) {
    return {input.extent(0), input.extent(1), input.extent(2), input.extent(3)};
  }
  return {input.extent(0), 1, input.extent(1), input.extent(2)};
}

Shape output_shape(const VolumeDims& d, std::size_t out_channels, bool volumetric) {
  if (volumetric) return {out_channels, d.depth, d.height, d.width};
  return {out_channels, d.height, d.width};
}

// Calls fn(kernel_index, in_offset, out_offset, count) for every contiguous
// row segment touched by kernel tap (kz,ky,kx) of channel pair (co,ci).
template <typename Fn>
void for_each_tap(const VolumeDims& d, std::size_t out_channels, std::size_t kernel_depth,
                  Fn&& fn) {
  const std::ptrdiff_t half_depth = static_cast<std::ptrdiff_t>(kernel_depth / 2);
  const std::size_t plane = d.plane();
  for (std::size_t co = 0; co < out_channels; ++co) {
    for (std::size_t ci = 0; ci < d.channels; ++ci) {
      for (std::size_t kz = 0; kz < kernel_depth; ++kz) {
        const std::ptrdiff_t dz = static_cast<std::ptrdiff_t>(kz) - half_depth;
        const Span1d zr = valid_range(d.depth, dz);
        for (std::size_t ky = 0; ky < 3; ++ky) {
          const std::ptrdiff_t dy = static_cast<std::ptrdiff_t>(ky) - 1;
          const Span1d yr = valid_range(d.height, dy);
          for (std::size_t kx = 0; kx < 3; ++kx) {
            const std::ptrdiff_t dx = static_cast<std::ptrdiff_t>(kx) - 1;
            const Span1d xr = valid_range(d.width, dx);
            const std::size_t k_index = ((co * d.channels + ci) * kernel_depth + kz) * 9 + ky * 3 + kx;
            const auto count = static_cast<std::size_t>(xr.end - xr.begin);
            for (std::ptrdiff_t z = zr.begin; z < zr.end; ++z) {
              for (std::ptrdiff_t y = yr.begin; y < yr.end; ++y) {
                const std::size_t out_off =
                    co * plane + (static_cast<std::size_t>(z) * d.height + static_cast<std::size_t>(y)) * d.width +
                    static_cast<std::size_t>(xr.begin);
                const std::size_t in_off =
                    ci * plane +
                    (static_cast<std::size_t>(z + dz) * d.height + static_cast<std::size_t>(y + dy)) * d.width +
                    static_cast<std::size_t>(xr.begin + dx);
                fn(k_index, in_off, out_off, count);
              }
            }
          }
        }
      }
    }
  }
}

Tensor conv_forward(const Tensor& input, const Tensor& kernel, const Tensor& bias,
                    bool volumetric) {
  std::size_t out_channels = 0;
  const VolumeDims d = conv_dims(input, kernel, &bias, volumetric, out_channels);
  Tensor out(output_shape(d, out_channels, volumetric));
  const std::size_t plane = d.plane();
  double* o = out.data().data();
  for (std::size_t co = 0; co < out_channels; ++co) {
    std::fill(o + co * plane, o + (co + 1) * plane, bias[co]);
  }
  const double* in = input.data().data();
  const double* k = kernel.data().data();
  for_each_tap(d, out_channels, volumetric ? 3 : 1,
               [&](std::size_t ki, std::size_t in_off, std::size_t out_off, std::size_t n) {
                 const double w = k[ki];
                 if (w == 0.0) return;
                 const double* src = in + in_off;
                 double* dst = o + out_off;
                 for (std::size_t x = 0; x < n; ++x) dst[x] += w * src[x];
               });
  return out;
}

ConvGrads conv_backward(const Tensor& input, const Tensor& kernel, const Tensor& grad_output,
                        bool need_input_grad, bool volumetric) {
  std::size_t out_channels = 0;
  const VolumeDims d = conv_dims(input, kernel, nullptr, volumetric, out_channels);
  if (grad_output.shape() != output_shape(d, out_channels, volumetric)) {
    throw ShapeError("conv backward: gradient shape mismatch");
  }
  ConvGrads grads{need_input_grad ? Tensor(input.shape()) : Tensor(), Tensor(kernel.shape()),
                  Tensor(Shape{out_channels})};
  const std::size_t plane = d.plane();
  const double* g = grad_output.data().data();
  for (std::size_t co = 0; co < out_channels; ++co) {
    double acc = 0.0;
    for (std::size_t i = 0; i < plane; ++i) acc += g[co * plane + i];
    grads.bias[co] = acc;
  }
  const double* in = input.data().data();
  const double* k = kernel.data().data();
  double* gk = grads.kernel.data().data();
  double* gi = need_input_grad ? grads.input.data().data() : nullptr;
  for_each_tap(d, out_channels, volumetric ? 3 : 1,
               [&](std::size_t ki, std::size_t in_off, std::size_t out_off, std::size_t n) {
                 const double* src = in + in_off;
                 const double* go = g + out_off;
                 double acc = 0.0;
                 for (std::size_t x = 0; x < n; ++x) acc += go[x] * src[x];
                 gk[ki] += acc;
                 if (gi) {
                   const double w = k[ki];
                   double* dst = gi + in_off;
                   for (std::size_t x = 0; x < n; ++x) dst[x] += w * go[x];
                 }
               });
  return grads;
}

void require_even(const Tensor& input, std::size_t first_axis, const char* name) {
  for (std::size_t a = first_axis; a < input.rank(); ++a) {
    if (input.extent(a) % 2 != 0) {
      throw ShapeError(std::string(name) + ": spatial extent " + std::to_string(input.extent(a)) +
                       " on axis " + std::to_string(a) + " is odd");
    }
  }
}

}  // namespace

Tensor conv2d(const Tensor& input, const Tensor& kernel, const Tensor& bias) {
  return conv_forward(input, kernel, bias, false);
}

ConvGrads conv2d_backward(const Tensor& input, const Tensor& kernel, const Tensor& grad_output,
                          bool need_input_grad) {
  return conv_backward(input, kernel, grad_output, need_input_grad, false);
}

Tensor conv3d(const Tensor& input, const Tensor& kernel, const Tensor& bias) {
  return conv_forward(input, kernel, bias, true);
}

ConvGrads conv3d_backward(const Tensor& input, const Tensor& kernel, const Tensor& grad_output,
                          bool need_input_grad) {
  return conv_backward(input, kernel, grad_output, need_input_grad, true);
}

namespace {

// Index of the first maximum of each 2x2 window.
template <typename Fn>
void for_each_max_window(const Tensor& input, Fn&& fn) {
  const std::size_t c = input.extent(0), h = input.extent(1), w = input.extent(2);
  const std::size_t oh = h / 2, ow = w / 2;
  const double* in = input.data().data();
  for (std::size_t ch = 0; ch < c; ++ch) {
    for (std::size_t y = 0; y < oh; ++y) {
      for (std::size_t x = 0; x < ow; ++x) {
        std::size_t best = (ch * h + 2 * y) * w + 2 * x;
        for (std::size_t dy = 0; dy < 2; ++dy) {
          for (std::size_t dx = 0; dx < 2; ++dx) {
            const std::size_t idx = (ch * h + 2 * y + dy) * w + 2 * x + dx;
            if (in[idx] > in[best]) best = idx;
          }
        }
        fn((ch * oh + y) * ow + x, best);
      }
    }
  }
}

void check_maxpool_input(const Tensor& input) {
  if (input.rank() != 3) throw ShapeError("maxpool2d: input must be [C,H,W]");
  require_even(input, 1, "maxpool2d");
}

void check_avgpool_input(const Tensor& input) {
  if (input.rank() != 4) throw ShapeError("avgpool3d: input must be [C,D,H,W]");
  require_even(input, 1, "avgpool3d");
}

}  // namespace

Tensor maxpool2d(const Tensor& input) {
  check_maxpool_input(input);
  Tensor out({input.extent(0), input.extent(1) / 2, input.extent(2) / 2});
  for_each_max_window(input, [&](std::size_t o, std::size_t i) { out[o] = input[i]; });
  return out;
}

Tensor maxpool2d_backward(const Tensor& input, const Tensor& grad_output) {
  check_maxpool_input(input);
  if (grad_output.shape() != Shape{input.extent(0), input.extent(1) / 2, input.extent(2) / 2}) {
    throw ShapeError("maxpool2d backward: gradient shape mismatch");
  }
  Tensor grad(input.shape());
  for_each_max_window(input, [&](std::size_t o, std::size_t i) { grad[i] += grad_output[o]; });
  return grad;
}

namespace {

template <typename Fn>
void for_each_avg_cell(const Tensor& input, Fn&& fn) {
  const std::size_t c = input.extent(0), d = input.extent(1), h = input.extent(2),
                    w = input.extent(3);
  const std::size_t od = d / 2, oh = h / 2, ow = w / 2;
  std::size_t o = 0;
  for (std::size_t ch = 0; ch < c; ++ch) {
    for (std::size_t z = 0; z < od; ++z) {
      for (std::size_t y = 0; y < oh; ++y) {
        for (std::size_t x = 0; x < ow; ++x, ++o) {
          for (std::size_t dz = 0; dz < 2; ++dz) {
            for (std::size_t dy = 0; dy < 2; ++dy) {
              const std::size_t row = ((ch * d + 2 * z + dz) * h + 2 * y + dy) * w + 2 * x;
              fn(o, row);
              fn(o, row + 1);
            }
          }
        }
      }
    }
  }
}

}  // namespace

Tensor avgpool3d(const Tensor& input) {
  check_avgpool_input(input);
  Tensor out({input.extent(0), input.extent(1) / 2, input.extent(2) / 2, input.extent(3) / 2});
  for_each_avg_cell(input, [&](std::size_t o, std::size_t i) { out[o] += input[i]; });
  for (double& v : out.data()) v *= 0.125;
  return out;
}

Tensor avgpool3d_backward(const Tensor& input, const Tensor& grad_output) {
  check_avgpool_input(input);
  if (grad_output.shape() !=
      Shape{input.extent(0), input.extent(1) / 2, input.extent(2) / 2, input.extent(3) / 2}) {
    throw ShapeError("avgpool3d backward: gradient shape mismatch");
  }
  Tensor grad(input.shape());
  for_each_avg_cell(input, [&](std::size_t o, std::size_t i) { grad[i] = 0.125 * grad_output[o]; });
  return grad;
}

Tensor relu(const Tensor& input) {
  Tensor out(input.shape());
  for (std::size_t i = 0; i < input.size(); ++i) out[i] = input[i] > 0.0 ? input[i] : 0.0;
  return out;
}

Tensor relu_backward(const Tensor& input, const Tensor& grad_output) {
  if (grad_output.shape() != input.shape()) throw ShapeError("relu backward: shape mismatch");
  Tensor grad(input.shape());
  for (std::size_t i = 0; i < input.size(); ++i) grad[i] = input[i] > 0.0 ? grad_output[i] : 0.0;
  return grad;
}

Tensor global_avg_pool(const Tensor& input) {
  if (input.rank() < 2) throw ShapeError("global_avg_pool: input needs at least one spatial axis");
  const std::size_t c = input.extent(0);
  const std::size_t spatial = input.size() / c;
  Tensor out(Shape{c});
  for (std::size_t ch = 0; ch < c; ++ch) {
    double acc = 0.0;
    for (std::size_t i = 0; i < spatial; ++i) acc += input[ch * spatial + i];
    out[ch] = acc / static_cast<double>(spatial);
  }
  return out;
}

Tensor global_avg_pool_backward(const Tensor& input, const Tensor& grad_output) {
  if (input.rank() < 2) throw ShapeError("global_avg_pool: input needs at least one spatial axis");
  const std::size_t c = input.extent(0);
  if (grad_output.shape() != Shape{c}) throw ShapeError("global_avg_pool backward: shape mismatch");
  const std::size_t spatial = input.size() / c;
  Tensor grad(input.shape());
  for (std::size_t ch = 0; ch < c; ++ch) {
    const double g = grad_output[ch] / static_cast<double>(spatial);
    for (std::size_t i = 0; i < spatial; ++i) grad[ch * spatial + i] = g;
  }
  return grad;
}

namespace {
void check_linear(const Tensor& input, const Tensor& weight) {
  if (input.rank() != 1 || weight.rank() != 2) {
    throw ShapeError("fully_connected: expects input [n] and weight [m,n]");
  }
  if (weight.extent(1) != input.extent(0)) {
    throw ShapeError("fully_connected: weight expects " + std::to_string(weight.extent(1)) +
                     " inputs, got " + std::to_string(input.extent(0)));
  }
}
}  // namespace

Tensor fully_connected(const Tensor& input, const Tensor& weight, const Tensor& bias) {
  check_linear(input, weight);
  const std::size_t m = weight.extent(0), n = weight.extent(1);
  if (bias.shape() != Shape{m}) throw ShapeError("fully_connected: bias must be [m]");
  Tensor out(Shape{m});
  for (std::size_t r = 0; r < m; ++r) {
    double acc = 0.0;
    for (std::size_t c = 0; c < n; ++c) acc += weight[r * n + c] * input[c];
    out[r] = acc + bias[r];
  }
  return out;
}

LinearGrads fully_connected_backward(const Tensor& input, const Tensor& weight,
                                     const Tensor& grad_output) {
  check_linear(input, weight);
  const std::size_t m = weight.extent(0), n = weight.extent(1);
  if (grad_output.shape() != Shape{m}) throw ShapeError("fully_connected backward: shape mismatch");
  LinearGrads grads{Tensor(input.shape()), Tensor(weight.shape()), grad_output};
  for (std::size_t r = 0; r < m; ++r) {
    const double g = grad_output[r];
    for (std::size_t c = 0; c < n; ++c) {
      grads.weight[r * n + c] = g * input[c];
      grads.input[c] += weight[r * n + c] * g;
    }
  }
  return grads;
}

double l1_distance(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw ShapeError("l1_distance: lengths differ (" + std::to_string(a.size()) + " vs " +
                     std::to_string(b.size()) + ")");
  }
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += std::abs(a[i] - b[i]);
  return acc;
}

double l1_distance(const Tensor& a, const Tensor& b) { return l1_distance(a.data(), b.data()); }

std::pair<Tensor, Tensor> l1_distance_backward(const Tensor& a, const Tensor& b,
                                               double grad_output) {
  if (a.size() != b.size()) throw ShapeError("l1_distance backward: lengths differ");
  Tensor ga(a.shape()), gb(b.shape());
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double diff = a[i] - b[i];
    const double s = diff > 0.0 ? 1.0 : (diff < 0.0 ? -1.0 : 0.0);
    ga[i] = s * grad_output;
    gb[i] = -s * grad_output;
  }
  return {std::move(ga), std::move(gb)};
}

}  // namespace placefuse
