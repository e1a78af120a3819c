#pragma once

#include <utility>

#include "placefuse/tensor.hpp"

namespace placefuse {

// Layer primitives. Every forward op has a matching backward op that takes
// the forward inputs and the gradient of the output and returns the
// gradients of the inputs. Convolutions are 3x3 (3x3x3), stride 1, zero
// padding 1, so the spatial extent is preserved.

struct ConvGrads {
  Tensor input;
  Tensor kernel;
  Tensor bias;
};

/// input [C_in,H,W], kernel [C_out,C_in,3,3], bias [C_out] -> [C_out,H,W]
Tensor conv2d(const Tensor& input, const Tensor& kernel, const Tensor& bias);
/// When `need_input_grad` is false the returned `input` gradient is empty.
ConvGrads conv2d_backward(const Tensor& input, const Tensor& kernel,
                          const Tensor& grad_output, bool need_input_grad = true);

/// input [C_in,D,H,W], kernel [C_out,C_in,3,3,3], bias [C_out] -> [C_out,D,H,W]
Tensor conv3d(const Tensor& input, const Tensor& kernel, const Tensor& bias);
ConvGrads conv3d_backward(const Tensor& input, const Tensor& kernel,
                          const Tensor& grad_output, bool need_input_grad = true);

/// Non-overlapping 2x2 max pooling, [C,H,W] -> [C,H/2,W/2]. Ties route the
/// gradient to the first maximum in row-major scan order.
Tensor maxpool2d(const Tensor& input);
Tensor maxpool2d_backward(const Tensor& input, const Tensor& grad_output);

/// Non-overlapping 2x2x2 mean pooling, [C,D,H,W] -> [C,D/2,H/2,W/2].
Tensor avgpool3d(const Tensor& input);
Tensor avgpool3d_backward(const Tensor& input, const Tensor& grad_output);

Tensor relu(const Tensor& input);
Tensor relu_backward(const Tensor& input, const Tensor& grad_output);

/// Per-channel mean over every trailing axis: [C, ...] -> [C].
Tensor global_avg_pool(const Tensor& input);
Tensor global_avg_pool_backward(const Tensor& input, const Tensor& grad_output);

struct LinearGrads {
  Tensor input;
  Tensor weight;
  Tensor bias;
};

/// weight [m,n] * input [n] + bias [m]
Tensor fully_connected(const Tensor& input, const Tensor& weight, const Tensor& bias);
LinearGrads fully_connected_backward(const Tensor& input, const Tensor& weight,
                                     const Tensor& grad_output);

double l1_distance(std::span<const double> a, std::span<const double> b);
double l1_distance(const Tensor& a, const Tensor& b);
/// Gradients of `grad_output * l1(a, b)` with respect to a and b.
std::pair<Tensor, Tensor> l1_distance_backward(const Tensor& a, const Tensor& b,
                                               double grad_output);

}  // namespace placefuse
