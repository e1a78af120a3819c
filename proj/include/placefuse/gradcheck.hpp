#pragma once

#include <functional>
#include <optional>

#include "placefuse/tensor.hpp"

namespace placefuse {

/// A single-input differentiable function. `backward(input, grad_output)`
/// returns d(sum(grad_output * forward(input)))/d(input).
struct DifferentiableOp {
  std::function<Tensor(const Tensor&)> forward;
  std::function<Tensor(const Tensor& input, const Tensor& grad_output)> backward;
};

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::size_t worst_index = 0;
  bool pass = false;
};

/// Compares the analytic gradient of the scalar reduction sum(probe * op(x))
/// against central differences. The probe defaults to all ones, i.e. the
/// output is simply summed. Relative error per element is
/// |analytic - numeric| / max(|analytic|, |numeric|, 1e-6).
GradCheckReport finite_diff_check(const DifferentiableOp& op, const Tensor& input, double step,
                                  double tol, const std::optional<Tensor>& probe = std::nullopt);

}  // namespace placefuse
