#pragma once

#include <variant>
#include <vector>

#include "placefuse/parameters.hpp"

namespace placefuse {

namespace stage {
struct Conv2d {
  std::size_t weight;
  std::size_t bias;
};
struct Conv3d {
  std::size_t weight;
  std::size_t bias;
};
struct Linear {
  std::size_t weight;
  std::size_t bias;
};
struct Relu {};
struct MaxPool2d {};
struct AvgPool3d {};
struct GlobalAvgPool {};
}  // namespace stage

using Stage = std::variant<stage::Conv2d, stage::Conv3d, stage::Linear, stage::Relu,
                           stage::MaxPool2d, stage::AvgPool3d, stage::GlobalAvgPool>;

/// Inputs seen by each stage during a recorded forward pass.
struct Tape {
  std::vector<Tensor> inputs;
};

/// A feed-forward chain of stages whose weights live in a ParameterSet
/// (referenced by index). The network itself holds no numeric state, so one
/// instance can serve any number of concurrent forward passes.
class Sequential {
 public:
  void append(Stage s) { stages_.push_back(s); }
  const std::vector<Stage>& stages() const { return stages_; }

  /// Runs the chain. When `tape` is non-null the per-stage inputs are kept
  /// for a later backward pass.
  Tensor forward(const ParameterSet& params, Tensor input, Tape* tape = nullptr) const;

  /// Accumulates parameter gradients into `grads` and returns the gradient
  /// with respect to the network input (empty if `need_input_grad` is false).
  Tensor backward(const ParameterSet& params, const Tape& tape, Tensor grad_output,
                  GradientSet& grads, bool need_input_grad = false) const;

 private:
  std::vector<Stage> stages_;
};

}  // namespace placefuse
