#include "placefuse/sequential.hpp"

#include "placefuse/errors.hpp"
#include "placefuse/ops.hpp"

namespace placefuse {
namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

}  // namespace

Tensor Sequential::forward(const ParameterSet& params, Tensor input, Tape* tape) const {
  if (tape) {
    tape->inputs.clear();
    tape->inputs.reserve(stages_.size());
  }
  Tensor x = std::move(input);
  for (const Stage& s : stages_) {
    Tensor y = std::visit(
        Overloaded{
            [&](const stage::Conv2d& c) {
              return conv2d(x, params[c.weight].tensor, params[c.bias].tensor);
            },
            [&](const stage::Conv3d& c) {
              return conv3d(x, params[c.weight].tensor, params[c.bias].tensor);
            },
            [&](const stage::Linear& l) {
              return fully_connected(x, params[l.weight].tensor, params[l.bias].tensor);
            },
            [&](const stage::Relu&) { return relu(x); },
            [&](const stage::MaxPool2d&) { return maxpool2d(x); },
            [&](const stage::AvgPool3d&) { return avgpool3d(x); },
            [&](const stage::GlobalAvgPool&) { return global_avg_pool(x); },
        },
        s);
    if (tape) tape->inputs.push_back(std::move(x));
    x = std::move(y);
  }
  return x;
}

Tensor Sequential::backward(const ParameterSet& params, const Tape& tape, Tensor grad_output,
                            GradientSet& grads, bool need_input_grad) const {
  if (tape.inputs.size() != stages_.size()) {
    throw ContractError("backward called without a matching recorded forward pass");
  }
  Tensor g = std::move(grad_output);
  for (std::size_t i = stages_.size(); i-- > 0;) {
    const Tensor& x = tape.inputs[i];
    const bool want_input = need_input_grad || i > 0;
    g = std::visit(
        Overloaded{
            [&](const stage::Conv2d& c) {
              ConvGrads cg = conv2d_backward(x, params[c.weight].tensor, g, want_input);
              grads.accumulate(c.weight, cg.kernel);
              grads.accumulate(c.bias, cg.bias);
              return std::move(cg.input);
            },
            [&](const stage::Conv3d& c) {
              ConvGrads cg = conv3d_backward(x, params[c.weight].tensor, g, want_input);
              grads.accumulate(c.weight, cg.kernel);
              grads.accumulate(c.bias, cg.bias);
              return std::move(cg.input);
            },
            [&](const stage::Linear& l) {
              LinearGrads lg = fully_connected_backward(x, params[l.weight].tensor, g);
              grads.accumulate(l.weight, lg.weight);
              grads.accumulate(l.bias, lg.bias);
              return std::move(lg.input);
            },
            [&](const stage::Relu&) { return relu_backward(x, g); },
            [&](const stage::MaxPool2d&) { return maxpool2d_backward(x, g); },
            [&](const stage::AvgPool3d&) { return avgpool3d_backward(x, g); },
            [&](const stage::GlobalAvgPool&) { return global_avg_pool_backward(x, g); },
        },
        stages_[i]);
  }
  return g;
}

}  // namespace placefuse
