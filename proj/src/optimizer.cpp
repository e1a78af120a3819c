#include "placefuse/optimizer.hpp"

#include "placefuse/errors.hpp"

namespace placefuse {

SgdOptimizer::SgdOptimizer(SgdConfig config) : config_(config) {
  if (!(config_.learning_rate >= 0.0)) throw ConfigError("learning rate must be non-negative");
  if (!(config_.momentum >= 0.0 && config_.momentum < 1.0)) {
    throw ConfigError("momentum must lie in [0, 1)");
  }
  if (!(config_.weight_decay >= 0.0)) throw ConfigError("weight decay must be non-negative");
}

void SgdOptimizer::step(ParameterSet& params) {
  for (const auto& p : params) {
    if (p.trainable && !p.tensor.has_grad()) {
      throw ContractError("trainable parameter '" + p.name + "' has no gradient");
    }
  }
  if (velocity_.size() != params.size()) {
    velocity_.assign(params.size(), {});
    for (std::size_t i = 0; i < params.size(); ++i) velocity_[i].assign(params[i].tensor.size(), 0.0);
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    Parameter& p = params[i];
    if (!p.trainable) {
      p.tensor.zero_grad();
      continue;
    }
    auto values = p.tensor.data();
    auto grad = p.tensor.grad();
    auto& vel = velocity_[i];
    for (std::size_t j = 0; j < values.size(); ++j) {
      const double g = grad[j] + config_.weight_decay * values[j];
      vel[j] = config_.momentum * vel[j] + g;
      values[j] -= config_.learning_rate * vel[j];
    }
    p.tensor.zero_grad();
  }
}

}  // namespace placefuse
