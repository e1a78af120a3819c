#pragma once

#include <vector>

#include "placefuse/parameters.hpp"

namespace placefuse {

struct SgdConfig {
  double learning_rate = 0.01;
  double momentum = 0.9;
  double weight_decay = 0.0;
};

/// SGD with classical momentum:
///   v <- momentum * v + (g + weight_decay * p)
///   p <- p - learning_rate * v
/// Gradient buffers are zeroed after every step.
class SgdOptimizer {
 public:
  explicit SgdOptimizer(SgdConfig config);

  const SgdConfig& config() const { return config_; }

  /// Throws ContractError if a trainable parameter has no gradient buffer.
  void step(ParameterSet& params);

 private:
  SgdConfig config_;
  std::vector<std::vector<double>> velocity_;
};

}  // namespace placefuse
