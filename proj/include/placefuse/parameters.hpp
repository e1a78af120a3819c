#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "placefuse/tensor.hpp"

namespace placefuse {

struct Parameter {
  std::string name;
  Tensor tensor;
  bool trainable = true;
};

/// Ordered, name-unique collection of model parameters.
class ParameterSet {
 public:
  /// Returns the index of the new parameter; throws ConfigError on a
  /// duplicate name.
  std::size_t add(std::string name, Tensor tensor, bool trainable = true);

  std::size_t size() const { return params_.size(); }
  Parameter& operator[](std::size_t i) { return params_[i]; }
  const Parameter& operator[](std::size_t i) const { return params_[i]; }
  std::optional<std::size_t> find(std::string_view name) const;
  const Parameter& at(std::string_view name) const;
  Parameter& at(std::string_view name);

  auto begin() { return params_.begin(); }
  auto end() { return params_.end(); }
  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }

  void zero_grads();
  std::size_t scalar_count() const;

  /// Copies values from `source` by name; every parameter must be present
  /// with an identical shape.
  void assign_values(const ParameterSet& source);
  bool values_equal(const ParameterSet& other) const;

 private:
  std::vector<Parameter> params_;
};

/// Gradient accumulators detached from the parameters, one tensor per
/// parameter, so concurrent backward passes never share buffers.
class GradientSet {
 public:
  GradientSet() = default;
  explicit GradientSet(const ParameterSet& params);

  Tensor& operator[](std::size_t i) { return grads_[i]; }
  const Tensor& operator[](std::size_t i) const { return grads_[i]; }
  std::size_t size() const { return grads_.size(); }

  void accumulate(std::size_t index, const Tensor& grad);
  void add(const GradientSet& other);
  void scale(double factor);
  /// Adds these gradients into the parameters' own gradient buffers.
  void write_to(ParameterSet& params) const;

 private:
  std::vector<Tensor> grads_;
};

// CKPT1 checkpoint format.
void save_checkpoint(const std::filesystem::path& path, const ParameterSet& params);
ParameterSet load_checkpoint(const std::filesystem::path& path);

}  // namespace placefuse
