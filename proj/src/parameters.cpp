#include "placefuse/parameters.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>
#include <limits>

#include "placefuse/binary_io.hpp"
#include "placefuse/errors.hpp"

namespace placefuse {

std::size_t ParameterSet::add(std::string name, Tensor tensor, bool trainable) {
  if (find(name)) throw ConfigError("duplicate parameter name '" + name + "'");
  params_.push_back({std::move(name), std::move(tensor), trainable});
  return params_.size() - 1;
}

std::optional<std::size_t> ParameterSet::find(std::string_view name) const {
  for (std::size_t i = 0; i < params_.size(); ++i) {
    if (params_[i].name == name) return i;
  }
  return std::nullopt;
}

const Parameter& ParameterSet::at(std::string_view name) const {
  const auto idx = find(name);
  if (!idx) throw InputError("no parameter named '" + std::string(name) + "'");
  return params_[*idx];
}

Parameter& ParameterSet::at(std::string_view name) {
  return const_cast<Parameter&>(std::as_const(*this).at(name));
}

void ParameterSet::zero_grads() {
  for (auto& p : params_) p.tensor.zero_grad();
}

std::size_t ParameterSet::scalar_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.tensor.size();
  return n;
}

void ParameterSet::assign_values(const ParameterSet& source) {
  if (source.size() != params_.size()) {
    throw InputError("parameter count mismatch: model has " + std::to_string(params_.size()) +
                     ", source has " + std::to_string(source.size()));
  }
  for (auto& p : params_) {
    const Parameter& src = source.at(p.name);
    if (src.tensor.shape() != p.tensor.shape()) {
      throw ShapeError("parameter '" + p.name + "' has shape " +
                       shape_to_string(p.tensor.shape()) + ", source has " +
                       shape_to_string(src.tensor.shape()));
    }
    std::copy(src.tensor.data().begin(), src.tensor.data().end(), p.tensor.data().begin());
  }
}

bool ParameterSet::values_equal(const ParameterSet& other) const {
  if (other.size() != size()) return false;
  for (std::size_t i = 0; i < size(); ++i) {
    const auto& a = params_[i];
    const auto& b = other[i];
    if (a.name != b.name || a.tensor.shape() != b.tensor.shape()) return false;
    if (std::memcmp(a.tensor.data().data(), b.tensor.data().data(),
                    a.tensor.size() * sizeof(double)) != 0) {
      return false;
    }
  }
  return true;
}

GradientSet::GradientSet(const ParameterSet& params) {
  grads_.reserve(params.size());
  for (const auto& p : params) grads_.emplace_back(p.tensor.shape());
}

void GradientSet::accumulate(std::size_t index, const Tensor& grad) {
  Tensor& dst = grads_.at(index);
  if (dst.size() != grad.size()) throw ShapeError("gradient size mismatch");
  for (std::size_t i = 0; i < grad.size(); ++i) dst[i] += grad[i];
}

void GradientSet::add(const GradientSet& other) {
  if (other.size() != size()) throw ShapeError("gradient set size mismatch");
  for (std::size_t i = 0; i < grads_.size(); ++i) accumulate(i, other[i]);
}

void GradientSet::scale(double factor) {
  for (auto& g : grads_) {
    for (double& v : g.data()) v *= factor;
  }
}

void GradientSet::write_to(ParameterSet& params) const {
  if (params.size() != grads_.size()) throw ShapeError("gradient set size mismatch");
  for (std::size_t i = 0; i < grads_.size(); ++i) {
    Tensor& t = params[i].tensor;
    t.ensure_grad();
    auto g = t.grad();
    for (std::size_t j = 0; j < g.size(); ++j) g[j] += grads_[i][j];
  }
}

void save_checkpoint(const std::filesystem::path& path, const ParameterSet& params) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("cannot open checkpoint for writing: " + path.string());
  binio::write_bytes(os, "CKPT1");
  binio::write<std::uint32_t>(os, static_cast<std::uint32_t>(params.size()));
  for (const auto& p : params) {
    if (p.name.size() > std::numeric_limits<std::uint16_t>::max()) {
      throw FormatError("parameter name too long: " + p.name);
    }
    binio::write<std::uint16_t>(os, static_cast<std::uint16_t>(p.name.size()));
    binio::write_bytes(os, p.name);
    binio::write<std::uint8_t>(os, static_cast<std::uint8_t>(p.tensor.rank()));
    for (std::size_t e : p.tensor.shape()) binio::write<std::uint32_t>(os, static_cast<std::uint32_t>(e));
    for (double v : p.tensor.data()) binio::write<double>(os, v);
  }
  if (!os) throw std::runtime_error("failed writing checkpoint: " + path.string());
}

ParameterSet load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw InputError("cannot open checkpoint: " + path.string());
  binio::expect_magic(is, "CKPT1");
  const auto count = binio::read<std::uint32_t>(is, "parameter count");
  ParameterSet params;
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto name_len = binio::read<std::uint16_t>(is, "name length");
    std::string name = binio::read_bytes(is, name_len, "name");
    const auto rank = binio::read<std::uint8_t>(is, "rank");
    Shape shape(rank);
    for (auto& e : shape) e = binio::read<std::uint32_t>(is, "extent");
    std::vector<double> values(shape_volume(shape));
    for (double& v : values) v = binio::read<double>(is, "value");
    params.add(std::move(name), Tensor(std::move(shape), std::move(values)));
  }
  return params;
}

}  // namespace placefuse
