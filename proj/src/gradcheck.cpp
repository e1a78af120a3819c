#include "placefuse/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "placefuse/errors.hpp"

namespace placefuse {
namespace {

double reduce(const Tensor& out, const Tensor& probe) {
  double acc = 0.0;
  for (std::size_t i = 0; i < out.size(); ++i) acc += probe[i] * out[i];
  return acc;
}

}  // namespace

GradCheckReport finite_diff_check(const DifferentiableOp& op, const Tensor& input, double step,
                                  double tol, const std::optional<Tensor>& probe) {
  const Tensor out = op.forward(input);
  const Tensor weights = probe ? *probe : Tensor(out.shape(), 1.0);
  if (weights.shape() != out.shape()) throw ShapeError("finite_diff_check: probe shape mismatch");

  const Tensor analytic = op.backward(input, weights);
  if (analytic.shape() != input.shape()) {
    throw ShapeError("finite_diff_check: backward returned shape " +
                     shape_to_string(analytic.shape()) + " for input " +
                     shape_to_string(input.shape()));
  }

  GradCheckReport report;
  Tensor probe_input = input;
  for (std::size_t i = 0; i < input.size(); ++i) {
    const double original = probe_input[i];
    probe_input[i] = original + step;
    const double plus = reduce(op.forward(probe_input), weights);
    probe_input[i] = original - step;
    const double minus = reduce(op.forward(probe_input), weights);
    probe_input[i] = original;

    const double numeric = (plus - minus) / (2.0 * step);
    const double denom = std::max({std::abs(analytic[i]), std::abs(numeric), 1e-6});
    const double rel = std::abs(analytic[i] - numeric) / denom;
    if (rel > report.max_rel_error || !std::isfinite(rel)) {
      report.max_rel_error = rel;
      report.worst_index = i;
    }
  }
  report.pass = std::isfinite(report.max_rel_error) && report.max_rel_error < tol;
  return report;
}

}  // namespace placefuse
