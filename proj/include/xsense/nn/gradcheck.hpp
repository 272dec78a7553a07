#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "xsense/nn/tensor.hpp"

namespace xsense::nn {

// Computes the scalar loss at the current parameter values. When the flag is
// true the function must also accumulate dL/dθ into each parameter's grad
// (grads are zeroed beforehand by the checker).
using LossFunction = std::function<double(bool accumulate_grad)>;

struct GradCheckOptions {
  double epsilon = 1e-4;
  double tolerance = 1e-3;
  // Relative errors use max(|analytic|, |numeric|, floor) as denominator.
  double absolute_floor = 1e-5;
  std::size_t max_coords_per_block = 32;
  std::uint64_t seed = 0;
};

struct GradCheckBlock {
  std::string name;
  std::size_t coords_checked = 0;
  double max_relative_error = 0.0;
};

struct GradCheckReport {
  std::vector<GradCheckBlock> blocks;

  double max_error() const;
  bool passed(double tolerance) const { return max_error() < tolerance; }
};

double relative_error(double analytic, double numeric, double floor);

// Central differences on a deterministic subsample of each parameter block.
// Throws NumericalError on a non-finite loss.
GradCheckReport grad_check(const ParameterList& params, const LossFunction& loss,
                           const GradCheckOptions& options = {});

}  // namespace xsense::nn
