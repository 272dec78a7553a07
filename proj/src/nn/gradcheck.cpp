#include "xsense/nn/gradcheck.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "xsense/error.hpp"

namespace xsense::nn {

namespace {

double checked(double v, const char* what) {
  if (!std::isfinite(v)) throw NumericalError(fmt::format("non-finite loss during gradient check ({})", what));
  return v;
}

std::vector<std::size_t> sample_coords(std::size_t size, std::size_t limit, Rng& rng) {
  std::vector<std::size_t> idx(size);
  std::iota(idx.begin(), idx.end(), 0);
  if (size <= limit) return idx;
  rng.shuffle(std::span<std::size_t>(idx));
  idx.resize(limit);
  std::sort(idx.begin(), idx.end());
  return idx;
}

}  // namespace

double GradCheckReport::max_error() const {
  double m = 0.0;
  for (const auto& b : blocks) m = std::max(m, b.max_relative_error);
  return m;
}

double relative_error(double analytic, double numeric, double floor) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), floor});
  return std::abs(analytic - numeric) / denom;
}

GradCheckReport grad_check(const ParameterList& params, const LossFunction& loss,
                           const GradCheckOptions& options) {
  GradCheckReport report;
  if (params.empty()) return report;

  zero_grads(params);
  checked(loss(true), "analytic pass");
  std::vector<Tensor2> analytic;
  analytic.reserve(params.size());
  for (const Parameter* p : params) analytic.push_back(p->grad);

  Rng rng(options.seed);
  for (std::size_t k = 0; k < params.size(); ++k) {
    Parameter& p = *params[k];
    GradCheckBlock block{p.name, 0, 0.0};
    for (std::size_t i : sample_coords(p.value.size(), options.max_coords_per_block, rng)) {
      const double saved = p.value[i];
      p.value[i] = saved + options.epsilon;
      const double plus = checked(loss(false), "forward perturbation");
      p.value[i] = saved - options.epsilon;
      const double minus = checked(loss(false), "backward perturbation");
      p.value[i] = saved;
      const double numeric = (plus - minus) / (2.0 * options.epsilon);
      block.max_relative_error =
          std::max(block.max_relative_error, relative_error(analytic[k][i], numeric, options.absolute_floor));
      ++block.coords_checked;
    }
    report.blocks.push_back(std::move(block));
  }
  return report;
}

}  // namespace xsense::nn
