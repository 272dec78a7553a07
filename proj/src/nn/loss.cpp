#include "xsense/nn/loss.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>

#include "xsense/error.hpp"

namespace xsense::nn {

Vec softmax(std::span<const double> logits) {
  if (logits.empty()) throw DataError("softmax of an empty vector");
  const double m = *std::max_element(logits.begin(), logits.end());
  Vec p(logits.size());
  double z = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    p[i] = std::exp(logits[i] - m);
    z += p[i];
  }
  for (double& v : p) v /= z;
  return p;
}

LossGrad softmax_xent(std::span<const double> logits, std::size_t target) {
  if (target >= logits.size()) {
    throw DataError(fmt::format("target {} out of range for {} classes", target, logits.size()));
  }
  const double m = *std::max_element(logits.begin(), logits.end());
  double z = 0.0;
  for (double l : logits) z += std::exp(l - m);
  const double log_z = m + std::log(z);
  LossGrad out{log_z - logits[target], Vec(logits.size())};
  for (std::size_t i = 0; i < logits.size(); ++i) out.grad[i] = std::exp(logits[i] - log_z);
  out.grad[target] -= 1.0;
  return out;
}

double softplus(double x) {
  if (x > 0) return x + std::log1p(std::exp(-x));
  return std::log1p(std::exp(x));
}

}  // namespace xsense::nn
