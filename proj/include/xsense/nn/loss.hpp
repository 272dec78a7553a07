#pragma once

#include <span>

#include "xsense/nn/tensor.hpp"

namespace xsense::nn {

struct LossGrad {
  double loss = 0.0;
  Vec grad;
};

// Max-subtracted softmax.
Vec softmax(std::span<const double> logits);

// loss = -log softmax(logits)[target]; grad = softmax - onehot(target).
LossGrad softmax_xent(std::span<const double> logits, std::size_t target);

// log(1 + e^x) without overflow.
double softplus(double x);

}  // namespace xsense::nn
