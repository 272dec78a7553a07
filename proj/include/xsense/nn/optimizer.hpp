#pragma once

#include <cstdint>
#include <string_view>

#include "xsense/nn/tensor.hpp"

namespace xsense::nn {

enum class OptimizerKind { kSgd, kAdam };

OptimizerKind parse_optimizer(std::string_view name);
const char* optimizer_name(OptimizerKind kind);

struct AdamSettings {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// Updates only the parameters registered at construction. The caller owns the
// parameters and must keep them alive.
class Optimizer {
 public:
  Optimizer(OptimizerKind kind, double learning_rate, ParameterList params, AdamSettings adam = {});

  void step();
  void zero_grad() { zero_grads(params_); }

  OptimizerKind kind() const { return kind_; }
  double learning_rate() const { return learning_rate_; }
  std::uint64_t steps() const { return step_; }

 private:
  OptimizerKind kind_;
  double learning_rate_;
  ParameterList params_;
  AdamSettings adam_;
  std::vector<Tensor2> m_;
  std::vector<Tensor2> v_;
  std::uint64_t step_ = 0;
};

}  // namespace xsense::nn
