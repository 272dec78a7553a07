#include "xsense/nn/optimizer.hpp"

#include <fmt/format.h>

#include <cmath>

#include "xsense/error.hpp"

namespace xsense::nn {

OptimizerKind parse_optimizer(std::string_view name) {
  if (name == "sgd") return OptimizerKind::kSgd;
  if (name == "adam") return OptimizerKind::kAdam;
  throw ConfigError(fmt::format("unknown optimizer '{}' (expected sgd or adam)", name));
}

const char* optimizer_name(OptimizerKind kind) { return kind == OptimizerKind::kSgd ? "sgd" : "adam"; }

Optimizer::Optimizer(OptimizerKind kind, double learning_rate, ParameterList params, AdamSettings adam)
    : kind_(kind), learning_rate_(learning_rate), params_(std::move(params)), adam_(adam) {
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) {
    throw ConfigError(fmt::format("learning rate must be finite and non-negative, got {}", learning_rate));
  }
  if (kind_ == OptimizerKind::kAdam) {
    for (const Parameter* p : params_) {
      m_.emplace_back(p->value.rows(), p->value.cols());
      v_.emplace_back(p->value.rows(), p->value.cols());
    }
  }
}

void Optimizer::step() {
  ++step_;
  if (kind_ == OptimizerKind::kSgd) {
    for (Parameter* p : params_) {
      auto& w = p->value.data();
      const auto& g = p->grad.data();
      for (std::size_t i = 0; i < w.size(); ++i) w[i] -= learning_rate_ * g[i];
    }
    return;
  }
  const double t = static_cast<double>(step_);
  const double c1 = 1.0 - std::pow(adam_.beta1, t);
  const double c2 = 1.0 - std::pow(adam_.beta2, t);
  for (std::size_t k = 0; k < params_.size(); ++k) {
    auto& w = params_[k]->value.data();
    const auto& g = params_[k]->grad.data();
    auto& m = m_[k].data();
    auto& v = v_[k].data();
    for (std::size_t i = 0; i < w.size(); ++i) {
      m[i] = adam_.beta1 * m[i] + (1.0 - adam_.beta1) * g[i];
      v[i] = adam_.beta2 * v[i] + (1.0 - adam_.beta2) * g[i] * g[i];
      const double m_hat = m[i] / c1;
      const double v_hat = v[i] / c2;
      w[i] -= learning_rate_ * m_hat / (std::sqrt(v_hat) + adam_.epsilon);
    }
  }
}

}  // namespace xsense::nn
