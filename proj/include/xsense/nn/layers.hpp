#pragma once

#include <span>
#include <string>

#include "xsense/nn/tensor.hpp"

namespace xsense::nn {

// y = W x + b.
class Dense {
 public:
  Dense() = default;
  Dense(std::string name, std::size_t in_dim, std::size_t out_dim, Rng& rng);

  std::size_t in_dim() const { return weight_.value.cols(); }
  std::size_t out_dim() const { return weight_.value.rows(); }

  Vec forward(std::span<const double> x) const;
  // Accumulates parameter gradients; returns dL/dx.
  Vec backward(std::span<const double> x, std::span<const double> dy);

  Parameter& weight() { return weight_; }
  Parameter& bias() { return bias_; }
  const Parameter& weight() const { return weight_; }
  const Parameter& bias() const { return bias_; }
  ParameterList parameters() { return {&weight_, &bias_}; }
  ConstParameterList parameters() const { return {&weight_, &bias_}; }

 private:
  Parameter weight_;
  Parameter bias_;
};

class Embedding {
 public:
  Embedding() = default;
  Embedding(std::string name, Tensor2 table) : table_(std::move(name), std::move(table)) {}

  std::size_t vocab_size() const { return table_.value.rows(); }
  std::size_t dim() const { return table_.value.cols(); }

  Vec lookup(std::size_t id) const;
  void backward(std::size_t id, std::span<const double> dy);

  Parameter& table() { return table_; }
  const Parameter& table() const { return table_; }
  ParameterList parameters() { return {&table_}; }
  ConstParameterList parameters() const { return {&table_}; }

 private:
  Parameter table_;
};

// Activations kept by GruCell::step for the backward pass.
struct GruCache {
  Vec x;
  Vec h_prev;
  Vec z;
  Vec r;
  Vec h_tilde;
  Vec rh;  // r ⊙ h_prev
};

// Update-gate convention:
//   z  = σ(W_z x + U_z h + b_z)
//   r  = σ(W_r x + U_r h + b_r)
//   h~ = tanh(W_h x + U_h (r ⊙ h) + b_h)
//   h' = (1 - z) ⊙ h + z ⊙ h~
class GruCell {
 public:
  GruCell() = default;
  GruCell(std::string name, std::size_t input_dim, std::size_t hidden_dim, Rng& rng);

  std::size_t input_dim() const { return w_z_.value.cols(); }
  std::size_t hidden_dim() const { return w_z_.value.rows(); }

  Vec step(std::span<const double> x, std::span<const double> h, GruCache* cache = nullptr) const;

  // Given dL/dh', accumulates parameter gradients and adds dL/dx and dL/dh
  // into `dx` and `dh_prev`.
  void backward(const GruCache& cache, std::span<const double> dh_next, std::span<double> dx,
                std::span<double> dh_prev);

  ParameterList parameters() {
    return {&w_z_, &w_r_, &w_h_, &u_z_, &u_r_, &u_h_, &b_z_, &b_r_, &b_h_};
  }
  ConstParameterList parameters() const {
    return {&w_z_, &w_r_, &w_h_, &u_z_, &u_r_, &u_h_, &b_z_, &b_r_, &b_h_};
  }

 private:
  void check_shapes(std::span<const double> x, std::span<const double> h) const;

  Parameter w_z_, w_r_, w_h_;
  Parameter u_z_, u_r_, u_h_;
  Parameter b_z_, b_r_, b_h_;
};

}  // namespace xsense::nn
