#include "xsense/nn/layers.hpp"

#include <fmt/format.h>

#include <cmath>

#include "xsense/error.hpp"

namespace xsense::nn {

Dense::Dense(std::string name, std::size_t in_dim, std::size_t out_dim, Rng& rng)
    : weight_(name + ".weight", xavier_uniform(out_dim, in_dim, rng)),
      bias_(name + ".bias", Tensor2(out_dim, 1)) {}

Vec Dense::forward(std::span<const double> x) const {
  if (x.size() != in_dim()) {
    throw DataError(fmt::format("{}: input has {} entries, expected {}", weight_.name, x.size(), in_dim()));
  }
  Vec y(bias_.value.data());
  gemv_add(weight_.value, x, y);
  return y;
}

Vec Dense::backward(std::span<const double> x, std::span<const double> dy) {
  outer_add(weight_.grad, dy, x);
  for (std::size_t i = 0; i < dy.size(); ++i) bias_.grad[i] += dy[i];
  Vec dx(x.size(), 0.0);
  gemv_t_add(weight_.value, dy, dx);
  return dx;
}

Vec Embedding::lookup(std::size_t id) const {
  if (id >= vocab_size()) {
    throw DataError(fmt::format("{}: id {} out of range for {} rows", table_.name, id, vocab_size()));
  }
  const auto row = table_.value.row(id);
  return Vec(row.begin(), row.end());
}

void Embedding::backward(std::size_t id, std::span<const double> dy) {
  auto row = table_.grad.row(id);
  for (std::size_t i = 0; i < dy.size(); ++i) row[i] += dy[i];
}

GruCell::GruCell(std::string name, std::size_t input_dim, std::size_t hidden_dim, Rng& rng)
    : w_z_(name + ".W_z", xavier_uniform(hidden_dim, input_dim, rng)),
      w_r_(name + ".W_r", xavier_uniform(hidden_dim, input_dim, rng)),
      w_h_(name + ".W_h", xavier_uniform(hidden_dim, input_dim, rng)),
      u_z_(name + ".U_z", xavier_uniform(hidden_dim, hidden_dim, rng)),
      u_r_(name + ".U_r", xavier_uniform(hidden_dim, hidden_dim, rng)),
      u_h_(name + ".U_h", xavier_uniform(hidden_dim, hidden_dim, rng)),
      b_z_(name + ".b_z", Tensor2(hidden_dim, 1)),
      b_r_(name + ".b_r", Tensor2(hidden_dim, 1)),
      b_h_(name + ".b_h", Tensor2(hidden_dim, 1)) {}

void GruCell::check_shapes(std::span<const double> x, std::span<const double> h) const {
  if (x.size() != input_dim() || h.size() != hidden_dim()) {
    throw DataError(fmt::format("{}: got input {} / hidden {}, expected input {} / hidden {}",
                                w_z_.name, x.size(), h.size(), input_dim(), hidden_dim()));
  }
}

Vec GruCell::step(std::span<const double> x, std::span<const double> h, GruCache* cache) const {
  check_shapes(x, h);
  const std::size_t n = hidden_dim();
  Vec z(b_z_.value.data());
  Vec r(b_r_.value.data());
  gemv_add(w_z_.value, x, z);
  gemv_add(u_z_.value, h, z);
  gemv_add(w_r_.value, x, r);
  gemv_add(u_r_.value, h, r);
  for (std::size_t i = 0; i < n; ++i) {
    z[i] = sigmoid(z[i]);
    r[i] = sigmoid(r[i]);
  }
  Vec rh(n);
  for (std::size_t i = 0; i < n; ++i) rh[i] = r[i] * h[i];
  Vec h_tilde(b_h_.value.data());
  gemv_add(w_h_.value, x, h_tilde);
  gemv_add(u_h_.value, rh, h_tilde);
  for (double& v : h_tilde) v = std::tanh(v);

  Vec out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = (1.0 - z[i]) * h[i] + z[i] * h_tilde[i];
  if (cache != nullptr) {
    cache->x.assign(x.begin(), x.end());
    cache->h_prev.assign(h.begin(), h.end());
    cache->z = std::move(z);
    cache->r = std::move(r);
    cache->h_tilde = std::move(h_tilde);
    cache->rh = std::move(rh);
  }
  return out;
}

void GruCell::backward(const GruCache& c, std::span<const double> dh_next, std::span<double> dx,
                       std::span<double> dh_prev) {
  const std::size_t n = hidden_dim();
  Vec da_h(n), da_z(n), da_r(n), drh(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const double g = dh_next[i];
    dh_prev[i] += g * (1.0 - c.z[i]);
    const double dz = g * (c.h_tilde[i] - c.h_prev[i]);
    da_z[i] = dz * c.z[i] * (1.0 - c.z[i]);
    const double dht = g * c.z[i];
    da_h[i] = dht * (1.0 - c.h_tilde[i] * c.h_tilde[i]);
  }
  // Candidate path.
  outer_add(w_h_.grad, da_h, c.x);
  outer_add(u_h_.grad, da_h, c.rh);
  for (std::size_t i = 0; i < n; ++i) b_h_.grad[i] += da_h[i];
  gemv_t_add(w_h_.value, da_h, dx);
  gemv_t_add(u_h_.value, da_h, drh);
  for (std::size_t i = 0; i < n; ++i) {
    dh_prev[i] += drh[i] * c.r[i];
    const double dr = drh[i] * c.h_prev[i];
    da_r[i] = dr * c.r[i] * (1.0 - c.r[i]);
  }
  // Gates.
  outer_add(w_z_.grad, da_z, c.x);
  outer_add(u_z_.grad, da_z, c.h_prev);
  outer_add(w_r_.grad, da_r, c.x);
  outer_add(u_r_.grad, da_r, c.h_prev);
  for (std::size_t i = 0; i < n; ++i) {
    b_z_.grad[i] += da_z[i];
    b_r_.grad[i] += da_r[i];
  }
  gemv_t_add(w_z_.value, da_z, dx);
  gemv_t_add(w_r_.value, da_r, dx);
  gemv_t_add(u_z_.value, da_z, dh_prev);
  gemv_t_add(u_r_.value, da_r, dh_prev);
}

}  // namespace xsense::nn
