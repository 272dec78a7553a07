#include "xsense/nn/tensor.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>

#include "xsense/corpus.hpp"
#include "xsense/error.hpp"

namespace xsense::nn {

void Tensor2::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

bool Tensor2::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

void zero_grads(const ParameterList& params) {
  for (Parameter* p : params) p->zero_grad();
}

Tensor2 xavier_uniform(std::size_t rows, std::size_t cols, Rng& rng) {
  Tensor2 t(rows, cols);
  const double bound = std::sqrt(6.0 / static_cast<double>(rows + cols));
  for (double& v : t.data()) v = rng.uniform(-bound, bound);
  return t;
}

Tensor2 xavier_uniform(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  Rng rng(seed);
  return xavier_uniform(rows, cols, rng);
}

Tensor2 from_word_vectors(const Vocabulary& vocab, const WordVectors& vectors, std::size_t width) {
  if (vectors.dim() != width) {
    throw ConfigError(fmt::format("word vectors have dimension {} but the embedding width is {}",
                                  vectors.dim(), width));
  }
  Tensor2 t(vocab.size(), width);
  for (std::size_t i = 0; i < vocab.size(); ++i) {
    const std::vector<double> v = vectors.lookup(vocab.word(i));
    std::copy(v.begin(), v.end(), t.row(i).begin());
  }
  return t;
}

void gemv_add(const Tensor2& a, std::span<const double> x, std::span<double> y) {
  for (std::size_t r = 0; r < a.rows(); ++r) {
    const auto row = a.row(r);
    double s = 0.0;
    for (std::size_t c = 0; c < a.cols(); ++c) s += row[c] * x[c];
    y[r] += s;
  }
}

void gemv_t_add(const Tensor2& a, std::span<const double> x, std::span<double> y) {
  for (std::size_t r = 0; r < a.rows(); ++r) {
    const auto row = a.row(r);
    const double xr = x[r];
    if (xr == 0.0) continue;
    for (std::size_t c = 0; c < a.cols(); ++c) y[c] += row[c] * xr;
  }
}

void outer_add(Tensor2& a, std::span<const double> x, std::span<const double> y) {
  for (std::size_t r = 0; r < a.rows(); ++r) {
    const double xr = x[r];
    if (xr == 0.0) continue;
    auto row = a.row(r);
    for (std::size_t c = 0; c < a.cols(); ++c) row[c] += xr * y[c];
  }
}

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double cosine(std::span<const double> a, std::span<const double> b) {
  const double na = std::sqrt(dot(a, a));
  const double nb = std::sqrt(dot(b, b));
  if (na == 0.0 || nb == 0.0) return 0.0;
  return dot(a, b) / (na * nb);
}

}  // namespace xsense::nn
