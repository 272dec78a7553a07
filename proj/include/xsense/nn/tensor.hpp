#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "xsense/random.hpp"
#include "xsense/text.hpp"

namespace xsense {
class WordVectors;
}

namespace xsense::nn {

using Vec = std::vector<double>;

// Dense row-major matrix of doubles. A column vector is a rows x 1 tensor.
class Tensor2 {
 public:
  Tensor2() = default;
  Tensor2(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }
  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  std::vector<double>& data() { return data_; }
  const std::vector<double>& data() const { return data_; }

  void fill(double v);
  bool all_finite() const;

  bool operator==(const Tensor2&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

// A trainable tensor with its accumulated gradient.
struct Parameter {
  std::string name;
  Tensor2 value;
  Tensor2 grad;

  Parameter() = default;
  Parameter(std::string n, Tensor2 v) : name(std::move(n)), value(std::move(v)), grad(value.rows(), value.cols()) {}

  void zero_grad() { grad.fill(0.0); }
};

using ParameterList = std::vector<Parameter*>;
using ConstParameterList = std::vector<const Parameter*>;

void zero_grads(const ParameterList& params);

// Uniform(-b, b) with b = sqrt(6 / (fan_in + fan_out)); fan_in = cols, fan_out = rows.
Tensor2 xavier_uniform(std::size_t rows, std::size_t cols, Rng& rng);
Tensor2 xavier_uniform(std::size_t rows, std::size_t cols, std::uint64_t seed);

// Row i is the vector of vocab.word(i); words absent from the table get zeros.
// Throws if the table's dimension differs from `width`.
Tensor2 from_word_vectors(const Vocabulary& vocab, const WordVectors& vectors, std::size_t width);

// y += A x
void gemv_add(const Tensor2& a, std::span<const double> x, std::span<double> y);
// y += A^T x
void gemv_t_add(const Tensor2& a, std::span<const double> x, std::span<double> y);
// A += x y^T
void outer_add(Tensor2& a, std::span<const double> x, std::span<const double> y);

double sigmoid(double x);
double dot(std::span<const double> a, std::span<const double> b);
double cosine(std::span<const double> a, std::span<const double> b);

}  // namespace xsense::nn
