#pragma once

#include <cstddef>
#include <initializer_list>
#include <string>
#include <vector>

namespace mtft {

/// Dense row-major tensor of doubles with a dynamic shape. Everything the
/// model touches (trajectories, weights, attention matrices) lives in one of
/// these; most of them are rank 1 or 2.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<std::size_t> shape);
  Tensor(std::vector<std::size_t> shape, std::vector<double> values);

  static Tensor zeros(std::vector<std::size_t> shape);
  static Tensor full(std::vector<std::size_t> shape, double value);
  static Tensor vector(std::vector<double> values);
  static Tensor matrix(std::initializer_list<std::initializer_list<double>> rows);

  const std::vector<std::size_t>& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t size() const { return data_.size(); }
  std::size_t dim(std::size_t i) const { return shape_[i]; }
  bool empty() const { return data_.empty(); }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  std::vector<double>& values() { return data_; }
  const std::vector<double>& values() const { return data_; }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  double& operator()(std::size_t i) { return data_[i]; }
  double operator()(std::size_t i) const { return data_[i]; }
  double& operator()(std::size_t r, std::size_t c) { return data_[r * shape_[1] + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * shape_[1] + c]; }

  bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }
  std::string shape_str() const;
  bool all_finite() const;
  void fill(double v);

  Tensor reshaped(std::vector<std::size_t> shape) const;

 private:
  std::vector<std::size_t> shape_;
  std::vector<double> data_;
};

/// C = A x B for rank >= 2 operands. Leading (batch) dimensions must match
/// exactly; the trailing two are contracted as [p,q] x [q,r] -> [p,r].
/// Throws std::invalid_argument naming both shapes on mismatch.
Tensor tensor_matmul(const Tensor& a, const Tensor& b);

/// Rank-2 transpose.
Tensor tensor_transpose(const Tensor& m);

double max_abs_diff(const Tensor& a, const Tensor& b);

/// Shortest round-trippable decimal form, stable across runs. Used for every
/// CSV the tools emit so reruns are byte-identical.
std::string format_double(double v);

}  // namespace mtft
