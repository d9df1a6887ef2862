#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace adalog {

/// Dense row-major tensor of doubles, rank 1 or 2. A rank-1 tensor behaves as
/// a single row in the matrix helpers below.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<std::size_t> shape, double fill = 0.0);

  static Tensor matrix(std::size_t rows, std::size_t cols) { return Tensor({rows, cols}); }
  static Tensor vector(std::size_t n) { return Tensor({n}); }

  const std::vector<std::size_t>& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t size() const { return data_.size(); }
  std::size_t rows() const { return shape_.size() == 2 ? shape_[0] : 1; }
  std::size_t cols() const { return shape_.empty() ? 0 : shape_.back(); }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  std::span<double> values() { return data_; }
  std::span<const double> values() const { return data_; }

  double* row(std::size_t r) { return data_.data() + r * cols(); }
  const double* row(std::size_t r) const { return data_.data() + r * cols(); }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }
  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols() + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols() + c]; }

  void fill(double v);
  void resize(std::size_t rows, std::size_t cols);
  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  std::vector<std::size_t> shape_;
  std::vector<double> data_;
};

namespace linalg {

// Every output element accumulates over the inner dimension in ascending
// order, independent of the number of rows. Batched and unbatched evaluation
// therefore agree bit for bit.

/// out[m x n] = a[m x k] * b[k x n] (+ bias[n] when bias is non-null).
void matmul(const Tensor& a, const Tensor& b, const Tensor* bias, Tensor& out);

/// acc[k x n] += a[m x k]^T * b[m x n].
void matmul_tn_acc(const Tensor& a, const Tensor& b, Tensor& acc);

/// out[r x c] = in[c x r]^T.
void transpose(const Tensor& in, Tensor& out);

/// acc[n] += column sums of m[rows x n].
void add_column_sums(const Tensor& m, Tensor& acc);

}  // namespace linalg
}  // namespace adalog
