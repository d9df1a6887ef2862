#include "adalog/tensor.hpp"

#include <algorithm>
#include <functional>
#include <numeric>

#include "adalog/error.hpp"

namespace adalog {

Tensor::Tensor(std::vector<std::size_t> shape, double fill) : shape_(std::move(shape)) {
  if (shape_.empty() || shape_.size() > 2) {
    throw Error(ErrorKind::ShapeMismatch, "tensors are rank 1 or 2");
  }
  const std::size_t n =
      std::accumulate(shape_.begin(), shape_.end(), std::size_t{1}, std::multiplies<>());
  data_.assign(n, fill);
}

void Tensor::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

void Tensor::resize(std::size_t rows, std::size_t cols) {
  shape_ = {rows, cols};
  data_.assign(rows * cols, 0.0);
}

namespace linalg {

void matmul(const Tensor& a, const Tensor& b, const Tensor* bias, Tensor& out) {
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  if (b.rows() != k || (bias && bias->size() != n)) {
    throw Error(ErrorKind::ShapeMismatch, "matmul operand shapes disagree");
  }
  if (out.rank() != 2 || out.rows() != m || out.cols() != n) out.resize(m, n);
  const double* bp = b.data();
  for (std::size_t i = 0; i < m; ++i) {
    double* __restrict orow = out.row(i);
    if (bias) {
      std::copy_n(bias->data(), n, orow);
    } else {
      std::fill_n(orow, n, 0.0);
    }
    const double* arow = a.row(i);
    for (std::size_t kk = 0; kk < k; ++kk) {
      const double aik = arow[kk];
      const double* __restrict brow = bp + kk * n;
      for (std::size_t j = 0; j < n; ++j) orow[j] += aik * brow[j];
    }
  }
}

void matmul_tn_acc(const Tensor& a, const Tensor& b, Tensor& acc) {
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  if (b.rows() != m || acc.rows() != k || acc.cols() != n) {
    throw Error(ErrorKind::ShapeMismatch, "matmul_tn operand shapes disagree");
  }
  for (std::size_t i = 0; i < m; ++i) {
    const double* arow = a.row(i);
    const double* __restrict brow = b.row(i);
    for (std::size_t kk = 0; kk < k; ++kk) {
      const double aik = arow[kk];
      if (aik == 0.0) continue;
      double* __restrict accrow = acc.row(kk);
      for (std::size_t j = 0; j < n; ++j) accrow[j] += aik * brow[j];
    }
  }
}

void transpose(const Tensor& in, Tensor& out) {
  const std::size_t r = in.rows(), c = in.cols();
  if (out.rank() != 2 || out.rows() != c || out.cols() != r) out.resize(c, r);
  for (std::size_t i = 0; i < r; ++i) {
    const double* irow = in.row(i);
    for (std::size_t j = 0; j < c; ++j) out(j, i) = irow[j];
  }
}

void add_column_sums(const Tensor& m, Tensor& acc) {
  if (acc.size() != m.cols()) throw Error(ErrorKind::ShapeMismatch, "column sum width mismatch");
  const std::size_t n = m.cols();
  for (std::size_t i = 0; i < m.rows(); ++i) {
    const double* __restrict r = m.row(i);
    double* __restrict a = acc.data();
    for (std::size_t j = 0; j < n; ++j) a[j] += r[j];
  }
}

}  // namespace linalg
}  // namespace adalog
