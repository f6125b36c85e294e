#include "mtft/tensor.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <stdexcept>

namespace mtft {

namespace {

std::size_t shape_product(const std::vector<std::size_t>& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

}  // namespace

Tensor::Tensor(std::vector<std::size_t> shape)
    : shape_(std::move(shape)), data_(shape_product(shape_), 0.0) {}

Tensor::Tensor(std::vector<std::size_t> shape, std::vector<double> values)
    : shape_(std::move(shape)), data_(std::move(values)) {
  if (data_.size() != shape_product(shape_)) {
    throw std::invalid_argument("Tensor: value count " + std::to_string(data_.size()) +
                                " does not match shape " + shape_str());
  }
}

Tensor Tensor::zeros(std::vector<std::size_t> shape) { return Tensor(std::move(shape)); }

Tensor Tensor::full(std::vector<std::size_t> shape, double value) {
  Tensor t(std::move(shape));
  t.fill(value);
  return t;
}

Tensor Tensor::vector(std::vector<double> values) {
  std::size_t n = values.size();
  return Tensor({n}, std::move(values));
}

Tensor Tensor::matrix(std::initializer_list<std::initializer_list<double>> rows) {
  std::size_t r = rows.size();
  std::size_t c = r == 0 ? 0 : rows.begin()->size();
  Tensor t({r, c});
  std::size_t i = 0;
  for (const auto& row : rows) {
    if (row.size() != c) throw std::invalid_argument("Tensor::matrix: ragged rows");
    for (double v : row) t.data_[i++] = v;
  }
  return t;
}

std::string Tensor::shape_str() const {
  std::string s = "[";
  for (std::size_t i = 0; i < shape_.size(); ++i) {
    if (i) s += ", ";
    s += std::to_string(shape_[i]);
  }
  return s + "]";
}

bool Tensor::all_finite() const {
  for (double v : data_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

void Tensor::fill(double v) {
  for (double& x : data_) x = v;
}

Tensor Tensor::reshaped(std::vector<std::size_t> shape) const {
  if (shape_product(shape) != data_.size()) {
    throw std::invalid_argument("Tensor::reshaped: size mismatch");
  }
  return Tensor(std::move(shape), data_);
}

Tensor tensor_matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() < 2 || b.rank() < 2 || a.rank() != b.rank()) {
    throw std::invalid_argument("matmul: need equal rank >= 2, got " + a.shape_str() +
                                " x " + b.shape_str());
  }
  const std::size_t rk = a.rank();
  for (std::size_t i = 0; i + 2 < rk; ++i) {
    if (a.dim(i) != b.dim(i)) {
      throw std::invalid_argument("matmul: batch dims differ, " + a.shape_str() + " x " +
                                  b.shape_str());
    }
  }
  const std::size_t p = a.dim(rk - 2), q = a.dim(rk - 1);
  const std::size_t q2 = b.dim(rk - 2), r = b.dim(rk - 1);
  if (q != q2) {
    throw std::invalid_argument("matmul: inner dims differ, " + a.shape_str() + " x " +
                                b.shape_str());
  }
  std::vector<std::size_t> out_shape(a.shape());
  out_shape[rk - 1] = r;
  out_shape[rk - 2] = p;
  Tensor out(out_shape);

  std::size_t batches = 1;
  for (std::size_t i = 0; i + 2 < rk; ++i) batches *= a.dim(i);

  const double* pa = a.data();
  const double* pb = b.data();
  double* po = out.data();
  for (std::size_t n = 0; n < batches; ++n) {
    const double* A = pa + n * p * q;
    const double* B = pb + n * q * r;
    double* O = po + n * p * r;
    // i-k-j loop order keeps B accesses sequential
    for (std::size_t i = 0; i < p; ++i) {
      double* Oi = O + i * r;
      for (std::size_t k = 0; k < q; ++k) {
        const double aik = A[i * q + k];
        if (aik == 0.0) continue;
        const double* Bk = B + k * r;
        for (std::size_t j = 0; j < r; ++j) Oi[j] += aik * Bk[j];
      }
    }
  }
  return out;
}

Tensor tensor_transpose(const Tensor& m) {
  if (m.rank() != 2) {
    throw std::invalid_argument("transpose: rank-2 tensor required, got " + m.shape_str());
  }
  Tensor out({m.dim(1), m.dim(0)});
  for (std::size_t i = 0; i < m.dim(0); ++i) {
    for (std::size_t j = 0; j < m.dim(1); ++j) out(j, i) = m(i, j);
  }
  return out;
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
  if (!a.same_shape(b)) {
    throw std::invalid_argument("max_abs_diff: shapes differ, " + a.shape_str() + " vs " +
                                b.shape_str());
  }
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    double d = std::fabs(a[i] - b[i]);
    if (d > m) m = d;
  }
  return m;
}

std::string format_double(double v) {
  char buf[40];
  // %.17g round-trips any double; of the precisions that still round-trip,
  // keep the shortest text (low precisions can switch to a longer
  // scientific form, e.g. 3e+01 vs 30).
  std::string best;
  for (int prec = 1; prec <= 17; ++prec) {
    std::snprintf(buf, sizeof(buf), "%.*g", prec, v);
    if (std::strtod(buf, nullptr) != v) continue;
    if (best.empty() || std::strlen(buf) < best.size()) best = buf;
  }
  return best;
}

}  // namespace mtft
