#include "dicer/tensor.hpp"

#include <cmath>
#include <sstream>

#include "dicer/common.hpp"

namespace dicer {

Tensor Tensor::zeros(std::vector<std::size_t> shape) {
  Tensor t;
  t.shape = std::move(shape);
  std::size_t n = 1;
  for (auto d : t.shape) n *= d;
  t.data.assign(n, 0.0);
  return t;
}

Tensor Tensor::scalar(double v) {
  Tensor t;
  t.shape = {1};
  t.data = {v};
  return t;
}

Tensor Tensor::vec(std::vector<double> values) {
  Tensor t;
  t.shape = {values.size()};
  t.data = std::move(values);
  return t;
}

Tensor Tensor::matrix(std::size_t rows, std::size_t cols, std::vector<double> values) {
  if (values.size() != rows * cols)
    numeric_error("Tensor::matrix: " + std::to_string(values.size()) + " values for " +
                  std::to_string(rows) + "x" + std::to_string(cols));
  Tensor t;
  t.shape = {rows, cols};
  t.data = std::move(values);
  return t;
}

bool Tensor::all_finite() const {
  for (double v : data)
    if (!std::isfinite(v)) return false;
  return true;
}

std::string Tensor::shape_str() const {
  std::ostringstream os;
  os << "(";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << "x";
    os << shape[i];
  }
  os << ")";
  return os.str();
}

namespace {

void check_gemm_args(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2)
    numeric_error("gemm: expected rank-2 tensors, got " + a.shape_str() + " and " + b.shape_str());
}

}  // namespace

void gemm_acc(Tensor& c, const Tensor& a, bool trans_a, const Tensor& b, bool trans_b) {
  check_gemm_args(a, b);
  const std::size_t m = trans_a ? a.shape[1] : a.shape[0];
  const std::size_t k = trans_a ? a.shape[0] : a.shape[1];
  const std::size_t kb = trans_b ? b.shape[1] : b.shape[0];
  const std::size_t n = trans_b ? b.shape[0] : b.shape[1];
  if (k != kb)
    numeric_error("gemm: inner dimensions disagree: " + a.shape_str() + (trans_a ? "^T" : "") +
                  " x " + b.shape_str() + (trans_b ? "^T" : ""));
  if (c.rank() != 2 || c.shape[0] != m || c.shape[1] != n)
    numeric_error("gemm: output shape " + c.shape_str() + " does not match " + std::to_string(m) +
                  "x" + std::to_string(n));

  const double* A = a.data.data();
  const double* B = b.data.data();
  double* C = c.data.data();
  const std::size_t lda = a.shape[1];
  const std::size_t ldb = b.shape[1];

  if (!trans_a && !trans_b) {
    for (std::size_t i = 0; i < m; ++i) {
      double* ci = C + i * n;
      const double* ai = A + i * lda;
      for (std::size_t l = 0; l < k; ++l) {
        const double av = ai[l];
        if (av == 0.0) continue;
        const double* bl = B + l * ldb;
        for (std::size_t j = 0; j < n; ++j) ci[j] += av * bl[j];
      }
    }
  } else if (!trans_a && trans_b) {
    for (std::size_t i = 0; i < m; ++i) {
      const double* ai = A + i * lda;
      double* ci = C + i * n;
      for (std::size_t j = 0; j < n; ++j) {
        const double* bj = B + j * ldb;
        double s = 0.0;
        for (std::size_t l = 0; l < k; ++l) s += ai[l] * bj[l];
        ci[j] += s;
      }
    }
  } else if (trans_a && !trans_b) {
    for (std::size_t l = 0; l < k; ++l) {
      const double* al = A + l * lda;
      const double* bl = B + l * ldb;
      for (std::size_t i = 0; i < m; ++i) {
        const double av = al[i];
        if (av == 0.0) continue;
        double* ci = C + i * n;
        for (std::size_t j = 0; j < n; ++j) ci[j] += av * bl[j];
      }
    }
  } else {
    for (std::size_t i = 0; i < m; ++i) {
      double* ci = C + i * n;
      for (std::size_t j = 0; j < n; ++j) {
        const double* bj = B + j * ldb;
        double s = 0.0;
        for (std::size_t l = 0; l < k; ++l) s += A[l * lda + i] * bj[l];
        ci[j] += s;
      }
    }
  }
}

Tensor gemm(const Tensor& a, bool trans_a, const Tensor& b, bool trans_b) {
  check_gemm_args(a, b);
  const std::size_t m = trans_a ? a.shape[1] : a.shape[0];
  const std::size_t n = trans_b ? b.shape[0] : b.shape[1];
  Tensor c = Tensor::zeros({m, n});
  gemm_acc(c, a, trans_a, b, trans_b);
  return c;
}

}  // namespace dicer
