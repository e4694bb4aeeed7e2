#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace dicer {

// Dense row-major 64-bit float array. Rank 1 and 2 cover everything the
// model needs; there is deliberately no broadcasting.
struct Tensor {
  std::vector<std::size_t> shape;
  std::vector<double> data;

  Tensor() = default;

  static Tensor zeros(std::vector<std::size_t> shape);
  static Tensor scalar(double v);
  static Tensor vec(std::vector<double> values);
  static Tensor matrix(std::size_t rows, std::size_t cols, std::vector<double> values);

  std::size_t numel() const { return data.size(); }
  std::size_t rank() const { return shape.size(); }
  std::size_t rows() const { return shape.empty() ? 1 : shape[0]; }
  std::size_t cols() const { return shape.size() == 2 ? shape[1] : 1; }

  double& at(std::size_t r, std::size_t c) { return data[r * cols() + c]; }
  double at(std::size_t r, std::size_t c) const { return data[r * cols() + c]; }

  bool same_shape(const Tensor& o) const { return shape == o.shape; }
  bool all_finite() const;
  std::string shape_str() const;
};

// c = op(a) * op(b) where op is optional transposition. Inputs must be rank 2.
Tensor gemm(const Tensor& a, bool trans_a, const Tensor& b, bool trans_b);
// c += op(a) * op(b); c must already have the result shape.
void gemm_acc(Tensor& c, const Tensor& a, bool trans_a, const Tensor& b, bool trans_b);

}  // namespace dicer
