#include "dicer/adam.hpp"

#include <cmath>

#include "dicer/common.hpp"

namespace dicer {

void adam_step(ParamTensor& p, const Tensor& grad, const AdamHyper& h) {
  if (!grad.same_shape(p.value))
    numeric_error("adam_step: gradient shape " + grad.shape_str() + " does not match parameter '" +
                  p.name + "' " + p.value.shape_str());
  if (p.m.data.empty()) p.m = Tensor::zeros(p.value.shape);
  if (p.v.data.empty()) p.v = Tensor::zeros(p.value.shape);

  p.step += 1;
  const double bc1 = 1.0 - std::pow(h.beta1, static_cast<double>(p.step));
  const double bc2 = 1.0 - std::pow(h.beta2, static_cast<double>(p.step));
  for (std::size_t i = 0; i < p.value.data.size(); ++i) {
    const double g = grad.data[i];
    p.m.data[i] = h.beta1 * p.m.data[i] + (1.0 - h.beta1) * g;
    p.v.data[i] = h.beta2 * p.v.data[i] + (1.0 - h.beta2) * g * g;
    const double m_hat = p.m.data[i] / bc1;
    const double v_hat = p.v.data[i] / bc2;
    p.value.data[i] -= h.lr * m_hat / (std::sqrt(v_hat) + h.eps);
  }
}

}  // namespace dicer
