#pragma once

#include <string>

#include "dicer/tensor.hpp"

namespace dicer {

struct AdamHyper {
  double lr = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// A named parameter with its Adam moment estimates.
struct ParamTensor {
  std::string name;
  Tensor value;
  Tensor m, v;
  long long step = 0;
};

// Standard bias-corrected Adam update, in place.
void adam_step(ParamTensor& p, const Tensor& grad, const AdamHyper& h);

}  // namespace dicer
