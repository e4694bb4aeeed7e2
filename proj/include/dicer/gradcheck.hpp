#pragma once

#include <functional>
#include <string>
#include <vector>

#include "dicer/model.hpp"

namespace dicer {

struct GradCheckReport {
  std::string name;
  double max_rel_err = 0.0;
  bool pass = true;
};

// Builds the loss on a fresh tape; params arrive as leaves in the same order
// as the tensor list handed to grad_check.
using LossBuilder = std::function<Var(Tape&, const std::vector<Var>&)>;

// Central finite differences per coordinate against the tape gradient.
// Tensors above max_coords_per_param are checked on a seeded random
// coordinate subsample. Relative error uses max(|analytic|, |numeric|, 1e-5)
// as the denominator.
std::vector<GradCheckReport> grad_check(const LossBuilder& build_loss,
                                        std::vector<ParamTensor>& params, double h = 1e-5,
                                        double tol = 1e-4,
                                        std::size_t max_coords_per_param = 10000,
                                        std::uint64_t subsample_seed = 0);

// Deterministic 5-user / 6-item instance exercising all three graphs, both
// modulations' index paths and all heads. Dropout is off.
struct MicroInstance {
  DatasetSplit split;
  GraphSet graphs;
  ModelParams params;
  ModelGraphs model_graphs;
  std::vector<int> users, items;
  Tensor labels;
};

MicroInstance make_micro_instance(int embed_dim, int layers, std::uint64_t seed);

// Full-loss gradient check over every parameter of the micro model. With
// inject_fault a deliberately wrong backward rule is spliced in so the
// checker's failure path can be exercised.
std::vector<GradCheckReport> run_micro_gradcheck(int embed_dim, int layers, double h, double tol,
                                                 std::uint64_t seed, bool inject_fault);

}  // namespace dicer
