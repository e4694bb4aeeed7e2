#include "dicer/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace dicer {

namespace {

double eval_loss(const LossBuilder& build_loss, const std::vector<ParamTensor>& params) {
  Tape tape;
  std::vector<Var> vars;
  vars.reserve(params.size());
  for (const ParamTensor& p : params) vars.push_back(tape.leaf_view(&p.value));
  const Var loss = build_loss(tape, vars);
  return tape.value(loss).data[0];
}

}  // namespace

std::vector<GradCheckReport> grad_check(const LossBuilder& build_loss,
                                        std::vector<ParamTensor>& params, double h, double tol,
                                        std::size_t max_coords_per_param,
                                        std::uint64_t subsample_seed) {
  if (h <= 0.0) config_error("grad_check: step h must be positive");

  // analytic gradients in one backward pass
  std::vector<Tensor> analytic(params.size());
  {
    Tape tape;
    std::vector<Var> vars;
    vars.reserve(params.size());
    for (const ParamTensor& p : params) vars.push_back(tape.leaf_view(&p.value));
    const Var loss = build_loss(tape, vars);
    tape.backward(loss);
    for (std::size_t i = 0; i < params.size(); ++i) {
      analytic[i] = tape.has_grad(vars[i]) ? tape.grad(vars[i])
                                           : Tensor::zeros(params[i].value.shape);
    }
  }

  std::vector<GradCheckReport> reports;
  reports.reserve(params.size());
  for (std::size_t i = 0; i < params.size(); ++i) {
    ParamTensor& p = params[i];
    std::vector<std::size_t> coords(p.value.numel());
    std::iota(coords.begin(), coords.end(), 0u);
    if (coords.size() > max_coords_per_param) {
      Rng rng(mix_seed(subsample_seed, i));
      rng.shuffle(coords);
      coords.resize(max_coords_per_param);
      std::sort(coords.begin(), coords.end());
    }

    GradCheckReport rep;
    rep.name = p.name;
    for (std::size_t c : coords) {
      const double saved = p.value.data[c];
      p.value.data[c] = saved + h;
      const double f_plus = eval_loss(build_loss, params);
      p.value.data[c] = saved - h;
      const double f_minus = eval_loss(build_loss, params);
      p.value.data[c] = saved;

      const double numeric = (f_plus - f_minus) / (2.0 * h);
      const double a = analytic[i].data[c];
      const double rel =
          std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), 1e-5});
      rep.max_rel_err = std::max(rep.max_rel_err, rel);
    }
    rep.pass = rep.max_rel_err < tol;
    reports.push_back(std::move(rep));
  }
  return reports;
}

MicroInstance make_micro_instance(int embed_dim, int layers, std::uint64_t seed) {
  MicroInstance mi;
  const int num_users = 5, num_items = 6;

  // Fixed train interactions with enough overlap to give every graph edges.
  const std::vector<Interaction> train = {
      {0, 0}, {0, 1}, {0, 2}, {1, 1}, {1, 2}, {1, 3}, {2, 2}, {2, 3},
      {2, 4}, {3, 3}, {3, 4}, {3, 5}, {4, 0}, {4, 4}, {4, 5},
  };
  mi.split.train = train;
  mi.split.num_users = num_users;
  mi.split.num_items = num_items;

  SocialEdges social;
  for (auto [a, b] : std::vector<std::pair<int, int>>{{0, 1}, {1, 2}, {2, 3}, {3, 4}, {4, 0}}) {
    social.edges.push_back({a, b});
    social.edges.push_back({b, a});
  }
  std::sort(social.edges.begin(), social.edges.end());

  const BipartiteIndex index = build_bipartite_index(train, num_users, num_items);
  mi.graphs.social = build_social_graph(social, num_users);
  mi.graphs.user_collab = build_collab_graph(index, Side::User, 0.1);
  mi.graphs.item_collab = build_collab_graph(index, Side::Item, 0.1);

  ModelConfig cfg;
  cfg.embed_dim = embed_dim;
  cfg.layers = layers;
  cfg.dropout_rate = 0.0;  // checking requires a deterministic forward
  cfg.neighbor_cap = 16;
  cfg.history_cap = 16;
  cfg.cap_seed = mix_seed(seed, 0xcafull);
  cfg.validate();

  mi.params = ModelParams::init(cfg, num_users, num_items, seed);
  mi.model_graphs = build_model_graphs(mi.graphs, index, cfg);

  // Positives from the train set plus a few negatives; training mode then
  // also exercises the history self-exclusion paths.
  mi.users = {0, 1, 2, 3, 4, 0, 1, 2, 3, 4};
  mi.items = {0, 2, 4, 5, 0, 4, 5, 0, 1, 2};
  mi.labels = Tensor::vec({1, 1, 1, 1, 1, 0, 0, 0, 0, 0});
  mi.labels.shape = {10, 1};
  return mi;
}

std::vector<GradCheckReport> run_micro_gradcheck(int embed_dim, int layers, double h, double tol,
                                                 std::uint64_t seed, bool inject_fault) {
  MicroInstance mi = make_micro_instance(embed_dim, layers, seed);

  LossBuilder build = [&mi, inject_fault](Tape& tape, const std::vector<Var>& pv) -> Var {
    const RepVars reps = propagate(tape, mi.params, pv, mi.model_graphs);
    Var h_star = reps.h_star;
    if (inject_fault) {
      // identity forward with a broken backward rule
      const int in = h_star.id;
      h_star = tape.record("bad_identity", tape.value(h_star), {in}, [in](Tape& t, int self) {
        Tensor& g = t.grad_buf(in);
        const Tensor& up = t.out_grad(self);
        for (std::size_t k = 0; k < g.data.size(); ++k) g.data[k] += 0.5 * up.data[k] + 0.01;
      });
    }
    const Var preds = forward_batch(tape, h_star, reps.z_star, mi.users, mi.items,
                                    mi.model_graphs, mi.params, pv, true, 0);
    return tape.bce_loss(preds, mi.labels);
  };

  return grad_check(build, mi.params.tensors, h, tol);
}

}  // namespace dicer
