#include "dicer/model.hpp"

#include <algorithm>
#include <cmath>

namespace dicer {

std::vector<int> ModelConfig::mlp_widths() const {
  if (!mlp_hidden.empty()) return mlp_hidden;
  return {embed_dim, std::max(embed_dim / 2, 1)};
}

std::array<double, 3> ModelConfig::effective_lambdas() const {
  std::array<double, 3> l{lambda1, lambda2, lambda3};
  if (!use_user_interest) l[1] = 0.0;
  if (!use_item_attraction) l[2] = 0.0;
  const double s = l[0] + l[1] + l[2];
  if (s <= 0.0) config_error("all active head weights are zero");
  for (double& v : l) v /= s;
  return l;
}

void ModelConfig::validate() const {
  if (embed_dim < 1) config_error("embed_dim must be >= 1");
  if (layers < 1) config_error("layers must be >= 1");
  if (lambda1 < 0 || lambda2 < 0 || lambda3 < 0)
    config_error("lambda weights must be nonnegative");
  if (std::abs(lambda1 + lambda2 + lambda3 - 1.0) > 1e-6)
    config_error("lambda1+lambda2+lambda3 must equal 1");
  if (dropout_rate < 0.0 || dropout_rate >= 1.0) config_error("dropout must be in [0,1)");
  if (eta < 0.0) config_error("eta must be >= 0");
  if (neighbor_cap < 1) config_error("neighbor_cap must be >= 1");
  if (history_cap < 1) config_error("history_cap must be >= 1");
  for (int w : mlp_hidden)
    if (w < 1) config_error("mlp_hidden widths must be >= 1");
}

namespace {

constexpr std::array<const char*, 3> kStackNames = {"item", "social", "user"};
constexpr std::array<const char*, 3> kHeadNames = {"mlp1", "mlp2", "mlp3"};

Tensor xavier(std::size_t rows, std::size_t cols, Rng& rng) {
  Tensor t = Tensor::zeros({rows, cols});
  const double limit = std::sqrt(6.0 / static_cast<double>(rows + cols));
  for (double& v : t.data) v = rng.uniform(-limit, limit);
  return t;
}

ModelParams build_params(const ModelConfig& cfg, int num_users, int num_items, Rng* rng) {
  ModelParams mp;
  mp.cfg = cfg;
  mp.num_users = num_users;
  mp.num_items = num_items;

  auto add = [&](const std::string& name, std::size_t rows, std::size_t cols,
                 bool random) -> int {
    ParamTensor p;
    p.name = name;
    if (rng && random)
      p.value = xavier(rows, cols, *rng);
    else
      p.value = Tensor::zeros({rows, cols});
    p.m = Tensor::zeros({rows, cols});
    p.v = Tensor::zeros({rows, cols});
    mp.tensors.push_back(std::move(p));
    return static_cast<int>(mp.tensors.size()) - 1;
  };
  auto add_bias = [&](const std::string& name, std::size_t n) -> int {
    ParamTensor p;
    p.name = name;
    p.value = Tensor::zeros({n});
    p.m = Tensor::zeros({n});
    p.v = Tensor::zeros({n});
    mp.tensors.push_back(std::move(p));
    return static_cast<int>(mp.tensors.size()) - 1;
  };

  const std::size_t d = static_cast<std::size_t>(cfg.embed_dim);
  mp.p = add("P", static_cast<std::size_t>(num_users), d, true);
  mp.q = add("Q", static_cast<std::size_t>(num_items), d, true);

  if (cfg.use_gnn) {
    for (std::size_t s = 0; s < 3; ++s) {
      mp.stacks[s].resize(static_cast<std::size_t>(cfg.layers));
      for (int l = 0; l < cfg.layers; ++l) {
        const std::string suffix = std::string(".") + kStackNames[s] + ".l" + std::to_string(l);
        mp.stacks[s][static_cast<std::size_t>(l)].w1 = add("W1" + suffix, d, d, true);
        mp.stacks[s][static_cast<std::size_t>(l)].w2 = add("W2" + suffix, d, d, true);
      }
    }
  }

  std::vector<std::size_t> widths;
  widths.push_back(2 * static_cast<std::size_t>(cfg.rep_width()));
  for (int w : cfg.mlp_widths()) widths.push_back(static_cast<std::size_t>(w));
  widths.push_back(1);
  for (std::size_t hIdx = 0; hIdx < 3; ++hIdx) {
    for (std::size_t k = 0; k + 1 < widths.size(); ++k) {
      const std::string base = std::string(kHeadNames[hIdx]) + "." + std::to_string(k);
      mp.heads[hIdx].w.push_back(add(base + ".W", widths[k], widths[k + 1], true));
      mp.heads[hIdx].b.push_back(add_bias(base + ".b", widths[k + 1]));
    }
  }
  return mp;
}

}  // namespace

ModelParams ModelParams::init(const ModelConfig& cfg, int num_users, int num_items,
                              std::uint64_t seed) {
  Rng rng(mix_seed(seed, 0x1c37ull));
  return build_params(cfg, num_users, num_items, &rng);
}

ModelParams ModelParams::layout(const ModelConfig& cfg, int num_users, int num_items) {
  return build_params(cfg, num_users, num_items, nullptr);
}

GraphRuntime GraphRuntime::from(const AdjacencyGraph& graph, bool normalized) {
  GraphRuntime rt;
  for (std::size_t u = 0; u < graph.neighbors.size(); ++u)
    for (int v : graph.neighbors[u]) {
      rt.src.push_back(static_cast<int>(u));
      rt.dst.push_back(v);
    }
  if (normalized) {
    rt.coef.reserve(rt.src.size());
    for (std::size_t e = 0; e < rt.src.size(); ++e) {
      const double du = static_cast<double>(graph.neighbors[static_cast<std::size_t>(rt.src[e])].size());
      const double dv = static_cast<double>(graph.neighbors[static_cast<std::size_t>(rt.dst[e])].size());
      rt.coef.push_back(1.0 / std::sqrt(std::max(du, 1.0) * std::max(dv, 1.0)));
    }
  }
  return rt;
}

ModelGraphs build_model_graphs(const GraphSet& graphs, const BipartiteIndex& full_train_index,
                               const ModelConfig& cfg) {
  ModelGraphs g;
  const bool norm = cfg.normalize_adjacency;
  if (cfg.use_item_collab_context) g.item_collab = GraphRuntime::from(graphs.item_collab, norm);
  if (cfg.use_social_context) g.social = GraphRuntime::from(graphs.social, norm);
  if (cfg.use_user_collab_context) g.user_collab = GraphRuntime::from(graphs.user_collab, norm);
  g.hist = cap_index(full_train_index, cfg.history_cap, mix_seed(cfg.cap_seed, 0xb1ull));
  g.friends = graphs.social.neighbors;
  return g;
}

std::vector<Var> leaf_params(Tape& tape, const ModelParams& params) {
  std::vector<Var> pv;
  pv.reserve(params.tensors.size());
  for (const ParamTensor& p : params.tensors) pv.push_back(tape.leaf_view(&p.value));
  return pv;
}

Var rgnn_layer(Tape& tape, Var reps, const GraphRuntime& graph, Var w1, Var w2, double slope,
               bool self_w1, int num_nodes) {
  Var self = tape.gather_rows(reps, std::vector<int>(graph.src));
  Var neigh = tape.gather_rows(reps, std::vector<int>(graph.dst));
  Var lin = tape.matmul(self_w1 ? self : neigh, w1);
  Var inter = tape.matmul(tape.mul(self, neigh), w2);
  Var msg = tape.add(lin, inter);
  if (!graph.coef.empty()) msg = tape.scale_rows_const(msg, graph.coef);
  Var agg = tape.segment_sum(msg, std::vector<int>(graph.src), num_nodes);
  return tape.leaky_relu(agg, slope);
}

RepVars propagate(Tape& tape, const ModelParams& params, const std::vector<Var>& pv,
                  const ModelGraphs& graphs) {
  const ModelConfig& cfg = params.cfg;
  if (!cfg.use_gnn || cfg.layers == 0) return {pv[static_cast<std::size_t>(params.p)],
                                               pv[static_cast<std::size_t>(params.q)]};

  Var h = pv[static_cast<std::size_t>(params.p)];
  Var z = pv[static_cast<std::size_t>(params.q)];
  Var h_star = h;
  Var z_star = z;
  for (int l = 0; l < cfg.layers; ++l) {
    const auto& sl_item = params.stacks[0][static_cast<std::size_t>(l)];
    const auto& sl_social = params.stacks[1][static_cast<std::size_t>(l)];
    const auto& sl_user = params.stacks[2][static_cast<std::size_t>(l)];
    Var z_next = rgnn_layer(tape, z, graphs.item_collab, pv[static_cast<std::size_t>(sl_item.w1)],
                            pv[static_cast<std::size_t>(sl_item.w2)], cfg.leaky_slope,
                            cfg.literal_eq2, params.num_items);
    Var h_social = rgnn_layer(tape, h, graphs.social, pv[static_cast<std::size_t>(sl_social.w1)],
                              pv[static_cast<std::size_t>(sl_social.w2)], cfg.leaky_slope, false,
                              params.num_users);
    Var h_collab = rgnn_layer(tape, h, graphs.user_collab, pv[static_cast<std::size_t>(sl_user.w1)],
                              pv[static_cast<std::size_t>(sl_user.w2)], cfg.leaky_slope, false,
                              params.num_users);
    // Both user stacks read the fused representation at the next layer.
    h = tape.add(h_social, h_collab);
    z = z_next;
    h_star = tape.concat_cols(h_star, h);
    z_star = tape.concat_cols(z_star, z);
  }
  return {h_star, z_star};
}

Var modulate(Tape& tape, Var rep, const std::vector<int>& member_rows,
             const std::vector<int>& context_rows, const std::vector<int>& seg, int num_segments,
             ModulationKind kind) {
  Var mem = tape.gather_rows(rep, member_rows);
  Var ctx = tape.gather_rows(rep, context_rows);
  if (kind == ModulationKind::MaxPool)
    return tape.segment_max(tape.mul(mem, ctx), seg, num_segments);
  Var scores = tape.row_dot(mem, ctx);
  Var weights = tape.segment_softmax(scores, seg, num_segments);
  return tape.segment_sum(tape.scale_rows(mem, weights), seg, num_segments);
}

AttentionOut friend_attention(Tape& tape, Var m_user, Var m_friend,
                              const std::vector<int>& pf_pair, int num_pairs) {
  Var mu = tape.gather_rows(m_user, std::vector<int>(pf_pair));
  Var scores = tape.row_dot(mu, m_friend);
  Var alpha = tape.segment_softmax(scores, std::vector<int>(pf_pair), num_pairs);
  Var weighted = tape.scale_rows(m_friend, alpha);
  Var x = tape.add(m_user, tape.segment_sum(weighted, std::vector<int>(pf_pair), num_pairs));
  return {x, alpha};
}

Var mlp_head(Tape& tape, const ModelParams::Head& head, const std::vector<Var>& pv, Var in,
             const ModelConfig& cfg, bool training, std::uint64_t& dropout_seed) {
  Var h = in;
  for (std::size_t k = 0; k < head.w.size(); ++k) {
    h = tape.add_bias(tape.matmul(h, pv[static_cast<std::size_t>(head.w[k])]),
                      pv[static_cast<std::size_t>(head.b[k])]);
    if (k + 1 < head.w.size()) {
      h = tape.leaky_relu(h, cfg.leaky_slope);
      h = tape.dropout(h, cfg.dropout_rate, training, dropout_seed++);
    } else {
      h = tape.sigmoid(h);
    }
  }
  return h;
}

Var combine_scores(Tape& tape, const std::vector<Var>& head_scores,
                   const std::vector<double>& lambdas) {
  if (head_scores.empty() || head_scores.size() != lambdas.size())
    numeric_error("combine_scores: need one weight per head");
  Var out = tape.scale(head_scores[0], lambdas[0]);
  for (std::size_t k = 1; k < head_scores.size(); ++k)
    out = tape.add(out, tape.scale(head_scores[k], lambdas[k]));
  return out;
}

Var forward_batch(Tape& tape, Var h_star, Var z_star, const std::vector<int>& users,
                  const std::vector<int>& items, const ModelGraphs& graphs,
                  const ModelParams& params, const std::vector<Var>& pv, bool training,
                  std::uint64_t dropout_seed) {
  const ModelConfig& cfg = params.cfg;
  if (users.size() != items.size())
    numeric_error("forward_batch: users and items lengths differ");
  const int batch = static_cast<int>(users.size());
  std::uint64_t dseed = mix_seed(dropout_seed, 0xd40ull);

  Var hu = tape.gather_rows(h_star, std::vector<int>(users));
  Var zi = tape.gather_rows(z_star, std::vector<int>(items));
  Var hu_d = tape.dropout(hu, cfg.dropout_rate, training, dseed++);
  Var zi_d = tape.dropout(zi, cfg.dropout_rate, training, dseed++);

  std::vector<Var> scores;
  std::vector<double> lambdas;
  const auto lam = cfg.effective_lambdas();

  scores.push_back(
      mlp_head(tape, params.heads[0], pv, tape.concat_cols(hu_d, zi_d), cfg, training, dseed));
  lambdas.push_back(lam[0]);

  if (cfg.use_user_interest) {
    // the user's own modulated interest per pair
    std::vector<int> mrow, mctx, mseg;
    for (int p = 0; p < batch; ++p) {
      const int u = users[static_cast<std::size_t>(p)];
      const int it = items[static_cast<std::size_t>(p)];
      for (int j : graphs.hist.items_of_user[static_cast<std::size_t>(u)]) {
        if (training && j == it) continue;
        mrow.push_back(j);
        mctx.push_back(it);
        mseg.push_back(p);
      }
    }
    Var m_u = modulate(tape, z_star, mrow, mctx, mseg, batch, cfg.modulation);

    // friends' interests, one segment per (pair, friend)
    std::vector<int> pf_pair, pf_friend;
    for (int p = 0; p < batch; ++p)
      for (int f : graphs.friends[static_cast<std::size_t>(users[static_cast<std::size_t>(p)])]) {
        pf_pair.push_back(p);
        pf_friend.push_back(f);
      }

    Var x = m_u;
    if (!pf_pair.empty()) {
      std::vector<int> frow, fctx, fseg;
      for (std::size_t t = 0; t < pf_pair.size(); ++t) {
        const int it = items[static_cast<std::size_t>(pf_pair[t])];
        for (int j : graphs.hist.items_of_user[static_cast<std::size_t>(pf_friend[t])]) {
          if (training && j == it) continue;
          frow.push_back(j);
          fctx.push_back(it);
          fseg.push_back(static_cast<int>(t));
        }
      }
      Var m_f = modulate(tape, z_star, frow, fctx, fseg, static_cast<int>(pf_pair.size()),
                         cfg.modulation);
      x = friend_attention(tape, m_u, m_f, pf_pair, batch).x;
    }
    scores.push_back(
        mlp_head(tape, params.heads[1], pv, tape.concat_cols(x, zi_d), cfg, training, dseed));
    lambdas.push_back(lam[1]);
  }

  if (cfg.use_item_attraction) {
    std::vector<int> vrow, vctx, vseg;
    for (int p = 0; p < batch; ++p) {
      const int u = users[static_cast<std::size_t>(p)];
      const int it = items[static_cast<std::size_t>(p)];
      for (int v : graphs.hist.users_of_item[static_cast<std::size_t>(it)]) {
        if (training && v == u) continue;
        vrow.push_back(v);
        vctx.push_back(u);
        vseg.push_back(p);
      }
    }
    Var y = modulate(tape, h_star, vrow, vctx, vseg, batch, cfg.modulation);
    scores.push_back(
        mlp_head(tape, params.heads[2], pv, tape.concat_cols(y, hu_d), cfg, training, dseed));
    lambdas.push_back(lam[2]);
  }

  return combine_scores(tape, scores, lambdas);
}

std::pair<Tensor, Tensor> compute_reps(const ModelParams& params, const ModelGraphs& graphs) {
  Tape tape;
  const std::vector<Var> pv = leaf_params(tape, params);
  const RepVars reps = propagate(tape, params, pv, graphs);
  return {tape.value(reps.h_star), tape.value(reps.z_star)};
}

}  // namespace dicer
