#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "dicer/adam.hpp"
#include "dicer/graphs.hpp"
#include "dicer/tape.hpp"

namespace dicer {

enum class ModulationKind { MaxPool, Attention };

struct ModelConfig {
  int embed_dim = 64;
  int layers = 3;
  double lambda1 = 1.0 / 3.0;
  double lambda2 = 1.0 / 3.0;
  double lambda3 = 1.0 / 3.0;
  double leaky_slope = 0.2;
  double dropout_rate = 0.3;
  double eta = 0.1;
  int neighbor_cap = 30;
  int history_cap = 50;
  std::uint64_t cap_seed = 0;  // seeds history capping; persisted so
                               // evaluation sees the training-time lists

  bool use_gnn = true;               // false = raw embeddings only
  bool use_user_interest = true;     // the x head
  bool use_item_attraction = true;   // the y head
  bool use_item_collab_context = true;  // alpha relation
  bool use_user_collab_context = true;  // beta relation
  bool use_social_context = true;       // mu relation (propagation only;
                                        // friend attention keeps its edges)
  ModulationKind modulation = ModulationKind::MaxPool;
  bool literal_eq2 = false;          // printed self-transform form of the
                                     // item stack
  bool normalize_adjacency = false;  // symmetric 1/sqrt(d_u d_v) messages
  std::vector<int> mlp_hidden;       // empty = {D, max(D/2,1)}

  int rep_width() const { return use_gnn ? (layers + 1) * embed_dim : embed_dim; }
  std::vector<int> mlp_widths() const;
  // Head weights with dropped heads zeroed and the rest renormalized to 1.
  std::array<double, 3> effective_lambdas() const;
  void validate() const;
};

struct ModelParams {
  ModelConfig cfg;
  int num_users = 0;
  int num_items = 0;
  AdamHyper adam;

  std::vector<ParamTensor> tensors;
  int p = -1;  // user embeddings, M x D
  int q = -1;  // item embeddings, N x D

  struct StackLayer {
    int w1 = -1, w2 = -1;
  };
  // [item-collab, social, user-collab][layer]
  std::array<std::vector<StackLayer>, 3> stacks;

  struct Head {
    std::vector<int> w, b;
  };
  std::array<Head, 3> heads;  // mlp1 (pref/attr), mlp2 (interest), mlp3 (attraction)

  static ModelParams init(const ModelConfig& cfg, int num_users, int num_items,
                          std::uint64_t seed);
  // Same structure with zero-sized values; used for checkpoint validation.
  static ModelParams layout(const ModelConfig& cfg, int num_users, int num_items);
};

// Flattened edge list for propagation, cached once per run.
struct GraphRuntime {
  std::vector<int> src, dst;
  std::vector<double> coef;  // per-edge weight, only when normalized
  static GraphRuntime from(const AdjacencyGraph& graph, bool normalized);
};

// Everything the forward pass reads besides parameters.
struct ModelGraphs {
  GraphRuntime item_collab, social, user_collab;
  BipartiteIndex hist;                     // capped history lists
  std::vector<std::vector<int>> friends;   // capped social neighbor lists
};

ModelGraphs build_model_graphs(const GraphSet& graphs, const BipartiteIndex& full_train_index,
                               const ModelConfig& cfg);

// One leaf_view per parameter tensor, indexed like params.tensors.
std::vector<Var> leaf_params(Tape& tape, const ModelParams& params);

// out_u = LeakyReLU( sum_{v in N(u)} ( W1 rep_v + W2 (rep_u . rep_v) ) ).
// With self_w1 the first transform applies to rep_u instead (the printed
// item-stack form).
Var rgnn_layer(Tape& tape, Var reps, const GraphRuntime& graph, Var w1, Var w2, double slope,
               bool self_w1, int num_nodes);

struct RepVars {
  Var h_star, z_star;
};

// Three propagation stacks with additive fusion of the user stacks, layers
// concatenated into the graph-enhanced representations.
RepVars propagate(Tape& tape, const ModelParams& params, const std::vector<Var>& pv,
                  const ModelGraphs& graphs);

// Per-dimension max (or attention-weighted sum) of member . context over
// each segment; empty segments give zero vectors.
Var modulate(Tape& tape, Var rep, const std::vector<int>& member_rows,
             const std::vector<int>& context_rows, const std::vector<int>& seg, int num_segments,
             ModulationKind kind);

struct AttentionOut {
  Var x;      // num_pairs x width
  Var alpha;  // one weight per (pair, friend) entry
};

// x = m_u + sum_f softmax_f(m_u . m_f) m_f, grouped by pf_pair.
AttentionOut friend_attention(Tape& tape, Var m_user, Var m_friend,
                              const std::vector<int>& pf_pair, int num_pairs);

Var mlp_head(Tape& tape, const ModelParams::Head& head, const std::vector<Var>& pv, Var in,
             const ModelConfig& cfg, bool training, std::uint64_t& dropout_seed);

// Weighted sum of head outputs; weights must sum to 1.
Var combine_scores(Tape& tape, const std::vector<Var>& head_scores,
                   const std::vector<double>& lambdas);

// Scores a batch of (user, item) pairs against graph-enhanced reps. With
// `training` set, the scored item is excluded from the user's and friends'
// histories and the user from the item's (the pair's label would otherwise
// leak through the modulation), and dropout is active.
Var forward_batch(Tape& tape, Var h_star, Var z_star, const std::vector<int>& users,
                  const std::vector<int>& items, const ModelGraphs& graphs,
                  const ModelParams& params, const std::vector<Var>& pv, bool training,
                  std::uint64_t dropout_seed);

// Runs propagation once and extracts plain tensors (dropout off).
std::pair<Tensor, Tensor> compute_reps(const ModelParams& params, const ModelGraphs& graphs);

}  // namespace dicer
