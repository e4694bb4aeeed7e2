#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dicer/data.hpp"

namespace dicer {

// Train-split interaction index in both directions, lists sorted ascending.
struct BipartiteIndex {
  std::vector<std::vector<int>> items_of_user;
  std::vector<std::vector<int>> users_of_item;
};

BipartiteIndex build_bipartite_index(const std::vector<Interaction>& train, int num_users,
                                     int num_items);

enum class Side { User, Item };

// |H(a) n H(b)| / sqrt(|H(a)| * |H(b)|); 0 when either history is empty.
double collab_similarity(int a, int b, const BipartiteIndex& index, Side side);

enum class GraphKind { Social, UserCollab, ItemCollab };

struct AdjacencyGraph {
  GraphKind kind = GraphKind::Social;
  std::vector<std::vector<int>> neighbors;  // sorted ascending per node
  std::size_t num_edges() const;            // directed count
};

AdjacencyGraph build_social_graph(const SocialEdges& edges, int num_users);

// Edge (a,b) present iff collab_similarity(a,b) > eta (strict). Uses
// co-occurrence counting but is exact: the result equals brute-force
// pairwise thresholding.
AdjacencyGraph build_collab_graph(const BipartiteIndex& index, Side side, double eta);

// Nodes with more than `cap` neighbors keep a seeded uniform subset of size
// cap. Capping is per-node fan-in; symmetry is not re-enforced.
AdjacencyGraph cap_neighbors(const AdjacencyGraph& graph, int cap, std::uint64_t seed);

// Same capping applied to both directions of a history index.
BipartiteIndex cap_index(const BipartiteIndex& index, int cap, std::uint64_t seed);

struct GraphSet {
  AdjacencyGraph social, user_collab, item_collab;
};

struct GraphMeta {
  GraphKind kind = GraphKind::Social;
  double eta = 0.0;
  int cap = 0;
  std::uint64_t seed = 0;
};

const char* graph_kind_name(GraphKind kind);

// Persists `<base>.edges` (line-oriented `node neighbor`) and
// `<base>.manifest.txt` (kind, eta, cap, seed, node/edge counts).
void save_graph(const std::string& base_path, const AdjacencyGraph& graph, int num_nodes,
                const GraphMeta& meta);
AdjacencyGraph load_graph(const std::string& base_path, GraphMeta* meta_out = nullptr);

}  // namespace dicer
