#include "dicer/graphs.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>

namespace dicer {

BipartiteIndex build_bipartite_index(const std::vector<Interaction>& train, int num_users,
                                     int num_items) {
  BipartiteIndex idx;
  idx.items_of_user.resize(static_cast<std::size_t>(num_users));
  idx.users_of_item.resize(static_cast<std::size_t>(num_items));
  for (const Interaction& r : train) {
    idx.items_of_user[static_cast<std::size_t>(r.user)].push_back(r.item);
    idx.users_of_item[static_cast<std::size_t>(r.item)].push_back(r.user);
  }
  for (auto& v : idx.items_of_user) std::sort(v.begin(), v.end());
  for (auto& v : idx.users_of_item) std::sort(v.begin(), v.end());
  return idx;
}

double collab_similarity(int a, int b, const BipartiteIndex& index, Side side) {
  const auto& hist = side == Side::User ? index.items_of_user : index.users_of_item;
  const auto& ha = hist[static_cast<std::size_t>(a)];
  const auto& hb = hist[static_cast<std::size_t>(b)];
  if (ha.empty() || hb.empty()) return 0.0;
  std::size_t i = 0, j = 0, common = 0;
  while (i < ha.size() && j < hb.size()) {
    if (ha[i] < hb[j])
      ++i;
    else if (ha[i] > hb[j])
      ++j;
    else
      ++common, ++i, ++j;
  }
  return static_cast<double>(common) /
         std::sqrt(static_cast<double>(ha.size()) * static_cast<double>(hb.size()));
}

std::size_t AdjacencyGraph::num_edges() const {
  std::size_t n = 0;
  for (const auto& v : neighbors) n += v.size();
  return n;
}

AdjacencyGraph build_social_graph(const SocialEdges& edges, int num_users) {
  AdjacencyGraph g;
  g.kind = GraphKind::Social;
  g.neighbors.resize(static_cast<std::size_t>(num_users));
  for (const auto& [a, b] : edges.edges) g.neighbors[static_cast<std::size_t>(a)].push_back(b);
  for (auto& v : g.neighbors) std::sort(v.begin(), v.end());
  return g;
}

AdjacencyGraph build_collab_graph(const BipartiteIndex& index, Side side, double eta) {
  if (eta < 0.0) config_error("eta must be >= 0, got " + std::to_string(eta));
  const auto& hist = side == Side::User ? index.items_of_user : index.users_of_item;
  const auto& inverted = side == Side::User ? index.users_of_item : index.items_of_user;
  const std::size_t n = hist.size();

  AdjacencyGraph g;
  g.kind = side == Side::User ? GraphKind::UserCollab : GraphKind::ItemCollab;
  g.neighbors.resize(n);

  // Candidates are nodes sharing at least one history element (any other
  // pair has sim = 0 <= eta). Co-occurrence counts give the intersection
  // size exactly.
  std::vector<int> count(n, 0);
  std::vector<int> touched;
  for (std::size_t a = 0; a < n; ++a) {
    touched.clear();
    for (int h : hist[a]) {
      for (int b : inverted[static_cast<std::size_t>(h)]) {
        if (static_cast<std::size_t>(b) <= a) continue;
        if (count[static_cast<std::size_t>(b)] == 0) touched.push_back(b);
        ++count[static_cast<std::size_t>(b)];
      }
    }
    const double size_a = static_cast<double>(hist[a].size());
    for (int b : touched) {
      const double sim = static_cast<double>(count[static_cast<std::size_t>(b)]) /
                         std::sqrt(size_a * static_cast<double>(hist[static_cast<std::size_t>(b)].size()));
      if (sim > eta) {
        g.neighbors[a].push_back(b);
        g.neighbors[static_cast<std::size_t>(b)].push_back(static_cast<int>(a));
      }
      count[static_cast<std::size_t>(b)] = 0;
    }
  }
  for (auto& v : g.neighbors) std::sort(v.begin(), v.end());
  return g;
}

namespace {

std::vector<int> cap_list(const std::vector<int>& xs, int cap, std::uint64_t seed) {
  if (static_cast<int>(xs.size()) <= cap) return xs;
  std::vector<std::size_t> idx(xs.size());
  std::iota(idx.begin(), idx.end(), 0u);
  Rng rng(seed);
  for (int k = 0; k < cap; ++k) {
    const std::size_t j =
        static_cast<std::size_t>(k) +
        rng.uniform_int(static_cast<std::uint32_t>(xs.size() - static_cast<std::size_t>(k)));
    std::swap(idx[static_cast<std::size_t>(k)], idx[j]);
  }
  std::vector<int> kept;
  kept.reserve(static_cast<std::size_t>(cap));
  for (int k = 0; k < cap; ++k) kept.push_back(xs[idx[static_cast<std::size_t>(k)]]);
  std::sort(kept.begin(), kept.end());
  return kept;
}

}  // namespace

AdjacencyGraph cap_neighbors(const AdjacencyGraph& graph, int cap, std::uint64_t seed) {
  if (cap < 1) config_error("neighbor cap must be >= 1, got " + std::to_string(cap));
  AdjacencyGraph out;
  out.kind = graph.kind;
  out.neighbors.resize(graph.neighbors.size());
  for (std::size_t u = 0; u < graph.neighbors.size(); ++u)
    out.neighbors[u] = cap_list(graph.neighbors[u], cap, mix_seed(seed, u));
  return out;
}

BipartiteIndex cap_index(const BipartiteIndex& index, int cap, std::uint64_t seed) {
  if (cap < 1) config_error("history cap must be >= 1, got " + std::to_string(cap));
  BipartiteIndex out;
  out.items_of_user.resize(index.items_of_user.size());
  out.users_of_item.resize(index.users_of_item.size());
  for (std::size_t u = 0; u < index.items_of_user.size(); ++u)
    out.items_of_user[u] = cap_list(index.items_of_user[u], cap, mix_seed(seed, 0x11ull, u));
  for (std::size_t i = 0; i < index.users_of_item.size(); ++i)
    out.users_of_item[i] = cap_list(index.users_of_item[i], cap, mix_seed(seed, 0x22ull, i));
  return out;
}

const char* graph_kind_name(GraphKind kind) {
  switch (kind) {
    case GraphKind::Social: return "social";
    case GraphKind::UserCollab: return "user-collab";
    case GraphKind::ItemCollab: return "item-collab";
  }
  return "?";
}

void save_graph(const std::string& base_path, const AdjacencyGraph& graph, int num_nodes,
                const GraphMeta& meta) {
  {
    std::ofstream out(base_path + ".edges");
    if (!out) data_error("cannot write file: " + base_path + ".edges");
    for (std::size_t u = 0; u < graph.neighbors.size(); ++u)
      for (int v : graph.neighbors[u]) out << u << " " << v << "\n";
  }
  std::ofstream out(base_path + ".manifest.txt");
  if (!out) data_error("cannot write file: " + base_path + ".manifest.txt");
  out << "format dicer-graph 1\n";
  out << "kind " << graph_kind_name(graph.kind) << "\n";
  out << "eta " << meta.eta << "\n";
  out << "cap " << meta.cap << "\n";
  out << "seed " << meta.seed << "\n";
  out << "nodes " << num_nodes << "\n";
  out << "edges " << graph.num_edges() << "\n";
}

AdjacencyGraph load_graph(const std::string& base_path, GraphMeta* meta_out) {
  std::ifstream mf(base_path + ".manifest.txt");
  if (!mf) data_error("cannot open graph manifest: " + base_path + ".manifest.txt");
  AdjacencyGraph g;
  GraphMeta meta;
  long long nodes = -1, edges = -1;
  std::string key;
  while (mf >> key) {
    if (key == "format") {
      std::string name;
      int version;
      mf >> name >> version;
    } else if (key == "kind") {
      std::string k;
      mf >> k;
      if (k == "social")
        g.kind = GraphKind::Social;
      else if (k == "user-collab")
        g.kind = GraphKind::UserCollab;
      else if (k == "item-collab")
        g.kind = GraphKind::ItemCollab;
      else
        data_error("unknown graph kind '" + k + "' in " + base_path);
      meta.kind = g.kind;
    } else if (key == "eta") {
      mf >> meta.eta;
    } else if (key == "cap") {
      mf >> meta.cap;
    } else if (key == "seed") {
      mf >> meta.seed;
    } else if (key == "nodes") {
      mf >> nodes;
    } else if (key == "edges") {
      mf >> edges;
    } else {
      data_error("unknown graph manifest key '" + key + "' in " + base_path);
    }
  }
  if (nodes < 0) data_error("graph manifest missing node count: " + base_path);
  g.neighbors.resize(static_cast<std::size_t>(nodes));

  std::ifstream ef(base_path + ".edges");
  if (!ef) data_error("cannot open graph edges: " + base_path + ".edges");
  long long u, v, count = 0;
  while (ef >> u >> v) {
    if (u < 0 || u >= nodes || v < 0 || v >= nodes)
      data_error("edge out of range in " + base_path + ".edges");
    g.neighbors[static_cast<std::size_t>(u)].push_back(static_cast<int>(v));
    ++count;
  }
  if (edges >= 0 && count != edges)
    data_error("edge count in " + base_path + ".edges does not match the manifest");
  if (meta_out) *meta_out = meta;
  return g;
}

}  // namespace dicer
