#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "dicer/common.hpp"

namespace dicer {

struct Interaction {
  int user = 0;
  int item = 0;
  friend auto operator<=>(const Interaction&, const Interaction&) = default;
};

// Implicit-feedback interactions with dense 0-based ids. Raw ids from the
// source file are kept so the set can be exported and re-parsed losslessly.
struct InteractionSet {
  std::vector<Interaction> interactions;  // parse order, deduplicated
  int num_users = 0;
  int num_items = 0;
  std::vector<long long> user_raw;  // dense -> raw
  std::vector<long long> item_raw;
  std::unordered_map<long long, int> user_id;  // raw -> dense
  std::unordered_map<long long, int> item_id;
  long long duplicates = 0;
  long long dropped_nonpositive = 0;
};

// Lines are `user item [rating ...]`, whitespace or comma separated, `#`
// comments allowed. Any positive rating binarizes to 1; zero or negative
// ratings are dropped.
InteractionSet parse_interactions(const std::string& path);

// Writes `user item` lines with raw ids in parse order; re-parsing the file
// reproduces the set exactly.
void export_interactions(const InteractionSet& set, const std::string& path);

struct SocialEdges {
  // Dense user ids, symmetric closure, deduplicated, no self-loops,
  // ascending (src, dst).
  std::vector<std::pair<int, int>> edges;
  long long self_loops = 0;
  long long unknown_user_edges = 0;
};

// Lines are `user user [ignored ...]`. Self-loops and edges naming users
// absent from the interaction file are dropped (counted).
SocialEdges parse_social(const std::string& path, const InteractionSet& interactions);

struct DatasetSplit {
  std::vector<Interaction> train, validation, test;
  int num_users = 0;
  int num_items = 0;
  std::uint64_t seed = 0;

  std::size_t total() const { return train.size() + validation.size() + test.size(); }
};

// Uniform random permutation under the seed, partitioned 80/10/10 by
// interaction.
DatasetSplit split_dataset(const InteractionSet& all, std::uint64_t seed);

struct LabeledBatch {
  std::vector<int> users, items;
  std::vector<double> labels;
  std::size_t size() const { return users.size(); }
};

struct EpochSamples {
  std::vector<LabeledBatch> batches;
  long long skipped_users = 0;  // users whose positives cover every item
};

// items_of_user must hold the full (uncapped) train positives per user,
// sorted ascending; negatives are drawn uniformly from their complement.
EpochSamples sample_negatives(const std::vector<Interaction>& train,
                              const std::vector<std::vector<int>>& items_of_user, int num_items,
                              int ratio, int batch_size, std::uint64_t epoch_seed);

// Split persistence: three `user item` files (dense ids) plus a key-value
// manifest holding counts, the seed and the raw id maps.
void save_split(const std::string& dir, const DatasetSplit& split,
                const std::vector<long long>& user_raw, const std::vector<long long>& item_raw);

struct LoadedSplit {
  DatasetSplit split;
  std::vector<long long> user_raw, item_raw;
};

LoadedSplit load_split(const std::string& dir);

}  // namespace dicer
