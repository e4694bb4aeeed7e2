#include "dicer/data.hpp"

#include <algorithm>
#include <cerrno>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

namespace dicer {

namespace {

std::vector<std::string> tokenize(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : line) {
    if (ch == ' ' || ch == '\t' || ch == ',' || ch == '\r') {
      if (!cur.empty()) out.push_back(std::move(cur)), cur.clear();
    } else {
      cur.push_back(ch);
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

bool parse_ll(const std::string& tok, long long& out) {
  errno = 0;
  char* end = nullptr;
  out = std::strtoll(tok.c_str(), &end, 10);
  return errno == 0 && end && *end == '\0' && end != tok.c_str();
}

bool parse_dbl(const std::string& tok, double& out) {
  errno = 0;
  char* end = nullptr;
  out = std::strtod(tok.c_str(), &end);
  return errno == 0 && end && *end == '\0' && end != tok.c_str();
}

bool skippable(const std::string& line) {
  for (char ch : line) {
    if (ch == '#') return true;
    if (ch != ' ' && ch != '\t' && ch != '\r') return false;
  }
  return true;  // blank
}

[[noreturn]] void line_error(const std::string& path, long long lineno, const std::string& what) {
  data_error(path + ":" + std::to_string(lineno) + ": parse error: " + what);
}

std::ifstream open_or_fail(const std::string& path) {
  std::ifstream in(path);
  if (!in) data_error("cannot open file: " + path);
  return in;
}

}  // namespace

InteractionSet parse_interactions(const std::string& path) {
  std::ifstream in = open_or_fail(path);
  InteractionSet set;
  std::set<std::pair<int, int>> seen;
  std::string line;
  long long lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (skippable(line)) continue;
    const auto toks = tokenize(line);
    if (toks.size() < 2) line_error(path, lineno, "expected `user item [rating]`");
    long long raw_user, raw_item;
    if (!parse_ll(toks[0], raw_user)) line_error(path, lineno, "bad user id '" + toks[0] + "'");
    if (!parse_ll(toks[1], raw_item)) line_error(path, lineno, "bad item id '" + toks[1] + "'");
    if (toks.size() >= 3) {
      double rating;
      if (!parse_dbl(toks[2], rating)) line_error(path, lineno, "bad rating '" + toks[2] + "'");
      if (rating <= 0.0) {
        ++set.dropped_nonpositive;
        continue;
      }
    }
    auto [uit, unew] = set.user_id.try_emplace(raw_user, set.num_users);
    if (unew) {
      set.user_raw.push_back(raw_user);
      ++set.num_users;
    }
    auto [iit, inew] = set.item_id.try_emplace(raw_item, set.num_items);
    if (inew) {
      set.item_raw.push_back(raw_item);
      ++set.num_items;
    }
    const Interaction r{uit->second, iit->second};
    if (!seen.insert({r.user, r.item}).second) {
      ++set.duplicates;
      continue;
    }
    set.interactions.push_back(r);
  }
  if (set.interactions.empty()) data_error("no interactions found in " + path);
  return set;
}

void export_interactions(const InteractionSet& set, const std::string& path) {
  std::ofstream out(path);
  if (!out) data_error("cannot write file: " + path);
  for (const Interaction& r : set.interactions)
    out << set.user_raw[static_cast<std::size_t>(r.user)] << " "
        << set.item_raw[static_cast<std::size_t>(r.item)] << "\n";
}

SocialEdges parse_social(const std::string& path, const InteractionSet& interactions) {
  std::ifstream in = open_or_fail(path);
  SocialEdges out;
  std::set<std::pair<int, int>> undirected;
  std::string line;
  long long lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (skippable(line)) continue;
    const auto toks = tokenize(line);
    if (toks.size() < 2) line_error(path, lineno, "expected `user user`");
    long long raw_a, raw_b;
    if (!parse_ll(toks[0], raw_a)) line_error(path, lineno, "bad user id '" + toks[0] + "'");
    if (!parse_ll(toks[1], raw_b)) line_error(path, lineno, "bad user id '" + toks[1] + "'");
    if (raw_a == raw_b) {
      ++out.self_loops;
      continue;
    }
    const auto ita = interactions.user_id.find(raw_a);
    const auto itb = interactions.user_id.find(raw_b);
    if (ita == interactions.user_id.end() || itb == interactions.user_id.end()) {
      ++out.unknown_user_edges;
      continue;
    }
    const int a = ita->second, b = itb->second;
    undirected.insert({std::min(a, b), std::max(a, b)});
  }
  for (const auto& [a, b] : undirected) {
    out.edges.push_back({a, b});
    out.edges.push_back({b, a});
  }
  std::sort(out.edges.begin(), out.edges.end());
  return out;
}

DatasetSplit split_dataset(const InteractionSet& all, std::uint64_t seed) {
  const std::size_t n = all.interactions.size();
  if (n < 10) data_error("need at least 10 interactions to split, have " + std::to_string(n));
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  Rng rng(mix_seed(seed, 0x5917ull));
  rng.shuffle(order);

  const std::size_t n_train = static_cast<std::size_t>(std::llround(0.8 * static_cast<double>(n)));
  const std::size_t n_val = static_cast<std::size_t>(std::llround(0.1 * static_cast<double>(n)));

  DatasetSplit split;
  split.num_users = all.num_users;
  split.num_items = all.num_items;
  split.seed = seed;
  for (std::size_t i = 0; i < n; ++i) {
    const Interaction& r = all.interactions[order[i]];
    if (i < n_train)
      split.train.push_back(r);
    else if (i < n_train + n_val)
      split.validation.push_back(r);
    else
      split.test.push_back(r);
  }
  return split;
}

EpochSamples sample_negatives(const std::vector<Interaction>& train,
                              const std::vector<std::vector<int>>& items_of_user, int num_items,
                              int ratio, int batch_size, std::uint64_t epoch_seed) {
  if (ratio < 1) config_error("neg_ratio must be >= 1, got " + std::to_string(ratio));
  if (batch_size < 1) config_error("batch_size must be >= 1, got " + std::to_string(batch_size));

  Rng rng(mix_seed(epoch_seed, 0x9a7ull));
  struct Sample {
    int user, item;
    double label;
  };
  std::vector<Sample> samples;
  samples.reserve(train.size() * static_cast<std::size_t>(1 + ratio));

  std::vector<char> degenerate_seen(items_of_user.size(), 0);
  EpochSamples out;
  for (const Interaction& r : train) {
    samples.push_back({r.user, r.item, 1.0});
    const auto& pos = items_of_user[static_cast<std::size_t>(r.user)];
    if (pos.size() >= static_cast<std::size_t>(num_items)) {
      if (!degenerate_seen[static_cast<std::size_t>(r.user)]) {
        degenerate_seen[static_cast<std::size_t>(r.user)] = 1;
        ++out.skipped_users;
      }
      continue;
    }
    for (int k = 0; k < ratio; ++k) {
      int j;
      do {
        j = static_cast<int>(rng.uniform_int(static_cast<std::uint32_t>(num_items)));
      } while (std::binary_search(pos.begin(), pos.end(), j));
      samples.push_back({r.user, j, 0.0});
    }
  }
  rng.shuffle(samples);

  for (std::size_t i = 0; i < samples.size(); i += static_cast<std::size_t>(batch_size)) {
    const std::size_t e = std::min(samples.size(), i + static_cast<std::size_t>(batch_size));
    LabeledBatch b;
    b.users.reserve(e - i);
    for (std::size_t k = i; k < e; ++k) {
      b.users.push_back(samples[k].user);
      b.items.push_back(samples[k].item);
      b.labels.push_back(samples[k].label);
    }
    out.batches.push_back(std::move(b));
  }
  return out;
}

// ---------------------------------------------------------------------------
// persistence

namespace {

void write_pairs(const std::string& path, const std::vector<Interaction>& rows) {
  std::ofstream out(path);
  if (!out) data_error("cannot write file: " + path);
  for (const Interaction& r : rows) out << r.user << " " << r.item << "\n";
}

std::vector<Interaction> read_pairs(const std::string& path) {
  std::ifstream in = open_or_fail(path);
  std::vector<Interaction> rows;
  std::string line;
  long long lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (skippable(line)) continue;
    const auto toks = tokenize(line);
    long long u, i;
    if (toks.size() != 2 || !parse_ll(toks[0], u) || !parse_ll(toks[1], i))
      line_error(path, lineno, "expected `user item`");
    rows.push_back({static_cast<int>(u), static_cast<int>(i)});
  }
  return rows;
}

}  // namespace

void save_split(const std::string& dir, const DatasetSplit& split,
                const std::vector<long long>& user_raw, const std::vector<long long>& item_raw) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  write_pairs((fs::path(dir) / "split.train.txt").string(), split.train);
  write_pairs((fs::path(dir) / "split.validation.txt").string(), split.validation);
  write_pairs((fs::path(dir) / "split.test.txt").string(), split.test);

  std::ofstream out((fs::path(dir) / "split.manifest.txt").string());
  if (!out) data_error("cannot write split manifest in " + dir);
  out << "format dicer-split 1\n";
  out << "num_users " << split.num_users << "\n";
  out << "num_items " << split.num_items << "\n";
  out << "seed " << split.seed << "\n";
  out << "train " << split.train.size() << "\n";
  out << "validation " << split.validation.size() << "\n";
  out << "test " << split.test.size() << "\n";
  for (std::size_t d = 0; d < user_raw.size(); ++d) out << "user_map " << user_raw[d] << " " << d << "\n";
  for (std::size_t d = 0; d < item_raw.size(); ++d) out << "item_map " << item_raw[d] << " " << d << "\n";
}

LoadedSplit load_split(const std::string& dir) {
  namespace fs = std::filesystem;
  const std::string manifest = (fs::path(dir) / "split.manifest.txt").string();
  std::ifstream in(manifest);
  if (!in) data_error("workdir not prepared: missing " + manifest);

  LoadedSplit out;
  long long n_train = -1, n_val = -1, n_test = -1;
  std::string line;
  long long lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (skippable(line)) continue;
    const auto toks = tokenize(line);
    if (toks.empty()) continue;
    const std::string& key = toks[0];
    auto want = [&](std::size_t n) {
      if (toks.size() != n + 1) line_error(manifest, lineno, "bad `" + key + "` entry");
    };
    if (key == "format") {
      // ignored beyond existence
    } else if (key == "num_users") {
      want(1);
      out.split.num_users = static_cast<int>(std::stoll(toks[1]));
    } else if (key == "num_items") {
      want(1);
      out.split.num_items = static_cast<int>(std::stoll(toks[1]));
    } else if (key == "seed") {
      want(1);
      out.split.seed = std::stoull(toks[1]);
    } else if (key == "train") {
      want(1);
      n_train = std::stoll(toks[1]);
    } else if (key == "validation") {
      want(1);
      n_val = std::stoll(toks[1]);
    } else if (key == "test") {
      want(1);
      n_test = std::stoll(toks[1]);
    } else if (key == "user_map" || key == "item_map") {
      want(2);
      auto& raw = key == "user_map" ? out.user_raw : out.item_raw;
      const std::size_t dense = static_cast<std::size_t>(std::stoll(toks[2]));
      if (raw.size() != dense) line_error(manifest, lineno, "id map out of order");
      raw.push_back(std::stoll(toks[1]));
    } else {
      line_error(manifest, lineno, "unknown manifest key '" + key + "'");
    }
  }

  out.split.train = read_pairs((fs::path(dir) / "split.train.txt").string());
  out.split.validation = read_pairs((fs::path(dir) / "split.validation.txt").string());
  out.split.test = read_pairs((fs::path(dir) / "split.test.txt").string());
  if (n_train != static_cast<long long>(out.split.train.size()) ||
      n_val != static_cast<long long>(out.split.validation.size()) ||
      n_test != static_cast<long long>(out.split.test.size()))
    data_error("split files in " + dir + " do not match the manifest counts");
  return out;
}

}  // namespace dicer
