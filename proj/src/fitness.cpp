#include "evost/fitness.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <set>

#include "evost/common.hpp"
#include "evost/estimators.hpp"

namespace evost {

namespace {

// ---- 128-bit column digest (MurmurHash3 x64/128) --------------------------
// Keys the fitness cache.  The hashed bytes fully determine every cached
// quantity, so a cache hit can only disagree with a recompute on a 128-bit
// collision (~1e-38 per pair); that risk is treated as zero.

struct Digest {
  uint64_t h1 = 0;
  uint64_t h2 = 0;
  bool operator==(const Digest&) const = default;
};

struct DigestHasher {
  size_t operator()(const Digest& d) const {
    return static_cast<size_t>(d.h1 ^ (d.h2 * 0x9E3779B97F4A7C15ull));
  }
};

inline uint64_t rotl64(uint64_t x, int r) { return (x << r) | (x >> (64 - r)); }

inline uint64_t fmix64(uint64_t k) {
  k ^= k >> 33;
  k *= 0xFF51AFD7ED558CCDull;
  k ^= k >> 33;
  k *= 0xC4CEB9FE1A85EC53ull;
  k ^= k >> 33;
  return k;
}

Digest murmur3_128(const uint8_t* data, size_t len, uint64_t seed) {
  const size_t nblocks = len / 16;
  uint64_t h1 = seed;
  uint64_t h2 = seed;
  const uint64_t c1 = 0x87C37B91114253D5ull;
  const uint64_t c2 = 0x4CF5AD432745937Full;

  for (size_t i = 0; i < nblocks; ++i) {
    uint64_t k1, k2;
    std::memcpy(&k1, data + i * 16, 8);
    std::memcpy(&k2, data + i * 16 + 8, 8);
    k1 *= c1;
    k1 = rotl64(k1, 31);
    k1 *= c2;
    h1 ^= k1;
    h1 = rotl64(h1, 27);
    h1 += h2;
    h1 = h1 * 5 + 0x52DCE729;
    k2 *= c2;
    k2 = rotl64(k2, 33);
    k2 *= c1;
    h2 ^= k2;
    h2 = rotl64(h2, 31);
    h2 += h1;
    h2 = h2 * 5 + 0x38495AB5;
  }

  const uint8_t* tail = data + nblocks * 16;
  uint64_t k1 = 0, k2 = 0;
  switch (len & 15) {
    case 15: k2 ^= uint64_t(tail[14]) << 48; [[fallthrough]];
    case 14: k2 ^= uint64_t(tail[13]) << 40; [[fallthrough]];
    case 13: k2 ^= uint64_t(tail[12]) << 32; [[fallthrough]];
    case 12: k2 ^= uint64_t(tail[11]) << 24; [[fallthrough]];
    case 11: k2 ^= uint64_t(tail[10]) << 16; [[fallthrough]];
    case 10: k2 ^= uint64_t(tail[9]) << 8; [[fallthrough]];
    case 9:
      k2 ^= uint64_t(tail[8]);
      k2 *= c2;
      k2 = rotl64(k2, 33);
      k2 *= c1;
      h2 ^= k2;
      [[fallthrough]];
    case 8: k1 ^= uint64_t(tail[7]) << 56; [[fallthrough]];
    case 7: k1 ^= uint64_t(tail[6]) << 48; [[fallthrough]];
    case 6: k1 ^= uint64_t(tail[5]) << 40; [[fallthrough]];
    case 5: k1 ^= uint64_t(tail[4]) << 32; [[fallthrough]];
    case 4: k1 ^= uint64_t(tail[3]) << 24; [[fallthrough]];
    case 3: k1 ^= uint64_t(tail[2]) << 16; [[fallthrough]];
    case 2: k1 ^= uint64_t(tail[1]) << 8; [[fallthrough]];
    case 1:
      k1 ^= uint64_t(tail[0]);
      k1 *= c1;
      k1 = rotl64(k1, 31);
      k1 *= c2;
      h1 ^= k1;
      break;
    default: break;
  }

  h1 ^= uint64_t(len);
  h2 ^= uint64_t(len);
  h1 += h2;
  h2 += h1;
  h1 = fmix64(h1);
  h2 = fmix64(h2);
  h1 += h2;
  h2 += h1;
  return {h1, h2};
}

std::string hex_digest(const Digest& d) {
  static const char* k = "0123456789abcdef";
  std::string out(32, '0');
  for (int i = 0; i < 16; ++i) {
    uint64_t word = i < 8 ? d.h1 : d.h2;
    int shift = 56 - 8 * (i % 8);
    uint8_t byte = static_cast<uint8_t>(word >> shift);
    out[2 * i] = k[byte >> 4];
    out[2 * i + 1] = k[byte & 0xF];
  }
  return out;
}

std::string digest_of_bytes(const std::vector<uint8_t>& buf) {
  return hex_digest(murmur3_128(buf.data(), buf.size(), 0x5354524154414C4Bull));
}

size_t min_leaf_count(double fraction, size_t n) {
  double m = std::ceil(fraction * static_cast<double>(n));
  if (!(m >= 1.0)) return 1;
  return static_cast<size_t>(m);
}

// First-appearance relabeling of a leaf assignment; two assignments encode
// the same patient partition iff the relabeled strings are equal.
std::string relabel_partition(std::span<const uint32_t> leaf_of_row, size_t n_leaves) {
  std::vector<int> remap(n_leaves, -1);
  int next = 0;
  std::string out(leaf_of_row.size(), '\0');
  for (size_t i = 0; i < leaf_of_row.size(); ++i) {
    int& slot = remap[leaf_of_row[i]];
    if (slot < 0) slot = next++;
    out[i] = static_cast<char>(slot);
  }
  return out;
}

// ---- decoded shape of an evolved tree over precomputed binary columns -----
// Mirrors decode_evolved: GP tree k gates heap position k, rows route left on
// a set bit, nodes leaving either side under min_samples collapse to leaves.

struct BitTree {
  std::vector<uint8_t> kind;  // per heap position: 0 unused, 1 internal, 2 leaf
  std::vector<uint32_t> leaf_of_pos;
  std::vector<std::vector<size_t>> leaf_rows;  // global row ids per leaf
  std::vector<size_t> internal_positions;      // ascending

  uint32_t route(const std::vector<std::vector<uint8_t>>& cols, size_t row) const {
    size_t pos = 0;
    while (kind[pos] == 1) pos = cols[pos][row] ? 2 * pos + 1 : 2 * pos + 2;
    return leaf_of_pos[pos];
  }
};

BitTree decode_bits(const std::vector<std::vector<uint8_t>>& cols, int depth,
                    std::vector<size_t> rows, size_t min_samples) {
  size_t total = (size_t{1} << (depth + 1)) - 1;
  BitTree t;
  t.kind.assign(total, 0);
  t.leaf_of_pos.assign(total, 0);

  struct Item {
    size_t pos;
    int level;
    std::vector<size_t> rows;
  };
  std::vector<Item> work;
  work.push_back({0, 0, std::move(rows)});
  while (!work.empty()) {
    Item it = std::move(work.back());
    work.pop_back();
    bool leaf = it.level == depth;
    std::vector<size_t> left, right;
    if (!leaf) {
      const auto& col = cols[it.pos];
      for (size_t r : it.rows) (col[r] ? left : right).push_back(r);
      leaf = left.size() < min_samples || right.size() < min_samples;
    }
    if (leaf) {
      t.kind[it.pos] = 2;
      t.leaf_of_pos[it.pos] = static_cast<uint32_t>(t.leaf_rows.size());
      t.leaf_rows.push_back(std::move(it.rows));
      continue;
    }
    t.kind[it.pos] = 1;
    t.internal_positions.push_back(it.pos);
    work.push_back({2 * it.pos + 1, it.level + 1, std::move(left)});
    work.push_back({2 * it.pos + 2, it.level + 1, std::move(right)});
  }
  std::sort(t.internal_positions.begin(), t.internal_positions.end());
  return t;
}

}  // namespace

long long max_complexity(size_t k_trees, int template_depth) {
  return static_cast<long long>(k_trees) *
         static_cast<long long>(Genotype::positions_for_depth(template_depth));
}

// ---- evaluator internals ---------------------------------------------------

struct FitnessEvaluator::SplitWork {
  std::vector<size_t> train;
  std::vector<size_t> test;
  std::vector<double> train_times;
  std::vector<uint8_t> train_events;
  std::vector<double> test_times;
  std::vector<uint8_t> test_events;
  size_t min_samples = 1;
  bool degenerate = false;
  std::unique_ptr<GroupedBrierContext> context;
};

struct FitnessEvaluator::Impl {
  std::vector<SplitWork> splits;

  struct EvolvedEntry {
    bool scored = false;
    std::vector<double> per_split;
    std::vector<size_t> ref_internal;
    std::string sig_digest;
  };
  struct GfcEntry {
    bool scored = false;
    std::vector<double> per_split;
    std::vector<std::vector<uint32_t>> used_per_split;
    std::string sig_digest;
  };

  mutable std::mutex mu;
  bool cache_enabled = true;
  uint64_t hits = 0;
  uint64_t misses = 0;
  std::unordered_map<Digest, EvolvedEntry, DigestHasher> evolved_cache;
  std::unordered_map<Digest, GfcEntry, DigestHasher> gfc_cache;
};

FitnessEvaluator::FitnessEvaluator(FitnessConfig cfg, SurvivalDataset internal, SplitPlan plan)
    : cfg_(cfg),
      internal_(std::move(internal)),
      plan_(std::move(plan)),
      impl_(std::make_unique<Impl>()) {
  if (cfg_.st_depth < 0 || cfg_.st_depth > 6) {
    throw ConfigError("survival-tree depth must lie in [0, 6]");
  }
  if (cfg_.mode == FitnessMode::Evolved && cfg_.st_depth < 1) {
    throw ConfigError("evolved mode needs survival-tree depth >= 1");
  }
  if (!(cfg_.min_samples_leaf_fraction > 0.0) || cfg_.min_samples_leaf_fraction >= 1.0) {
    throw ConfigError("min_samples_leaf_fraction must lie in (0, 1)");
  }
  if (plan_.splits.empty()) throw ConfigError("split plan is empty");

  ref_min_samples_ = min_leaf_count(cfg_.min_samples_leaf_fraction, internal_.n());

  size_t n = internal_.n();
  impl_->splits.resize(plan_.splits.size());
  for (size_t s = 0; s < plan_.splits.size(); ++s) {
    SplitWork& w = impl_->splits[s];
    w.train = plan_.splits[s].train;
    w.test = plan_.splits[s].test;
    for (size_t r : w.train) {
      if (r >= n) throw ConfigError("split plan references a row outside the cohort");
      w.train_times.push_back(internal_.times[r]);
      w.train_events.push_back(internal_.events[r]);
    }
    for (size_t r : w.test) {
      if (r >= n) throw ConfigError("split plan references a row outside the cohort");
      w.test_times.push_back(internal_.times[r]);
      w.test_events.push_back(internal_.events[r]);
    }
    w.min_samples = min_leaf_count(cfg_.min_samples_leaf_fraction, w.train.size());
    try {
      w.context = std::make_unique<GroupedBrierContext>(
          SurvSpan{w.train_times, w.train_events}, SurvSpan{w.test_times, w.test_events});
    } catch (const RangeError&) {
      // No usable scoring grid: every candidate gets the worst score here.
      w.degenerate = true;
    }
  }
}

FitnessEvaluator::~FitnessEvaluator() = default;

size_t FitnessEvaluator::degenerate_split_count() const {
  size_t c = 0;
  for (const auto& w : impl_->splits) c += w.degenerate ? 1 : 0;
  return c;
}

void FitnessEvaluator::set_cache_enabled(bool on) {
  std::lock_guard<std::mutex> lock(impl_->mu);
  impl_->cache_enabled = on;
}

uint64_t FitnessEvaluator::cache_hits() const {
  std::lock_guard<std::mutex> lock(impl_->mu);
  return impl_->hits;
}

uint64_t FitnessEvaluator::cache_misses() const {
  std::lock_guard<std::mutex> lock(impl_->mu);
  return impl_->misses;
}

namespace {

std::vector<std::vector<uint8_t>> evolved_columns(const MultiGenotype& mg,
                                                  const SurvivalDataset& data) {
  EvalWorkspace ws;
  std::vector<std::vector<uint8_t>> cols(mg.trees.size());
  for (size_t k = 0; k < mg.trees.size(); ++k) {
    binary_column(mg.trees[k], data.columns, data.n(), cols[k], ws);
  }
  return cols;
}

Digest evolved_key(const std::vector<std::vector<uint8_t>>& cols, size_t n) {
  std::vector<uint8_t> buf;
  buf.reserve(16 + cols.size() * n);
  uint64_t header[2] = {cols.size(), n};
  buf.resize(16);
  std::memcpy(buf.data(), header, 16);
  for (const auto& c : cols) buf.insert(buf.end(), c.begin(), c.end());
  return murmur3_128(buf.data(), buf.size(), 0xB17C015Eull);
}

std::vector<std::vector<double>> gfc_columns(const MultiGenotype& mg,
                                             const SurvivalDataset& data, bool binary) {
  EvalWorkspace ws;
  std::vector<std::vector<double>> cols(mg.trees.size());
  std::vector<uint8_t> bits;
  for (size_t k = 0; k < mg.trees.size(); ++k) {
    if (binary) {
      binary_column(mg.trees[k], data.columns, data.n(), bits, ws);
      cols[k].assign(bits.begin(), bits.end());
    } else {
      cols[k].resize(data.n());
      evaluate_column(mg.trees[k], data.columns, data.n(), cols[k], ws);
    }
  }
  return cols;
}

Digest gfc_key(const std::vector<std::vector<double>>& cols, size_t n) {
  std::vector<uint8_t> buf;
  buf.reserve(16 + cols.size() * n * 8);
  uint64_t header[2] = {cols.size(), n};
  buf.resize(16);
  std::memcpy(buf.data(), header, 16);
  for (const auto& c : cols) {
    size_t off = buf.size();
    buf.resize(off + c.size() * 8);
    std::memcpy(buf.data() + off, c.data(), c.size() * 8);
  }
  return murmur3_128(buf.data(), buf.size(), 0x6E756D45ull);
}

// Leaf assignment over the full cohort, one byte per row.
std::string bit_tree_signature(const BitTree& t, size_t n) {
  std::vector<uint32_t> leaf_of_row(n, 0);
  for (uint32_t li = 0; li < t.leaf_rows.size(); ++li) {
    for (size_t r : t.leaf_rows[li]) leaf_of_row[r] = li;
  }
  return relabel_partition(leaf_of_row, t.leaf_rows.size());
}

// Routes rows through a greedy tree using the evaluated feature columns
// (global row ids); equivalent to leaf_for_row on raw covariates because the
// split stores the originating column.
uint32_t route_by_columns(const SurvivalTree& tree,
                          const std::vector<std::vector<double>>& cols,
                          const std::vector<uint32_t>& leaf_index_of_pos, size_t row) {
  size_t pos = 0;
  while (tree.nodes[pos].kind == TreeNode::Kind::Internal) {
    const Split& sp = tree.nodes[pos].split;
    double v = cols[sp.column][row];
    pos = v <= sp.threshold ? 2 * pos + 1 : 2 * pos + 2;
  }
  return leaf_index_of_pos[pos];
}

}  // namespace

EvaluatedFitness FitnessEvaluator::evaluate(const MultiGenotype& mg) const {
  if (mg.trees.empty()) throw ConfigError("empty multi-tree genotype");
  size_t n = internal_.n();

  if (cfg_.mode == FitnessMode::Evolved) {
    size_t expected = (size_t{1} << cfg_.st_depth) - 1;
    if (mg.trees.size() != expected) {
      throw ConfigError("evolved mode needs 2^depth - 1 GP trees");
    }
    auto cols = evolved_columns(mg, internal_);
    Digest key = evolved_key(cols, n);

    Impl::EvolvedEntry entry;
    bool have_entry = false;
    bool cache_on;
    {
      std::lock_guard<std::mutex> lock(impl_->mu);
      cache_on = impl_->cache_enabled;
      if (cache_on) {
        auto it = impl_->evolved_cache.find(key);
        if (it != impl_->evolved_cache.end()) {
          entry = it->second;
          have_entry = true;
        }
        if (have_entry && entry.scored) {
          ++impl_->hits;
        } else {
          ++impl_->misses;
        }
      }
    }

    if (!have_entry) {
      std::vector<size_t> all(n);
      for (size_t i = 0; i < n; ++i) all[i] = i;
      BitTree ref = decode_bits(cols, cfg_.st_depth, std::move(all), ref_min_samples_);
      entry.ref_internal = ref.internal_positions;
      std::string sig = bit_tree_signature(ref, n);
      entry.sig_digest = digest_of_bytes(std::vector<uint8_t>(sig.begin(), sig.end()));
    }
    if (!entry.scored) {
      entry.per_split.clear();
      for (const SplitWork& w : impl_->splits) {
        if (w.degenerate) {
          entry.per_split.push_back(1.0);
          continue;
        }
        BitTree t = decode_bits(cols, cfg_.st_depth, w.train, w.min_samples);
        std::vector<StepFunction> curves(t.leaf_rows.size());
        std::vector<double> times;
        std::vector<uint8_t> ev;
        for (size_t li = 0; li < t.leaf_rows.size(); ++li) {
          times.clear();
          ev.clear();
          for (size_t r : t.leaf_rows[li]) {
            times.push_back(internal_.times[r]);
            ev.push_back(internal_.events[r]);
          }
          curves[li] = kaplan_meier(times, ev);
        }
        std::vector<uint32_t> curve_of(w.test.size());
        for (size_t i = 0; i < w.test.size(); ++i) curve_of[i] = t.route(cols, w.test[i]);
        entry.per_split.push_back(w.context->integrated(curves, curve_of));
      }
      entry.scored = true;
      if (cache_on) {
        std::lock_guard<std::mutex> lock(impl_->mu);
        impl_->evolved_cache[key] = entry;
      }
    }

    FitnessValue v;
    v.per_split_ibs = entry.per_split;
    v.ibs_iqm = interquartile_mean(v.per_split_ibs);
    v.complexity = 0;
    for (size_t pos : entry.ref_internal) v.complexity += active_size(mg.trees[pos]);
    return {std::move(v), entry.sig_digest};
  }

  // gfc_greedy
  auto cols = gfc_columns(mg, internal_, cfg_.binary_features);
  Digest key = gfc_key(cols, n);

  Impl::GfcEntry entry;
  bool have_entry = false;
  bool cache_on;
  {
    std::lock_guard<std::mutex> lock(impl_->mu);
    cache_on = impl_->cache_enabled;
    if (cache_on) {
      auto it = impl_->gfc_cache.find(key);
      if (it != impl_->gfc_cache.end()) {
        entry = it->second;
        have_entry = true;
      }
      if (have_entry && entry.scored) {
        ++impl_->hits;
      } else {
        ++impl_->misses;
      }
    }
  }

  if (!have_entry) {
    FeatureMatrix fm;
    fm.binary = cfg_.binary_features;
    fm.columns = cols;
    for (size_t k = 0; k < mg.trees.size(); ++k) fm.names.push_back("f" + std::to_string(k));
    SurvivalTree ref = greedy_induce(SurvSpan{internal_.times, internal_.events}, fm,
                                     cfg_.st_depth, ref_min_samples_);
    auto leaves = ref.leaf_positions();
    std::vector<uint32_t> leaf_index_of_pos(ref.nodes.size(), 0);
    for (uint32_t li = 0; li < leaves.size(); ++li) leaf_index_of_pos[leaves[li]] = li;
    std::vector<uint32_t> leaf_of_row(n);
    for (size_t r = 0; r < n; ++r) {
      leaf_of_row[r] = route_by_columns(ref, cols, leaf_index_of_pos, r);
    }
    std::string sig = relabel_partition(leaf_of_row, leaves.size());
    entry.sig_digest = digest_of_bytes(std::vector<uint8_t>(sig.begin(), sig.end()));
  }
  if (!entry.scored) {
    entry.per_split.clear();
    entry.used_per_split.clear();
    FeatureMatrix fm;
    fm.binary = cfg_.binary_features;
    for (size_t k = 0; k < mg.trees.size(); ++k) fm.names.push_back("f" + std::to_string(k));
    for (const SplitWork& w : impl_->splits) {
      if (w.degenerate) {
        entry.per_split.push_back(1.0);
        entry.used_per_split.emplace_back();
        continue;
      }
      fm.columns.assign(cols.size(), {});
      for (size_t k = 0; k < cols.size(); ++k) {
        fm.columns[k].resize(w.train.size());
        for (size_t i = 0; i < w.train.size(); ++i) fm.columns[k][i] = cols[k][w.train[i]];
      }
      SurvivalTree tree = greedy_induce(SurvSpan{w.train_times, w.train_events}, fm,
                                        cfg_.st_depth, w.min_samples);
      auto leaves = tree.leaf_positions();
      std::vector<uint32_t> leaf_index_of_pos(tree.nodes.size(), 0);
      for (uint32_t li = 0; li < leaves.size(); ++li) leaf_index_of_pos[leaves[li]] = li;
      std::vector<StepFunction> curves(leaves.size());
      for (uint32_t li = 0; li < leaves.size(); ++li) {
        curves[li] = tree.nodes[leaves[li]].survival;
      }
      std::vector<uint32_t> curve_of(w.test.size());
      for (size_t i = 0; i < w.test.size(); ++i) {
        curve_of[i] = route_by_columns(tree, cols, leaf_index_of_pos, w.test[i]);
      }
      entry.per_split.push_back(w.context->integrated(curves, curve_of));
      std::set<uint32_t> used;
      for (size_t pos : tree.internal_positions()) used.insert(tree.nodes[pos].split.column);
      entry.used_per_split.emplace_back(used.begin(), used.end());
    }
    entry.scored = true;
    if (cache_on) {
      std::lock_guard<std::mutex> lock(impl_->mu);
      impl_->gfc_cache[key] = entry;
    }
  }

  FitnessValue v;
  v.per_split_ibs = entry.per_split;
  v.ibs_iqm = interquartile_mean(v.per_split_ibs);
  std::set<uint32_t> union_cols;
  for (const auto& used : entry.used_per_split) union_cols.insert(used.begin(), used.end());
  std::set<std::string> seen;
  v.complexity = 0;
  for (uint32_t col : union_cols) {
    if (seen.insert(to_expression_string(mg.trees[col])).second) {
      v.complexity += active_size(mg.trees[col]);
    }
  }
  return {std::move(v), entry.sig_digest};
}

std::string FitnessEvaluator::signature(const MultiGenotype& mg) const {
  if (mg.trees.empty()) throw ConfigError("empty multi-tree genotype");
  size_t n = internal_.n();

  if (cfg_.mode == FitnessMode::Evolved) {
    auto cols = evolved_columns(mg, internal_);
    Digest key = evolved_key(cols, n);
    {
      std::lock_guard<std::mutex> lock(impl_->mu);
      if (impl_->cache_enabled) {
        auto it = impl_->evolved_cache.find(key);
        if (it != impl_->evolved_cache.end()) {
          ++impl_->hits;
          return it->second.sig_digest;
        }
        ++impl_->misses;
      }
    }
    std::vector<size_t> all(n);
    for (size_t i = 0; i < n; ++i) all[i] = i;
    BitTree ref = decode_bits(cols, cfg_.st_depth, std::move(all), ref_min_samples_);
    std::string sig = bit_tree_signature(ref, n);
    Impl::EvolvedEntry entry;
    entry.ref_internal = ref.internal_positions;
    entry.sig_digest = digest_of_bytes(std::vector<uint8_t>(sig.begin(), sig.end()));
    std::string out = entry.sig_digest;
    std::lock_guard<std::mutex> lock(impl_->mu);
    if (impl_->cache_enabled) impl_->evolved_cache.emplace(key, std::move(entry));
    return out;
  }

  auto cols = gfc_columns(mg, internal_, cfg_.binary_features);
  Digest key = gfc_key(cols, n);
  {
    std::lock_guard<std::mutex> lock(impl_->mu);
    if (impl_->cache_enabled) {
      auto it = impl_->gfc_cache.find(key);
      if (it != impl_->gfc_cache.end()) {
        ++impl_->hits;
        return it->second.sig_digest;
      }
      ++impl_->misses;
    }
  }
  FeatureMatrix fm;
  fm.binary = cfg_.binary_features;
  fm.columns = cols;
  for (size_t k = 0; k < mg.trees.size(); ++k) fm.names.push_back("f" + std::to_string(k));
  SurvivalTree ref = greedy_induce(SurvSpan{internal_.times, internal_.events}, fm,
                                   cfg_.st_depth, ref_min_samples_);
  auto leaves = ref.leaf_positions();
  std::vector<uint32_t> leaf_index_of_pos(ref.nodes.size(), 0);
  for (uint32_t li = 0; li < leaves.size(); ++li) leaf_index_of_pos[leaves[li]] = li;
  std::vector<uint32_t> leaf_of_row(n);
  for (size_t r = 0; r < n; ++r) leaf_of_row[r] = route_by_columns(ref, cols, leaf_index_of_pos, r);
  std::string sig = relabel_partition(leaf_of_row, leaves.size());
  Impl::GfcEntry entry;
  entry.sig_digest = digest_of_bytes(std::vector<uint8_t>(sig.begin(), sig.end()));
  std::string out = entry.sig_digest;
  std::lock_guard<std::mutex> lock(impl_->mu);
  if (impl_->cache_enabled) impl_->gfc_cache.emplace(key, std::move(entry));
  return out;
}

SurvivalTree FitnessEvaluator::reference_tree(const MultiGenotype& mg) const {
  if (cfg_.mode == FitnessMode::Evolved) {
    return decode_evolved(mg, internal_, cfg_.st_depth, ref_min_samples_);
  }
  FeatureMatrix fm;
  fm.binary = cfg_.binary_features;
  fm.columns = gfc_columns(mg, internal_, cfg_.binary_features);
  fm.exprs = mg.trees;
  for (const auto& tree : mg.trees) {
    fm.names.push_back(to_expression_string(tree, internal_.covariate_names));
  }
  return greedy_induce(SurvSpan{internal_.times, internal_.events}, fm, cfg_.st_depth,
                       ref_min_samples_);
}

std::string FitnessEvaluator::reference_signature_bytes(const MultiGenotype& mg) const {
  return stratification_signature(reference_tree(mg), internal_);
}

}  // namespace evost
