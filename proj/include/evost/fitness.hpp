#pragma once

#include <cstdint>
#include <memory>
#include <mutex>
#include <string>
#include <unordered_map>
#include <vector>

#include "evost/dataset.hpp"
#include "evost/gp_expr.hpp"
#include "evost/metrics.hpp"
#include "evost/survival_tree.hpp"

namespace evost {

// Both objectives are minimized.  per_split_ibs keeps the raw protocol
// diagnostics; ibs_iqm is always their interquartile mean.
struct FitnessValue {
  double ibs_iqm = 0.0;
  long long complexity = 0;
  std::vector<double> per_split_ibs;

  ObjectivePoint objectives() const { return {ibs_iqm, complexity}; }
  bool operator==(const FitnessValue&) const = default;
};

enum class FitnessMode { GfcGreedy, Evolved };

struct FitnessConfig {
  FitnessMode mode = FitnessMode::Evolved;
  int st_depth = 2;  // survival-tree depth: greedy max depth, or decode depth
  double min_samples_leaf_fraction = 0.02;
  bool binary_features = false;  // gfc: feature columns are binary outputs
};

struct EvaluatedFitness {
  FitnessValue value;
  // Hex digest of the full-cohort stratification signature; equal digests
  // mean equal patient partitions (128-bit, collisions negligible).
  std::string signature;
};

// Largest complexity any individual can reach: every GP tree fully active
// and (evolved mode) every decoded node internal.  Serves as the complexity
// coordinate of the hypervolume reference point.
long long max_complexity(size_t k_trees, int template_depth);

// Scores multi-tree genotypes against a fixed internal cohort and split
// plan.  Construction precomputes per-split subsets and Brier contexts; a
// split whose train part has no events, or whose scoring grid clips away
// entirely, is degenerate and contributes the worst score (1.0) for every
// candidate alike.
//
// gfc mode: each GP tree is a feature column; a greedy tree is induced per
// split and scored on that split's test part.  Complexity sums active sizes
// over the union (by canonical string) of features used in any split's
// tree; thresholds are free.
//
// evolved mode (K = 2^st_depth - 1 trees): GP tree k gates decoded node k;
// each split decodes on its own train part; complexity sums active sizes
// over the internal nodes of the full-cohort reference decoding, counting
// every use.
//
// Results are pure functions of the genotype; caching (keyed on a digest of
// the evaluated columns, which determine every downstream quantity) is an
// invisible shortcut and can be disabled.  Safe to call concurrently.
class FitnessEvaluator {
 public:
  FitnessEvaluator(FitnessConfig cfg, SurvivalDataset internal, SplitPlan plan);
  ~FitnessEvaluator();

  FitnessEvaluator(const FitnessEvaluator&) = delete;
  FitnessEvaluator& operator=(const FitnessEvaluator&) = delete;

  EvaluatedFitness evaluate(const MultiGenotype& mg) const;
  // Signature digest alone (population uniqueness); shares the cache.
  std::string signature(const MultiGenotype& mg) const;

  // Deployable model for an archive member: evolved decoding or greedy tree,
  // refit on the full internal cohort.  Splits carry the GP expressions, so
  // the tree routes raw covariate rows.
  SurvivalTree reference_tree(const MultiGenotype& mg) const;
  // Uncompressed signature of reference_tree (diagnostics / tests).
  std::string reference_signature_bytes(const MultiGenotype& mg) const;

  const SurvivalDataset& internal() const { return internal_; }
  const SplitPlan& plan() const { return plan_; }
  const FitnessConfig& config() const { return cfg_; }
  size_t degenerate_split_count() const;
  size_t reference_min_samples() const { return ref_min_samples_; }

  void set_cache_enabled(bool on);
  uint64_t cache_hits() const;
  uint64_t cache_misses() const;

 private:
  struct SplitWork;
  struct Impl;

  FitnessConfig cfg_;
  SurvivalDataset internal_;
  SplitPlan plan_;
  size_t ref_min_samples_ = 1;
  std::unique_ptr<Impl> impl_;
};

}  // namespace evost
