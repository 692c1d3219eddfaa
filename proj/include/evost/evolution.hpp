#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "evost/fitness.hpp"
#include "evost/gp_expr.hpp"
#include "evost/metrics.hpp"
#include "evost/rng.hpp"

namespace evost {

struct Individual {
  MultiGenotype mg;
  FitnessValue fitness;
  std::string signature;  // stratification digest, current w.r.t. mg
};

// Elitist bi-objective archive.  A candidate is rejected when some member
// weakly dominates it with different objectives, or matches its objectives
// exactly (first wins); an accepted candidate evicts every member it
// dominates.
class ParetoArchive {
 public:
  bool update(const Individual& candidate);
  const std::vector<Individual>& members() const { return members_; }
  size_t size() const { return members_.size(); }
  std::vector<ObjectivePoint> front() const;
  bool mutually_nondominated() const;

 private:
  std::vector<Individual> members_;
};

// Dominated volume of the archive front against `reference`; members outside
// the reference box contribute nothing.
double archive_hypervolume(const ParetoArchive& archive, const ObjectivePoint& reference);

struct RunConfig {
  FitnessMode mode = FitnessMode::Evolved;
  int st_depth = 2;        // survival-tree depth
  size_t k_trees = 3;      // GP trees per individual; evolved: 2^st_depth - 1
  int template_depth = 3;  // GP-tree template depth
  OperatorSet operators = OperatorSet::full();
  size_t population_size = 1024;
  size_t max_generations = 50;
  size_t stagnation_window = 5;
  size_t uniqueness_budget = 1000;
  bool swap_enabled = true;
  bool univariate_fos = false;
  double min_samples_leaf_fraction = 0.02;
  bool binary_features = false;  // gfc: feature columns are binary outputs
  uint64_t seed = 0;
  size_t threads = 1;
  bool check_archive_invariant = false;  // re-verify non-domination per update

  void validate() const;  // throws ConfigError
  FitnessConfig fitness_config() const;
};

// Family-of-subsets per GP tree: every linkage-tree cluster except the full
// position set; singletons always included.
struct LinkageForest {
  std::vector<std::vector<std::vector<size_t>>> fos;  // [tree][subset][position]
};

LinkageForest learn_linkage(const std::vector<Individual>& population, bool univariate);

struct StepStats {
  uint64_t evaluations = 0;
  uint64_t gom_donations = 0;
  uint64_t gom_accept_dominance = 0;
  uint64_t gom_accept_archive = 0;  // archive entry without weak dominance
  uint64_t gom_neutral = 0;         // no semantic change, accepted without re-scoring
  uint64_t gom_reverted = 0;
  uint64_t swap_attempts = 0;
  uint64_t swap_accept_dominance = 0;
  uint64_t swap_accept_archive = 0;
  uint64_t swap_neutral = 0;
  uint64_t swap_reverted = 0;
  uint64_t acceptance_violations = 0;  // defensive re-check; must stay 0
  uint64_t archive_violations = 0;     // non-domination re-check; must stay 0

  StepStats& operator+=(const StepStats& o);
};

// Shared plumbing for one variation pass.  Donors come from the
// generation-start snapshot; the archive is this individual's local view
// (snapshot copy during a generation), so the pass is a pure function of
// (snapshot, seed) and thread scheduling cannot change results.  Candidates
// accepted into the archive are appended to `offers` in evaluation order for
// the canonical global merge.
struct VariationContext {
  const FitnessEvaluator* evaluator = nullptr;
  const std::vector<Individual>* donors = nullptr;
  ParetoArchive* archive = nullptr;
  StepStats* stats = nullptr;
  std::vector<Individual>* offers = nullptr;  // optional
};

// Optimal mixing: every FOS subset, in random order, receives a donation
// from a random donor; a change is kept iff its fitness weakly dominates the
// previous one or the point enters the archive.
Individual gom_step(const Individual& start, const LinkageForest& fos, VariationContext& ctx,
                    Rng& rng);

// Whole-GP-tree inheritance: each slot receives a random donor's random
// tree, under the same acceptance rule.
Individual tree_swap_step(const Individual& start, VariationContext& ctx, Rng& rng);

struct InitResult {
  std::vector<Individual> population;
  size_t budget_spent = 0;  // resamples consumed by signature collisions
};

// Random population with the uniqueness budget: collisions with an already
// accepted signature are resampled while budget remains, then accepted
// freely.  Fitness is evaluated for every accepted individual.
InitResult initialize_population(const RunConfig& cfg, const FitnessEvaluator& evaluator,
                                 const ConstantPool& pool, Rng& rng);

struct HvPoint {
  size_t generation = 0;  // 0 = after initialization
  double hypervolume = 0.0;
  size_t archive_size = 0;
};

struct RngAudit {
  uint64_t seed = 0;
  uint64_t streams_created = 0;
  uint64_t words_drawn = 0;
};

struct RunResult {
  ParetoArchive archive;
  std::vector<HvPoint> hv_trace;
  std::string termination;  // "stagnation" | "generation cap"
  size_t generations_completed = 0;
  ObjectivePoint reference;
  StepStats stats;
  RngAudit audit;
  size_t init_budget_spent = 0;
};

// Generational loop: initialize, then per generation learn linkage and run
// gom + tree swap over every individual, merging all archive offers in
// individual order.  Stops at the generation cap or when the hypervolume
// gains no more than 1e-12 for stagnation_window consecutive generations.
// Results are identical at any thread count.
RunResult run_evolution(const RunConfig& cfg, const FitnessEvaluator& evaluator);

}  // namespace evost
