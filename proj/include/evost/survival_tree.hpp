#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "evost/dataset.hpp"
#include "evost/gp_expr.hpp"
#include "evost/metrics.hpp"
#include "evost/step_function.hpp"

namespace evost {

// Routing convention: left = condition true.  Expression splits test the
// binary output of a GP tree; threshold splits compare a feature value
// (raw covariate or engineered feature) against a cut point.
struct Split {
  enum class Kind : uint8_t { Expression, Threshold };
  Kind kind = Kind::Threshold;
  Genotype expr;
  double threshold = 0.0;
  bool binary_feature = false;  // threshold applies to the 0/1 binary output
  uint32_t column = 0;          // feature-matrix column the split came from

  bool route_left(std::span<const double> row) const;
};

struct TreeNode {
  enum class Kind : uint8_t { Unused, Internal, Leaf };
  Kind kind = Kind::Unused;
  Split split;
  StepFunction survival;
  size_t count = 0;
};

// Heap-layout survival tree: children of node i at 2i+1 / 2i+2, leaves carry
// Kaplan-Meier curves of their training members.
struct SurvivalTree {
  int max_depth = 0;
  std::vector<TreeNode> nodes;

  size_t leaf_for_row(std::span<const double> row) const;
  const StepFunction& predict_survival(std::span<const double> row) const;
  // Negated integral of the predicted curve over [t0, t1]; higher = riskier.
  double risk_score(std::span<const double> row, double t0, double t1) const;
  size_t n_leaves() const;
  std::vector<size_t> leaf_positions() const;
  std::vector<size_t> internal_positions() const;
};

struct FeatureMatrix {
  std::vector<std::string> names;
  std::vector<std::vector<double>> columns;  // [feature][row]
  std::vector<Genotype> exprs;  // per feature; covariate refs synthesized when empty
  bool binary = false;          // columns hold 0/1 binary outputs

  size_t rows() const { return columns.empty() ? 0 : columns[0].size(); }
  static FeatureMatrix raw_covariates(const SurvivalDataset& data);
};

// Recursive best-first induction: every midpoint between consecutive distinct
// feature values is a candidate, scored by the two-sample log-rank statistic;
// ties resolve to the lowest feature index, then the lowest threshold.  A node
// stays a leaf when no candidate keeps min_samples_leaf on both sides or the
// best statistic is zero.
SurvivalTree greedy_induce(SurvSpan outcome, const FeatureMatrix& features, int max_depth,
                           size_t min_samples_leaf);

// Fixed-shape decoding of a GP multi-tree: GP tree k drives heap position k
// (breadth-first); patients route left on binary output true.  Nodes whose
// split would leave either side under min_samples_leaf collapse to leaves.
SurvivalTree decode_evolved(const MultiGenotype& mg, const SurvivalDataset& train,
                            int max_depth, size_t min_samples_leaf);

// Leaf assignment per row, relabeled by order of first appearance; injective
// on partitions, invariant to leaf position relabeling.
std::string stratification_signature(const SurvivalTree& tree, const SurvivalDataset& data);

struct MergedStratification {
  std::vector<int> group_of_row;
  std::vector<std::vector<size_t>> group_leaves;  // leaf heap positions per group
  std::vector<StepFunction> curves;               // refit on merged members
};

// Agglomerative merge of leaf strata: repeatedly join the pair with the
// largest pairwise log-rank p-value while it exceeds alpha.
MergedStratification stratify_and_merge(const SurvivalTree& tree, const SurvivalDataset& data,
                                        double alpha = 0.05);

enum class RenderFormat { Text, Dot };
std::string render_tree(const SurvivalTree& tree, RenderFormat format,
                        std::span<const std::string> covariate_names);

nlohmann::json tree_to_json(const SurvivalTree& tree, std::span<const std::string> names);
SurvivalTree tree_from_json(const nlohmann::json& j, std::span<const std::string> names);

}  // namespace evost
