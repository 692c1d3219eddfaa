#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>
#include <vector>

#include "evost/common.hpp"
#include "evost/estimators.hpp"
#include "evost/rng.hpp"
#include "evost/survival_tree.hpp"
#include "evost/xor_synth.hpp"

using namespace evost;

namespace {

SurvSpan outcome_of(const SurvivalDataset& d) { return SurvSpan{d.times, d.events}; }

std::vector<double> row_of(const SurvivalDataset& d, size_t i) {
  std::vector<double> row(d.dims());
  for (size_t c = 0; c < d.dims(); ++c) row[c] = d.columns[c][i];
  return row;
}

bool curves_equal(const StepFunction& a, const StepFunction& b) {
  return a.knots == b.knots && a.values == b.values;
}

StepFunction km_of_rows(const SurvivalDataset& d, const std::vector<size_t>& rows) {
  std::vector<double> t;
  std::vector<uint8_t> e;
  for (size_t r : rows) {
    t.push_back(d.times[r]);
    e.push_back(d.events[r]);
  }
  return kaplan_meier(t, e);
}

Genotype covariate_genotype(uint32_t idx) {
  Genotype g;
  g.template_depth = 0;
  g.symbols = {Symbol::make_covariate(idx)};
  return g;
}

// Leaf node with the Kaplan-Meier curve of the given member rows.
TreeNode make_leaf(const SurvivalDataset& d, const std::vector<size_t>& rows) {
  TreeNode node;
  node.kind = TreeNode::Kind::Leaf;
  node.count = rows.size();
  node.survival = km_of_rows(d, rows);
  return node;
}

TreeNode make_threshold_node(uint32_t column, double threshold) {
  TreeNode node;
  node.kind = TreeNode::Kind::Internal;
  node.split.kind = Split::Kind::Threshold;
  node.split.expr = covariate_genotype(column);
  node.split.threshold = threshold;
  node.split.column = column;
  return node;
}

SurvivalDataset random_dataset(size_t n, size_t dims, uint64_t seed, double censor_scale) {
  Rng rng(seed);
  std::vector<std::vector<double>> cols(dims, std::vector<double>(n));
  std::vector<double> times(n);
  std::vector<uint8_t> events(n);
  std::vector<std::string> names;
  for (size_t c = 0; c < dims; ++c) names.push_back("x" + std::to_string(c));
  for (size_t i = 0; i < n; ++i) {
    for (size_t c = 0; c < dims; ++c) cols[c][i] = rng.uniform01() * 2.0 - 1.0;
    // Hazard tied to the first covariate so real splits exist.
    double rate = std::exp(cols[0][i]);
    double event_t = rng.exponential(1.0 / rate);
    double censor_t = rng.uniform01() * censor_scale;
    times[i] = std::min(event_t, censor_t);
    events[i] = event_t <= censor_t ? 1 : 0;
  }
  events[0] = 1;  // guarantee at least one event
  return SurvivalDataset::create(names, cols, times, events);
}

struct OracleSplit {
  bool found = false;
  double statistic = 0.0;
  uint32_t column = 0;
  double threshold = 0.0;
};

// Exhaustive candidate enumeration scored with the public two-sample log-rank,
// accepting only strictly better statistics so ties resolve to the lowest
// column, then the lowest threshold.
OracleSplit oracle_best_split(const SurvivalDataset& d, const FeatureMatrix& fm,
                              const std::vector<size_t>& rows, size_t min_leaf) {
  OracleSplit best;
  for (uint32_t c = 0; c < fm.columns.size(); ++c) {
    std::vector<size_t> order = rows;
    std::sort(order.begin(), order.end(),
              [&](size_t a, size_t b) { return fm.columns[c][a] < fm.columns[c][b]; });
    size_t i = 0;
    while (i < order.size()) {
      size_t j = i;
      while (j + 1 < order.size() && fm.columns[c][order[j + 1]] == fm.columns[c][order[i]]) ++j;
      if (j + 1 >= order.size()) break;  // last distinct value: nothing to the right
      double v = fm.columns[c][order[i]];
      double next_v = fm.columns[c][order[j + 1]];
      size_t left_count = j + 1;
      if (left_count >= min_leaf && order.size() - left_count >= min_leaf) {
        std::vector<double> ta, tb;
        std::vector<uint8_t> ea, eb;
        for (size_t r : rows) {
          if (fm.columns[c][r] <= v) {
            ta.push_back(d.times[r]);
            ea.push_back(d.events[r]);
          } else {
            tb.push_back(d.times[r]);
            eb.push_back(d.events[r]);
          }
        }
        double stat = logrank_two_sample(ta, ea, tb, eb).statistic;
        double threshold = (v + next_v) / 2.0;
        if (threshold >= next_v) threshold = v;
        if (stat > best.statistic) {
          best.found = true;
          best.statistic = stat;
          best.column = c;
          best.threshold = threshold;
        }
      }
      i = j + 1;
    }
  }
  return best;
}

}  // namespace

TEST_CASE("split routing: threshold, binary indicator, and expression kinds") {
  Split thr;
  thr.kind = Split::Kind::Threshold;
  thr.expr = covariate_genotype(0);
  thr.threshold = 1.5;
  std::vector<double> row{1.5};
  CHECK(thr.route_left(row));
  row[0] = std::nextafter(1.5, 2.0);
  CHECK_FALSE(thr.route_left(row));

  Split bin;
  bin.kind = Split::Kind::Threshold;
  bin.expr = parse_expression("(x0 <= 1.5)");
  bin.binary_feature = true;
  bin.threshold = 0.5;
  row[0] = 1.0;  // indicator fires -> value 1 -> routes right
  CHECK_FALSE(bin.route_left(row));
  row[0] = 2.0;  // indicator off -> value 0 -> routes left
  CHECK(bin.route_left(row));

  Split expr;
  expr.kind = Split::Kind::Expression;
  expr.expr = parse_expression("(x0 <= 1.5)");
  row[0] = 1.0;
  CHECK(expr.route_left(row));
  row[0] = 2.0;
  CHECK_FALSE(expr.route_left(row));
}

TEST_CASE("depth zero yields a single leaf carrying the full-cohort curve") {
  SurvivalDataset d = random_dataset(40, 2, 11, 4.0);
  FeatureMatrix fm = FeatureMatrix::raw_covariates(d);
  SurvivalTree tree = greedy_induce(outcome_of(d), fm, 0, 1);
  REQUIRE(tree.nodes.size() == 1);
  REQUIRE(tree.nodes[0].kind == TreeNode::Kind::Leaf);
  CHECK(tree.nodes[0].count == 40);
  CHECK(tree.n_leaves() == 1);
  std::vector<size_t> all(40);
  std::iota(all.begin(), all.end(), size_t{0});
  CHECK(curves_equal(tree.nodes[0].survival, km_of_rows(d, all)));
  CHECK(tree.leaf_for_row(row_of(d, 3)) == 0);

  // risk score is the negated curve integral
  StepFunction km = km_of_rows(d, all);
  CHECK(tree.risk_score(row_of(d, 0), 0.0, 2.0) == doctest::Approx(-km.integral(0.0, 2.0)));
}

TEST_CASE("induction parameter validation") {
  SurvivalDataset d = random_dataset(20, 2, 1, 4.0);
  FeatureMatrix fm = FeatureMatrix::raw_covariates(d);
  CHECK_THROWS_AS(greedy_induce(outcome_of(d), fm, -1, 1), ConfigError);
  CHECK_THROWS_AS(greedy_induce(outcome_of(d), fm, 7, 1), ConfigError);
  CHECK_THROWS_AS(greedy_induce(outcome_of(d), fm, 2, 0), ConfigError);
  FeatureMatrix short_fm = fm;
  short_fm.columns[0].pop_back();
  short_fm.columns[1].pop_back();
  CHECK_THROWS_AS(greedy_induce(outcome_of(d), short_fm, 2, 1), SchemaError);
}

TEST_CASE("greedy split matches exhaustive enumeration to depth two") {
  for (uint64_t seed = 100; seed < 120; ++seed) {
    SurvivalDataset d = random_dataset(60, 3, seed, 3.0);
    FeatureMatrix fm = FeatureMatrix::raw_covariates(d);
    const size_t min_leaf = 5;
    SurvivalTree tree = greedy_induce(outcome_of(d), fm, 2, min_leaf);

    std::vector<size_t> all(d.n());
    std::iota(all.begin(), all.end(), size_t{0});
    OracleSplit root = oracle_best_split(d, fm, all, min_leaf);

    if (!root.found || root.statistic <= 0.0) {
      CHECK(tree.nodes[0].kind == TreeNode::Kind::Leaf);
      continue;
    }
    REQUIRE(tree.nodes[0].kind == TreeNode::Kind::Internal);
    CHECK(tree.nodes[0].split.column == root.column);
    CHECK(tree.nodes[0].split.threshold == root.threshold);

    // Recurse one level with the oracle on each child's member set.
    std::vector<size_t> left, right;
    for (size_t r : all) {
      if (fm.columns[root.column][r] <= root.threshold)
        left.push_back(r);
      else
        right.push_back(r);
    }
    const std::vector<size_t>* member_sets[2] = {&left, &right};
    for (int side = 0; side < 2; ++side) {
      size_t pos = side == 0 ? 1 : 2;
      OracleSplit sub = oracle_best_split(d, fm, *member_sets[side], min_leaf);
      if (!sub.found || sub.statistic <= 0.0) {
        CHECK(tree.nodes[pos].kind == TreeNode::Kind::Leaf);
        CHECK(tree.nodes[pos].count == member_sets[side]->size());
      } else {
        REQUIRE(tree.nodes[pos].kind == TreeNode::Kind::Internal);
        CHECK(tree.nodes[pos].split.column == sub.column);
        CHECK(tree.nodes[pos].split.threshold == sub.threshold);
      }
    }
  }
}

TEST_CASE("every leaf respects min_samples_leaf and counts partition the cohort") {
  SurvivalDataset d = random_dataset(100, 3, 77, 3.0);
  FeatureMatrix fm = FeatureMatrix::raw_covariates(d);
  SurvivalTree tree = greedy_induce(outcome_of(d), fm, 6, 15);
  size_t total = 0;
  for (size_t pos : tree.leaf_positions()) {
    CHECK(tree.nodes[pos].count >= 15);
    total += tree.nodes[pos].count;
  }
  CHECK(total == d.n());
  // routing reproduces the recorded counts
  std::map<size_t, size_t> routed;
  for (size_t i = 0; i < d.n(); ++i) routed[tree.leaf_for_row(row_of(d, i))]++;
  for (size_t pos : tree.leaf_positions()) CHECK(routed[pos] == tree.nodes[pos].count);
}

TEST_CASE("equal-statistic columns resolve to the lowest index") {
  size_t n = 20;
  std::vector<double> sep(n), times(n);
  std::vector<uint8_t> events(n, 1);
  for (size_t i = 0; i < n; ++i) {
    sep[i] = i < n / 2 ? 0.0 : 1.0;
    times[i] = i < n / 2 ? 1.0 + static_cast<double>(i) : 50.0 + static_cast<double>(i);
  }
  // noise column with a weaker split everywhere
  std::vector<double> noise(n);
  for (size_t i = 0; i < n; ++i) noise[i] = static_cast<double>((i * 7) % 13);
  SurvivalDataset d = SurvivalDataset::create({"a", "b", "z"}, {sep, sep, noise}, times, events);
  FeatureMatrix fm = FeatureMatrix::raw_covariates(d);
  SurvivalTree tree = greedy_induce(outcome_of(d), fm, 1, 2);
  REQUIRE(tree.nodes[0].kind == TreeNode::Kind::Internal);
  CHECK(tree.nodes[0].split.column == 0);
  CHECK(tree.nodes[0].split.threshold == 0.5);
}

TEST_CASE("midpoint collapses onto the left value when rounding would cross it") {
  // v and next_v adjacent: (v + next_v) / 2 rounds up to next_v, so the split
  // must fall back to v to keep `<= threshold` routing faithful.
  double v = std::nextafter(2.0, 1.0);
  double nv = 2.0;
  REQUIRE((v + nv) / 2.0 >= nv);  // fixture really exercises the guard
  std::vector<double> col{v, v, nv, nv};
  std::vector<double> times{1.0, 2.0, 100.0, 101.0};
  std::vector<uint8_t> events{1, 1, 1, 1};
  SurvivalDataset d = SurvivalDataset::create({"x"}, {col}, times, events);
  FeatureMatrix fm = FeatureMatrix::raw_covariates(d);
  SurvivalTree tree = greedy_induce(outcome_of(d), fm, 1, 2);
  REQUIRE(tree.nodes[0].kind == TreeNode::Kind::Internal);
  CHECK(tree.nodes[0].split.threshold == v);
  CHECK(tree.leaf_for_row(std::vector<double>{v}) == 1);
  CHECK(tree.leaf_for_row(std::vector<double>{nv}) == 2);
}

TEST_CASE("identical outcomes on both sides leave the root unsplit") {
  std::vector<double> col{0, 0, 0, 0, 1, 1, 1, 1};
  std::vector<double> times{1, 2, 3, 4, 1, 2, 3, 4};
  std::vector<uint8_t> events{1, 1, 0, 1, 1, 1, 0, 1};
  SurvivalDataset d = SurvivalDataset::create({"x"}, {col}, times, events);
  FeatureMatrix fm = FeatureMatrix::raw_covariates(d);
  SurvivalTree tree = greedy_induce(outcome_of(d), fm, 3, 2);
  CHECK(tree.nodes[0].kind == TreeNode::Kind::Leaf);
  CHECK(tree.n_leaves() == 1);
}

TEST_CASE("binary indicator features recover the four xor cells") {
  XorParams params;
  params.n = 800;
  params.seed = 7;
  XorData xd = generate_xor_survival(params);
  const SurvivalDataset& d = xd.dataset;

  FeatureMatrix fm;
  fm.names = {"f0", "f1"};
  fm.binary = true;
  fm.exprs = {parse_expression("(((x0^2) + (x1^2)) <= 0.6)"),
              parse_expression("((x0 * x1) <= 0)")};
  fm.columns.assign(2, std::vector<double>(d.n()));
  EvalWorkspace ws;
  std::vector<uint8_t> bits;
  for (size_t f = 0; f < 2; ++f) {
    binary_column(fm.exprs[f], d.columns, d.n(), bits, ws);
    for (size_t i = 0; i < d.n(); ++i) fm.columns[f][i] = bits[i] ? 1.0 : 0.0;
  }
  // the expressions reproduce the generator's indicators exactly
  for (size_t i = 0; i < d.n(); ++i) {
    double x0 = d.columns[0][i], x1 = d.columns[1][i];
    CHECK(fm.columns[0][i] == (xor_indicator_f0(x0, x1) ? 1.0 : 0.0));
    CHECK(fm.columns[1][i] == (xor_indicator_f1(x0, x1) ? 1.0 : 0.0));
  }

  SurvivalTree tree = greedy_induce(outcome_of(d), fm, 2, 20);
  REQUIRE(tree.n_leaves() == 4);

  // each leaf is pure in one (f0, f1) cell and the four cells are all present
  std::map<size_t, std::set<int>> cells_in_leaf;
  std::map<size_t, std::vector<size_t>> members;
  for (size_t i = 0; i < d.n(); ++i) {
    size_t leaf = tree.leaf_for_row(row_of(d, i));
    cells_in_leaf[leaf].insert(xd.groups[i]);
    members[leaf].push_back(i);
  }
  std::set<int> covered;
  for (const auto& [leaf, cells] : cells_in_leaf) {
    CHECK(cells.size() == 1);
    covered.insert(*cells.begin());
  }
  CHECK(covered == std::set<int>{0, 1, 2, 3});

  // leaf curves are the Kaplan-Meier fits of exactly their members
  for (const auto& [leaf, rows] : members) {
    CHECK(tree.nodes[leaf].count == rows.size());
    CHECK(curves_equal(tree.nodes[leaf].survival, km_of_rows(d, rows)));
  }
}

TEST_CASE("decoding validates depth and gate count") {
  SurvivalDataset d = random_dataset(30, 2, 5, 4.0);
  MultiGenotype mg;
  mg.trees = {parse_expression("(x0 <= 0.5)")};
  CHECK_NOTHROW(decode_evolved(mg, d, 1, 2));
  CHECK_THROWS_AS(decode_evolved(mg, d, 0, 2), ConfigError);
  CHECK_THROWS_AS(decode_evolved(mg, d, 7, 2), ConfigError);
  CHECK_THROWS_AS(decode_evolved(mg, d, 2, 2), ConfigError);  // needs 3 gates
  CHECK_THROWS_AS(decode_evolved(mg, d, 1, 0), ConfigError);
}

TEST_CASE("decoding routes through gates breadth-first") {
  Rng rng(99);
  size_t n = 200;
  std::vector<double> x0(n), x1(n), times(n);
  std::vector<uint8_t> events(n, 1);
  for (size_t i = 0; i < n; ++i) {
    x0[i] = rng.uniform01();
    x1[i] = rng.uniform01();
    times[i] = rng.exponential(1.0);
  }
  SurvivalDataset d = SurvivalDataset::create({"x0", "x1"}, {x0, x1}, times, events);

  MultiGenotype mg;
  mg.trees = {parse_expression("(x0 <= 0.5)"), parse_expression("(x1 <= 0.5)"),
              parse_expression("(x1 <= 0.5)")};
  SurvivalTree tree = decode_evolved(mg, d, 2, 5);
  REQUIRE(tree.nodes.size() == Genotype::positions_for_depth(2));
  CHECK(tree.leaf_positions() == std::vector<size_t>{3, 4, 5, 6});

  std::map<size_t, std::vector<size_t>> members;
  for (size_t i = 0; i < n; ++i) {
    size_t expected = x0[i] <= 0.5 ? (x1[i] <= 0.5 ? 3 : 4) : (x1[i] <= 0.5 ? 5 : 6);
    size_t got = tree.leaf_for_row(row_of(d, i));
    CHECK(got == expected);
    members[got].push_back(i);
  }
  for (size_t pos : tree.leaf_positions()) {
    CHECK(tree.nodes[pos].count == members[pos].size());
    CHECK(curves_equal(tree.nodes[pos].survival, km_of_rows(d, members[pos])));
  }
}

TEST_CASE("gates that starve a side collapse to leaves") {
  Rng rng(12);
  size_t n = 60;
  std::vector<double> x0(n), x1(n), times(n);
  std::vector<uint8_t> events(n, 1);
  for (size_t i = 0; i < n; ++i) {
    x0[i] = rng.uniform01();
    x1[i] = rng.uniform01();
    times[i] = rng.exponential(1.0);
  }
  SurvivalDataset d = SurvivalDataset::create({"x0", "x1"}, {x0, x1}, times, events);

  SUBCASE("degenerate root gate leaves a stump") {
    MultiGenotype mg;
    mg.trees = {parse_expression("(x0 <= -5)"), parse_expression("(x1 <= 0.5)"),
                parse_expression("(x1 <= 0.5)")};
    SurvivalTree tree = decode_evolved(mg, d, 2, 5);
    CHECK(tree.leaf_positions() == std::vector<size_t>{0});
    CHECK(tree.nodes[0].count == n);
    std::vector<size_t> all(n);
    std::iota(all.begin(), all.end(), size_t{0});
    CHECK(curves_equal(tree.nodes[0].survival, km_of_rows(d, all)));
  }

  SUBCASE("degenerate inner gate prunes only its node") {
    MultiGenotype mg;
    mg.trees = {parse_expression("(x0 <= 0.5)"), parse_expression("(x1 <= -5)"),
                parse_expression("(x1 <= 0.5)")};
    SurvivalTree tree = decode_evolved(mg, d, 2, 5);
    CHECK(tree.nodes[1].kind == TreeNode::Kind::Leaf);
    REQUIRE(tree.nodes[2].kind == TreeNode::Kind::Internal);
    CHECK(tree.leaf_positions() == std::vector<size_t>{1, 5, 6});
  }
}

TEST_CASE("stratification signature depends on the partition, not gate polarity") {
  SurvivalDataset d = random_dataset(50, 2, 31, 4.0);

  MultiGenotype a, b, c;
  a.trees = {parse_expression("(x0 <= 0.5)")};
  b.trees = {parse_expression("(NOT (x0 <= 0.5))")};
  c.trees = {parse_expression("(x0 <= 0)")};
  SurvivalTree ta = decode_evolved(a, d, 1, 2);
  SurvivalTree tb = decode_evolved(b, d, 1, 2);
  SurvivalTree tc = decode_evolved(c, d, 1, 2);
  REQUIRE(ta.n_leaves() == 2);
  REQUIRE(tb.n_leaves() == 2);
  REQUIRE(tc.n_leaves() == 2);

  std::string sa = stratification_signature(ta, d);
  std::string sb = stratification_signature(tb, d);
  std::string sc = stratification_signature(tc, d);
  CHECK(sa == sb);  // flipped gate swaps the sides but not the row partition
  CHECK(sa != sc);

  // single-leaf tree gives yet another signature
  MultiGenotype stump;
  stump.trees = {parse_expression("(x0 <= -5)")};
  SurvivalTree ts = decode_evolved(stump, d, 1, 2);
  REQUIRE(ts.n_leaves() == 1);
  CHECK(stratification_signature(ts, d) != sa);
}

TEST_CASE("leaves with indistinguishable outcomes merge into one stratum") {
  std::vector<double> col{0, 0, 0, 0, 1, 1, 1, 1};
  std::vector<double> times{1, 2, 3, 4, 1, 2, 3, 4};
  std::vector<uint8_t> events{1, 1, 0, 1, 1, 1, 0, 1};
  SurvivalDataset d = SurvivalDataset::create({"x"}, {col}, times, events);

  SurvivalTree tree;
  tree.max_depth = 1;
  tree.nodes.resize(3);
  tree.nodes[0] = make_threshold_node(0, 0.5);
  tree.nodes[1] = make_leaf(d, {0, 1, 2, 3});
  tree.nodes[2] = make_leaf(d, {4, 5, 6, 7});

  MergedStratification merged = stratify_and_merge(tree, d);
  REQUIRE(merged.group_leaves.size() == 1);
  CHECK(merged.group_leaves[0] == std::vector<size_t>{1, 2});
  for (int g : merged.group_of_row) CHECK(g == 0);
  std::vector<size_t> all{0, 1, 2, 3, 4, 5, 6, 7};
  CHECK(curves_equal(merged.curves[0], km_of_rows(d, all)));

  // equal p-value never exceeds alpha = 1, so nothing merges there
  MergedStratification strict = stratify_and_merge(tree, d, 1.0);
  CHECK(strict.group_leaves.size() == 2);
}

TEST_CASE("separated outcomes stay in distinct strata") {
  std::vector<double> col{0, 0, 0, 0, 1, 1, 1, 1};
  std::vector<double> times{1, 2, 3, 4, 41, 42, 43, 44};
  std::vector<uint8_t> events(8, 1);
  SurvivalDataset d = SurvivalDataset::create({"x"}, {col}, times, events);

  SurvivalTree tree;
  tree.max_depth = 1;
  tree.nodes.resize(3);
  tree.nodes[0] = make_threshold_node(0, 0.5);
  tree.nodes[1] = make_leaf(d, {0, 1, 2, 3});
  tree.nodes[2] = make_leaf(d, {4, 5, 6, 7});

  MergedStratification merged = stratify_and_merge(tree, d);
  REQUIRE(merged.group_leaves.size() == 2);
  CHECK(merged.group_leaves[0] == std::vector<size_t>{1});
  CHECK(merged.group_leaves[1] == std::vector<size_t>{2});
  for (size_t i = 0; i < 4; ++i) CHECK(merged.group_of_row[i] == 0);
  for (size_t i = 4; i < 8; ++i) CHECK(merged.group_of_row[i] == 1);
  CHECK(curves_equal(merged.curves[0], km_of_rows(d, {0, 1, 2, 3})));
  CHECK(curves_equal(merged.curves[1], km_of_rows(d, {4, 5, 6, 7})));
}

TEST_CASE("three leaves merge pairwise by largest p-value first") {
  // leaves: node 2 (x0 > 0.5), node 3 (x0 <= 0.5, x1 <= 0.5), node 4 (x0 <= 0.5, x1 > 0.5);
  // nodes 3 and 4 share an outcome multiset, node 2 sits far away.
  std::vector<double> x0{0, 0, 0, 0, 0, 0, 0, 0, 1, 1, 1, 1};
  std::vector<double> x1{0, 0, 0, 0, 1, 1, 1, 1, 0, 0, 1, 1};
  std::vector<double> times{1, 2, 3, 4, 1, 2, 3, 4, 41, 42, 43, 44};
  std::vector<uint8_t> events(12, 1);
  SurvivalDataset d = SurvivalDataset::create({"x0", "x1"}, {x0, x1}, times, events);

  SurvivalTree tree;
  tree.max_depth = 2;
  tree.nodes.resize(7);
  tree.nodes[0] = make_threshold_node(0, 0.5);
  tree.nodes[1] = make_threshold_node(1, 0.5);
  tree.nodes[2] = make_leaf(d, {8, 9, 10, 11});
  tree.nodes[3] = make_leaf(d, {0, 1, 2, 3});
  tree.nodes[4] = make_leaf(d, {4, 5, 6, 7});

  MergedStratification merged = stratify_and_merge(tree, d);
  REQUIRE(merged.group_leaves.size() == 2);
  CHECK(merged.group_leaves[0] == std::vector<size_t>{2});
  CHECK(merged.group_leaves[1] == std::vector<size_t>{3, 4});
  for (size_t i = 0; i < 8; ++i) CHECK(merged.group_of_row[i] == 1);
  for (size_t i = 8; i < 12; ++i) CHECK(merged.group_of_row[i] == 0);
  CHECK(curves_equal(merged.curves[1], km_of_rows(d, {0, 1, 2, 3, 4, 5, 6, 7})));
}

TEST_CASE("text and dot renderings name features and label branches") {
  std::vector<double> col{0, 0, 0, 0, 1, 1, 1, 1};
  std::vector<double> times{1, 2, 3, 4, 41, 42, 43, 44};
  std::vector<uint8_t> events(8, 1);
  SurvivalDataset d = SurvivalDataset::create({"age"}, {col}, times, events);

  SurvivalTree tree;
  tree.max_depth = 1;
  tree.nodes.resize(3);
  tree.nodes[0] = make_threshold_node(0, 0.5);
  tree.nodes[1] = make_leaf(d, {0, 1, 2, 3});
  tree.nodes[2] = make_leaf(d, {4, 5, 6, 7});

  std::vector<std::string> names{"age"};
  std::string text = render_tree(tree, RenderFormat::Text, names);
  CHECK(text.find("if (age <= 0.5)") != std::string::npos);
  CHECK(text.find("yes: leaf n=4 median=2") != std::string::npos);
  CHECK(text.find("no:  leaf n=4 median=42") != std::string::npos);

  std::string dot = render_tree(tree, RenderFormat::Dot, names);
  CHECK(dot.find("digraph survival_tree {") != std::string::npos);
  CHECK(dot.find("node [shape=box];") != std::string::npos);
  CHECK(dot.find("n0 [label=\"(age <= 0.5)\"];") != std::string::npos);
  CHECK(dot.find("n0 -> n1 [label=\"true\"];") != std::string::npos);
  CHECK(dot.find("n0 -> n2 [label=\"false\"];") != std::string::npos);
}

TEST_CASE("json round-trip preserves structure, routing, and predictions") {
  SurvivalDataset d = random_dataset(80, 3, 55, 3.0);
  std::vector<std::string> names = d.covariate_names;

  SUBCASE("threshold-split tree") {
    FeatureMatrix fm = FeatureMatrix::raw_covariates(d);
    SurvivalTree tree = greedy_induce(outcome_of(d), fm, 2, 8);
    SurvivalTree back = tree_from_json(tree_to_json(tree, names), names);
    REQUIRE(back.nodes.size() == tree.nodes.size());
    CHECK(back.max_depth == tree.max_depth);
    for (size_t i = 0; i < tree.nodes.size(); ++i) {
      CHECK(back.nodes[i].kind == tree.nodes[i].kind);
      if (tree.nodes[i].kind == TreeNode::Kind::Internal) {
        CHECK(back.nodes[i].split.threshold == tree.nodes[i].split.threshold);
        CHECK(back.nodes[i].split.column == tree.nodes[i].split.column);
      }
    }
    for (size_t i = 0; i < d.n(); ++i) {
      std::vector<double> row = row_of(d, i);
      CHECK(back.leaf_for_row(row) == tree.leaf_for_row(row));
      CHECK(back.predict_survival(row)(1.0) == tree.predict_survival(row)(1.0));
    }
    CHECK(render_tree(back, RenderFormat::Text, names) ==
          render_tree(tree, RenderFormat::Text, names));
  }

  SUBCASE("expression-split tree") {
    MultiGenotype mg;
    mg.trees = {parse_expression("((x0 * x1) <= 0)", names),
                parse_expression("(x2 <= 0.25)", names),
                parse_expression("(NOT (x1 <= 0))", names)};
    SurvivalTree tree = decode_evolved(mg, d, 2, 5);
    SurvivalTree back = tree_from_json(tree_to_json(tree, names), names);
    for (size_t i = 0; i < d.n(); ++i) {
      std::vector<double> row = row_of(d, i);
      CHECK(back.leaf_for_row(row) == tree.leaf_for_row(row));
    }
    CHECK(render_tree(back, RenderFormat::Dot, names) ==
          render_tree(tree, RenderFormat::Dot, names));
  }

  SUBCASE("unknown node kind is rejected") {
    nlohmann::json j = tree_to_json(SurvivalTree{0, {make_leaf(d, {0, 1, 2})}}, names);
    j["nodes"][0]["kind"] = "mystery";
    CHECK_THROWS_AS(tree_from_json(j, names), FormatError);
  }
}
