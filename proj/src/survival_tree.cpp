#include "evost/survival_tree.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "evost/common.hpp"
#include "evost/estimators.hpp"

namespace evost {

bool Split::route_left(std::span<const double> row) const {
  if (kind == Kind::Expression) return binary_output(expr, row);
  double v = binary_feature ? (binary_output(expr, row) ? 1.0 : 0.0) : evaluate(expr, row);
  return v <= threshold;
}

size_t SurvivalTree::leaf_for_row(std::span<const double> row) const {
  size_t pos = 0;
  while (nodes[pos].kind == TreeNode::Kind::Internal) {
    pos = nodes[pos].split.route_left(row) ? 2 * pos + 1 : 2 * pos + 2;
  }
  if (nodes[pos].kind != TreeNode::Kind::Leaf) throw std::logic_error("routing hit unused node");
  return pos;
}

const StepFunction& SurvivalTree::predict_survival(std::span<const double> row) const {
  return nodes[leaf_for_row(row)].survival;
}

double SurvivalTree::risk_score(std::span<const double> row, double t0, double t1) const {
  return -predict_survival(row).integral(t0, t1);
}

size_t SurvivalTree::n_leaves() const { return leaf_positions().size(); }

std::vector<size_t> SurvivalTree::leaf_positions() const {
  std::vector<size_t> out;
  for (size_t i = 0; i < nodes.size(); ++i) {
    if (nodes[i].kind == TreeNode::Kind::Leaf) out.push_back(i);
  }
  return out;
}

std::vector<size_t> SurvivalTree::internal_positions() const {
  std::vector<size_t> out;
  for (size_t i = 0; i < nodes.size(); ++i) {
    if (nodes[i].kind == TreeNode::Kind::Internal) out.push_back(i);
  }
  return out;
}

FeatureMatrix FeatureMatrix::raw_covariates(const SurvivalDataset& data) {
  FeatureMatrix fm;
  fm.names = data.covariate_names;
  fm.columns = data.columns;
  return fm;
}

namespace {

StepFunction leaf_curve(SurvSpan outcome, const std::vector<uint32_t>& members) {
  std::vector<double> t(members.size());
  std::vector<uint8_t> e(members.size());
  for (size_t i = 0; i < members.size(); ++i) {
    t[i] = outcome.times[members[i]];
    e[i] = outcome.events[members[i]];
  }
  return kaplan_meier(t, e);
}

struct BestSplit {
  bool found = false;
  double statistic = 0.0;
  uint32_t column = 0;
  double threshold = 0.0;
  std::vector<uint32_t> left, right;
};

// Threshold sweep: walk candidates in ascending feature order while patients
// migrate into the left group one by one; the log-rank sums update
// incrementally over the node's distinct event times.
BestSplit best_split_for_node(SurvSpan outcome, const FeatureMatrix& features,
                              const std::vector<uint32_t>& members, size_t min_samples_leaf) {
  BestSplit best;
  size_t n = members.size();
  if (n < 2 * min_samples_leaf) return best;

  // Distinct event times with total event/at-risk counts.
  std::vector<double> sorted_times(n);
  for (size_t i = 0; i < n; ++i) sorted_times[i] = outcome.times[members[i]];
  std::sort(sorted_times.begin(), sorted_times.end());

  std::vector<double> event_times;
  for (uint32_t m : members) {
    if (outcome.events[m]) event_times.push_back(outcome.times[m]);
  }
  if (event_times.empty()) return best;
  std::sort(event_times.begin(), event_times.end());
  event_times.erase(std::unique(event_times.begin(), event_times.end()), event_times.end());
  size_t m_times = event_times.size();

  std::vector<double> d(m_times, 0.0), n_at(m_times, 0.0);
  for (uint32_t m : members) {
    double t = outcome.times[m];
    if (outcome.events[m]) {
      size_t j = static_cast<size_t>(
          std::lower_bound(event_times.begin(), event_times.end(), t) - event_times.begin());
      d[j] += 1.0;
    }
  }
  {
    // at-risk = members with time >= event time
    size_t p = 0;
    for (size_t j = 0; j < m_times; ++j) {
      while (p < n && sorted_times[p] < event_times[j]) ++p;
      n_at[j] = static_cast<double>(n - p);
    }
  }
  // Per-time constants of the expectation and variance sums.
  std::vector<double> e_coef(m_times), v_coef(m_times);
  for (size_t j = 0; j < m_times; ++j) {
    e_coef[j] = d[j] / n_at[j];
    v_coef[j] = n_at[j] > 1.0
                    ? d[j] * (n_at[j] - d[j]) / ((n_at[j] - 1.0) * n_at[j] * n_at[j])
                    : 0.0;
  }

  // Membership rank: largest event-time index with t_j <= T, -1 when none.
  std::vector<int> rank(n);
  std::vector<uint8_t> is_event(n);
  std::vector<double> n_a(m_times);

  for (uint32_t col = 0; col < features.columns.size(); ++col) {
    const std::vector<double>& values = features.columns[col];
    std::vector<uint32_t> order(n);
    std::iota(order.begin(), order.end(), 0u);
    std::sort(order.begin(), order.end(), [&](uint32_t a, uint32_t b) {
      double va = values[members[a]], vb = values[members[b]];
      if (va != vb) return va < vb;
      return members[a] < members[b];
    });
    for (size_t i = 0; i < n; ++i) {
      uint32_t m = members[order[i]];
      double t = outcome.times[m];
      rank[i] = static_cast<int>(std::upper_bound(event_times.begin(), event_times.end(), t) -
                                 event_times.begin()) -
                1;
      is_event[i] = outcome.events[m];
    }

    std::fill(n_a.begin(), n_a.end(), 0.0);
    double observed_a = 0.0;
    size_t taken = 0;
    while (taken < n) {
      // Move the whole run of equal feature values into the left group.
      double v = values[members[order[taken]]];
      size_t run_end = taken;
      while (run_end < n && values[members[order[run_end]]] == v) ++run_end;
      for (size_t i = taken; i < run_end; ++i) {
        for (int j = 0; j <= rank[i]; ++j) n_a[static_cast<size_t>(j)] += 1.0;
        if (is_event[i] && rank[i] >= 0 &&
            event_times[static_cast<size_t>(rank[i])] == outcome.times[members[order[i]]]) {
          observed_a += 1.0;
        }
      }
      taken = run_end;
      if (taken == n) break;  // all members left -> not a split
      if (taken < min_samples_leaf) continue;
      if (n - taken < min_samples_leaf) break;

      double next_v = values[members[order[taken]]];
      double threshold = 0.5 * (v + next_v);
      if (threshold >= next_v) threshold = v;  // midpoint collapsed numerically

      double expected_a = 0.0, variance = 0.0;
      for (size_t j = 0; j < m_times; ++j) {
        expected_a += e_coef[j] * n_a[j];
        variance += v_coef[j] * n_a[j] * (n_at[j] - n_a[j]);
      }
      if (variance <= 0.0) continue;
      double diff = observed_a - expected_a;
      double stat = diff * diff / variance;
      if (stat > best.statistic) {
        best.found = true;
        best.statistic = stat;
        best.column = col;
        best.threshold = threshold;
        best.left.assign(taken, 0);
        for (size_t i = 0; i < taken; ++i) best.left[i] = members[order[i]];
        best.right.assign(n - taken, 0);
        for (size_t i = taken; i < n; ++i) best.right[i - taken] = members[order[i]];
      }
    }
  }
  if (best.found) {
    std::sort(best.left.begin(), best.left.end());
    std::sort(best.right.begin(), best.right.end());
  }
  return best;
}

Genotype covariate_ref(uint32_t idx) {
  Genotype g;
  g.template_depth = 0;
  g.symbols = {Symbol::make_covariate(idx)};
  return g;
}

void induce_node(SurvivalTree& tree, SurvSpan outcome, const FeatureMatrix& features,
                 const std::vector<uint32_t>& members, size_t pos, int depth,
                 size_t min_samples_leaf) {
  TreeNode& node = tree.nodes[pos];
  if (depth < tree.max_depth) {
    BestSplit split = best_split_for_node(outcome, features, members, min_samples_leaf);
    if (split.found && split.statistic > 0.0) {
      node.kind = TreeNode::Kind::Internal;
      node.split.kind = Split::Kind::Threshold;
      node.split.column = split.column;
      node.split.threshold = split.threshold;
      node.split.binary_feature = features.binary;
      node.split.expr = features.exprs.empty() ? covariate_ref(split.column)
                                               : features.exprs[split.column];
      induce_node(tree, outcome, features, split.left, 2 * pos + 1, depth + 1,
                  min_samples_leaf);
      induce_node(tree, outcome, features, split.right, 2 * pos + 2, depth + 1,
                  min_samples_leaf);
      return;
    }
  }
  node.kind = TreeNode::Kind::Leaf;
  node.survival = leaf_curve(outcome, members);
  node.count = members.size();
}

}  // namespace

SurvivalTree greedy_induce(SurvSpan outcome, const FeatureMatrix& features, int max_depth,
                           size_t min_samples_leaf) {
  if (max_depth < 0 || max_depth > 6) throw ConfigError("tree depth must be in [0, 6]");
  if (features.rows() != outcome.size()) throw SchemaError("feature/outcome row mismatch");
  if (min_samples_leaf == 0) throw ConfigError("min_samples_leaf must be >= 1");
  SurvivalTree tree;
  tree.max_depth = max_depth;
  tree.nodes.resize(Genotype::positions_for_depth(max_depth));
  std::vector<uint32_t> all(outcome.size());
  std::iota(all.begin(), all.end(), 0u);
  induce_node(tree, outcome, features, all, 0, 0, min_samples_leaf);
  return tree;
}

SurvivalTree decode_evolved(const MultiGenotype& mg, const SurvivalDataset& train,
                            int max_depth, size_t min_samples_leaf) {
  if (max_depth < 1 || max_depth > 6) throw ConfigError("tree depth must be in [1, 6]");
  size_t need = Genotype::positions_for_depth(max_depth - 1);
  if (mg.trees.size() != need) {
    throw ConfigError("decoding depth " + std::to_string(max_depth) + " needs " +
                      std::to_string(need) + " GP trees, got " + std::to_string(mg.trees.size()));
  }
  if (min_samples_leaf == 0) throw ConfigError("min_samples_leaf must be >= 1");

  size_t n = train.n();
  EvalWorkspace ws;
  std::vector<std::vector<uint8_t>> cols(mg.trees.size());
  for (size_t k = 0; k < mg.trees.size(); ++k) {
    binary_column(mg.trees[k], train.columns, n, cols[k], ws);
  }

  SurvivalTree tree;
  tree.max_depth = max_depth;
  tree.nodes.resize(Genotype::positions_for_depth(max_depth));
  SurvSpan outcome{train.times, train.events};

  struct Item {
    size_t pos;
    int depth;
    std::vector<uint32_t> members;
  };
  std::vector<Item> queue;
  std::vector<uint32_t> all(n);
  std::iota(all.begin(), all.end(), 0u);
  queue.push_back({0, 0, std::move(all)});
  while (!queue.empty()) {
    Item item = std::move(queue.front());
    queue.erase(queue.begin());
    TreeNode& node = tree.nodes[item.pos];
    if (item.depth < max_depth) {
      const auto& col = cols[item.pos];
      std::vector<uint32_t> left, right;
      for (uint32_t r : item.members) (col[r] ? left : right).push_back(r);
      if (left.size() >= min_samples_leaf && right.size() >= min_samples_leaf) {
        node.kind = TreeNode::Kind::Internal;
        node.split.kind = Split::Kind::Expression;
        node.split.expr = mg.trees[item.pos];
        node.split.column = static_cast<uint32_t>(item.pos);
        queue.push_back({2 * item.pos + 1, item.depth + 1, std::move(left)});
        queue.push_back({2 * item.pos + 2, item.depth + 1, std::move(right)});
        continue;
      }
    }
    node.kind = TreeNode::Kind::Leaf;
    node.survival = leaf_curve(outcome, item.members);
    node.count = item.members.size();
  }
  return tree;
}

std::string stratification_signature(const SurvivalTree& tree, const SurvivalDataset& data) {
  std::string sig(data.n(), '\0');
  std::vector<int> label_of(tree.nodes.size(), -1);
  int next = 0;
  std::vector<double> row(data.dims());
  for (size_t i = 0; i < data.n(); ++i) {
    for (size_t d = 0; d < data.dims(); ++d) row[d] = data.columns[d][i];
    size_t leaf = tree.leaf_for_row(row);
    if (label_of[leaf] < 0) label_of[leaf] = next++;
    sig[i] = static_cast<char>(label_of[leaf]);
  }
  return sig;
}

MergedStratification stratify_and_merge(const SurvivalTree& tree, const SurvivalDataset& data,
                                        double alpha) {
  struct Group {
    std::vector<size_t> leaves;
    std::vector<double> times;
    std::vector<uint8_t> events;
    std::vector<size_t> rows;
  };
  std::vector<size_t> leaf_of(data.n());
  std::vector<double> row(data.dims());
  for (size_t i = 0; i < data.n(); ++i) {
    for (size_t d = 0; d < data.dims(); ++d) row[d] = data.columns[d][i];
    leaf_of[i] = tree.leaf_for_row(row);
  }
  std::vector<Group> groups;
  for (size_t leaf : tree.leaf_positions()) {
    Group g;
    g.leaves = {leaf};
    for (size_t i = 0; i < data.n(); ++i) {
      if (leaf_of[i] == leaf) {
        g.rows.push_back(i);
        g.times.push_back(data.times[i]);
        g.events.push_back(data.events[i]);
      }
    }
    if (!g.rows.empty()) groups.push_back(std::move(g));
  }

  while (groups.size() > 1) {
    double best_p = -1.0;
    size_t bi = 0, bj = 0;
    for (size_t i = 0; i < groups.size(); ++i) {
      for (size_t j = i + 1; j < groups.size(); ++j) {
        double p = logrank_two_sample(groups[i].times, groups[i].events, groups[j].times,
                                      groups[j].events)
                       .p_value;
        if (p > best_p) {
          best_p = p;
          bi = i;
          bj = j;
        }
      }
    }
    if (best_p <= alpha) break;
    Group& a = groups[bi];
    Group& b = groups[bj];
    a.leaves.insert(a.leaves.end(), b.leaves.begin(), b.leaves.end());
    a.rows.insert(a.rows.end(), b.rows.begin(), b.rows.end());
    a.times.insert(a.times.end(), b.times.begin(), b.times.end());
    a.events.insert(a.events.end(), b.events.begin(), b.events.end());
    groups.erase(groups.begin() + static_cast<long>(bj));
  }

  MergedStratification out;
  out.group_of_row.assign(data.n(), -1);
  for (size_t gi = 0; gi < groups.size(); ++gi) {
    std::sort(groups[gi].leaves.begin(), groups[gi].leaves.end());
    out.group_leaves.push_back(groups[gi].leaves);
    out.curves.push_back(kaplan_meier(groups[gi].times, groups[gi].events));
    for (size_t r : groups[gi].rows) out.group_of_row[r] = static_cast<int>(gi);
  }
  return out;
}

namespace {

std::string split_label(const Split& split, std::span<const std::string> names) {
  if (split.kind == Split::Kind::Expression) {
    return to_expression_string(split.expr, names);
  }
  std::string feature = to_expression_string(split.expr, names);
  return "(" + feature + " <= " + format_double(split.threshold) + ")";
}

std::string leaf_label(const TreeNode& node) {
  double med = node.survival.median();
  std::string med_str = std::isfinite(med) ? format_double(med) : "NA";
  return "leaf n=" + std::to_string(node.count) + " median=" + med_str;
}

}  // namespace

std::string render_tree(const SurvivalTree& tree, RenderFormat format,
                        std::span<const std::string> names) {
  std::string out;
  if (format == RenderFormat::Text) {
    // Iterative preorder with explicit branch labels.
    struct Frame {
      size_t pos;
      int depth;
      std::string label;
    };
    std::vector<Frame> stack{{0, 0, ""}};
    while (!stack.empty()) {
      Frame f = stack.back();
      stack.pop_back();
      const TreeNode& node = tree.nodes[f.pos];
      std::string pad(static_cast<size_t>(2 * f.depth), ' ');
      std::string body = node.kind == TreeNode::Kind::Leaf
                             ? leaf_label(node)
                             : "if " + split_label(node.split, names);
      out += pad + f.label + body + "\n";
      if (node.kind == TreeNode::Kind::Internal) {
        stack.push_back({2 * f.pos + 2, f.depth + 1, "no:  "});
        stack.push_back({2 * f.pos + 1, f.depth + 1, "yes: "});
      }
    }
    return out;
  }
  out += "digraph survival_tree {\n";
  out += "  node [shape=box];\n";
  for (size_t i = 0; i < tree.nodes.size(); ++i) {
    const TreeNode& node = tree.nodes[i];
    if (node.kind == TreeNode::Kind::Unused) continue;
    std::string label = node.kind == TreeNode::Kind::Leaf ? leaf_label(node)
                                                          : split_label(node.split, names);
    // Escape label quotes for dot.
    std::string escaped;
    for (char c : label) {
      if (c == '"') escaped += '\\';
      escaped += c;
    }
    out += "  n" + std::to_string(i) + " [label=\"" + escaped + "\"];\n";
    if (node.kind == TreeNode::Kind::Internal) {
      out += "  n" + std::to_string(i) + " -> n" + std::to_string(2 * i + 1) +
             " [label=\"true\"];\n";
      out += "  n" + std::to_string(i) + " -> n" + std::to_string(2 * i + 2) +
             " [label=\"false\"];\n";
    }
  }
  out += "}\n";
  return out;
}

nlohmann::json tree_to_json(const SurvivalTree& tree, std::span<const std::string> names) {
  nlohmann::json nodes = nlohmann::json::array();
  for (const auto& node : tree.nodes) {
    nlohmann::json j;
    switch (node.kind) {
      case TreeNode::Kind::Unused:
        j["kind"] = "unused";
        break;
      case TreeNode::Kind::Leaf:
        j["kind"] = "leaf";
        j["count"] = node.count;
        j["knots"] = node.survival.knots;
        j["values"] = node.survival.values;
        break;
      case TreeNode::Kind::Internal: {
        j["kind"] = "internal";
        nlohmann::json s;
        s["expr"] = to_expression_string(node.split.expr, names);
        if (node.split.kind == Split::Kind::Threshold) {
          s["type"] = "threshold";
          s["threshold"] = node.split.threshold;
          s["binary"] = node.split.binary_feature;
          s["column"] = node.split.column;
        } else {
          s["type"] = "expression";
        }
        j["split"] = std::move(s);
        break;
      }
    }
    nodes.push_back(std::move(j));
  }
  return nlohmann::json{{"max_depth", tree.max_depth}, {"nodes", std::move(nodes)}};
}

SurvivalTree tree_from_json(const nlohmann::json& j, std::span<const std::string> names) {
  SurvivalTree tree;
  tree.max_depth = j.at("max_depth").get<int>();
  const auto& nodes = j.at("nodes");
  tree.nodes.resize(nodes.size());
  for (size_t i = 0; i < nodes.size(); ++i) {
    const auto& nj = nodes[i];
    std::string kind = nj.at("kind").get<std::string>();
    TreeNode& node = tree.nodes[i];
    if (kind == "unused") {
      node.kind = TreeNode::Kind::Unused;
    } else if (kind == "leaf") {
      node.kind = TreeNode::Kind::Leaf;
      node.count = nj.at("count").get<size_t>();
      node.survival.knots = nj.at("knots").get<std::vector<double>>();
      node.survival.values = nj.at("values").get<std::vector<double>>();
    } else if (kind == "internal") {
      node.kind = TreeNode::Kind::Internal;
      const auto& s = nj.at("split");
      node.split.expr = parse_expression(s.at("expr").get<std::string>(), names);
      if (s.at("type").get<std::string>() == "threshold") {
        node.split.kind = Split::Kind::Threshold;
        node.split.threshold = s.at("threshold").get<double>();
        node.split.binary_feature = s.at("binary").get<bool>();
        node.split.column = s.at("column").get<uint32_t>();
      } else {
        node.split.kind = Split::Kind::Expression;
      }
    } else {
      throw FormatError("unknown tree node kind '" + kind + "'");
    }
  }
  return tree;
}

}  // namespace evost
