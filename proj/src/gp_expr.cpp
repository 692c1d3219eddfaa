#include "evost/gp_expr.hpp"

#include <algorithm>
#include <cfloat>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <tuple>

#include "evost/common.hpp"
#include "evost/metrics.hpp"
#include "evost/rng.hpp"

namespace evost {

bool op_is_unary(Op op) { return op == Op::Square || op == Op::Not; }

bool op_is_commutative(Op op) {
  return op == Op::Add || op == Op::Mul || op == Op::And || op == Op::Or;
}

std::string_view op_token(Op op) {
  switch (op) {
    case Op::Add: return "+";
    case Op::Sub: return "-";
    case Op::Mul: return "*";
    case Op::Div: return "/";
    case Op::Square: return "^2";
    case Op::Leq: return "<=";
    case Op::Not: return "NOT";
    case Op::And: return "AND";
    case Op::Or: return "OR";
  }
  return "?";
}

OperatorSet OperatorSet::from_tokens(std::span<const std::string> tokens) {
  OperatorSet set;
  for (const auto& t : tokens) {
    if (t == "+") set.ops.push_back(Op::Add);
    else if (t == "-") set.ops.push_back(Op::Sub);
    else if (t == "*") set.ops.push_back(Op::Mul);
    else if (t == "/") set.ops.push_back(Op::Div);
    else if (t == "^2") set.ops.push_back(Op::Square);
    else if (t == "<=") set.ops.push_back(Op::Leq);
    else if (t == "NOT") set.ops.push_back(Op::Not);
    else if (t == "AND") set.ops.push_back(Op::And);
    else if (t == "OR") set.ops.push_back(Op::Or);
    else throw ConfigError("unknown operator token '" + t + "'");
  }
  if (set.ops.empty()) throw ConfigError("operator set is empty");
  std::sort(set.ops.begin(), set.ops.end());
  set.ops.erase(std::unique(set.ops.begin(), set.ops.end()), set.ops.end());
  return set;
}

OperatorSet OperatorSet::numeric() {
  return {{Op::Add, Op::Sub, Op::Mul, Op::Div, Op::Square}};
}
OperatorSet OperatorSet::full() {
  return {{Op::Add, Op::Sub, Op::Mul, Op::Div, Op::Square, Op::Leq, Op::Not, Op::And, Op::Or}};
}
OperatorSet OperatorSet::xor_reduced() { return {{Op::Add, Op::Mul, Op::Square, Op::Leq}}; }

bool OperatorSet::contains(Op op) const {
  return std::find(ops.begin(), ops.end(), op) != ops.end();
}

std::vector<std::string> OperatorSet::tokens() const {
  std::vector<std::string> out;
  for (Op op : ops) out.emplace_back(op_token(op));
  return out;
}

Symbol Symbol::make_op(Op o) {
  Symbol s;
  s.kind = Kind::Operator;
  s.op = o;
  return s;
}
Symbol Symbol::make_covariate(uint32_t idx) {
  Symbol s;
  s.kind = Kind::Covariate;
  s.covariate = idx;
  return s;
}
Symbol Symbol::make_constant(double v) {
  Symbol s;
  s.kind = Kind::Constant;
  s.constant = v;
  return s;
}

bool symbol_less(const Symbol& a, const Symbol& b) {
  return std::tuple(static_cast<int>(a.kind), static_cast<int>(a.op), a.covariate, a.constant) <
         std::tuple(static_cast<int>(b.kind), static_cast<int>(b.op), b.covariate, b.constant);
}

ConstantPool ConstantPool::from_dataset(const SurvivalDataset& data, int per_covariate) {
  if (per_covariate < 2) throw ConfigError("constant pool needs at least 2 quantiles");
  ConstantPool pool;
  for (const auto& col : data.columns) {
    std::vector<double> sorted(col);
    std::sort(sorted.begin(), sorted.end());
    for (int i = 0; i < per_covariate; ++i) {
      double p = 100.0 * static_cast<double>(i) / static_cast<double>(per_covariate - 1);
      pool.values.push_back(percentile_sorted(sorted, p));
    }
  }
  if (pool.values.empty()) throw ConfigError("constant pool is empty (dataset has no covariates)");
  return pool;
}

namespace {

Symbol random_terminal(size_t n_covariates, const ConstantPool& pool, Rng& rng) {
  if (rng.below(2) == 0) {
    return Symbol::make_covariate(static_cast<uint32_t>(rng.below(n_covariates)));
  }
  return Symbol::make_constant(pool.values[rng.below(pool.values.size())]);
}

}  // namespace

Genotype random_genotype(int template_depth, const OperatorSet& ops, size_t n_covariates,
                         const ConstantPool& pool, Rng& rng) {
  if (template_depth < 0) throw ConfigError("template depth must be >= 0");
  if (n_covariates == 0) throw ConfigError("need at least one covariate");
  Genotype g;
  g.template_depth = template_depth;
  size_t total = Genotype::positions_for_depth(template_depth);
  size_t first_leaf = total / 2;  // positions [first_leaf, total) are the last level
  g.symbols.resize(total);
  for (size_t pos = 0; pos < total; ++pos) {
    if (pos >= first_leaf) {
      g.symbols[pos] = random_terminal(n_covariates, pool, rng);
    } else {
      uint64_t c = rng.below(ops.ops.size() + 1);
      g.symbols[pos] = c < ops.ops.size() ? Symbol::make_op(ops.ops[c])
                                          : random_terminal(n_covariates, pool, rng);
    }
  }
  return g;
}

namespace {

inline double saturate(double v) {
  if (std::isnan(v)) return 0.0;  // unreachable with this operator set; kept for totality
  if (v > DBL_MAX) return DBL_MAX;
  if (v < -DBL_MAX) return -DBL_MAX;
  return v;
}

inline bool truthy(double v) { return v > 0.0; }

inline double apply_binary(Op op, double a, double b) {
  switch (op) {
    case Op::Add: return saturate(a + b);
    case Op::Sub: return saturate(a - b);
    case Op::Mul: return saturate(a * b);
    case Op::Div: return std::abs(b) <= 1e-6 ? a : saturate(a / b);
    case Op::Leq: return a <= b ? 1.0 : 0.0;
    case Op::And: return (truthy(a) && truthy(b)) ? 1.0 : 0.0;
    case Op::Or: return (truthy(a) || truthy(b)) ? 1.0 : 0.0;
    default: return 0.0;
  }
}

inline double apply_unary(Op op, double a) {
  if (op == Op::Square) return saturate(a * a);
  return truthy(a) ? 0.0 : 1.0;  // NOT
}

double eval_node(const Genotype& g, size_t pos, std::span<const double> row) {
  const Symbol& s = g.symbols[pos];
  if (s.kind == Symbol::Kind::Covariate) return row[s.covariate];
  if (s.kind == Symbol::Kind::Constant) return s.constant;
  if (op_is_unary(s.op)) return apply_unary(s.op, eval_node(g, 2 * pos + 1, row));
  return apply_binary(s.op, eval_node(g, 2 * pos + 1, row), eval_node(g, 2 * pos + 2, row));
}

}  // namespace

double evaluate(const Genotype& g, std::span<const double> row) {
  return eval_node(g, 0, row);
}

bool binary_output(const Genotype& g, std::span<const double> row) {
  return truthy(evaluate(g, row));
}

std::vector<size_t> active_positions(const Genotype& g) {
  std::vector<size_t> out;
  std::vector<size_t> stack{0};
  while (!stack.empty()) {
    size_t pos = stack.back();
    stack.pop_back();
    out.push_back(pos);
    const Symbol& s = g.symbols[pos];
    if (s.is_terminal()) continue;
    if (!op_is_unary(s.op)) stack.push_back(2 * pos + 2);
    stack.push_back(2 * pos + 1);
  }
  std::sort(out.begin(), out.end());
  return out;
}

int active_size(const Genotype& g) {
  return static_cast<int>(active_positions(g).size());
}

namespace {

void eval_column_node(const Genotype& g, size_t pos, int level,
                      const std::vector<std::vector<double>>& columns, size_t n,
                      EvalWorkspace& ws, double* out) {
  const Symbol& s = g.symbols[pos];
  if (s.kind == Symbol::Kind::Covariate) {
    const double* col = columns[s.covariate].data();
    std::copy(col, col + n, out);
    return;
  }
  if (s.kind == Symbol::Kind::Constant) {
    std::fill(out, out + n, s.constant);
    return;
  }
  eval_column_node(g, 2 * pos + 1, level + 1, columns, n, ws, out);
  if (op_is_unary(s.op)) {
    if (s.op == Op::Square) {
      for (size_t i = 0; i < n; ++i) out[i] = saturate(out[i] * out[i]);
    } else {
      for (size_t i = 0; i < n; ++i) out[i] = truthy(out[i]) ? 0.0 : 1.0;
    }
    return;
  }
  // The workspace is pre-sized by evaluate_column, so taking the buffer
  // pointer here stays valid across the recursive call.
  ws.scratch[static_cast<size_t>(level)].resize(n);
  double* rhs = ws.scratch[static_cast<size_t>(level)].data();
  eval_column_node(g, 2 * pos + 2, level + 1, columns, n, ws, rhs);
  switch (s.op) {
    case Op::Add:
      for (size_t i = 0; i < n; ++i) out[i] = saturate(out[i] + rhs[i]);
      break;
    case Op::Sub:
      for (size_t i = 0; i < n; ++i) out[i] = saturate(out[i] - rhs[i]);
      break;
    case Op::Mul:
      for (size_t i = 0; i < n; ++i) out[i] = saturate(out[i] * rhs[i]);
      break;
    case Op::Div:
      for (size_t i = 0; i < n; ++i) {
        out[i] = std::abs(rhs[i]) <= 1e-6 ? out[i] : saturate(out[i] / rhs[i]);
      }
      break;
    case Op::Leq:
      for (size_t i = 0; i < n; ++i) out[i] = out[i] <= rhs[i] ? 1.0 : 0.0;
      break;
    case Op::And:
      for (size_t i = 0; i < n; ++i) out[i] = (truthy(out[i]) && truthy(rhs[i])) ? 1.0 : 0.0;
      break;
    case Op::Or:
      for (size_t i = 0; i < n; ++i) out[i] = (truthy(out[i]) || truthy(rhs[i])) ? 1.0 : 0.0;
      break;
    default:
      break;
  }
}

}  // namespace

void evaluate_column(const Genotype& g, const std::vector<std::vector<double>>& columns,
                     size_t n_rows, std::span<double> out, EvalWorkspace& ws) {
  if (ws.scratch.size() < static_cast<size_t>(g.template_depth) + 2) {
    ws.scratch.resize(static_cast<size_t>(g.template_depth) + 2);
  }
  eval_column_node(g, 0, 0, columns, n_rows, ws, out.data());
}

void binary_column(const Genotype& g, const std::vector<std::vector<double>>& columns,
                   size_t n_rows, std::vector<uint8_t>& out, EvalWorkspace& ws) {
  if (ws.scratch.size() < static_cast<size_t>(g.template_depth) + 2) {
    ws.scratch.resize(static_cast<size_t>(g.template_depth) + 2);
  }
  auto& vals = ws.scratch.back();
  vals.resize(n_rows);
  double* vp = vals.data();
  eval_column_node(g, 0, 0, columns, n_rows, ws, vp);
  out.resize(n_rows);
  for (size_t i = 0; i < n_rows; ++i) out[i] = truthy(vp[i]) ? 1 : 0;
}

namespace {

std::string constant_repr(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string render(const Genotype& g, size_t pos, std::span<const std::string> names) {
  const Symbol& s = g.symbols[pos];
  if (s.kind == Symbol::Kind::Covariate) {
    if (!names.empty()) return names[s.covariate];
    return "x" + std::to_string(s.covariate);
  }
  if (s.kind == Symbol::Kind::Constant) return constant_repr(s.constant);
  if (s.op == Op::Square) return "(" + render(g, 2 * pos + 1, names) + "^2)";
  if (s.op == Op::Not) return "(NOT " + render(g, 2 * pos + 1, names) + ")";
  std::string lhs = render(g, 2 * pos + 1, names);
  std::string rhs = render(g, 2 * pos + 2, names);
  if (op_is_commutative(s.op) && rhs < lhs) std::swap(lhs, rhs);
  return "(" + lhs + " " + std::string(op_token(s.op)) + " " + rhs + ")";
}

}  // namespace

std::string to_expression_string(const Genotype& g, std::span<const std::string> names) {
  return render(g, 0, names);
}

namespace {

struct ParseNode {
  Symbol sym;
  int left = -1;
  int right = -1;
};

class ExprParser {
 public:
  ExprParser(std::string_view text, std::span<const std::string> names)
      : text_(text), names_(names) {}

  Genotype run() {
    int root = parse();
    skip_ws();
    if (pos_ != text_.size()) throw FormatError("trailing characters in expression");
    int depth = node_depth(root);
    Genotype g;
    g.template_depth = depth;
    g.symbols.assign(Genotype::positions_for_depth(depth), Symbol::make_constant(0.0));
    place(root, 0, g);
    return g;
  }

 private:
  void skip_ws() {
    while (pos_ < text_.size() && text_[pos_] == ' ') ++pos_;
  }

  bool consume(std::string_view token) {
    if (text_.substr(pos_, token.size()) == token) {
      pos_ += token.size();
      return true;
    }
    return false;
  }

  int parse() {
    skip_ws();
    if (pos_ >= text_.size()) throw FormatError("unexpected end of expression");
    if (text_[pos_] == '(') {
      ++pos_;
      skip_ws();
      if (consume("NOT ") || consume("NOT(")) {
        if (text_[pos_ - 1] == '(') --pos_;  // NOT( : reparse the paren
        int child = parse();
        expect(')');
        return add_node(Symbol::make_op(Op::Not), child, -1);
      }
      int lhs = parse();
      skip_ws();
      if (consume("^2")) {
        expect(')');
        return add_node(Symbol::make_op(Op::Square), lhs, -1);
      }
      Op op = read_operator();
      int rhs = parse();
      expect(')');
      return add_node(Symbol::make_op(op), lhs, rhs);
    }
    return parse_atom();
  }

  Op read_operator() {
    skip_ws();
    for (Op op : {Op::Leq, Op::And, Op::Or, Op::Add, Op::Sub, Op::Mul, Op::Div}) {
      std::string token(op_token(op));
      if (text_.substr(pos_, token.size() + 1) == token + " " ||
          text_.substr(pos_, token.size() + 1) == token + "(") {
        pos_ += token.size();
        return op;
      }
    }
    throw FormatError("expected operator at position " + std::to_string(pos_));
  }

  int parse_atom() {
    size_t start = pos_;
    while (pos_ < text_.size() && text_[pos_] != ' ' && text_[pos_] != '(' &&
           text_[pos_] != ')' && text_[pos_] != '^') {
      ++pos_;
    }
    std::string_view atom = text_.substr(start, pos_ - start);
    if (atom.empty()) throw FormatError("empty token at position " + std::to_string(start));
    double value = 0.0;
    auto [ptr, ec] = std::from_chars(atom.data(), atom.data() + atom.size(), value);
    if (ec == std::errc() && ptr == atom.data() + atom.size()) {
      return add_node(Symbol::make_constant(value), -1, -1);
    }
    if (!names_.empty()) {
      for (size_t i = 0; i < names_.size(); ++i) {
        if (names_[i] == atom) {
          return add_node(Symbol::make_covariate(static_cast<uint32_t>(i)), -1, -1);
        }
      }
      throw FormatError("unknown covariate '" + std::string(atom) + "'");
    }
    if (atom.size() >= 2 && atom[0] == 'x') {
      uint32_t idx = 0;
      auto [p2, e2] = std::from_chars(atom.data() + 1, atom.data() + atom.size(), idx);
      if (e2 == std::errc() && p2 == atom.data() + atom.size()) {
        return add_node(Symbol::make_covariate(idx), -1, -1);
      }
    }
    throw FormatError("unknown covariate '" + std::string(atom) + "'");
  }

  void expect(char c) {
    skip_ws();
    if (pos_ >= text_.size() || text_[pos_] != c) {
      throw FormatError(std::string("expected '") + c + "'");
    }
    ++pos_;
  }

  int add_node(Symbol s, int left, int right) {
    nodes_.push_back({s, left, right});
    return static_cast<int>(nodes_.size() - 1);
  }

  int node_depth(int idx) const {
    const ParseNode& n = nodes_[static_cast<size_t>(idx)];
    int d = 0;
    if (n.left >= 0) d = std::max(d, 1 + node_depth(n.left));
    if (n.right >= 0) d = std::max(d, 1 + node_depth(n.right));
    return d;
  }

  void place(int idx, size_t pos, Genotype& g) const {
    const ParseNode& n = nodes_[static_cast<size_t>(idx)];
    g.symbols[pos] = n.sym;
    if (n.left >= 0) place(n.left, 2 * pos + 1, g);
    if (n.right >= 0) place(n.right, 2 * pos + 2, g);
  }

  std::string_view text_;
  std::span<const std::string> names_;
  size_t pos_ = 0;
  std::vector<ParseNode> nodes_;
};

}  // namespace

Genotype parse_expression(std::string_view text, std::span<const std::string> names) {
  return ExprParser(text, names).run();
}

}  // namespace evost
