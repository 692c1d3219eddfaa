#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "evost/dataset.hpp"

namespace evost {

class Rng;

enum class Op : uint8_t { Add, Sub, Mul, Div, Square, Leq, Not, And, Or };

bool op_is_unary(Op op);
bool op_is_commutative(Op op);
std::string_view op_token(Op op);

struct OperatorSet {
  std::vector<Op> ops;  // sorted, unique

  static OperatorSet from_tokens(std::span<const std::string> tokens);
  // Arithmetic-only set used for numeric engineered features.
  static OperatorSet numeric();
  // Adds the boolean/comparison operators.
  static OperatorSet full();
  // Reduced set for the synthetic two-covariate problem.
  static OperatorSet xor_reduced();

  bool contains(Op op) const;
  std::vector<std::string> tokens() const;
};

struct Symbol {
  enum class Kind : uint8_t { Operator, Covariate, Constant };
  Kind kind = Kind::Constant;
  Op op = Op::Add;
  uint32_t covariate = 0;
  double constant = 0.0;

  static Symbol make_op(Op o);
  static Symbol make_covariate(uint32_t idx);
  static Symbol make_constant(double v);
  bool is_terminal() const { return kind != Kind::Operator; }
  bool operator==(const Symbol&) const = default;
};

// Total order used for canonical symbol ids (linkage learning).
bool symbol_less(const Symbol& a, const Symbol& b);

// Fixed-template expression tree in heap layout: children of position i sit
// at 2i+1 / 2i+2, template depth h gives 2^(h+1)-1 positions.  A terminal at
// an internal position truncates the subtree below it; unary operators read
// their left child only.
struct Genotype {
  int template_depth = 0;
  std::vector<Symbol> symbols;

  size_t size() const { return symbols.size(); }
  static size_t positions_for_depth(int h) { return (size_t{1} << (h + 1)) - 1; }
};

struct MultiGenotype {
  std::vector<Genotype> trees;
};

// Sampling pool for constant terminals: pooled empirical quantiles of every
// covariate column.
struct ConstantPool {
  std::vector<double> values;
  static ConstantPool from_dataset(const SurvivalDataset& data, int per_covariate = 101);
};

// Internal positions draw uniformly over |ops|+1 choices (each operator, or
// "terminal"); leaf positions draw terminals directly.  Terminals split
// evenly between covariate references and pool constants.
Genotype random_genotype(int template_depth, const OperatorSet& ops, size_t n_covariates,
                         const ConstantPool& pool, Rng& rng);

// Total semantics: booleans coerce to {0,1}, truthiness is v > 0, division by
// |d| <= 1e-6 returns the numerator, non-finite intermediates saturate to
// +-DBL_MAX.  Never traps on finite inputs.
double evaluate(const Genotype& g, std::span<const double> row);
bool binary_output(const Genotype& g, std::span<const double> row);

int active_size(const Genotype& g);
std::vector<size_t> active_positions(const Genotype& g);  // preorder

// Column-wise evaluation over a column-major covariate matrix.
struct EvalWorkspace {
  std::vector<std::vector<double>> scratch;
};
void evaluate_column(const Genotype& g, const std::vector<std::vector<double>>& columns,
                     size_t n_rows, std::span<double> out, EvalWorkspace& ws);
void binary_column(const Genotype& g, const std::vector<std::vector<double>>& columns,
                   size_t n_rows, std::vector<uint8_t>& out, EvalWorkspace& ws);

// Canonical infix form: fully parenthesized, constants with 17 significant
// digits, commutative operands in lexicographic order.  Two genotypes with
// equal strings are semantically identical.
std::string to_expression_string(const Genotype& g,
                                 std::span<const std::string> covariate_names = {});

// Inverse of to_expression_string (accepts any fully parenthesized form).
// Covariate tokens resolve against `covariate_names`, or x<i> when empty.
Genotype parse_expression(std::string_view text,
                          std::span<const std::string> covariate_names = {});

}  // namespace evost
