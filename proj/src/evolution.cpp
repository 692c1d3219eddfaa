#include "evost/evolution.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <functional>
#include <map>
#include <mutex>
#include <thread>
#include <unordered_set>
#include <utility>

#include "evost/common.hpp"

namespace evost {

// ---- archive ----------------------------------------------------------------

bool ParetoArchive::update(const Individual& candidate) {
  ObjectivePoint c = candidate.fitness.objectives();
  for (const auto& m : members_) {
    // Weak dominance covers the identical-objectives case (first wins).
    if (weakly_dominates(m.fitness.objectives(), c)) return false;
  }
  std::erase_if(members_, [&](const Individual& m) {
    return weakly_dominates(c, m.fitness.objectives());
  });
  members_.push_back(candidate);
  return true;
}

std::vector<ObjectivePoint> ParetoArchive::front() const {
  std::vector<ObjectivePoint> pts;
  pts.reserve(members_.size());
  for (const auto& m : members_) pts.push_back(m.fitness.objectives());
  return pts;
}

bool ParetoArchive::mutually_nondominated() const {
  for (size_t i = 0; i < members_.size(); ++i) {
    for (size_t j = 0; j < members_.size(); ++j) {
      if (i == j) continue;
      if (weakly_dominates(members_[i].fitness.objectives(), members_[j].fitness.objectives())) {
        return false;
      }
    }
  }
  return true;
}

double archive_hypervolume(const ParetoArchive& archive, const ObjectivePoint& reference) {
  std::vector<ObjectivePoint> inside;
  for (const auto& m : archive.members()) {
    ObjectivePoint p = m.fitness.objectives();
    if (weakly_dominates(p, reference)) inside.push_back(p);
  }
  return hypervolume_2d(inside, reference);
}

// ---- config -----------------------------------------------------------------

void RunConfig::validate() const {
  if (population_size < 1) throw ConfigError("population_size must be >= 1");
  if (max_generations < 1) throw ConfigError("max_generations must be >= 1");
  if (stagnation_window < 1) throw ConfigError("stagnation_window must be >= 1");
  if (template_depth < 1 || template_depth > 6) {
    throw ConfigError("template_depth must lie in [1, 6]");
  }
  if (st_depth < 0 || st_depth > 6) throw ConfigError("st_depth must lie in [0, 6]");
  if (k_trees < 1) throw ConfigError("k_trees must be >= 1");
  if (threads < 1) throw ConfigError("threads must be >= 1");
  if (operators.ops.empty()) throw ConfigError("operator set is empty");
  if (!(min_samples_leaf_fraction > 0.0) || min_samples_leaf_fraction >= 1.0) {
    throw ConfigError("min_samples_leaf_fraction must lie in (0, 1)");
  }
  if (mode == FitnessMode::Evolved) {
    if (st_depth < 1) throw ConfigError("evolved mode needs st_depth >= 1");
    if (k_trees != (size_t{1} << st_depth) - 1) {
      throw ConfigError("evolved mode needs k_trees == 2^st_depth - 1");
    }
  }
}

FitnessConfig RunConfig::fitness_config() const {
  FitnessConfig fc;
  fc.mode = mode;
  fc.st_depth = st_depth;
  fc.min_samples_leaf_fraction = min_samples_leaf_fraction;
  fc.binary_features = binary_features;
  return fc;
}

// ---- linkage learning -------------------------------------------------------

namespace {

struct SymbolLess {
  bool operator()(const Symbol& a, const Symbol& b) const { return symbol_less(a, b); }
};

// H = ln n - (1/n) sum c ln c over run lengths of the sorted keys.
double entropy_of_sorted(const std::vector<uint64_t>& keys) {
  size_t n = keys.size();
  if (n == 0) return 0.0;
  double acc = 0.0;
  size_t i = 0;
  while (i < n) {
    size_t j = i;
    while (j < n && keys[j] == keys[i]) ++j;
    double c = static_cast<double>(j - i);
    acc += c * std::log(c);
    i = j;
  }
  return std::log(static_cast<double>(n)) - acc / static_cast<double>(n);
}

// Average-linkage clustering on a similarity matrix; returns every cluster
// except the final full set, singletons first.  Ties resolve to the earliest
// cluster pair, so the result is deterministic.
std::vector<std::vector<size_t>> upgma_fos(const std::vector<std::vector<double>>& sim) {
  size_t p = sim.size();
  std::vector<std::vector<size_t>> fos;
  for (size_t i = 0; i < p; ++i) fos.push_back({i});
  if (p < 2) return fos;

  size_t cap = 2 * p - 1;
  std::vector<std::vector<double>> s(cap, std::vector<double>(cap, 0.0));
  for (size_t i = 0; i < p; ++i) {
    for (size_t j = 0; j < p; ++j) s[i][j] = sim[i][j];
  }
  std::vector<std::vector<size_t>> members(cap);
  std::vector<size_t> csize(cap, 0);
  std::vector<char> active(cap, 0);
  for (size_t i = 0; i < p; ++i) {
    members[i] = {i};
    csize[i] = 1;
    active[i] = 1;
  }

  size_t n_active = p;
  size_t next_id = p;
  while (n_active > 1) {
    double best = 0.0;
    size_t bi = 0, bj = 0;
    bool found = false;
    for (size_t i = 0; i < next_id; ++i) {
      if (!active[i]) continue;
      for (size_t j = i + 1; j < next_id; ++j) {
        if (!active[j]) continue;
        if (!found || s[i][j] > best) {
          best = s[i][j];
          bi = i;
          bj = j;
          found = true;
        }
      }
    }
    std::vector<size_t> merged(members[bi].size() + members[bj].size());
    std::merge(members[bi].begin(), members[bi].end(), members[bj].begin(), members[bj].end(),
               merged.begin());
    size_t id = next_id++;
    members[id] = merged;
    csize[id] = csize[bi] + csize[bj];
    double wi = static_cast<double>(csize[bi]);
    double wj = static_cast<double>(csize[bj]);
    for (size_t o = 0; o < id; ++o) {
      if (!active[o] || o == bi || o == bj) continue;
      double v = (wi * s[bi][o] + wj * s[bj][o]) / (wi + wj);
      s[id][o] = s[o][id] = v;
    }
    active[bi] = active[bj] = 0;
    active[id] = 1;
    --n_active;
    if (n_active > 1) fos.push_back(std::move(merged));
  }
  return fos;
}

}  // namespace

LinkageForest learn_linkage(const std::vector<Individual>& population, bool univariate) {
  if (population.empty()) throw ConfigError("cannot learn linkage from an empty population");
  size_t n = population.size();
  size_t k_trees = population[0].mg.trees.size();
  size_t p = population[0].mg.trees.empty() ? 0 : population[0].mg.trees[0].symbols.size();

  LinkageForest out;
  out.fos.resize(k_trees);
  for (size_t k = 0; k < k_trees; ++k) {
    if (univariate) {
      for (size_t pos = 0; pos < p; ++pos) out.fos[k].push_back({pos});
      continue;
    }
    // Symbol ids per position across the population.
    std::vector<std::vector<uint64_t>> ids(p, std::vector<uint64_t>(n));
    std::vector<double> h(p, 0.0);
    for (size_t pos = 0; pos < p; ++pos) {
      std::map<Symbol, uint64_t, SymbolLess> dict;
      for (size_t i = 0; i < n; ++i) {
        const Symbol& sym = population[i].mg.trees[k].symbols[pos];
        ids[pos][i] = dict.emplace(sym, dict.size()).first->second;
      }
      std::vector<uint64_t> sorted = ids[pos];
      std::sort(sorted.begin(), sorted.end());
      h[pos] = entropy_of_sorted(sorted);
    }

    std::vector<std::vector<double>> sim(p, std::vector<double>(p, 0.0));
    std::vector<uint64_t> keys(n);
    for (size_t a = 0; a < p; ++a) {
      for (size_t b = a + 1; b < p; ++b) {
        double denom = h[a] + h[b];
        double nmi = 0.0;
        if (denom > 0.0) {
          for (size_t i = 0; i < n; ++i) keys[i] = ids[a][i] * (n + 1) + ids[b][i];
          std::sort(keys.begin(), keys.end());
          double joint = entropy_of_sorted(keys);
          double info = std::max(0.0, h[a] + h[b] - joint);
          nmi = 2.0 * info / denom;
        }
        sim[a][b] = sim[b][a] = nmi;
      }
    }
    out.fos[k] = upgma_fos(sim);
  }
  return out;
}

// ---- variation --------------------------------------------------------------

StepStats& StepStats::operator+=(const StepStats& o) {
  evaluations += o.evaluations;
  gom_donations += o.gom_donations;
  gom_accept_dominance += o.gom_accept_dominance;
  gom_accept_archive += o.gom_accept_archive;
  gom_neutral += o.gom_neutral;
  gom_reverted += o.gom_reverted;
  swap_attempts += o.swap_attempts;
  swap_accept_dominance += o.swap_accept_dominance;
  swap_accept_archive += o.swap_accept_archive;
  swap_neutral += o.swap_neutral;
  swap_reverted += o.swap_reverted;
  acceptance_violations += o.acceptance_violations;
  archive_violations += o.archive_violations;
  return *this;
}

namespace {

struct StepCounters {
  uint64_t* accept_dominance;
  uint64_t* accept_archive;
  uint64_t* neutral;
  uint64_t* reverted;
};

// Scores the candidate, offers it to the archive, and commits it when it
// weakly dominates the current fitness or entered the archive.
void score_and_accept(Individual& ind, MultiGenotype cand_mg, VariationContext& ctx,
                      StepCounters counters) {
  ObjectivePoint before = ind.fitness.objectives();
  auto scored = ctx.evaluator->evaluate(cand_mg);
  if (ctx.stats) ++ctx.stats->evaluations;
  Individual cand{std::move(cand_mg), std::move(scored.value), std::move(scored.signature)};

  bool dominates = weakly_dominates(cand.fitness.objectives(), before);
  bool archived = ctx.archive->update(cand);
  if (archived && ctx.offers) ctx.offers->push_back(cand);
  if (!dominates && !archived) {
    if (ctx.stats) ++(*counters.reverted);
    return;
  }
  ObjectivePoint after = cand.fitness.objectives();
  ind = std::move(cand);
  if (ctx.stats) {
    ++(*(dominates ? counters.accept_dominance : counters.accept_archive));
    // Re-derive the acceptance claim from the objective values themselves.
    if (!weakly_dominates(after, before) && !archived) ++ctx.stats->acceptance_violations;
  }
}

}  // namespace

Individual gom_step(const Individual& start, const LinkageForest& fos, VariationContext& ctx,
                    Rng& rng) {
  if (!ctx.evaluator || !ctx.donors || !ctx.archive) {
    throw ConfigError("variation context is incomplete");
  }
  Individual ind = start;
  size_t k_trees = ind.mg.trees.size();
  if (fos.fos.size() != k_trees) throw ConfigError("linkage forest does not match the genotype");

  std::vector<std::pair<size_t, size_t>> order;
  for (size_t k = 0; k < k_trees; ++k) {
    for (size_t si = 0; si < fos.fos[k].size(); ++si) order.emplace_back(k, si);
  }
  rng.shuffle(order);

  StepStats* st = ctx.stats;
  for (auto [k, si] : order) {
    const std::vector<size_t>& subset = fos.fos[k][si];
    const Individual& donor = (*ctx.donors)[rng.below(ctx.donors->size())];
    if (st) ++st->gom_donations;

    const Genotype& cur = ind.mg.trees[k];
    const Genotype& src = donor.mg.trees[k];
    bool gene_change = false;
    for (size_t pos : subset) {
      if (!(src.symbols[pos] == cur.symbols[pos])) {
        gene_change = true;
        break;
      }
    }
    if (!gene_change) {
      if (st) ++st->gom_neutral;
      continue;
    }
    Genotype donated = cur;
    for (size_t pos : subset) donated.symbols[pos] = src.symbols[pos];
    if (to_expression_string(donated) == to_expression_string(cur)) {
      // Inactive genes only: semantics, fitness and signature are unchanged.
      ind.mg.trees[k] = std::move(donated);
      if (st) ++st->gom_neutral;
      continue;
    }
    MultiGenotype cand_mg = ind.mg;
    cand_mg.trees[k] = std::move(donated);
    StepCounters counters{st ? &st->gom_accept_dominance : nullptr,
                          st ? &st->gom_accept_archive : nullptr, nullptr,
                          st ? &st->gom_reverted : nullptr};
    score_and_accept(ind, std::move(cand_mg), ctx, counters);
  }
  return ind;
}

Individual tree_swap_step(const Individual& start, VariationContext& ctx, Rng& rng) {
  if (!ctx.evaluator || !ctx.donors || !ctx.archive) {
    throw ConfigError("variation context is incomplete");
  }
  Individual ind = start;
  size_t k_trees = ind.mg.trees.size();
  StepStats* st = ctx.stats;

  for (size_t j = 0; j < k_trees; ++j) {
    const Individual& donor = (*ctx.donors)[rng.below(ctx.donors->size())];
    size_t js = static_cast<size_t>(rng.below(k_trees));
    if (st) ++st->swap_attempts;

    const Genotype& src = donor.mg.trees[js];
    const Genotype& cur = ind.mg.trees[j];
    if (src.symbols == cur.symbols) {
      if (st) ++st->swap_neutral;
      continue;
    }
    if (to_expression_string(src) == to_expression_string(cur)) {
      ind.mg.trees[j] = src;
      if (st) ++st->swap_neutral;
      continue;
    }
    MultiGenotype cand_mg = ind.mg;
    cand_mg.trees[j] = src;
    StepCounters counters{st ? &st->swap_accept_dominance : nullptr,
                          st ? &st->swap_accept_archive : nullptr, nullptr,
                          st ? &st->swap_reverted : nullptr};
    score_and_accept(ind, std::move(cand_mg), ctx, counters);
  }
  return ind;
}

// ---- initialization ---------------------------------------------------------

namespace {

void parallel_for(size_t n, size_t threads, const std::function<void(size_t)>& fn) {
  if (n == 0) return;
  threads = std::min(threads, n);
  if (threads <= 1) {
    for (size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mu;
  auto worker = [&]() {
    for (;;) {
      size_t i = next.fetch_add(1);
      if (i >= n) return;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mu);
        if (!error) error = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(threads);
  for (size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

}  // namespace

InitResult initialize_population(const RunConfig& cfg, const FitnessEvaluator& evaluator,
                                 const ConstantPool& pool, Rng& rng) {
  cfg.validate();
  size_t dims = evaluator.internal().dims();
  auto sample = [&]() {
    MultiGenotype mg;
    mg.trees.reserve(cfg.k_trees);
    for (size_t k = 0; k < cfg.k_trees; ++k) {
      mg.trees.push_back(random_genotype(cfg.template_depth, cfg.operators, dims, pool, rng));
    }
    return mg;
  };

  InitResult out;
  out.population.reserve(cfg.population_size);
  std::unordered_set<std::string> seen;
  size_t budget = cfg.uniqueness_budget;
  for (size_t i = 0; i < cfg.population_size; ++i) {
    MultiGenotype mg = sample();
    std::string sig = evaluator.signature(mg);
    while (budget > 0 && seen.count(sig) > 0) {
      --budget;
      ++out.budget_spent;
      mg = sample();
      sig = evaluator.signature(mg);
    }
    seen.insert(sig);
    out.population.push_back({std::move(mg), FitnessValue{}, std::move(sig)});
  }

  parallel_for(out.population.size(), cfg.threads, [&](size_t i) {
    auto scored = evaluator.evaluate(out.population[i].mg);
    out.population[i].fitness = std::move(scored.value);
    out.population[i].signature = std::move(scored.signature);
  });
  return out;
}

// ---- generational loop ------------------------------------------------------

RunResult run_evolution(const RunConfig& cfg, const FitnessEvaluator& evaluator) {
  cfg.validate();
  const FitnessConfig& fc = evaluator.config();
  if (fc.mode != cfg.mode || fc.st_depth != cfg.st_depth ||
      fc.min_samples_leaf_fraction != cfg.min_samples_leaf_fraction ||
      fc.binary_features != cfg.binary_features) {
    throw ConfigError("fitness evaluator does not match the run configuration");
  }

  RunResult out;
  out.reference = {1.0, max_complexity(cfg.k_trees, cfg.template_depth)};
  out.audit.seed = cfg.seed;
  out.termination = "generation cap";

  ConstantPool pool = ConstantPool::from_dataset(evaluator.internal());
  Rng init_rng = Rng::stream(cfg.seed, "init");
  ++out.audit.streams_created;
  InitResult init = initialize_population(cfg, evaluator, pool, init_rng);
  out.audit.words_drawn += init_rng.words_drawn();
  out.init_budget_spent = init.budget_spent;
  out.stats.evaluations += init.population.size();
  std::vector<Individual> population = std::move(init.population);

  ParetoArchive archive;
  for (const auto& ind : population) {
    archive.update(ind);
    if (cfg.check_archive_invariant && !archive.mutually_nondominated()) {
      ++out.stats.archive_violations;
    }
  }
  double last_hv = archive_hypervolume(archive, out.reference);
  out.hv_trace.push_back({0, last_hv, archive.size()});

  struct WorkerOut {
    Individual result;
    std::vector<Individual> offers;
    StepStats stats;
    uint64_t words = 0;
  };

  size_t stagnant = 0;
  for (size_t gen = 1; gen <= cfg.max_generations; ++gen) {
    LinkageForest fos = learn_linkage(population, cfg.univariate_fos);
    const std::vector<Individual> snapshot = population;
    const ParetoArchive snapshot_archive = archive;

    std::vector<WorkerOut> results(population.size());
    parallel_for(population.size(), cfg.threads, [&](size_t i) {
      WorkerOut& w = results[i];
      ParetoArchive local = snapshot_archive;
      Rng step_rng = Rng::stream(cfg.seed, "gom", gen, i);
      VariationContext ctx{&evaluator, &snapshot, &local, &w.stats, &w.offers};
      Individual ind = gom_step(snapshot[i], fos, ctx, step_rng);
      if (cfg.swap_enabled) ind = tree_swap_step(ind, ctx, step_rng);
      w.result = std::move(ind);
      w.words = step_rng.words_drawn();
    });

    // Canonical merge: population slots and archive offers in individual
    // order, so the outcome is independent of worker scheduling.
    for (size_t i = 0; i < results.size(); ++i) {
      WorkerOut& w = results[i];
      population[i] = std::move(w.result);
      for (const Individual& cand : w.offers) {
        archive.update(cand);
        if (cfg.check_archive_invariant && !archive.mutually_nondominated()) {
          ++out.stats.archive_violations;
        }
      }
      out.stats += w.stats;
      out.audit.words_drawn += w.words;
      ++out.audit.streams_created;
    }

    double hv = archive_hypervolume(archive, out.reference);
    out.hv_trace.push_back({gen, hv, archive.size()});
    out.generations_completed = gen;
    if (hv > last_hv + 1e-12) {
      stagnant = 0;
    } else {
      ++stagnant;
    }
    last_hv = std::max(last_hv, hv);
    if (stagnant >= cfg.stagnation_window) {
      out.termination = "stagnation";
      break;
    }
  }

  out.archive = std::move(archive);
  return out;
}

}  // namespace evost
