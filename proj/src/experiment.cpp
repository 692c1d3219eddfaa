#include "evost/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

#include "evost/common.hpp"
#include "evost/gp_expr.hpp"
#include "evost/metrics.hpp"

namespace evost {

namespace fs = std::filesystem;
using nlohmann::json;

// ---- small IO ---------------------------------------------------------------

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IngestionError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out << content;
  out.flush();
  if (!out) throw std::runtime_error("write failed for '" + path + "'");
}

json read_json_file(const std::string& path) {
  try {
    return json::parse(read_text_file(path));
  } catch (const json::exception& e) {
    throw IngestionError("invalid JSON in '" + path + "': " + e.what());
  }
}

namespace {

std::string csv_quote(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

void require_keys(const json& j, std::initializer_list<std::string_view> allowed,
                  const char* where) {
  for (const auto& item : j.items()) {
    bool known = false;
    for (std::string_view k : allowed) {
      if (item.key() == k) {
        known = true;
        break;
      }
    }
    if (!known) {
      throw ConfigError("unknown key '" + item.key() + "' in " + where);
    }
  }
}

}  // namespace

// ---- configuration ----------------------------------------------------------

ExperimentConfig ExperimentConfig::from_json(const json& j) {
  try {
    require_keys(j,
                 {"mode", "data", "st_depth", "gp_trees", "template_depth", "operators",
                  "xor_mode", "population_size", "max_generations", "stagnation_window",
                  "uniqueness_budget", "swap_enabled", "univariate_fos",
                  "min_samples_leaf_fraction", "binary_features", "threads",
                  "check_archive_invariant", "fitness_splits", "test_fraction", "repetitions",
                  "bootstrap", "seed", "jobs", "out_dir"},
                 "config");

    ExperimentConfig cfg;
    std::string mode = j.at("mode").get<std::string>();
    if (mode == "evolved") {
      cfg.engine.mode = FitnessMode::Evolved;
    } else if (mode == "gfc_greedy") {
      cfg.engine.mode = FitnessMode::GfcGreedy;
    } else {
      throw ConfigError("mode must be 'evolved' or 'gfc_greedy'");
    }

    cfg.engine.st_depth = j.value("st_depth", 2);
    cfg.engine.template_depth = j.value("template_depth", 3);
    if (j.contains("gp_trees")) {
      cfg.engine.k_trees = j.at("gp_trees").get<size_t>();
    } else if (cfg.engine.mode == FitnessMode::Evolved) {
      cfg.engine.k_trees = (size_t{1} << cfg.engine.st_depth) - 1;
    } else {
      cfg.engine.k_trees = 7;
    }
    if (j.contains("operators")) {
      auto tokens = j.at("operators").get<std::vector<std::string>>();
      cfg.engine.operators = OperatorSet::from_tokens(tokens);
    } else {
      cfg.engine.operators = cfg.engine.mode == FitnessMode::Evolved ? OperatorSet::full()
                                                                     : OperatorSet::numeric();
    }
    cfg.engine.population_size = j.value("population_size", cfg.engine.population_size);
    cfg.engine.max_generations = j.value("max_generations", cfg.engine.max_generations);
    cfg.engine.stagnation_window = j.value("stagnation_window", cfg.engine.stagnation_window);
    cfg.engine.uniqueness_budget = j.value("uniqueness_budget", cfg.engine.uniqueness_budget);
    cfg.engine.swap_enabled = j.value("swap_enabled", cfg.engine.swap_enabled);
    cfg.engine.univariate_fos = j.value("univariate_fos", cfg.engine.univariate_fos);
    cfg.engine.min_samples_leaf_fraction =
        j.value("min_samples_leaf_fraction", cfg.engine.min_samples_leaf_fraction);
    cfg.engine.binary_features = j.value("binary_features", cfg.engine.binary_features);
    cfg.engine.threads = j.value("threads", cfg.engine.threads);
    cfg.engine.check_archive_invariant =
        j.value("check_archive_invariant", cfg.engine.check_archive_invariant);
    cfg.engine.seed = j.value("seed", cfg.engine.seed);

    cfg.xor_mode = j.value("xor_mode", false);
    cfg.fitness_splits = j.value("fitness_splits", cfg.fitness_splits);
    cfg.test_fraction = j.value("test_fraction", cfg.test_fraction);
    cfg.repetitions = j.value("repetitions", cfg.repetitions);
    cfg.bootstrap = j.value("bootstrap", cfg.bootstrap);
    cfg.jobs = j.value("jobs", cfg.jobs);
    cfg.out_dir = j.value("out_dir", cfg.out_dir);

    const json& d = j.at("data");
    require_keys(d, {"synth", "internal_csv", "external_csv", "schema"}, "data");
    bool has_synth = d.contains("synth");
    bool has_csv = d.contains("internal_csv");
    if (has_synth == has_csv) {
      throw ConfigError("data needs exactly one of 'synth' or 'internal_csv'");
    }
    if (has_synth) {
      const json& s = d.at("synth");
      require_keys(s,
                   {"n", "seed", "scale_exp", "shape_gamma", "scale_gamma", "censor_rates",
                    "internal_fraction"},
                   "data.synth");
      cfg.data.synth = true;
      XorParams& p = cfg.data.xor_params;
      p.n = s.value("n", p.n);
      p.seed = s.value("seed", p.seed);
      p.scale_exp = s.value("scale_exp", p.scale_exp);
      p.shape_gamma = s.value("shape_gamma", p.shape_gamma);
      p.scale_gamma = s.value("scale_gamma", p.scale_gamma);
      if (s.contains("censor_rates")) {
        auto rates = s.at("censor_rates").get<std::vector<double>>();
        if (rates.size() != 2) throw ConfigError("censor_rates needs exactly two values");
        p.censor_rates = {rates[0], rates[1]};
      }
      cfg.data.internal_fraction = s.value("internal_fraction", cfg.data.internal_fraction);
    } else {
      cfg.data.internal_csv = d.at("internal_csv").get<std::string>();
      cfg.data.external_csv = d.value("external_csv", std::string{});
      if (d.contains("schema")) {
        const json& sc = d.at("schema");
        require_keys(sc, {"time", "event", "covariates", "drop"}, "data.schema");
        cfg.data.schema.time_column = sc.value("time", cfg.data.schema.time_column);
        cfg.data.schema.event_column = sc.value("event", cfg.data.schema.event_column);
        cfg.data.schema.covariates =
            sc.value("covariates", cfg.data.schema.covariates);
        cfg.data.schema.drop = sc.value("drop", cfg.data.schema.drop);
      }
    }

    if (cfg.xor_mode) {
      cfg.fitness_splits = 1;
      cfg.engine.operators = OperatorSet::xor_reduced();
    }
    cfg.validate();
    return cfg;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("invalid configuration: ") + e.what());
  }
}

json ExperimentConfig::to_json() const {
  json j;
  j["mode"] = engine.mode == FitnessMode::Evolved ? "evolved" : "gfc_greedy";
  j["st_depth"] = engine.st_depth;
  j["gp_trees"] = engine.k_trees;
  j["template_depth"] = engine.template_depth;
  j["operators"] = engine.operators.tokens();
  j["xor_mode"] = xor_mode;
  j["population_size"] = engine.population_size;
  j["max_generations"] = engine.max_generations;
  j["stagnation_window"] = engine.stagnation_window;
  j["uniqueness_budget"] = engine.uniqueness_budget;
  j["swap_enabled"] = engine.swap_enabled;
  j["univariate_fos"] = engine.univariate_fos;
  j["min_samples_leaf_fraction"] = engine.min_samples_leaf_fraction;
  j["binary_features"] = engine.binary_features;
  j["threads"] = engine.threads;
  j["check_archive_invariant"] = engine.check_archive_invariant;
  j["seed"] = engine.seed;
  j["fitness_splits"] = fitness_splits;
  j["test_fraction"] = test_fraction;
  j["repetitions"] = repetitions;
  j["bootstrap"] = bootstrap;
  j["jobs"] = jobs;
  j["out_dir"] = out_dir;
  json d;
  if (data.synth) {
    d["synth"] = {{"n", data.xor_params.n},
                  {"seed", data.xor_params.seed},
                  {"scale_exp", data.xor_params.scale_exp},
                  {"shape_gamma", data.xor_params.shape_gamma},
                  {"scale_gamma", data.xor_params.scale_gamma},
                  {"censor_rates",
                   {data.xor_params.censor_rates.first, data.xor_params.censor_rates.second}},
                  {"internal_fraction", data.internal_fraction}};
  } else {
    d["internal_csv"] = data.internal_csv;
    if (!data.external_csv.empty()) d["external_csv"] = data.external_csv;
    d["schema"] = {{"time", data.schema.time_column},
                   {"event", data.schema.event_column},
                   {"covariates", data.schema.covariates},
                   {"drop", data.schema.drop}};
  }
  j["data"] = d;
  return j;
}

void ExperimentConfig::validate() const {
  engine.validate();
  if (repetitions < 1) throw ConfigError("repetitions must be >= 1");
  if (bootstrap < 1) throw ConfigError("bootstrap must be >= 1");
  if (fitness_splits < 1) throw ConfigError("fitness_splits must be >= 1");
  if (jobs < 1) throw ConfigError("jobs must be >= 1");
  if (!(test_fraction > 0.0) || test_fraction >= 1.0) {
    throw ConfigError("test_fraction must lie in (0, 1)");
  }
  if (out_dir.empty()) throw ConfigError("out_dir must not be empty");
  if (data.synth) {
    if (data.xor_params.n < 4) throw ConfigError("synthetic cohort needs n >= 4");
    if (!(data.internal_fraction > 0.0) || data.internal_fraction > 1.0) {
      throw ConfigError("internal_fraction must lie in (0, 1]");
    }
  } else if (data.internal_csv.empty()) {
    throw ConfigError("internal_csv must not be empty");
  }
}

ExperimentConfig load_experiment_config(const std::string& path) {
  json j;
  try {
    j = json::parse(read_text_file(path));
  } catch (const json::exception& e) {
    throw ConfigError("config '" + path + "': " + e.what());
  }
  return ExperimentConfig::from_json(j);
}

// ---- data loading -----------------------------------------------------------

LoadedData load_experiment_data(const ExperimentConfig& cfg) {
  LoadedData out;
  if (cfg.data.synth) {
    XorData xd = generate_xor_survival(cfg.data.xor_params);
    size_t n = xd.dataset.n();
    auto n_internal =
        static_cast<size_t>(std::llround(cfg.data.internal_fraction * static_cast<double>(n)));
    n_internal = std::clamp<size_t>(n_internal, 2, n);
    std::vector<size_t> rows(n);
    for (size_t i = 0; i < n; ++i) rows[i] = i;
    out.internal_data = xd.dataset.subset(std::span(rows).subspan(0, n_internal));
    if (n_internal < n) {
      out.external_data = xd.dataset.subset(std::span(rows).subspan(n_internal));
    }
    out.provenance["source"] = "synth";
    out.provenance["params"] = cfg.to_json()["data"]["synth"];
    out.provenance["censor_bounds"] = json::array();
    for (double b : {xd.censor_bounds.first, xd.censor_bounds.second}) {
      if (std::isfinite(b)) {
        out.provenance["censor_bounds"].push_back(b);
      } else {
        out.provenance["censor_bounds"].push_back(nullptr);
      }
    }
  } else {
    out.internal_data = load_survival_csv(cfg.data.internal_csv, cfg.data.schema);
    if (!cfg.data.external_csv.empty()) {
      out.external_data = load_survival_csv(cfg.data.external_csv, cfg.data.schema);
    }
    out.provenance["source"] = "csv";
    out.provenance["internal_csv"] = cfg.data.internal_csv;
    if (!cfg.data.external_csv.empty()) out.provenance["external_csv"] = cfg.data.external_csv;
  }
  out.provenance["internal_rows"] = out.internal_data.n();
  out.provenance["internal_events"] = out.internal_data.event_count();
  if (out.external_data) {
    out.provenance["external_rows"] = out.external_data->n();
    out.provenance["external_events"] = out.external_data->event_count();
  }
  return out;
}

// ---- repetition -------------------------------------------------------------

json run_repetition(const ExperimentConfig& cfg, const SurvivalDataset& internal,
                    size_t rep_index) {
  uint64_t plan_seed = Rng::derive_key(cfg.engine.seed, "plan", rep_index);
  uint64_t run_seed = Rng::derive_key(cfg.engine.seed, "run", rep_index);
  SplitPlan plan =
      stratified_shuffle_splits(internal, cfg.fitness_splits, cfg.test_fraction, plan_seed);
  RunConfig engine = cfg.engine;
  engine.seed = run_seed;
  FitnessEvaluator evaluator(engine.fitness_config(), internal, plan);
  RunResult rr = run_evolution(engine, evaluator);

  json j;
  j["toolkit_version"] = std::string(kToolkitVersion);
  j["repetition"] = rep_index;
  j["master_seed"] = cfg.engine.seed;
  j["plan_seed"] = plan_seed;
  j["run_seed"] = run_seed;
  j["config"] = cfg.to_json();
  j["covariates"] = internal.covariate_names;

  json train;
  train["times"] = internal.times;
  json ev = json::array();
  for (uint8_t e : internal.events) ev.push_back(static_cast<int>(e));
  train["events"] = std::move(ev);
  auto range = internal.event_time_range();
  train["event_time_range"] = {range.first, range.second};
  j["train"] = std::move(train);

  j["termination"] = rr.termination;
  j["generations"] = rr.generations_completed;
  j["reference_point"] = {{"ibs", rr.reference.ibs}, {"complexity", rr.reference.complexity}};
  j["init_budget_spent"] = rr.init_budget_spent;
  j["degenerate_fitness_splits"] = evaluator.degenerate_split_count();
  j["stats"] = {{"evaluations", rr.stats.evaluations},
                {"gom_donations", rr.stats.gom_donations},
                {"gom_accept_dominance", rr.stats.gom_accept_dominance},
                {"gom_accept_archive", rr.stats.gom_accept_archive},
                {"gom_neutral", rr.stats.gom_neutral},
                {"gom_reverted", rr.stats.gom_reverted},
                {"swap_attempts", rr.stats.swap_attempts},
                {"swap_accept_dominance", rr.stats.swap_accept_dominance},
                {"swap_accept_archive", rr.stats.swap_accept_archive},
                {"swap_neutral", rr.stats.swap_neutral},
                {"swap_reverted", rr.stats.swap_reverted},
                {"acceptance_violations", rr.stats.acceptance_violations},
                {"archive_violations", rr.stats.archive_violations}};
  j["rng_audit"] = {{"seed", rr.audit.seed},
                    {"streams", rr.audit.streams_created},
                    {"words", rr.audit.words_drawn}};
  json trace = json::array();
  for (const HvPoint& p : rr.hv_trace) {
    trace.push_back({{"generation", p.generation},
                     {"hypervolume", p.hypervolume},
                     {"archive_size", p.archive_size}});
  }
  j["hv_trace"] = std::move(trace);

  std::vector<const Individual*> members;
  for (const Individual& m : rr.archive.members()) members.push_back(&m);
  std::sort(members.begin(), members.end(), [](const Individual* a, const Individual* b) {
    if (a->fitness.complexity != b->fitness.complexity) {
      return a->fitness.complexity < b->fitness.complexity;
    }
    return a->fitness.ibs_iqm < b->fitness.ibs_iqm;
  });
  json archive = json::array();
  for (const Individual* m : members) {
    json entry;
    entry["objectives"] = {{"ibs_iqm", m->fitness.ibs_iqm},
                           {"complexity", m->fitness.complexity}};
    entry["per_split_ibs"] = m->fitness.per_split_ibs;
    entry["signature"] = m->signature;
    json exprs = json::array();
    for (const Genotype& g : m->mg.trees) {
      exprs.push_back(to_expression_string(g, internal.covariate_names));
    }
    entry["expressions"] = std::move(exprs);
    entry["tree"] = tree_to_json(evaluator.reference_tree(m->mg), internal.covariate_names);
    archive.push_back(std::move(entry));
  }
  j["archive"] = std::move(archive);
  return j;
}

std::string hypervolume_csv(const json& result) {
  std::string csv = "generation,hypervolume,archive_size\n";
  for (const json& p : result.at("hv_trace")) {
    csv += std::to_string(p.at("generation").get<size_t>()) + ",";
    csv += format_double(p.at("hypervolume").get<double>()) + ",";
    csv += std::to_string(p.at("archive_size").get<size_t>()) + "\n";
  }
  return csv;
}

// ---- experiment driver --------------------------------------------------------

namespace {

std::string rep_dir_name(size_t r) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "rep_%03zu", r);
  return buf;
}

}  // namespace

int run_experiment(const ExperimentConfig& cfg, std::ostream& log) {
  cfg.validate();
  LoadedData data = load_experiment_data(cfg);
  fs::create_directories(cfg.out_dir);

  json manifest;
  manifest["toolkit_version"] = std::string(kToolkitVersion);
  manifest["config"] = cfg.to_json();
  manifest["data"] = data.provenance;
  if (cfg.data.synth) {
    // Persist the cohorts so evaluate/render can run against files.
    write_text_file(cfg.out_dir + "/internal.csv", dataset_csv(data.internal_data));
    manifest["data"]["internal_csv"] = cfg.out_dir + "/internal.csv";
    if (data.external_data) {
      write_text_file(cfg.out_dir + "/external.csv", dataset_csv(*data.external_data));
      manifest["data"]["external_csv"] = cfg.out_dir + "/external.csv";
    }
  }

  size_t r_count = cfg.repetitions;
  std::vector<std::string> statuses(r_count, "pending");
  std::vector<uint64_t> plan_seeds(r_count), run_seeds(r_count);
  for (size_t r = 0; r < r_count; ++r) {
    plan_seeds[r] = Rng::derive_key(cfg.engine.seed, "plan", r);
    run_seeds[r] = Rng::derive_key(cfg.engine.seed, "run", r);
  }
  auto manifest_reps = [&]() {
    json arr = json::array();
    for (size_t r = 0; r < r_count; ++r) {
      arr.push_back({{"index", r},
                     {"dir", rep_dir_name(r)},
                     {"plan_seed", plan_seeds[r]},
                     {"run_seed", run_seeds[r]},
                     {"status", statuses[r]}});
    }
    return arr;
  };
  manifest["repetitions"] = manifest_reps();
  write_text_file(cfg.out_dir + "/manifest.json", manifest.dump(2) + "\n");

  std::mutex log_mu;
  std::atomic<size_t> next{0};
  auto worker = [&]() {
    for (;;) {
      size_t r = next.fetch_add(1);
      if (r >= r_count) return;
      try {
        json result = run_repetition(cfg, data.internal_data, r);
        std::string dir = cfg.out_dir + "/" + rep_dir_name(r);
        fs::create_directories(dir);
        write_text_file(dir + "/result.json", result.dump() + "\n");
        write_text_file(dir + "/hypervolume.csv", hypervolume_csv(result));
        statuses[r] = "ok";
        std::lock_guard<std::mutex> lock(log_mu);
        log << "repetition " << r << ": " << result.at("termination").get<std::string>()
            << " after " << result.at("generations").get<size_t>() << " generations, archive "
            << result.at("archive").size() << "\n";
      } catch (const std::exception& e) {
        statuses[r] = std::string("failed: ") + e.what();
        std::lock_guard<std::mutex> lock(log_mu);
        log << "repetition " << r << " failed: " << e.what() << "\n";
      }
    }
  };
  size_t jobs = std::min(cfg.jobs, r_count);
  if (jobs <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (size_t t = 0; t < jobs; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }

  manifest["repetitions"] = manifest_reps();
  write_text_file(cfg.out_dir + "/manifest.json", manifest.dump(2) + "\n");
  bool all_ok = std::all_of(statuses.begin(), statuses.end(),
                            [](const std::string& s) { return s == "ok"; });
  return all_ok ? 0 : 2;
}

// ---- model files ----------------------------------------------------------

ModelFile model_from_json(const json& j) {
  try {
    ModelFile m;
    m.covariate_names = j.at("covariates").get<std::vector<std::string>>();
    const json& train = j.at("train");
    m.train_times = train.at("times").get<std::vector<double>>();
    for (const json& e : train.at("events")) {
      m.train_events.push_back(e.get<int>() != 0 ? 1 : 0);
    }
    m.event_time_range = {train.at("event_time_range").at(0).get<double>(),
                          train.at("event_time_range").at(1).get<double>()};
    for (const json& a : j.at("archive")) {
      MemberModel mm;
      mm.objectives = {a.at("objectives").at("ibs_iqm").get<double>(),
                       a.at("objectives").at("complexity").get<long long>()};
      mm.per_split_ibs = a.at("per_split_ibs").get<std::vector<double>>();
      mm.signature = a.value("signature", std::string{});
      mm.expressions = a.at("expressions").get<std::vector<std::string>>();
      mm.tree = tree_from_json(a.at("tree"), m.covariate_names);
      m.members.push_back(std::move(mm));
    }
    std::sort(m.members.begin(), m.members.end(), [](const MemberModel& a, const MemberModel& b) {
      if (a.objectives.complexity != b.objectives.complexity) {
        return a.objectives.complexity < b.objectives.complexity;
      }
      return a.objectives.ibs < b.objectives.ibs;
    });
    return m;
  } catch (const json::exception& e) {
    throw SchemaError(std::string("model file: ") + e.what());
  }
}

ModelFile load_model(const std::string& path) { return model_from_json(read_json_file(path)); }

SurvivalDataset align_external(const ModelFile& model, const SurvivalDataset& external) {
  SurvivalDataset out;
  out.covariate_names = model.covariate_names;
  out.times = external.times;
  out.events = external.events;
  for (const std::string& name : model.covariate_names) {
    auto it = std::find(external.covariate_names.begin(), external.covariate_names.end(), name);
    if (it == external.covariate_names.end()) {
      throw SchemaError("external cohort lacks covariate '" + name + "'");
    }
    out.columns.push_back(
        external.columns[static_cast<size_t>(it - external.covariate_names.begin())]);
  }
  return out;
}

// ---- evaluation -------------------------------------------------------------

std::string evaluate_model_csv(const ModelFile& model, const SurvivalDataset& external,
                               size_t bootstrap, uint64_t seed) {
  if (bootstrap < 1) throw ConfigError("bootstrap count must be >= 1");
  if (model.members.empty()) throw ConfigError("model has no archive members");
  size_t n = external.n();

  // Shared resamples: every member is scored on the same bootstrap draws.
  std::vector<std::vector<uint32_t>> resamples(bootstrap);
  for (size_t b = 0; b < bootstrap; ++b) {
    Rng rng = Rng::stream(seed, "bootstrap", b);
    resamples[b].resize(n);
    for (size_t i = 0; i < n; ++i) {
      resamples[b][i] = static_cast<uint32_t>(rng.below(n));
    }
  }

  std::string csv = "member,complexity,ibs_mean,ibs_lo,ibs_hi,cindex_mean,cindex_lo,cindex_hi\n";
  std::vector<double> row(external.dims());
  std::vector<double> bt(n);
  std::vector<uint8_t> be(n);
  std::vector<uint32_t> bcurve(n);
  std::vector<double> brisk(n);

  for (size_t mi = 0; mi < model.members.size(); ++mi) {
    const MemberModel& m = model.members[mi];
    auto leaves = m.tree.leaf_positions();
    std::vector<uint32_t> leaf_index(m.tree.nodes.size(), 0);
    std::vector<StepFunction> curves;
    std::vector<double> leaf_risk;
    for (uint32_t li = 0; li < leaves.size(); ++li) {
      leaf_index[leaves[li]] = li;
      const StepFunction& s = m.tree.nodes[leaves[li]].survival;
      curves.push_back(s);
      leaf_risk.push_back(-s.integral(model.event_time_range.first, model.event_time_range.second));
    }
    std::vector<uint32_t> curve_of(n);
    std::vector<double> risk(n);
    for (size_t i = 0; i < n; ++i) {
      for (size_t d = 0; d < external.dims(); ++d) row[d] = external.columns[d][i];
      uint32_t li = leaf_index[m.tree.leaf_for_row(row)];
      curve_of[i] = li;
      risk[i] = leaf_risk[li];
    }

    std::vector<double> ibs_vals(bootstrap), c_vals(bootstrap);
    for (size_t b = 0; b < bootstrap; ++b) {
      const auto& idx = resamples[b];
      for (size_t i = 0; i < n; ++i) {
        bt[i] = external.times[idx[i]];
        be[i] = external.events[idx[i]];
        bcurve[i] = curve_of[idx[i]];
        brisk[i] = risk[idx[i]];
      }
      GroupedBrierContext ctx(SurvSpan{model.train_times, model.train_events}, SurvSpan{bt, be});
      ibs_vals[b] = ctx.integrated(curves, bcurve);
      c_vals[b] = concordance_index(brisk, SurvSpan{bt, be});
    }
    BootstrapCi ibs_ci = bootstrap_ci(ibs_vals);
    BootstrapCi c_ci = bootstrap_ci(c_vals);
    csv += std::to_string(mi) + "," + std::to_string(m.objectives.complexity) + "," +
           format_double(ibs_ci.mean) + "," + format_double(ibs_ci.lo) + "," +
           format_double(ibs_ci.hi) + "," + format_double(c_ci.mean) + "," +
           format_double(c_ci.lo) + "," + format_double(c_ci.hi) + "\n";
  }
  return csv;
}

// ---- aggregation ------------------------------------------------------------

AggregateReport aggregate_runs(const std::vector<std::string>& run_dirs, double level) {
  if (!(level > 0.0) || level > 1.0) throw ConfigError("level must lie in (0, 1]");
  if (run_dirs.empty()) throw ConfigError("no run directories given");

  struct BestModel {
    double ibs = 0.0;
    std::string source;
    size_t member = 0;
    std::string expressions;
  };
  std::vector<std::vector<ObjectivePoint>> fronts;
  std::vector<double> final_hv;
  std::map<long long, BestModel> best;

  for (const std::string& dir : run_dirs) {
    json manifest = read_json_file(dir + "/manifest.json");
    for (const json& rep : manifest.at("repetitions")) {
      if (rep.at("status").get<std::string>() != "ok") continue;
      std::string rep_dir = dir + "/" + rep.at("dir").get<std::string>();
      json result = read_json_file(rep_dir + "/result.json");

      std::vector<ObjectivePoint> front;
      const json& archive = result.at("archive");
      for (size_t mi = 0; mi < archive.size(); ++mi) {
        const json& member = archive[mi];
        ObjectivePoint p{member.at("objectives").at("ibs_iqm").get<double>(),
                         member.at("objectives").at("complexity").get<long long>()};
        front.push_back(p);
        auto it = best.find(p.complexity);
        if (it == best.end() || p.ibs < it->second.ibs) {
          std::string exprs;
          for (const json& e : member.at("expressions")) {
            if (!exprs.empty()) exprs += "; ";
            exprs += e.get<std::string>();
          }
          best[p.complexity] = {p.ibs, rep_dir, mi, std::move(exprs)};
        }
      }
      fronts.push_back(std::move(front));
      const json& trace = result.at("hv_trace");
      if (trace.empty()) throw IngestionError("empty hypervolume trace in " + rep_dir);
      final_hv.push_back(trace.back().at("hypervolume").get<double>());
    }
  }
  if (fronts.empty()) throw ConfigError("no completed runs found");

  AggregateReport report;
  report.runs_used = fronts.size();

  auto surface = attainment_surface(fronts, level);
  report.attainment_csv = "complexity,ibs\n";
  for (const ObjectivePoint& p : surface) {
    report.attainment_csv += std::to_string(p.complexity) + "," + format_double(p.ibs) + "\n";
  }

  std::vector<double> sorted_hv = final_hv;
  std::sort(sorted_hv.begin(), sorted_hv.end());
  report.hypervolume_stats = {
      {"runs", fronts.size()},
      {"final_hypervolumes", final_hv},
      {"median", percentile_sorted(sorted_hv, 50.0)},
      {"q25", percentile_sorted(sorted_hv, 25.0)},
      {"q75", percentile_sorted(sorted_hv, 75.0)},
      {"attainment_level", level},
  };

  report.best_models_csv = "complexity,ibs,source,member,expressions\n";
  for (const auto& [complexity, bm] : best) {
    report.best_models_csv += std::to_string(complexity) + "," + format_double(bm.ibs) + "," +
                              csv_quote(bm.source) + "," + std::to_string(bm.member) + "," +
                              csv_quote(bm.expressions) + "\n";
  }
  return report;
}

// ---- rendering --------------------------------------------------------------

std::string render_model(const ModelFile& model, RenderFormat format, int member) {
  if (model.members.empty()) throw ConfigError("model has no archive members");
  std::string out;
  auto render_one = [&](size_t i) {
    const MemberModel& m = model.members[i];
    std::string head = "member " + std::to_string(i) +
                       "  complexity=" + std::to_string(m.objectives.complexity) +
                       "  ibs=" + format_double(m.objectives.ibs);
    const char* comment = format == RenderFormat::Text ? "# " : "// ";
    out += comment + head + "\n";
    out += render_tree(m.tree, format, model.covariate_names);
    out += "\n";
  };
  if (member >= 0) {
    if (static_cast<size_t>(member) >= model.members.size()) {
      throw ConfigError("member index out of range");
    }
    render_one(static_cast<size_t>(member));
  } else {
    for (size_t i = 0; i < model.members.size(); ++i) render_one(i);
  }
  return out;
}

// ---- synthesis --------------------------------------------------------------

std::string dataset_csv(const SurvivalDataset& data) {
  std::string csv;
  for (const std::string& name : data.covariate_names) csv += csv_quote(name) + ",";
  csv += "time,event\n";
  for (size_t i = 0; i < data.n(); ++i) {
    for (size_t d = 0; d < data.dims(); ++d) csv += format_double(data.columns[d][i]) + ",";
    csv += format_double(data.times[i]) + "," + std::to_string(int(data.events[i])) + "\n";
  }
  return csv;
}

SynthFiles synth_files(const XorParams& params) {
  XorData xd = generate_xor_survival(params);
  SynthFiles out;
  out.csv = "x0,x1,time,event,group\n";
  size_t events = 0;
  for (size_t i = 0; i < xd.dataset.n(); ++i) {
    out.csv += format_double(xd.dataset.columns[0][i]) + ",";
    out.csv += format_double(xd.dataset.columns[1][i]) + ",";
    out.csv += format_double(xd.dataset.times[i]) + ",";
    out.csv += std::to_string(int(xd.dataset.events[i])) + ",";
    out.csv += std::to_string(xd.groups[i]) + "\n";
    events += xd.dataset.events[i];
  }
  json side;
  side["toolkit_version"] = std::string(kToolkitVersion);
  side["params"] = {{"n", params.n},
                    {"seed", params.seed},
                    {"scale_exp", params.scale_exp},
                    {"shape_gamma", params.shape_gamma},
                    {"scale_gamma", params.scale_gamma},
                    {"censor_rates", {params.censor_rates.first, params.censor_rates.second}}};
  side["censor_bounds"] = json::array();
  for (double b : {xd.censor_bounds.first, xd.censor_bounds.second}) {
    if (std::isfinite(b)) {
      side["censor_bounds"].push_back(b);
    } else {
      side["censor_bounds"].push_back(nullptr);
    }
  }
  side["rows"] = xd.dataset.n();
  side["events"] = events;
  out.sidecar = side.dump(2) + "\n";
  return out;
}

}  // namespace evost
