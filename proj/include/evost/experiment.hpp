#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "evost/dataset.hpp"
#include "evost/evolution.hpp"
#include "evost/survival_tree.hpp"
#include "evost/xor_synth.hpp"

namespace evost {

// Data source: either a synthetic cohort generated in-process and split into
// internal/external parts, or CSV files on disk.
struct DataSpec {
  bool synth = false;
  XorParams xor_params;
  double internal_fraction = 0.5;
  std::string internal_csv;
  std::string external_csv;  // optional
  CsvSchema schema;
};

struct ExperimentConfig {
  DataSpec data;
  RunConfig engine;
  bool xor_mode = false;  // forces a single fitness split + the reduced operator set
  size_t fitness_splits = 25;
  double test_fraction = 0.2;
  size_t repetitions = 30;
  size_t bootstrap = 1000;
  size_t jobs = 1;
  std::string out_dir = "runs";

  // Strict parse: unknown keys are configuration errors.
  static ExperimentConfig from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
  void validate() const;
};

ExperimentConfig load_experiment_config(const std::string& path);

struct LoadedData {
  SurvivalDataset internal_data;
  std::optional<SurvivalDataset> external_data;
  nlohmann::json provenance;
};
LoadedData load_experiment_data(const ExperimentConfig& cfg);

// One repetition on its own derived split plan and engine seed; the returned
// payload holds the run record plus deployable archive models.
nlohmann::json run_repetition(const ExperimentConfig& cfg, const SurvivalDataset& internal,
                              size_t rep_index);
std::string hypervolume_csv(const nlohmann::json& result);

// All repetitions into cfg.out_dir (manifest, per-repetition result.json and
// hypervolume.csv); failed repetitions are marked in the manifest and turn
// the exit code into 2.
int run_experiment(const ExperimentConfig& cfg, std::ostream& log);

struct MemberModel {
  ObjectivePoint objectives;
  std::vector<double> per_split_ibs;
  std::string signature;
  std::vector<std::string> expressions;
  SurvivalTree tree;
};

struct ModelFile {
  std::vector<std::string> covariate_names;
  std::vector<double> train_times;
  std::vector<uint8_t> train_events;
  std::pair<double, double> event_time_range{0.0, 0.0};
  std::vector<MemberModel> members;  // complexity-sorted
};

ModelFile model_from_json(const nlohmann::json& j);
ModelFile load_model(const std::string& path);

// Reorders external columns to the model's covariate list (matched by name);
// a missing covariate raises SchemaError, extra columns are dropped.
SurvivalDataset align_external(const ModelFile& model, const SurvivalDataset& external);

// Bootstrapped IBS and concordance (mean + 95% CI) per archive member; all
// members share the same resamples.
std::string evaluate_model_csv(const ModelFile& model, const SurvivalDataset& external,
                               size_t bootstrap, uint64_t seed);

struct AggregateReport {
  std::string attainment_csv;
  std::string best_models_csv;
  nlohmann::json hypervolume_stats;
  size_t runs_used = 0;
};
AggregateReport aggregate_runs(const std::vector<std::string>& run_dirs, double level);

// member < 0 renders every member, ordered by complexity.
std::string render_model(const ModelFile& model, RenderFormat format, int member = -1);

struct SynthFiles {
  std::string csv;      // x0,x1,time,event,group
  std::string sidecar;  // provenance JSON
};
SynthFiles synth_files(const XorParams& params);

std::string dataset_csv(const SurvivalDataset& data);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& content);
nlohmann::json read_json_file(const std::string& path);

}  // namespace evost
