// Command-line front end: synth | run | evaluate | aggregate | render.
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "evost/common.hpp"
#include "evost/experiment.hpp"

namespace fs = std::filesystem;

namespace {

std::pair<double, double> parse_censor_rates(const std::string& text) {
  auto comma = text.find(',');
  if (comma == std::string::npos || comma == 0 || comma + 1 == text.size()) {
    throw evost::ConfigError("censor rates: expected 'exp_rate,gamma_rate'");
  }
  return {evost::parse_double_strict(text.substr(0, comma), "censor rate"),
          evost::parse_double_strict(text.substr(comma + 1), "censor rate")};
}

void write_or_print(const std::string& out_path, const std::string& content) {
  if (out_path.empty()) {
    std::cout << content;
  } else {
    evost::write_text_file(out_path, content);
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"evost: multi-objective search for small survival trees"};
  app.require_subcommand(1);

  // synth
  auto* synth = app.add_subcommand("synth", "Generate the synthetic xor cohort");
  evost::XorParams params;
  std::string rates_text;
  std::string synth_out;
  synth->add_option("--n", params.n, "Number of rows");
  synth->add_option("--seed", params.seed, "Generator seed");
  synth->add_option("--scale-exp", params.scale_exp, "Exponential scale (off-diagonal cells)");
  synth->add_option("--shape-gamma", params.shape_gamma, "Gamma shape (diagonal cells)");
  synth->add_option("--scale-gamma", params.scale_gamma, "Gamma scale (diagonal cells)");
  synth->add_option("--censor-rates", rates_text, "Target censoring rates 'exp,gamma'");
  synth->add_option("--out", synth_out, "CSV output path (sidecar JSON written next to it)")
      ->required();

  // run
  auto* run = app.add_subcommand("run", "Run an experiment described by a JSON config");
  std::string config_path, out_dir_override;
  long long jobs_override = -1, threads_override = -1;
  run->add_option("--config", config_path, "Experiment config (JSON)")->required();
  run->add_option("--out-dir", out_dir_override, "Override the configured output directory");
  run->add_option("--jobs", jobs_override, "Override repetitions run in parallel");
  run->add_option("--threads", threads_override, "Override evaluation threads per repetition");

  // evaluate
  auto* eval = app.add_subcommand("evaluate", "Score a saved model file on an external CSV");
  std::string model_path, data_path, eval_out;
  std::string time_col = "time", event_col = "event";
  std::vector<std::string> drop_cols;
  size_t bootstrap = 1000;
  uint64_t eval_seed = 0;
  eval->add_option("--model", model_path, "result.json produced by 'run'")->required();
  eval->add_option("--data", data_path, "External cohort CSV")->required();
  eval->add_option("--bootstrap", bootstrap, "Bootstrap resamples");
  eval->add_option("--seed", eval_seed, "Bootstrap seed");
  eval->add_option("--time-col", time_col, "Time column name");
  eval->add_option("--event-col", event_col, "Event column name");
  eval->add_option("--drop", drop_cols, "Columns to ignore (repeatable)");
  eval->add_option("--out", eval_out, "CSV output path (stdout when omitted)");

  // aggregate
  auto* agg = app.add_subcommand("aggregate", "Combine finished runs into summary tables");
  std::vector<std::string> run_dirs;
  double level = 0.5;
  std::string agg_out;
  agg->add_option("--runs", run_dirs, "Run directories (each holding a manifest.json)")
      ->required()
      ->expected(-1);
  agg->add_option("--level", level, "Attainment level in (0, 1]");
  agg->add_option("--out", agg_out, "Output directory")->required();

  // render
  auto* render = app.add_subcommand("render", "Pretty-print archive members of a saved model");
  std::string render_path, render_format = "text", render_out;
  int member = -1;
  render->add_option("--model", render_path, "result.json produced by 'run'")->required();
  render->add_option("--format", render_format, "text | dot");
  render->add_option("--member", member, "Member index (all members when omitted)");
  render->add_option("--out", render_out, "Output path (stdout when omitted)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (synth->parsed()) {
      if (!rates_text.empty()) params.censor_rates = parse_censor_rates(rates_text);
      evost::SynthFiles files = evost::synth_files(params);
      evost::write_text_file(synth_out, files.csv);
      std::string sidecar = fs::path(synth_out).replace_extension(".json").string();
      evost::write_text_file(sidecar, files.sidecar);
      std::cout << "wrote " << synth_out << " and " << sidecar << "\n";
      return 0;
    }
    if (run->parsed()) {
      evost::ExperimentConfig cfg = evost::load_experiment_config(config_path);
      if (!out_dir_override.empty()) cfg.out_dir = out_dir_override;
      if (jobs_override >= 0) cfg.jobs = static_cast<size_t>(jobs_override);
      if (threads_override >= 0) cfg.engine.threads = static_cast<size_t>(threads_override);
      cfg.validate();
      return evost::run_experiment(cfg, std::cout);
    }
    if (eval->parsed()) {
      evost::ModelFile model = evost::load_model(model_path);
      evost::CsvSchema schema;
      schema.time_column = time_col;
      schema.event_column = event_col;
      schema.drop = drop_cols;
      evost::SurvivalDataset external = evost::load_survival_csv(data_path, schema);
      evost::SurvivalDataset aligned = evost::align_external(model, external);
      write_or_print(eval_out, evost::evaluate_model_csv(model, aligned, bootstrap, eval_seed));
      return 0;
    }
    if (agg->parsed()) {
      evost::AggregateReport report = evost::aggregate_runs(run_dirs, level);
      fs::create_directories(agg_out);
      evost::write_text_file(agg_out + "/attainment.csv", report.attainment_csv);
      evost::write_text_file(agg_out + "/best_models.csv", report.best_models_csv);
      evost::write_text_file(agg_out + "/hypervolume.json",
                             report.hypervolume_stats.dump(2) + "\n");
      std::cout << "aggregated " << report.runs_used << " completed repetitions into " << agg_out
                << "\n";
      return 0;
    }
    if (render->parsed()) {
      evost::ModelFile model = evost::load_model(render_path);
      evost::RenderFormat fmt;
      if (render_format == "text") {
        fmt = evost::RenderFormat::Text;
      } else if (render_format == "dot") {
        fmt = evost::RenderFormat::Dot;
      } else {
        throw evost::ConfigError("format must be 'text' or 'dot'");
      }
      write_or_print(render_out, evost::render_model(model, fmt, member));
      return 0;
    }
  } catch (const evost::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const evost::SchemaError& e) {
    std::cerr << "schema error: " << e.what() << "\n";
    return 1;
  } catch (const evost::IngestionError& e) {
    std::cerr << "ingestion error: " << e.what() << "\n";
    return 1;
  } catch (const evost::FormatError& e) {
    std::cerr << "format error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
