#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace evost {

// Right-censored survival data, covariates stored column-major.
// Invariants enforced at creation: n >= 2, at least one event, times strictly
// positive and finite, covariates finite, event flags in {0, 1}.
struct SurvivalDataset {
  std::vector<std::string> covariate_names;
  std::vector<std::vector<double>> columns;  // [dim][row]
  std::vector<double> times;
  std::vector<uint8_t> events;

  size_t n() const { return times.size(); }
  size_t dims() const { return columns.size(); }
  double covariate(size_t row, size_t dim) const { return columns[dim][row]; }

  static SurvivalDataset create(std::vector<std::string> names,
                                std::vector<std::vector<double>> columns,
                                std::vector<double> times, std::vector<uint8_t> events);

  // Mechanical row gather; does not re-validate (split parts may be all-censored).
  SurvivalDataset subset(std::span<const size_t> rows) const;

  size_t event_count() const;
  // [min, max] over event times; throws DegenerateDatasetError when eventless.
  std::pair<double, double> event_time_range() const;
};

struct CsvSchema {
  std::string time_column = "time";
  std::string event_column = "event";
  // Empty: every other column is a covariate (declaration order).
  std::vector<std::string> covariates;
  // Columns ignored entirely (e.g. synthetic group labels).
  std::vector<std::string> drop;
};

SurvivalDataset load_survival_csv(const std::string& path, const CsvSchema& schema = {});
SurvivalDataset read_survival_csv(std::istream& in, const CsvSchema& schema,
                                  const std::string& origin);

struct SplitPair {
  std::vector<size_t> train;
  std::vector<size_t> test;
};

struct SplitPlan {
  std::vector<SplitPair> splits;
  double test_fraction = 0.2;
  uint64_t seed = 0;
  size_t k() const { return splits.size(); }
};

// k independent shuffle splits stratified by the event indicator.  Per
// stratum the test part takes round(size * test_fraction) members; any
// nonempty stratum smaller than 2 is refused.
SplitPlan stratified_shuffle_splits(const SurvivalDataset& data, size_t k,
                                    double test_fraction, uint64_t seed);

// n draws with replacement from [0, n).
std::vector<size_t> bootstrap_resample(size_t n, uint64_t seed);

}  // namespace evost
