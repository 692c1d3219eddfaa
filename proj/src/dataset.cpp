#include "evost/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "evost/common.hpp"
#include "evost/rng.hpp"

namespace evost {

std::string format_double(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  (void)ec;
  return std::string(buf, end);
}

double parse_double_strict(std::string_view s, std::string_view what) {
  double v = 0.0;
  const char* first = s.data();
  const char* last = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last) {
    throw FormatError("not a number in " + std::string(what) + ": '" + std::string(s) + "'");
  }
  return v;
}

SurvivalDataset SurvivalDataset::create(std::vector<std::string> names,
                                        std::vector<std::vector<double>> columns,
                                        std::vector<double> times,
                                        std::vector<uint8_t> events) {
  size_t n = times.size();
  if (n < 2) throw DegenerateDatasetError("need at least 2 patients, got " + std::to_string(n));
  if (events.size() != n) throw SchemaError("times/events length mismatch");
  if (names.size() != columns.size()) throw SchemaError("covariate name/column mismatch");
  for (const auto& col : columns) {
    if (col.size() != n) throw SchemaError("covariate column length mismatch");
    for (double v : col) {
      if (!std::isfinite(v)) throw IngestionError("non-finite covariate value");
    }
  }
  size_t event_count = 0;
  for (size_t i = 0; i < n; ++i) {
    if (!(times[i] > 0.0) || !std::isfinite(times[i])) {
      throw IngestionError("time must be positive and finite at row " + std::to_string(i + 1));
    }
    if (events[i] > 1) throw IngestionError("event flag must be 0 or 1 at row " + std::to_string(i + 1));
    event_count += events[i];
  }
  if (event_count == 0) throw DegenerateDatasetError("dataset has no events");
  SurvivalDataset d;
  d.covariate_names = std::move(names);
  d.columns = std::move(columns);
  d.times = std::move(times);
  d.events = std::move(events);
  return d;
}

SurvivalDataset SurvivalDataset::subset(std::span<const size_t> rows) const {
  SurvivalDataset out;
  out.covariate_names = covariate_names;
  out.columns.resize(columns.size());
  for (size_t d = 0; d < columns.size(); ++d) {
    out.columns[d].reserve(rows.size());
    for (size_t r : rows) out.columns[d].push_back(columns[d][r]);
  }
  out.times.reserve(rows.size());
  out.events.reserve(rows.size());
  for (size_t r : rows) {
    out.times.push_back(times[r]);
    out.events.push_back(events[r]);
  }
  return out;
}

size_t SurvivalDataset::event_count() const {
  size_t c = 0;
  for (uint8_t e : events) c += e;
  return c;
}

std::pair<double, double> SurvivalDataset::event_time_range() const {
  double lo = 0.0, hi = 0.0;
  bool seen = false;
  for (size_t i = 0; i < times.size(); ++i) {
    if (!events[i]) continue;
    if (!seen) {
      lo = hi = times[i];
      seen = true;
    } else {
      lo = std::min(lo, times[i]);
      hi = std::max(hi, times[i]);
    }
  }
  if (!seen) throw DegenerateDatasetError("no event times in cohort");
  return {lo, hi};
}

namespace {

void strip_cr(std::string& line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

}  // namespace

SurvivalDataset read_survival_csv(std::istream& in, const CsvSchema& schema,
                                  const std::string& origin) {
  std::string line;
  if (!std::getline(in, line)) throw IngestionError(origin + ": empty file");
  strip_cr(line);
  auto header = split_csv_line(line);

  auto column_index = [&](const std::string& name) -> int {
    for (size_t i = 0; i < header.size(); ++i) {
      if (header[i] == name) return static_cast<int>(i);
    }
    return -1;
  };

  int time_idx = column_index(schema.time_column);
  if (time_idx < 0) throw SchemaError(origin + ": missing time column '" + schema.time_column + "'");
  int event_idx = column_index(schema.event_column);
  if (event_idx < 0) {
    throw SchemaError(origin + ": missing event column '" + schema.event_column + "'");
  }

  std::vector<int> cov_idx;
  std::vector<std::string> cov_names;
  if (schema.covariates.empty()) {
    for (size_t i = 0; i < header.size(); ++i) {
      if (static_cast<int>(i) == time_idx || static_cast<int>(i) == event_idx) continue;
      if (std::find(schema.drop.begin(), schema.drop.end(), header[i]) != schema.drop.end()) {
        continue;
      }
      cov_idx.push_back(static_cast<int>(i));
      cov_names.push_back(header[i]);
    }
  } else {
    for (const auto& name : schema.covariates) {
      int idx = column_index(name);
      if (idx < 0) throw SchemaError(origin + ": missing covariate column '" + name + "'");
      cov_idx.push_back(idx);
      cov_names.push_back(name);
    }
  }

  std::vector<std::vector<double>> columns(cov_idx.size());
  std::vector<double> times;
  std::vector<uint8_t> events;
  size_t row = 0;
  while (std::getline(in, line)) {
    strip_cr(line);
    if (line.empty()) continue;
    ++row;
    auto cells = split_csv_line(line);
    if (cells.size() != header.size()) {
      throw IngestionError(origin + ": row " + std::to_string(row) + " has " +
                           std::to_string(cells.size()) + " cells, expected " +
                           std::to_string(header.size()));
    }
    auto cell_double = [&](int idx, const std::string& what) {
      try {
        return parse_double_strict(cells[static_cast<size_t>(idx)], what);
      } catch (const FormatError& e) {
        throw IngestionError(origin + ": row " + std::to_string(row) + ", column '" +
                             header[static_cast<size_t>(idx)] + "': " + e.what());
      }
    };
    times.push_back(cell_double(time_idx, "time"));
    double ev = cell_double(event_idx, "event");
    if (ev != 0.0 && ev != 1.0) {
      throw IngestionError(origin + ": row " + std::to_string(row) +
                           ": event must be 0 or 1, got " + cells[static_cast<size_t>(event_idx)]);
    }
    events.push_back(ev == 1.0 ? 1 : 0);
    for (size_t c = 0; c < cov_idx.size(); ++c) {
      columns[c].push_back(cell_double(cov_idx[c], "covariate"));
    }
  }
  return SurvivalDataset::create(std::move(cov_names), std::move(columns), std::move(times),
                                 std::move(events));
}

SurvivalDataset load_survival_csv(const std::string& path, const CsvSchema& schema) {
  std::ifstream in(path);
  if (!in) throw IngestionError("cannot open " + path);
  return read_survival_csv(in, schema, path);
}

SplitPlan stratified_shuffle_splits(const SurvivalDataset& data, size_t k,
                                    double test_fraction, uint64_t seed) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
    throw ConfigError("test_fraction must be in (0,1)");
  }
  if (k == 0) throw ConfigError("need at least one split");

  std::vector<std::vector<size_t>> strata(2);  // [uncensored, censored]
  for (size_t i = 0; i < data.n(); ++i) strata[data.events[i] ? 0 : 1].push_back(i);
  for (const auto& s : strata) {
    if (!s.empty() && s.size() < 2) {
      throw StratificationError("stratum with a single member cannot be split");
    }
  }

  SplitPlan plan;
  plan.test_fraction = test_fraction;
  plan.seed = seed;
  plan.splits.resize(k);
  for (size_t r = 0; r < k; ++r) {
    Rng rng = Rng::stream(seed, "split", r);
    SplitPair& pair = plan.splits[r];
    for (auto stratum : strata) {
      if (stratum.empty()) continue;
      rng.shuffle(stratum);
      size_t n_test =
          static_cast<size_t>(std::llround(static_cast<double>(stratum.size()) * test_fraction));
      for (size_t i = 0; i < stratum.size(); ++i) {
        (i < n_test ? pair.test : pair.train).push_back(stratum[i]);
      }
    }
    std::sort(pair.train.begin(), pair.train.end());
    std::sort(pair.test.begin(), pair.test.end());
  }
  return plan;
}

std::vector<size_t> bootstrap_resample(size_t n, uint64_t seed) {
  Rng rng = Rng::stream(seed, "bootstrap");
  std::vector<size_t> out(n);
  for (size_t i = 0; i < n; ++i) out[i] = static_cast<size_t>(rng.below(n));
  return out;
}

}  // namespace evost
