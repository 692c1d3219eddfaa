#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace evost {

// Error taxonomy. Configuration and input-format problems map to exit code 1
// in the CLI, runtime failures (I/O, degenerate data discovered mid-run) to 2.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct SchemaError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct IngestionError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct DegenerateDatasetError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct StratificationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct GeneratorError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct UndefinedWeightError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct RangeError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct FormatError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Shortest decimal string that parses back to exactly the same double.
std::string format_double(double v);

// Strict full-string parse; throws FormatError on trailing garbage / overflow.
double parse_double_strict(std::string_view s, std::string_view what);

inline constexpr std::string_view kToolkitVersion = "0.1.0";

}  // namespace evost
