#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "polymerlab/error.hpp"

namespace polymerlab {

using Json = nlohmann::ordered_json;

/// "polymerlab-v<version>-schema<n>"; stored in every record.
std::string version_tag();

/// Commands understood by run().
const std::vector<std::string>& command_names();

struct ExperimentConfig {
  std::string command;
  /// Command parameters; missing ones take the command's defaults.
  Json params = Json::object();
  /// 0 selects the command's default.
  std::uint64_t replicates = 0;
  std::uint64_t seed = 1;
  std::string output_path;
  /// 0 selects POLYMERLAB_THREADS, then the hardware count.
  unsigned threads = 0;
};

/// Reads {"command", "params", "replicates", "seed", "threads", "out"}.
ExperimentConfig config_from_json(const Json& j);

/// key=value into params; the value is parsed as JSON when it is valid JSON,
/// otherwise kept as a string.
void apply_override(ExperimentConfig& cfg, const std::string& assignment);

struct Metric {
  double value = 0.0;
  std::optional<double> std_error;
  /// Exact metrics replay bit-for-bit; others within 1e-12 relative.
  bool exact = false;
};

struct CsvSeries {
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;
};

std::string to_csv(const CsvSeries& s);

struct ResultRecord {
  std::string version;
  std::string command;
  /// Resolved configuration: command, params with defaults filled in,
  /// replicates, seed.
  Json config = Json::object();
  std::string fingerprint;
  std::vector<std::pair<std::string, Metric>> metrics;
  /// Command-specific structured output (constraint reports, schedules,
  /// histograms).
  Json details = Json::object();
  std::optional<CsvSeries> series;
  double wall_time = 0.0;
  unsigned threads = 0;

  const Metric& metric(const std::string& name) const;
  /// One line: command and headline metrics.
  std::string summary() const;
};

Json to_json(const ResultRecord& r);
/// Throws IncompleteInput on missing fields.
ResultRecord record_from_json(const Json& j);

/// FNV-1a over the canonical dump of a resolved config.
std::string config_fingerprint(const Json& resolved_config);

/// Dispatches to the owning module. Throws the module's errors, and
/// InvalidParameter for unknown commands or parameter names.
ResultRecord run(const ExperimentConfig& cfg);

struct ReplayOptions {
  std::optional<std::uint64_t> seed;
  std::optional<std::uint64_t> replicates;
  unsigned threads = 0;
};

struct ReplayReport {
  enum class Status { identical, drift, different_config };
  Status status = Status::identical;
  /// Metrics (and series cells) that moved, as "name: old -> new".
  std::vector<std::string> drifted;
  ResultRecord fresh;
};

std::string to_string(ReplayReport::Status s);

/// Re-runs the embedded config. Throws VersionMismatch when the record was
/// written by another version.
ReplayReport replay(const ResultRecord& rec, const ReplayOptions& opt = {});

/// Exit codes used by the command-line tool.
namespace exit_code {
inline constexpr int ok = 0;
inline constexpr int internal = 1;
inline constexpr int usage = 2;
inline constexpr int unknown_command = 3;
inline constexpr int drift = 11;
}  // namespace exit_code

int exit_code_for(ErrorCategory c);

}  // namespace polymerlab
