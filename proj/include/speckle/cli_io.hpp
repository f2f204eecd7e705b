// Copyright 2026 The Speckle Memory Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "speckle/core.hpp"

namespace speckle {

/// Flat experiment description. Text form (all keys optional):
///
///   [regime]     epsilon, eta, omega0, k0 = [x, y], z0, d
///   [grid]       n, length
///   [medium]     family = "gaussian", r0, ell
///   [source]     profile = "plane_wave" | "gaussian", width, tilt = [x, y]
///   [solver]     dz (0 selects z0 / 2000), dz_ode
///   [ensemble]   n_realizations, seed, batch
///   [experiment] kind, tau, omega_offset, n_points, offset_cells, n_paths,
///                etas = [...], monte_carlo, mc_dkappa = [...]
///   [output]     path, format = "csv" | "ndjson"
///
/// Comments start with '#'. Strings are double-quoted.
struct ExperimentConfig {
  ScalingRegime regime;
  std::size_t grid_n = 256;
  double grid_length = 51.2;
  std::string medium_family = "gaussian";
  double medium_r0 = 1.0;
  double medium_ell = 1.0;
  std::string source_profile = "plane_wave";
  double source_width = 1.0;
  DVec source_tilt{0.0, 0.0};
  double dz = 0.0;
  double dz_ode = 1e-3;
  std::size_t n_realizations = 200;
  std::uint64_t seed = 1;
  std::size_t batch = 50;
  std::string kind = "simulate";
  double tau = 0.4;
  double omega_offset = 1.0;
  std::size_t n_points = 20;
  std::size_t offset_cells = 2;
  std::size_t n_paths = 100000;
  std::vector<double> etas{0.5, 0.25, 0.125};
  bool monte_carlo = false;
  std::vector<double> mc_dkappa{-2.4, -1.8, -1.2, -0.6, 0.0};
  std::string output_path = "results";
  std::string format = "csv";

  /// dz, or z0 / 2000 when dz = 0.
  double effective_dz() const;

  bool operator==(const ExperimentConfig&) const = default;
};

/// Recognized experiment kinds.
const std::vector<std::string>& experiment_kinds();

/// Collected parse and validation errors, one message per line with its
/// source line number when known.
class ConfigError : public ValidationError {
 public:
  explicit ConfigError(std::vector<std::string> errors);
  const std::vector<std::string>& errors() const { return errors_; }

 private:
  std::vector<std::string> errors_;
};

ExperimentConfig parse_config(const std::string& text);

/// Checks cross-field preconditions; throws ConfigError.
void validate_config(const ExperimentConfig& config);

/// Canonical text: every key, fixed order, 17 significant digits.
std::string emit_config(const ExperimentConfig& config);

/// SHA-1 of "blob <len>\0" + emit_config(config), as lowercase hex.
std::string config_hash(const ExperimentConfig& config);

struct MetricRow {
  std::string scan_id;
  std::vector<std::pair<std::string, double>> params;
  Complex value{};
  double stderr = 0.0;
  std::size_t n = 0;
  int p = 0;
  int q = 0;
  /// Plot coordinate and series name for export_plotdata.
  double x = 0.0;
  std::string series;
};

struct ResultRecord {
  std::string experiment;
  std::string config_hash;
  std::uint64_t seed = 0;
  std::vector<MetricRow> rows;
  double wall_clock_seconds = 0.0;
  std::vector<std::string> warnings;
  std::filesystem::path data_file;
  std::filesystem::path meta_file;
};

struct RunOptions {
  unsigned threads = 1;
  std::filesystem::path out_dir;  // empty: config.output_path
};

/// Dispatches to the experiment pipeline and writes <out>/<kind>.<format>
/// plus <out>/<kind>.run.json. Data files depend only on (config, seed);
/// the run.json carries the wall clock.
ResultRecord run(const ExperimentConfig& config, const RunOptions& options = {});

/// Long-format CSV "x,series,value,stderr" for rows of the named series.
/// Throws ValidationError for a series absent from the record.
std::string export_plotdata(const ResultRecord& record, const std::string& which);

std::string format_csv(const std::vector<MetricRow>& rows);
std::string format_ndjson_line(const MetricRow& row);

/// Writes via a temporary file in the same directory followed by rename.
void write_atomic(const std::filesystem::path& path, const std::string& content);

/// Threads from the flag, else SPECKLE_THREADS, else hardware concurrency.
unsigned resolve_threads(int flag_value);

}  // namespace speckle
