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

// Batch driver: one subcommand per experiment kind.
//
//   speckle <kind> --config PATH [--seed N] [--threads N] [--out DIR] [--plot METRIC]
//
// Exit codes: 0 success, 2 invalid input, 3 numerical guard, 1 anything else.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "speckle/cli_io.hpp"

namespace {

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw speckle::ValidationError("cannot read config file " + path);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Speckle memory-effect simulator and moment calculator"};
  app.require_subcommand(0, 1);

  std::string config_path;
  std::optional<std::uint64_t> seed;
  int threads = 0;
  std::string out_dir;
  std::string plot;
  bool print_config = false;

  for (const auto& kind : speckle::experiment_kinds()) {
    auto* sub = app.add_subcommand(kind, "Run the " + kind + " experiment");
    sub->add_option("--config", config_path, "Config file (TOML subset)")->required();
    sub->add_option("--seed", seed, "Override ensemble.seed");
    sub->add_option("--threads", threads, "Worker threads (default: SPECKLE_THREADS or all cores)");
    sub->add_option("--out", out_dir, "Output directory (default: output.path)");
    sub->add_option("--plot", plot, "Also write long-format plot data for this series");
    sub->add_flag("--print-config", print_config, "Print the canonical config and its hash, then exit");
  }

  CLI11_PARSE(app, argc, argv);
  if (app.get_subcommands().empty()) {
    std::cout << app.help();
    return 0;
  }
  const std::string kind = app.get_subcommands().front()->get_name();

  try {
    speckle::ExperimentConfig cfg = speckle::parse_config(slurp(config_path));
    cfg.kind = kind;
    if (seed) cfg.seed = *seed;
    speckle::validate_config(cfg);
    if (print_config) {
      std::cout << speckle::emit_config(cfg) << "# hash " << speckle::config_hash(cfg) << "\n";
      return 0;
    }
    speckle::RunOptions opts;
    opts.threads = speckle::resolve_threads(threads);
    if (!out_dir.empty()) opts.out_dir = out_dir;
    for (const auto& w : cfg.regime.warnings()) std::cerr << "warning: " << w << "\n";
    const speckle::ResultRecord rec = speckle::run(cfg, opts);
    if (!plot.empty()) {
      auto path = rec.data_file.parent_path() / (kind + "." + plot + ".plot.csv");
      speckle::write_atomic(path, speckle::export_plotdata(rec, plot));
      std::cout << "plot data: " << path.string() << "\n";
    }
    std::cout << "experiment: " << rec.experiment << "\n"
              << "config hash: " << rec.config_hash << "\n"
              << "rows: " << rec.rows.size() << "\n"
              << "data: " << rec.data_file.string() << "\n"
              << "wall clock: " << rec.wall_clock_seconds << " s\n";
    return 0;
  } catch (const speckle::ConfigError& e) {
    for (const auto& m : e.errors()) std::cerr << "config error: " << m << "\n";
    return 2;
  } catch (const speckle::ValidationError& e) {
    std::cerr << "invalid input: " << e.what() << "\n";
    return 2;
  } catch (const speckle::NumericalGuardError& e) {
    std::cerr << "numerical guard: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
