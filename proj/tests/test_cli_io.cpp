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

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include <sys/wait.h>
#include <unistd.h>

#include "doctest.h"
#include "json.hpp"
#include "speckle/cli_io.hpp"

using namespace speckle;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("speckle_test_" + name + "_" + std::to_string(::getpid()));
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::vector<std::string> errors_of(const std::string& text) {
  try {
    parse_config(text);
  } catch (const ConfigError& e) {
    return e.errors();
  }
  return {};
}

bool any_contains(const std::vector<std::string>& v, const std::string& needle) {
  for (const auto& s : v)
    if (s.find(needle) != std::string::npos) return true;
  return false;
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(SPECKLE_CLI_PATH) + " " + args + " > /dev/null 2>&1";
  const int rc = std::system(cmd.c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

ExperimentConfig small_simulation(const std::string& kind) {
  ExperimentConfig c;
  c.kind = kind;
  c.grid_n = 64;
  c.grid_length = 12.8;
  c.regime.z0 = 0.05;
  c.n_realizations = 8;
  c.batch = 4;
  c.n_points = 3;
  return c;
}

}  // namespace

TEST_CASE("empty config yields documented defaults") {
  const ExperimentConfig c = parse_config("");
  CHECK(c == ExperimentConfig{});
  CHECK(c.regime.epsilon == 0.01);
  CHECK(c.regime.eta == 0.25);
  CHECK(c.grid_n == 256);
  CHECK(c.effective_dz() == doctest::Approx(5e-4));
}

TEST_CASE("regime invariant violations are reported") {
  const auto errs = errors_of("[regime]\nepsilon = 0.3\neta = 0.2\n");
  CHECK(any_contains(errs, "epsilon must be < eta"));
}

TEST_CASE("unknown keys and sections are rejected with line numbers") {
  const auto errs = errors_of("[regime]\nepsilon = 0.01\nfoo = 3\n[bogus]\n");
  CHECK(any_contains(errs, "line 3"));
  CHECK(any_contains(errs, "\"foo\""));
  CHECK(any_contains(errs, "line 4"));
  CHECK(any_contains(errs, "bogus"));
}

TEST_CASE("type mismatches are rejected") {
  CHECK(any_contains(errors_of("[grid]\nn = \"big\"\n"), "line 2"));
  CHECK(any_contains(errors_of("[grid]\nn = 12.5\n"), "integer"));
  CHECK(any_contains(errors_of("[experiment]\nmonte_carlo = 1\n"), "true or false"));
  CHECK(any_contains(errors_of("[output]\nformat = csv\n"), "quoted"));
  CHECK(any_contains(errors_of("[experiment]\netas = [0.5, x]\n"), "not a number"));
  CHECK(any_contains(errors_of("[grid]\nn = 64\nn = 128\n"), "duplicate"));
  CHECK(any_contains(errors_of("[grid]\nn = 100\n"), "power of two"));
  CHECK(any_contains(errors_of("[experiment]\nkind = \"nope\"\n"), "experiment.kind"));
}

TEST_CASE("comments and whitespace are ignored") {
  const auto c = parse_config("# header\n[grid]   \n  n = 128   # trailing\n\n[output]\npath = \"a#b\"\n");
  CHECK(c.grid_n == 128);
  CHECK(c.output_path == "a#b");
}

TEST_CASE("emit then parse round-trips exactly") {
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 50; ++trial) {
    ExperimentConfig c;
    c.regime.epsilon = 0.001 + 0.01 * u(rng);
    c.regime.eta = 0.2 + 0.5 * u(rng);
    c.regime.omega0 = 0.5 + u(rng);
    c.regime.z0 = 2.0 * u(rng);
    c.regime.k0 = {u(rng) - 0.5, 0.0};
    c.grid_length = 10.0 + 100.0 * u(rng);
    c.medium_r0 = u(rng);
    c.medium_ell = 0.1 + u(rng);
    c.source_profile = u(rng) < 0.5 ? "gaussian" : "plane_wave";
    c.source_width = 0.5 + u(rng);
    c.dz = 1e-4 * u(rng);
    c.tau = u(rng);
    c.seed = rng();
    c.etas = {u(rng), 0.5 * u(rng) + 0.01};
    c.monte_carlo = u(rng) < 0.5;
    c.mc_dkappa = {-u(rng), 0.0};
    c.format = u(rng) < 0.5 ? "csv" : "ndjson";
    const ExperimentConfig back = parse_config(emit_config(c));
    CHECK(back == c);
    CHECK(config_hash(back) == config_hash(c));
  }
}

TEST_CASE("config hash is a stable git-style blob digest") {
  const ExperimentConfig c;
  const std::string h = config_hash(c);
  CHECK(h.size() == 40);
  CHECK(h == config_hash(parse_config("# same content\n[grid]\nn = 256\n")));
  ExperimentConfig d;
  d.seed = 2;
  CHECK(config_hash(d) != h);
}

TEST_CASE("validate experiment writes a covariance report") {
  const fs::path dir = scratch("validate");
  ExperimentConfig c;
  c.kind = "validate";
  const ResultRecord rec = run(c, {1, dir});
  CHECK(rec.experiment == "validate");
  CHECK(rec.rows.size() >= 8);
  for (const auto& r : rec.rows) CHECK(r.scan_id.rfind("covariance.", 0) == 0);
  CHECK(fs::exists(dir / "validate.csv"));
  const auto meta = nlohmann::json::parse(slurp(dir / "validate.run.json"));
  CHECK(meta["config_hash"] == rec.config_hash);
  CHECK(meta.contains("timestamp"));
  fs::remove_all(dir);
}

TEST_CASE("chromatic scan produces a profile and an optimum row") {
  const fs::path dir = scratch("chroma");
  ExperimentConfig c;
  c.kind = "memory-chroma";
  c.omega_offset = 0.2;
  const ResultRecord rec = run(c, {1, dir});
  bool has_opt = false;
  std::size_t profile = 0;
  for (const auto& r : rec.rows) {
    has_opt |= r.scan_id == "h_opt";
    profile += r.scan_id == "chroma_profile";
  }
  CHECK(has_opt);
  CHECK(profile == 41);
  const std::string plot = export_plotdata(rec, "m11_abs");
  CHECK(plot.rfind("x,series,value,stderr\n", 0) == 0);
  CHECK(plot.find(",m11_abs,") != std::string::npos);
  CHECK_THROWS_AS(export_plotdata(rec, "nonexistent"), ValidationError);
  fs::remove_all(dir);
}

TEST_CASE("tilt scan plot data") {
  const fs::path dir = scratch("tilt");
  ExperimentConfig c;
  c.kind = "memory-tilt";
  const ResultRecord rec = run(c, {1, dir});
  const std::string plot = export_plotdata(rec, "C_abs");
  std::istringstream in(plot);
  std::string line;
  int n = 0;
  while (std::getline(in, line)) ++n;
  CHECK(n == 42);
  fs::remove_all(dir);
}

TEST_CASE("same config and seed give byte-identical data files") {
  const fs::path a = scratch("det_a"), b = scratch("det_b");
  ExperimentConfig c = small_simulation("moments");
  const auto ra = run(c, {1, a});
  const auto rb = run(c, {2, b});
  CHECK(slurp(ra.data_file) == slurp(rb.data_file));
  c.seed = 99;
  const auto rc = run(c, {1, b});
  CHECK(slurp(ra.data_file) != slurp(rc.data_file));
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST_CASE("ndjson output is one JSON record per line") {
  const fs::path dir = scratch("ndjson");
  ExperimentConfig c = small_simulation("gaussianity");
  c.format = "ndjson";
  const auto rec = run(c, {1, dir});
  std::istringstream in(slurp(rec.data_file));
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    const auto j = nlohmann::json::parse(line);
    CHECK(j.contains("moment_id"));
    CHECK(j.contains("points"));
    CHECK(j.contains("value_re"));
    CHECK(j.contains("value_im"));
    CHECK(j.contains("stderr"));
    CHECK(j.contains("n"));
    ++n;
  }
  CHECK(n == rec.rows.size());
  CHECK_FALSE(fs::exists(dir / "gaussianity.partial.ndjson"));
  const std::string z = export_plotdata(rec, "z_score");
  CHECK(z.find(",z_score,") != std::string::npos);
  fs::remove_all(dir);
}

TEST_CASE("atomic writes leave no temporary files") {
  const fs::path dir = scratch("atomic");
  write_atomic(dir / "x.txt", "one");
  write_atomic(dir / "x.txt", "two");
  CHECK(slurp(dir / "x.txt") == "two");
  std::size_t files = 0;
  for (const auto& e : fs::directory_iterator(dir)) files += e.is_regular_file();
  CHECK(files == 1);
  fs::remove_all(dir);
}

TEST_CASE("thread count resolution") {
  CHECK(resolve_threads(3) == 3);
  ::setenv("SPECKLE_THREADS", "5", 1);
  CHECK(resolve_threads(0) == 5);
  CHECK(resolve_threads(2) == 2);
  ::setenv("SPECKLE_THREADS", "junk", 1);
  CHECK(resolve_threads(0) >= 1);
  ::unsetenv("SPECKLE_THREADS");
}

TEST_CASE("command-line exit codes") {
  const fs::path dir = scratch("cli");
  {
    std::ofstream(dir / "ok.toml") << "[regime]\nepsilon = 0.01\n";
    std::ofstream(dir / "bad.toml") << "[regime]\nepsilon = 0.3\neta = 0.2\n";
    std::ofstream(dir / "guard.toml") << "[regime]\nepsilon = 0.001\neta = 0.012\n";
  }
  const std::string out = " --out " + (dir / "out").string();
  CHECK(run_cli("validate --config " + (dir / "ok.toml").string() + out) == 0);
  CHECK(run_cli("validate --config " + (dir / "bad.toml").string() + out) == 2);
  CHECK(run_cli("validate --config " + (dir / "missing.toml").string() + out) == 2);
  CHECK(run_cli("moments --config " + (dir / "guard.toml").string() + out) == 3);
  CHECK(run_cli("memory-chroma --seed 4 --threads 1 --plot m11_abs --config " + (dir / "ok.toml").string() + out) == 0);
  CHECK(fs::exists(dir / "out" / "memory-chroma.m11_abs.plot.csv"));
  fs::remove_all(dir);
}
