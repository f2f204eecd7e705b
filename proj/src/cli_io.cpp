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

#include "speckle/cli_io.hpp"

#include <openssl/evp.h>
#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <functional>
#include <iomanip>
#include <map>
#include <sstream>
#include <thread>

#include "json.hpp"
#include "speckle/analytic_moments.hpp"
#include "speckle/covariance.hpp"
#include "speckle/fft.hpp"
#include "speckle/jump_process.hpp"
#include "speckle/memory_effects.hpp"
#include "speckle/simulator.hpp"
#include "speckle/statistics.hpp"

namespace speckle {

namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

// A raw right-hand side, typed lazily by the key it is assigned to.
struct RawValue {
  enum class Kind { number, string, boolean, array } kind;
  std::string text;
  std::vector<std::string> items;
};

bool parse_raw(const std::string& rhs, RawValue& out, std::string& err) {
  if (rhs.empty()) {
    err = "missing value";
    return false;
  }
  if (rhs.front() == '"') {
    if (rhs.size() < 2 || rhs.back() != '"') {
      err = "unterminated string";
      return false;
    }
    out = {RawValue::Kind::string, rhs.substr(1, rhs.size() - 2), {}};
    return true;
  }
  if (rhs.front() == '[') {
    if (rhs.back() != ']') {
      err = "unterminated array";
      return false;
    }
    out = {RawValue::Kind::array, rhs, {}};
    const std::string body = trim(rhs.substr(1, rhs.size() - 2));
    if (!body.empty()) {
      std::stringstream ss(body);
      std::string item;
      while (std::getline(ss, item, ',')) out.items.push_back(trim(item));
    }
    return true;
  }
  if (rhs == "true" || rhs == "false") {
    out = {RawValue::Kind::boolean, rhs, {}};
    return true;
  }
  out = {RawValue::Kind::number, rhs, {}};
  return true;
}

bool to_double(const std::string& t, double& v) {
  if (t.empty()) return false;
  char* end = nullptr;
  v = std::strtod(t.c_str(), &end);
  return end == t.c_str() + t.size() && std::isfinite(v);
}

bool to_uint(const std::string& t, std::uint64_t& v) {
  if (t.empty() || t.find_first_not_of("0123456789") != std::string::npos) return false;
  try {
    v = std::stoull(t);
  } catch (...) {
    return false;
  }
  return true;
}

using Setter = std::function<std::string(ExperimentConfig&, const RawValue&)>;

Setter real(double ExperimentConfig::*field) {
  return [field](ExperimentConfig& c, const RawValue& v) -> std::string {
    double x;
    if (v.kind != RawValue::Kind::number || !to_double(v.text, x)) return "expected a number";
    c.*field = x;
    return {};
  };
}

Setter regime_real(double ScalingRegime::*field) {
  return [field](ExperimentConfig& c, const RawValue& v) -> std::string {
    double x;
    if (v.kind != RawValue::Kind::number || !to_double(v.text, x)) return "expected a number";
    c.regime.*field = x;
    return {};
  };
}

template <class T>
Setter count(T ExperimentConfig::*field) {
  return [field](ExperimentConfig& c, const RawValue& v) -> std::string {
    std::uint64_t x;
    if (v.kind != RawValue::Kind::number || !to_uint(v.text, x)) return "expected a non-negative integer";
    c.*field = static_cast<T>(x);
    return {};
  };
}

Setter text(std::string ExperimentConfig::*field) {
  return [field](ExperimentConfig& c, const RawValue& v) -> std::string {
    if (v.kind != RawValue::Kind::string) return "expected a quoted string";
    c.*field = v.text;
    return {};
  };
}

std::string read_list(const RawValue& v, std::vector<double>& out) {
  if (v.kind != RawValue::Kind::array) return "expected an array of numbers";
  out.clear();
  for (const auto& it : v.items) {
    double x;
    if (!to_double(it, x)) return "array element '" + it + "' is not a number";
    out.push_back(x);
  }
  return {};
}

Setter vec2(DVec ExperimentConfig::*field) {
  return [field](ExperimentConfig& c, const RawValue& v) -> std::string {
    std::vector<double> xs;
    if (auto e = read_list(v, xs); !e.empty()) return e;
    if (xs.empty() || xs.size() > 2) return "expected 1 or 2 components";
    c.*field = {xs[0], xs.size() == 2 ? xs[1] : 0.0};
    return {};
  };
}

const std::vector<std::pair<std::string, Setter>>& setters() {
  static const std::vector<std::pair<std::string, Setter>> table = {
      {"regime.epsilon", regime_real(&ScalingRegime::epsilon)},
      {"regime.eta", regime_real(&ScalingRegime::eta)},
      {"regime.omega0", regime_real(&ScalingRegime::omega0)},
      {"regime.k0",
       [](ExperimentConfig& c, const RawValue& v) -> std::string {
         std::vector<double> xs;
         if (auto e = read_list(v, xs); !e.empty()) return e;
         if (xs.empty() || xs.size() > 2) return "expected 1 or 2 components";
         c.regime.k0 = {xs[0], xs.size() == 2 ? xs[1] : 0.0};
         return {};
       }},
      {"regime.z0", regime_real(&ScalingRegime::z0)},
      {"regime.d",
       [](ExperimentConfig& c, const RawValue& v) -> std::string {
         std::uint64_t x;
         if (v.kind != RawValue::Kind::number || !to_uint(v.text, x)) return "expected an integer";
         c.regime.d = static_cast<int>(x);
         return {};
       }},
      {"grid.n", count(&ExperimentConfig::grid_n)},
      {"grid.length", real(&ExperimentConfig::grid_length)},
      {"medium.family", text(&ExperimentConfig::medium_family)},
      {"medium.r0", real(&ExperimentConfig::medium_r0)},
      {"medium.ell", real(&ExperimentConfig::medium_ell)},
      {"source.profile", text(&ExperimentConfig::source_profile)},
      {"source.width", real(&ExperimentConfig::source_width)},
      {"source.tilt", vec2(&ExperimentConfig::source_tilt)},
      {"solver.dz", real(&ExperimentConfig::dz)},
      {"solver.dz_ode", real(&ExperimentConfig::dz_ode)},
      {"ensemble.n_realizations", count(&ExperimentConfig::n_realizations)},
      {"ensemble.seed", count(&ExperimentConfig::seed)},
      {"ensemble.batch", count(&ExperimentConfig::batch)},
      {"experiment.kind", text(&ExperimentConfig::kind)},
      {"experiment.tau", real(&ExperimentConfig::tau)},
      {"experiment.omega_offset", real(&ExperimentConfig::omega_offset)},
      {"experiment.n_points", count(&ExperimentConfig::n_points)},
      {"experiment.offset_cells", count(&ExperimentConfig::offset_cells)},
      {"experiment.n_paths", count(&ExperimentConfig::n_paths)},
      {"experiment.etas",
       [](ExperimentConfig& c, const RawValue& v) -> std::string { return read_list(v, c.etas); }},
      {"experiment.monte_carlo",
       [](ExperimentConfig& c, const RawValue& v) -> std::string {
         if (v.kind != RawValue::Kind::boolean) return "expected true or false";
         c.monte_carlo = v.text == "true";
         return {};
       }},
      {"experiment.mc_dkappa",
       [](ExperimentConfig& c, const RawValue& v) -> std::string { return read_list(v, c.mc_dkappa); }},
      {"output.path", text(&ExperimentConfig::output_path)},
      {"output.format", text(&ExperimentConfig::format)},
  };
  return table;
}

std::string list_text(const std::vector<double>& xs) {
  std::string s = "[";
  for (std::size_t i = 0; i < xs.size(); ++i) s += (i ? ", " : "") + fmt(xs[i]);
  return s + "]";
}

std::string quoted(const std::string& s) { return "\"" + s + "\""; }

}  // namespace

double ExperimentConfig::effective_dz() const { return dz > 0.0 ? dz : regime.z0 / 2000.0; }

const std::vector<std::string>& experiment_kinds() {
  static const std::vector<std::string> kinds = {"simulate",      "moments",       "gaussianity", "memory-tilt",
                                                 "memory-chroma", "jump-check",    "validate"};
  return kinds;
}

namespace {

std::string join_errors(const std::vector<std::string>& errors) {
  std::string s;
  for (std::size_t i = 0; i < errors.size(); ++i) s += (i ? "\n" : "") + errors[i];
  return s;
}

}  // namespace

ConfigError::ConfigError(std::vector<std::string> errors)
    : ValidationError(join_errors(errors)), errors_(std::move(errors)) {}

ExperimentConfig parse_config(const std::string& text) {
  ExperimentConfig cfg;
  std::vector<std::string> errors;
  std::map<std::string, int> seen;
  std::string section;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    bool in_string = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
      if (line[i] == '"') in_string = !in_string;
      if (line[i] == '#' && !in_string) {
        line.resize(i);
        break;
      }
    }
    line = trim(line);
    if (line.empty()) continue;
    const std::string where = "line " + std::to_string(lineno) + ": ";
    if (line.front() == '[') {
      if (line.back() != ']') {
        errors.push_back(where + "malformed section header");
        continue;
      }
      section = trim(line.substr(1, line.size() - 2));
      static const std::vector<std::string> sections = {"regime", "grid",     "medium",     "source",
                                                        "solver", "ensemble", "experiment", "output"};
      if (std::find(sections.begin(), sections.end(), section) == sections.end()) {
        errors.push_back(where + "unknown section [" + section + "]");
      }
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      errors.push_back(where + "expected key = value");
      continue;
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string full = section.empty() ? key : section + "." + key;
    const auto& table = setters();
    const auto it = std::find_if(table.begin(), table.end(), [&](const auto& e) { return e.first == full; });
    if (it == table.end()) {
      errors.push_back(where + "unknown key \"" + key + "\"" + (section.empty() ? "" : " in [" + section + "]"));
      continue;
    }
    if (seen.count(full)) {
      errors.push_back(where + "duplicate key \"" + full + "\" (first set on line " + std::to_string(seen[full]) + ")");
      continue;
    }
    seen[full] = lineno;
    RawValue raw;
    std::string err;
    if (!parse_raw(trim(line.substr(eq + 1)), raw, err)) {
      errors.push_back(where + full + ": " + err);
      continue;
    }
    if (auto e = it->second(cfg, raw); !e.empty()) errors.push_back(where + full + ": " + e);
  }
  if (!errors.empty()) throw ConfigError(errors);
  validate_config(cfg);
  return cfg;
}

void validate_config(const ExperimentConfig& c) {
  std::vector<std::string> errors;
  auto guard = [&](auto&& fn) {
    try {
      fn();
    } catch (const std::exception& e) {
      errors.push_back(e.what());
    }
  };
  guard([&] { c.regime.validate(); });
  guard([&] { build_grid(c.grid_n, c.grid_length, c.regime.d == 2 ? 2 : 1); });
  if (c.medium_family != "gaussian") errors.push_back("medium.family must be \"gaussian\"");
  if (!(c.medium_r0 >= 0.0)) errors.push_back("medium.r0 must be >= 0");
  if (!(c.medium_ell > 0.0)) errors.push_back("medium.ell must be > 0");
  if (c.source_profile != "plane_wave" && c.source_profile != "gaussian") {
    errors.push_back("source.profile must be \"plane_wave\" or \"gaussian\"");
  }
  if (!(c.source_width > 0.0)) errors.push_back("source.width must be > 0");
  if (c.regime.d == 1 && c.source_tilt[1] != 0.0) errors.push_back("source.tilt[1] must be 0 when d = 1");
  if (!(c.dz >= 0.0)) errors.push_back("solver.dz must be >= 0");
  if (!(c.dz_ode > 0.0)) errors.push_back("solver.dz_ode must be > 0");
  if (c.n_realizations < 2) errors.push_back("ensemble.n_realizations must be >= 2");
  if (c.batch < 1) errors.push_back("ensemble.batch must be >= 1");
  const auto& kinds = experiment_kinds();
  if (std::find(kinds.begin(), kinds.end(), c.kind) == kinds.end()) {
    errors.push_back("experiment.kind \"" + c.kind + "\" is not one of simulate, moments, gaussianity, "
                     "memory-tilt, memory-chroma, jump-check, validate");
  }
  if (c.format != "csv" && c.format != "ndjson") errors.push_back("output.format must be \"csv\" or \"ndjson\"");
  if (c.n_points < 1) errors.push_back("experiment.n_points must be >= 1");
  if (c.n_paths < 2) errors.push_back("experiment.n_paths must be >= 2");
  if (c.offset_cells >= c.grid_n) errors.push_back("experiment.offset_cells must be < grid.n");
  for (double e : c.etas)
    if (!(e > 0.0 && e <= 1.0)) errors.push_back("experiment.etas entries must lie in (0, 1]");
  if (c.mc_dkappa.empty()) errors.push_back("experiment.mc_dkappa must be non-empty");
  if (c.output_path.empty()) errors.push_back("output.path must be non-empty");
  if (!errors.empty()) throw ConfigError(errors);
}

std::string emit_config(const ExperimentConfig& c) {
  std::ostringstream o;
  o << "[regime]\n"
    << "epsilon = " << fmt(c.regime.epsilon) << "\n"
    << "eta = " << fmt(c.regime.eta) << "\n"
    << "omega0 = " << fmt(c.regime.omega0) << "\n"
    << "k0 = " << list_text({c.regime.k0[0], c.regime.k0[1]}) << "\n"
    << "z0 = " << fmt(c.regime.z0) << "\n"
    << "d = " << c.regime.d << "\n\n"
    << "[grid]\n"
    << "n = " << c.grid_n << "\n"
    << "length = " << fmt(c.grid_length) << "\n\n"
    << "[medium]\n"
    << "family = " << quoted(c.medium_family) << "\n"
    << "r0 = " << fmt(c.medium_r0) << "\n"
    << "ell = " << fmt(c.medium_ell) << "\n\n"
    << "[source]\n"
    << "profile = " << quoted(c.source_profile) << "\n"
    << "width = " << fmt(c.source_width) << "\n"
    << "tilt = " << list_text({c.source_tilt[0], c.source_tilt[1]}) << "\n\n"
    << "[solver]\n"
    << "dz = " << fmt(c.dz) << "\n"
    << "dz_ode = " << fmt(c.dz_ode) << "\n\n"
    << "[ensemble]\n"
    << "n_realizations = " << c.n_realizations << "\n"
    << "seed = " << c.seed << "\n"
    << "batch = " << c.batch << "\n\n"
    << "[experiment]\n"
    << "kind = " << quoted(c.kind) << "\n"
    << "tau = " << fmt(c.tau) << "\n"
    << "omega_offset = " << fmt(c.omega_offset) << "\n"
    << "n_points = " << c.n_points << "\n"
    << "offset_cells = " << c.offset_cells << "\n"
    << "n_paths = " << c.n_paths << "\n"
    << "etas = " << list_text(c.etas) << "\n"
    << "monte_carlo = " << (c.monte_carlo ? "true" : "false") << "\n"
    << "mc_dkappa = " << list_text(c.mc_dkappa) << "\n\n"
    << "[output]\n"
    << "path = " << quoted(c.output_path) << "\n"
    << "format = " << quoted(c.format) << "\n";
  return o.str();
}

std::string config_hash(const ExperimentConfig& config) {
  const std::string body = emit_config(config);
  std::string blob = "blob " + std::to_string(body.size());
  blob.push_back('\0');
  blob += body;
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(blob.data(), blob.size(), md, &len, EVP_sha1(), nullptr) != 1) {
    throw std::runtime_error("SHA-1 digest failed");
  }
  std::ostringstream hex;
  for (unsigned i = 0; i < len; ++i) hex << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(md[i]);
  return hex.str();
}

std::string format_csv(const std::vector<MetricRow>& rows) {
  std::vector<std::string> names;
  for (const auto& r : rows)
    for (const auto& [k, v] : r.params)
      if (std::find(names.begin(), names.end(), k) == names.end()) names.push_back(k);
  std::ostringstream o;
  o << "scan_id";
  for (const auto& n : names) o << "," << n;
  o << ",value_re,value_im,abs,stderr\n";
  for (const auto& r : rows) {
    o << r.scan_id;
    for (const auto& n : names) {
      o << ",";
      for (const auto& [k, v] : r.params)
        if (k == n) {
          o << fmt(v);
          break;
        }
    }
    o << "," << fmt(r.value.real()) << "," << fmt(r.value.imag()) << "," << fmt(std::abs(r.value)) << ","
      << fmt(r.stderr) << "\n";
  }
  return o.str();
}

std::string format_ndjson_line(const MetricRow& row) {
  nlohmann::ordered_json j;
  j["moment_id"] = row.scan_id;
  j["p"] = row.p;
  j["q"] = row.q;
  nlohmann::ordered_json pts = nlohmann::ordered_json::object();
  for (const auto& [k, v] : row.params) pts[k] = v;
  j["points"] = pts;
  j["value_re"] = row.value.real();
  j["value_im"] = row.value.imag();
  j["stderr"] = row.stderr;
  j["n"] = row.n;
  return j.dump();
}

void write_atomic(const std::filesystem::path& path, const std::string& content) {
  namespace fs = std::filesystem;
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp." + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open " + tmp.string() + " for writing");
    out << content;
    out.flush();
    if (!out) throw std::runtime_error("write failed for " + tmp.string());
  }
  fs::rename(tmp, path);
}

unsigned resolve_threads(int flag_value) {
  if (flag_value > 0) return static_cast<unsigned>(flag_value);
  if (const char* env = std::getenv("SPECKLE_THREADS")) {
    std::uint64_t v;
    if (to_uint(env, v) && v > 0) return static_cast<unsigned>(v);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

std::string export_plotdata(const ResultRecord& record, const std::string& which) {
  std::ostringstream o;
  o << "x,series,value,stderr\n";
  bool any = false;
  for (const auto& r : record.rows) {
    if (r.series != which) continue;
    any = true;
    o << fmt(r.x) << "," << which << "," << fmt(r.value.imag() == 0.0 ? r.value.real() : std::abs(r.value))
      << "," << fmt(r.stderr) << "\n";
  }
  if (!any) throw ValidationError("unknown metric \"" + which + "\" for experiment " + record.experiment);
  return o.str();
}

// ---------------------------------------------------------------------------
// Experiment pipelines
// ---------------------------------------------------------------------------

namespace {

struct Context {
  const ExperimentConfig& cfg;
  unsigned threads;
  std::vector<MetricRow> rows;
  std::vector<std::string> warnings;
  // Streaming NDJSON progress file, if enabled.
  std::ofstream progress;

  void emit_progress(const MetricRow& row) {
    if (progress.is_open()) {
      progress << format_ndjson_line(row) << "\n";
      progress.flush();
    }
  }
};

MetricRow row(std::string id, std::vector<std::pair<std::string, double>> params, Complex value, double se = 0.0,
              std::size_t n = 0) {
  MetricRow r;
  r.scan_id = std::move(id);
  r.params = std::move(params);
  r.value = value;
  r.stderr = se;
  r.n = n;
  return r;
}

// Deterministic quantities (e.g. mu11 at zero lag, fixed by energy
// conservation) have a roundoff-level standard error; report 0 there.
double z_score(Complex value, Complex expected, double se) {
  const double diff = std::abs(value - expected);
  if (se <= 1e-12 * std::max(1.0, std::abs(expected))) return diff <= 1e-9 ? 0.0 : INFINITY;
  return diff / se;
}

CovarianceModel model_of(const ExperimentConfig& c) {
  return CovarianceModel::gaussian(c.medium_r0, c.medium_ell, c.regime.d);
}

SourceSpec source_of(const ExperimentConfig& c) {
  SourceSpec s;
  s.profile = c.source_profile == "gaussian" ? SourceSpec::Profile::gaussian : SourceSpec::Profile::plane_wave;
  s.width = c.source_width;
  s.tilt = c.source_tilt;
  return s;
}

std::vector<std::size_t> batch_bounds(std::size_t total, std::size_t batch) {
  std::vector<std::size_t> b;
  for (std::size_t s = 0; s < total; s += batch) b.push_back(s);
  b.push_back(total);
  return b;
}

// Lateral sample points of the field. Plane waves are statistically
// translation invariant, so every grid point serves as a translate; other
// sources use the grid centre only.
std::vector<std::size_t> translates_for(const ExperimentConfig& c, const Grid& g) {
  std::vector<std::size_t> t;
  if (c.source_profile == "plane_wave") {
    for (std::size_t i = 0; i < g.size(); ++i) t.push_back(i);
  } else {
    t.push_back(g.size() / 2 + (g.dim() == 2 ? g.n() / 2 : 0));
  }
  return t;
}

// Flat index displaced by `cells` along the first axis (periodic).
std::size_t displaced(const Grid& g, std::size_t flat, std::size_t cells) {
  if (g.dim() == 1) return (flat + cells) % g.n();
  const std::size_t n = g.n();
  return ((flat / n + cells) % n) * n + flat % n;
}

void run_simulate_or_moments(Context& ctx, bool moments) {
  const auto& c = ctx.cfg;
  const Grid grid = build_grid(c.grid_n, c.grid_length, c.regime.d);
  const CovarianceModel model = model_of(c);
  const SplitStepSolver solver(c.regime, model, grid, c.effective_dz());
  const WaveField initial = init_source(c.regime, grid, source_of(c));
  WaveField free = initial;
  solver.free_propagate(free, c.regime.z0);
  const auto trans = translates_for(c, grid);
  std::vector<std::size_t> usable;
  double fmax = 0.0;
  for (auto t : trans) fmax = std::max(fmax, std::abs(free.values[t]));
  for (auto t : trans)
    if (std::abs(free.values[t]) > 1e-3 * fmax) usable.push_back(t);

  const std::size_t R = c.n_realizations;
  const std::size_t np = moments ? c.n_points : 0;
  std::vector<Complex> mean_ratio(R);
  std::vector<double> drift(R);
  std::vector<std::vector<Complex>> mu11(np, std::vector<Complex>(R)), psi11(np, std::vector<Complex>(R));
  if (moments) {
    // Trip the compensation overflow guard before any propagation.
    WaveField probe = initial;
    probe.z = c.regime.z0;
    (void)phase_compensate(probe, c.regime, model);
  }
  const double e0 = initial.energy();
  const double stops[] = {c.regime.z0};

  const double expected_mean = mean_field_damping(c.regime.omega0, model.r0(), c.regime.z0, c.regime.eta);
  auto expected_mu11 = [&](std::size_t j) {
    const double tau = static_cast<double>(j) * grid.spacing() / c.regime.eta;
    ScalingRegime rg = c.regime;
    const double r = c.source_profile == "plane_wave" ? 0.0 : c.regime.epsilon * 0.5 * tau * c.regime.eta;
    if (c.regime.d != 1 && c.source_profile != "plane_wave") return Complex(NAN, NAN);
    return M11_omega0_explicit(c.regime.z0, DVec{r, 0.0}, DVec{tau, 0.0}, DVec{0.0, 0.0}, source_of(c), model, rg,
                               ExplicitMode::finite);
  };

  const auto bounds = batch_bounds(R, c.batch);
  for (std::size_t b = 0; b + 1 < bounds.size(); ++b) {
    run_ensemble(solver, initial, bounds[b], bounds[b + 1] - bounds[b], c.seed, ctx.threads, stops,
                 [&](std::size_t i, std::size_t, const WaveField& f) {
                   drift[i] = std::fabs(f.energy() - e0) / e0;
                   Complex acc = 0.0;
                   for (auto t : usable) acc += f.values[t] / free.values[t];
                   mean_ratio[i] = acc / static_cast<double>(usable.size());
                   for (std::size_t j = 0; j < np; ++j) {
                     Complex m = 0.0;
                     for (auto t : trans) m += f.values[displaced(grid, t, j)] * std::conj(f.values[t]);
                     mu11[j][i] = m / static_cast<double>(trans.size());
                   }
                   if (np == 0) return;
                   CompensatedField psi = phase_compensate(f, c.regime, model);
                   FftPlan(grid.n(), grid.dim()).inverse(psi.values);
                   for (std::size_t j = 0; j < np; ++j) {
                     Complex m = 0.0;
                     for (auto t : trans) m += psi.values[displaced(grid, t, j)] * std::conj(psi.values[t]);
                     psi11[j][i] = m / static_cast<double>(trans.size());
                   }
                 });
    const std::size_t done = bounds[b + 1];
    if (done >= 2) {
      auto est = estimate_mean(std::span<const Complex>(mean_ratio.data(), done), c.batch);
      MetricRow r = row("first_moment", {{"z", c.regime.z0}}, est.value, est.stderr, done);
      r.p = 1;
      ctx.emit_progress(r);
      for (std::size_t j = 0; j < np; ++j) {
        auto m = estimate_mean(std::span<const Complex>(mu11[j].data(), done), c.batch);
        MetricRow mr = row("mu11_tau" + std::to_string(j), {{"tau", j * grid.spacing() / c.regime.eta}}, m.value,
                           m.stderr, done);
        mr.p = mr.q = 1;
        ctx.emit_progress(mr);
      }
    }
  }

  const double max_drift = *std::max_element(drift.begin(), drift.end());
  ctx.rows.push_back(row("energy_drift_max", {}, max_drift, 0.0, R));
  auto est = estimate_mean(mean_ratio, c.batch);
  MetricRow fm = row("first_moment", {{"z", c.regime.z0}, {"expected", expected_mean}}, est.value, est.stderr, R);
  fm.p = 1;
  fm.series = "mean_ratio";
  fm.x = c.regime.z0;
  ctx.rows.push_back(fm);
  for (std::size_t j = 0; j < np; ++j) {
    const double tau = j * grid.spacing() / c.regime.eta;
    auto m = estimate_mean(mu11[j], c.batch);
    const Complex ex = expected_mu11(j);
    MetricRow mr = row("mu11", {{"tau", tau}, {"expected", ex.real()}, {"z_score", z_score(m.value, ex, m.stderr)}},
                       m.value, m.stderr, R);
    mr.p = mr.q = 1;
    mr.series = "mu11_abs";
    mr.x = tau;
    ctx.rows.push_back(mr);
    auto ps = estimate_mean(psi11[j], c.batch);
    MetricRow pr = row("psi11", {{"tau", tau}}, ps.value, ps.stderr, R);
    pr.p = pr.q = 1;
    pr.series = "psi11_abs";
    pr.x = tau;
    ctx.rows.push_back(pr);
  }
}

void run_gaussianity(Context& ctx) {
  const auto& c = ctx.cfg;
  const Grid grid = build_grid(c.grid_n, c.grid_length, c.regime.d);
  const CovarianceModel model = model_of(c);
  const SplitStepSolver solver(c.regime, model, grid, c.effective_dz());
  const WaveField initial = init_source(c.regime, grid, source_of(c));
  const auto trans = translates_for(c, grid);
  FieldSamples samples(c.n_realizations, trans.size(), 2);
  const double stops[] = {c.regime.z0};
  const auto bounds = batch_bounds(c.n_realizations, c.batch);
  for (std::size_t b = 0; b + 1 < bounds.size(); ++b) {
    run_ensemble(solver, initial, bounds[b], bounds[b + 1] - bounds[b], c.seed, ctx.threads, stops,
                 [&](std::size_t i, std::size_t, const WaveField& f) {
                   for (std::size_t t = 0; t < trans.size(); ++t) {
                     samples.at(i, t, 0) = f.values[trans[t]];
                     samples.at(i, t, 1) = f.values[displaced(grid, trans[t], c.offset_cells)];
                   }
                 });
  }
  const GaussianityReport rep = gaussianity_report(samples, c.batch);
  const std::size_t R = c.n_realizations;
  const double sep = c.offset_cells * grid.spacing();
  double point = 0.0;
  auto add = [&](std::string id, int p, int q, const MomentEstimate& e, double z) {
    MetricRow r = row(id, {{"separation", sep}, {"z_score", z}}, e.value, e.stderr, R);
    r.p = p;
    r.q = q;
    ctx.rows.push_back(r);
    MetricRow zr = row(id + "_z", {{"separation", sep}}, z, 0.0, R);
    zr.series = "z_score";
    zr.x = point++;
    ctx.rows.push_back(zr);
  };
  ctx.rows.push_back(row("mu22", {{"separation", sep}}, rep.mu22.value, rep.mu22.stderr, R));
  ctx.rows.back().p = ctx.rows.back().q = 2;
  ctx.rows.push_back(row("mu22_prediction", {{"separation", sep}}, rep.prediction, 0.0, R));
  ctx.rows.back().p = ctx.rows.back().q = 2;
  add("mu22_deviation", 2, 2, rep.deviation, rep.z_deviation);
  add("mu21", 2, 1, rep.mu21, rep.z_mu21);
  add("mu20", 2, 0, rep.mu20, rep.z_mu20);
  add("contrast", 2, 2, rep.contrast, rep.z_contrast);
}

void run_memory_tilt(Context& ctx) {
  const auto& c = ctx.cfg;
  const CovarianceModel model = model_of(c);
  TiltScan scan;
  scan.tau = {c.tau, 0.0};
  scan.z = c.regime.z0;
  scan.omega0 = c.regime.omega0;
  scan.sigma2 = model.sigma2();
  scan.d = c.regime.d;
  if (c.source_profile == "gaussian") {
    const double w = c.source_width;
    const int d = c.regime.d;
    scan.gamma_check = [w, d](const DVec& k) { return gamma_check(w, k, d) / gamma_check(w, DVec{0, 0}, d); };
  }
  const auto grid = make_tilt_grid(scan);
  const DVec u = tilt_direction(scan);
  for (double g : grid) {
    MetricRow r = row("tilt_scan", {{"dkappa", g}, {"dkappa_prime", g}, {"tau", c.tau}},
                      tilt_correlation(scan, g * u, g * u));
    r.series = "C_abs";
    r.x = g;
    ctx.rows.push_back(r);
  }
  const TiltOptimum opt = tilt_optimum(scan);
  ctx.rows.push_back(row("tilt_optimum_grid", {{"tau", c.tau}}, opt.grid_argmax));
  ctx.rows.push_back(row("tilt_optimum_refined", {{"tau", c.tau}}, opt.refined));
  ctx.rows.push_back(row("tilt_optimum_analytic", {{"tau", c.tau}}, opt.analytic));
  ctx.rows.push_back(row("tilt_optimum_ratio", {{"tau", c.tau}}, opt.value_at_optimum / opt.value_at_zero));
  ctx.rows.push_back(row("tilt_fwhm_ratio", {}, tilt_fwhm_ratio(scan)));

  if (c.monte_carlo) {
    if (c.source_profile != "plane_wave") throw ValidationError("Monte Carlo tilt scan needs a plane-wave source");
    TiltMcSetup st;
    st.regime = c.regime;
    st.model = model;
    st.n = c.grid_n;
    st.length = c.grid_length;
    st.dz = c.effective_dz();
    st.tau = c.tau;
    st.dkappa = c.mc_dkappa;
    st.dkappa_prime = c.mc_dkappa;
    st.realizations = c.n_realizations;
    st.seed = c.seed;
    st.threads = ctx.threads;
    st.batch = c.batch;
    const TiltMcResult res = tilt_mc_correlation(st);
    for (std::size_t i = 0; i < st.dkappa.size(); ++i) {
      for (std::size_t j = 0; j < st.dkappa_prime.size(); ++j) {
        const auto& e = res.estimate[i][j];
        MetricRow r = row("tilt_mc",
                          {{"dkappa", st.dkappa[i]},
                           {"dkappa_prime", st.dkappa_prime[j]},
                           {"tau", c.tau},
                           {"analytic", res.analytic[i][j]},
                           {"z_score", z_score(e.value, res.analytic[i][j], e.stderr)}},
                          e.value, e.stderr, e.n_samples);
        r.p = r.q = 1;
        if (i == j) {
          r.series = "C_mc_abs";
          r.x = st.dkappa[i];
        }
        ctx.rows.push_back(r);
      }
    }
  }
}

void run_memory_chroma(Context& ctx) {
  const auto& c = ctx.cfg;
  ChromaScan scan;
  scan.Omega = c.omega_offset;
  scan.z0 = c.regime.z0;
  scan.omega0 = c.regime.omega0;
  scan.sigma2 = model_of(c).sigma2();
  scan.d = c.regime.d;
  for (const auto& [h, v] : chroma_profile(scan)) {
    MetricRow r = row("chroma_profile", {{"h", h}, {"Omega", scan.Omega}}, v);
    r.series = "m11_abs";
    r.x = h;
    ctx.rows.push_back(r);
  }
  if (scan.Omega != 0.0) {
    const ChromaOptimum opt = chroma_optimum(scan);
    ctx.rows.push_back(row("h_opt", {{"Omega", scan.Omega}, {"alpha_z", opt.alpha_z}}, opt.h_formula));
    ctx.rows.push_back(row("h_opt_grid", {{"Omega", scan.Omega}, {"cell", opt.cell}}, opt.grid_argmax));
    ctx.rows.push_back(row("h_opt_refined", {{"Omega", scan.Omega}}, opt.refined));
    ctx.rows.push_back(row("h_opt_small_alpha", {{"Omega", scan.Omega}}, opt.small_alpha));
    const ChromaImprovement imp = chroma_improvement(scan);
    ctx.rows.push_back(row("improvement_ratio", {{"Omega", scan.Omega}}, imp.ratio));
    ctx.rows.push_back(row("improvement_display_factor", {{"Omega", scan.Omega}}, imp.display_factor));
    ctx.rows.push_back(row("improvement_stated_factor", {{"Omega", scan.Omega}}, imp.stated_factor));
  }
}

void run_jump_check(Context& ctx) {
  const auto& c = ctx.cfg;
  const CovarianceModel model = model_of(c);
  for (double eta : c.etas) {
    const JumpProcessParams params = make_jump_params(model, eta, c.regime.omega0);
    const BrownianLimitReport rep = brownian_limit_check(params, c.regime.z0, c.n_paths, c.seed, ctx.threads, c.batch);
    auto add = [&](std::string id, const MomentEstimate& e, double expected) {
      MetricRow r = row(id, {{"eta", eta}, {"z", c.regime.z0}, {"expected", expected}}, e.value, e.stderr, e.n_samples);
      r.series = id;
      r.x = eta;
      ctx.rows.push_back(r);
    };
    add("variance", rep.variance[0], rep.expected_variance);
    add("excess_kurtosis", rep.excess_kurtosis, rep.expected_excess_kurtosis);
    add("fourth_cumulant", rep.fourth_cumulant, rep.expected_fourth_cumulant);
    add("jump_count", rep.jump_count, rep.expected_jump_count);
  }
}

void run_validate(Context& ctx) {
  const CovarianceReport rep = validate(model_of(ctx.cfg));
  double idx = 0;
  for (const auto& chk : rep.checks) {
    MetricRow r = row("covariance." + chk.name, {{"passed", chk.passed ? 1.0 : 0.0}, {"expected", chk.expected}},
                      chk.measured);
    r.series = "check";
    r.x = idx++;
    ctx.rows.push_back(r);
  }
  if (!rep.all_passed()) ctx.warnings.push_back("covariance validation reported failures");
}

std::string iso_time() {
  const std::time_t t = std::time(nullptr);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
  return buf;
}

}  // namespace

ResultRecord run(const ExperimentConfig& config, const RunOptions& options) {
  validate_config(config);
  const auto start = std::chrono::steady_clock::now();
  Context ctx{config, std::max(1u, options.threads), {}, config.regime.warnings(), {}};
  const std::filesystem::path out_dir = options.out_dir.empty() ? std::filesystem::path(config.output_path)
                                                                : options.out_dir;
  std::filesystem::create_directories(out_dir);
  const std::filesystem::path data = out_dir / (config.kind + "." + config.format);
  const std::filesystem::path partial = out_dir / (config.kind + ".partial.ndjson");
  const bool streams = config.kind == "simulate" || config.kind == "moments";
  if (streams && config.format == "ndjson") ctx.progress.open(partial, std::ios::trunc);

  if (config.kind == "simulate") {
    run_simulate_or_moments(ctx, false);
  } else if (config.kind == "moments") {
    run_simulate_or_moments(ctx, true);
  } else if (config.kind == "gaussianity") {
    run_gaussianity(ctx);
  } else if (config.kind == "memory-tilt") {
    run_memory_tilt(ctx);
  } else if (config.kind == "memory-chroma") {
    run_memory_chroma(ctx);
  } else if (config.kind == "jump-check") {
    run_jump_check(ctx);
  } else {
    run_validate(ctx);
  }

  std::string body;
  if (config.format == "csv") {
    body = format_csv(ctx.rows);
  } else {
    for (const auto& r : ctx.rows) body += format_ndjson_line(r) + "\n";
  }
  write_atomic(data, body);
  if (ctx.progress.is_open()) {
    ctx.progress.close();
    std::filesystem::remove(partial);
  }

  ResultRecord rec;
  rec.experiment = config.kind;
  rec.config_hash = config_hash(config);
  rec.seed = config.seed;
  rec.rows = std::move(ctx.rows);
  rec.warnings = std::move(ctx.warnings);
  rec.wall_clock_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  rec.data_file = data;
  rec.meta_file = out_dir / (config.kind + ".run.json");

  nlohmann::ordered_json meta;
  meta["experiment"] = rec.experiment;
  meta["config_hash"] = rec.config_hash;
  meta["seed"] = rec.seed;
  meta["threads"] = ctx.threads;
  meta["rows"] = rec.rows.size();
  meta["data_file"] = data.filename().string();
  meta["warnings"] = rec.warnings;
  meta["wall_clock_seconds"] = rec.wall_clock_seconds;
  meta["timestamp"] = iso_time();
  meta["config"] = emit_config(config);
  write_atomic(rec.meta_file, meta.dump(2) + "\n");
  return rec;
}

}  // namespace speckle
