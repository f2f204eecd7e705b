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

#include "speckle/simulator.hpp"

#include "speckle/parallel.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

namespace speckle {

namespace {

constexpr double kPi = std::numbers::pi;

// Multiplier tables for the diffraction operator keyed by step length.
class DiffractionCache {
 public:
  DiffractionCache(const Grid& grid, double coeff) : grid_(grid), coeff_(coeff) {}

  // exp(-i coeff * amount * |xi|^2)
  const std::vector<Complex>& table(double amount) {
    for (auto& [a, t] : tables_)
      if (a == amount) return t;
    std::vector<Complex> t(grid_.size());
    for (std::size_t j = 0; j < t.size(); ++j) {
      t[j] = std::polar(1.0, -coeff_ * amount * norm2(grid_.wavevector(j)));
    }
    tables_.emplace_back(amount, std::move(t));
    return tables_.back().second;
  }

 private:
  Grid grid_;
  double coeff_;
  std::vector<std::pair<double, std::vector<Complex>>> tables_;
};

void apply_multiplier(std::span<Complex> values, const std::vector<Complex>& m) {
  for (std::size_t j = 0; j < values.size(); ++j) values[j] *= m[j];
}

void apply_screen(std::span<Complex> values, const std::vector<double>& screen, double phase_scale) {
  for (std::size_t j = 0; j < values.size(); ++j) values[j] *= std::polar(1.0, phase_scale * screen[j]);
}

}  // namespace

WaveField init_source(const ScalingRegime& regime, const Grid& grid, const SourceSpec& spec) {
  regime.validate();
  if (grid.dim() != regime.d) throw ValidationError("grid dimension does not match regime.d");
  const double kn = std::sqrt(norm2(spec.tilt));
  for (int i = 0; i < 2; ++i) {
    if (std::fabs(spec.tilt[i]) >= grid.nyquist()) {
      std::ostringstream s;
      s << "source tilt " << kn << " exceeds the grid Nyquist wavenumber " << grid.nyquist();
      throw ValidationError(s.str());
    }
  }
  if (regime.d == 1 && spec.tilt[1] != 0.0) throw ValidationError("tilt[1] must be 0 when d = 1");
  if (spec.profile == SourceSpec::Profile::gaussian && !(spec.width > 0.0)) {
    throw ValidationError("gaussian source width must be > 0");
  }
  WaveField f;
  f.grid = grid;
  f.z = 0.0;
  f.omega = regime.omega0;
  f.k = spec.tilt;
  f.values.resize(grid.size());
  const double inv2w2 = 1.0 / (2.0 * spec.width * spec.width);
  for (std::size_t j = 0; j < f.values.size(); ++j) {
    const DVec x = grid.position(j);
    double env = 1.0;
    if (spec.profile == SourceSpec::Profile::gaussian) {
      env = std::exp(-regime.epsilon * regime.epsilon * norm2(x) * inv2w2);
    }
    f.values[j] = std::polar(env, dot(spec.tilt, x));
  }
  return f;
}

ScreenSynthesizer::ScreenSynthesizer(const CovarianceModel& model, const Grid& grid, double dz)
    : grid_(grid), dz_(dz), plan_(grid.n(), grid.dim()) {
  if (!(dz >= 0.0)) throw ValidationError("screen dz must be >= 0");
  if (model.dim() != grid.dim()) throw ValidationError("medium dimension does not match grid");
  amplitude_.resize(grid.size());
  // Each of Re, Im of the spectral noise has variance N; the inverse FFT
  // divides by N, giving covariance dz * sum_xi Rhat(xi) e^{i xi x} / L^d.
  const double N = static_cast<double>(grid.size());
  for (std::size_t j = 0; j < amplitude_.size(); ++j) {
    const double rh = model.Rhat(grid.wavevector(j));
    amplitude_[j] = std::sqrt(std::max(rh, 0.0) * dz * N / grid.cell_measure());
  }
}

void ScreenSynthesizer::generate_pair(std::mt19937_64& rng, std::vector<double>& first,
                                      std::vector<double>& second) const {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<Complex> buf(amplitude_.size());
  for (std::size_t j = 0; j < buf.size(); ++j) {
    const double re = normal(rng);
    const double im = normal(rng);
    buf[j] = Complex(amplitude_[j] * re, amplitude_[j] * im);
  }
  plan_.inverse(buf);
  first.resize(buf.size());
  second.resize(buf.size());
  for (std::size_t j = 0; j < buf.size(); ++j) {
    first[j] = buf[j].real();
    second[j] = buf[j].imag();
  }
}

PhaseScreen ScreenSynthesizer::generate(std::mt19937_64& rng) const {
  PhaseScreen s;
  s.dz = dz_;
  std::vector<double> unused;
  generate_pair(rng, s.values, unused);
  return s;
}

PhaseScreen make_screen(const CovarianceModel& model, const Grid& grid, double dz, std::mt19937_64& rng) {
  return ScreenSynthesizer(model, grid, dz).generate(rng);
}

double max_stable_dz(const ScalingRegime& regime, const CovarianceModel& model, const Grid& grid) {
  const double xi2 = grid.dim() * grid.nyquist() * grid.nyquist();
  const double diffraction = 4.0 * regime.epsilon * regime.omega0 / (regime.eta * xi2);
  const double r0 = model.r0();
  const double screen = r0 > 0.0 ? 4.0 * regime.eta * regime.eta / (regime.omega0 * regime.omega0 * r0)
                                 : INFINITY;
  return std::min(diffraction, screen);
}

struct SplitStepSolver::Plan {
  std::uint64_t first_step = 0;
  std::size_t full_steps = 0;
  double remainder = 0.0;
};

SplitStepSolver::SplitStepSolver(const ScalingRegime& regime, const CovarianceModel& model,
                                 const Grid& grid, double dz)
    : regime_(regime), model_(model), grid_(grid), dz_(dz), screens_(model, grid, dz),
      plan_(grid.n(), grid.dim()) {
  regime_.validate();
  if (grid.dim() != regime.d) throw ValidationError("grid dimension does not match regime.d");
  if (!(dz > 0.0)) throw ValidationError("dz must be > 0");
  const double dz_max = max_stable_dz(regime, model, grid);
  if (dz >= dz_max) {
    std::ostringstream s;
    s << "dz=" << dz << " violates the step bound dz < " << dz_max;
    throw ValidationError(s.str());
  }
}

SplitStepSolver::Plan SplitStepSolver::make_plan(const WaveField& field, double z_target) const {
  if (z_target < field.z) throw ValidationError("z_target is behind the field position");
  if (!(field.grid == grid_)) throw ValidationError("field grid does not match solver grid");
  Plan p;
  p.first_step = static_cast<std::uint64_t>(std::llround(field.z / dz_));
  const double total = z_target - field.z;
  const double tol = 1e-9 * std::max(1.0, std::fabs(z_target));
  p.full_steps = static_cast<std::size_t>(std::floor((total + tol) / dz_));
  p.remainder = total - static_cast<double>(p.full_steps) * dz_;
  if (p.remainder <= tol) p.remainder = 0.0;
  return p;
}

void SplitStepSolver::screen_for_step(std::uint64_t step, const NoiseStream& noise, std::vector<double>& screen,
                                      std::vector<double>& spare, std::int64_t& cached_draw) const {
  const auto draw = static_cast<std::int64_t>(step / 2);
  if (draw != cached_draw) {
    auto rng = noise.engine(static_cast<std::uint64_t>(draw));
    screens_.generate_pair(rng, screen, spare);
    cached_draw = draw;
    if (step % 2 == 1) std::swap(screen, spare);
    return;
  }
  // The pair for this draw is cached; the odd step takes the second screen.
  if (step % 2 == 1) std::swap(screen, spare);
}

void SplitStepSolver::step(WaveField& field, const NoiseStream& noise) const {
  propagate(field, field.z + dz_, noise);
}

void SplitStepSolver::propagate(WaveField& field, double z_target, const NoiseStream& noise,
                                const StepObserver& observer) const {
  if (!observer) {
    propagate_shared(std::span<WaveField>(&field, 1), z_target, noise);
    return;
  }
  const Plan plan = make_plan(field, z_target);
  const std::size_t steps = plan.full_steps + (plan.remainder > 0.0 ? 1 : 0);
  for (std::size_t s = 0; s < steps; ++s) {
    const double target = (s < plan.full_steps) ? field.z + dz_ : z_target;
    propagate_shared(std::span<WaveField>(&field, 1), target, noise);
    observer(field);
  }
}

void SplitStepSolver::propagate_shared(std::span<WaveField> fields, double z_target,
                                       const NoiseStream& noise) const {
  if (fields.empty()) return;
  const Plan plan = make_plan(fields[0], z_target);
  for (const auto& f : fields) {
    if (f.z != fields[0].z) throw ValidationError("shared propagation needs fields at equal z");
    if (!(f.grid == grid_)) throw ValidationError("field grid does not match solver grid");
  }
  const std::size_t steps = plan.full_steps + (plan.remainder > 0.0 ? 1 : 0);
  if (steps == 0) {
    for (auto& f : fields) f.z = z_target;
    return;
  }

  // Phase of a full-length step, per field frequency.
  std::vector<DiffractionCache> caches;
  caches.reserve(fields.size());
  for (const auto& f : fields) {
    caches.emplace_back(grid_, regime_.eta / (2.0 * regime_.epsilon * f.omega));
  }

  std::vector<double> screen, spare;
  std::int64_t cached_draw = -1;
  auto step_length = [&](std::size_t s) { return s < plan.full_steps ? dz_ : plan.remainder; };

  for (std::size_t fi = 0; fi < fields.size(); ++fi) {
    auto& v = fields[fi].values;
    plan_.forward(v);
    apply_multiplier(v, caches[fi].table(0.5 * step_length(0)));
    plan_.inverse(v);
  }
  for (std::size_t s = 0; s < steps; ++s) {
    const double h = step_length(s);
    screen_for_step(plan.first_step + s, noise, screen, spare, cached_draw);
    const double scale = (h == dz_) ? 1.0 : std::sqrt(h / dz_);
    const double next = (s + 1 < steps) ? 0.5 * (h + step_length(s + 1)) : 0.5 * h;
    for (std::size_t fi = 0; fi < fields.size(); ++fi) {
      auto& f = fields[fi];
      apply_screen(f.values, screen, scale * f.omega / (2.0 * regime_.eta));
      plan_.forward(f.values);
      apply_multiplier(f.values, caches[fi].table(next));
      plan_.inverse(f.values);
    }
    // The swap in screen_for_step must be undone so the cached pair keeps its order.
    if ((plan.first_step + s) % 2 == 1) std::swap(screen, spare);
  }
  for (auto& f : fields) f.z = z_target;
}

void SplitStepSolver::free_propagate(WaveField& field, double dz) const {
  if (!(field.grid == grid_)) throw ValidationError("field grid does not match solver grid");
  DiffractionCache cache(grid_, regime_.eta / (2.0 * regime_.epsilon * field.omega));
  plan_.forward(field.values);
  apply_multiplier(field.values, cache.table(dz));
  plan_.inverse(field.values);
  field.z += dz;
}

void run_ensemble(const SplitStepSolver& solver, const WaveField& initial, std::size_t first, std::size_t count,
                  std::uint64_t seed, unsigned threads, std::span<const double> z_stops,
                  const EnsembleSink& sink) {
  for (std::size_t s = 1; s < z_stops.size(); ++s) {
    if (z_stops[s] < z_stops[s - 1]) throw ValidationError("ensemble stops must be ascending");
  }
  parallel_for(count, threads, [&](std::size_t k) {
    const std::size_t i = first + k;
    WaveField f = initial;
    const NoiseStream noise{seed, i};
    for (std::size_t s = 0; s < z_stops.size(); ++s) {
      solver.propagate(f, z_stops[s], noise);
      sink(i, s, f);
    }
  });
}

CompensatedField phase_compensate(const WaveField& field, const ScalingRegime& regime,
                                  const CovarianceModel& model) {
  const double expo = field.omega * field.omega * model.r0() * field.z / (8.0 * regime.eta * regime.eta);
  if (expo > 700.0) {
    std::ostringstream s;
    s << "phase compensation exponent " << expo << " exceeds 700";
    throw NumericalGuardError(s.str());
  }
  CompensatedField out;
  out.z = field.z;
  out.omega = field.omega;
  out.k = field.k;
  out.grid = field.grid;
  out.values = field.values;
  FftPlan plan(field.grid.n(), field.grid.dim());
  plan.forward(out.values);
  const double damp = std::exp(expo);
  const double coeff = regime.eta * field.z / (2.0 * regime.epsilon * field.omega);
  for (std::size_t j = 0; j < out.values.size(); ++j) {
    out.values[j] *= std::polar(damp, coeff * norm2(field.grid.wavevector(j)));
  }
  return out;
}

namespace {

// Spectral phase for a shift s along one axis; the Nyquist mode uses cos so
// that real fields stay real.
Complex axis_phase(const Grid& g, std::size_t j, double s) {
  const double xi = g.wavenumber(j);
  if (j == g.n() / 2) return Complex(std::cos(xi * s), 0.0);
  return std::polar(1.0, xi * s);
}

}  // namespace

WaveField spectral_shift(const WaveField& field, const DVec& shift) {
  const Grid& g = field.grid;
  WaveField out = field;
  FftPlan plan(g.n(), g.dim());
  plan.forward(out.values);
  const std::size_t n = g.n();
  if (g.dim() == 1) {
    for (std::size_t j = 0; j < n; ++j) out.values[j] *= axis_phase(g, j, shift[0]);
  } else {
    for (std::size_t i = 0; i < n; ++i) {
      const Complex pi = axis_phase(g, i, shift[0]);
      for (std::size_t j = 0; j < n; ++j) out.values[i * n + j] *= pi * axis_phase(g, j, shift[1]);
    }
  }
  plan.inverse(out.values);
  return out;
}

Complex sample_at(const WaveField& field, const DVec& x) {
  const Grid& g = field.grid;
  const DVec origin{g.coordinate(0), g.dim() == 2 ? g.coordinate(0) : 0.0};
  const DVec rel = x - origin;
  std::vector<Complex> spec = field.values;
  FftPlan plan(g.n(), g.dim());
  plan.forward(spec);
  Complex acc = 0.0;
  const std::size_t n = g.n();
  if (g.dim() == 1) {
    for (std::size_t j = 0; j < n; ++j) acc += spec[j] * axis_phase(g, j, rel[0]);
  } else {
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        acc += spec[i * n + j] * axis_phase(g, i, rel[0]) * axis_phase(g, j, rel[1]);
  }
  return acc / static_cast<double>(g.size());
}

}  // namespace speckle
