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
#include <functional>
#include <random>
#include <span>
#include <vector>

#include "speckle/core.hpp"
#include "speckle/covariance.hpp"
#include "speckle/fft.hpp"
#include "speckle/rng.hpp"

namespace speckle {

struct SourceSpec {
  enum class Profile { plane_wave, gaussian };
  Profile profile = Profile::plane_wave;
  /// Envelope width w of u0(y) = exp(-|y|^2 / (2 w^2)), in macroscopic units.
  double width = 1.0;
  /// Physical transverse wavevector k of the carrier exp(i k.x).
  DVec tilt{0.0, 0.0};
};

/// u(0, x) = u0(eps x) exp(i k.x). Throws when |k| reaches the grid Nyquist.
WaveField init_source(const ScalingRegime& regime, const Grid& grid, const SourceSpec& spec);

/// Real increment dB over one axial slab of thickness dz.
struct PhaseScreen {
  std::vector<double> values;
  double dz = 0.0;
};

/// Spectral synthesis of periodic screens with covariance dz * R (periodized).
/// One inverse FFT of circular complex white noise yields two independent
/// screens (real and imaginary parts).
class ScreenSynthesizer {
 public:
  ScreenSynthesizer(const CovarianceModel& model, const Grid& grid, double dz);

  const Grid& grid() const { return grid_; }
  double dz() const { return dz_; }

  /// Both screens of one noise draw.
  void generate_pair(std::mt19937_64& rng, std::vector<double>& first, std::vector<double>& second) const;
  PhaseScreen generate(std::mt19937_64& rng) const;

 private:
  Grid grid_;
  double dz_;
  std::vector<double> amplitude_;
  FftPlan plan_;
};

PhaseScreen make_screen(const CovarianceModel& model, const Grid& grid, double dz, std::mt19937_64& rng);

/// Largest dz satisfying both resolution guards: a half diffraction step
/// eta (dz/2) xi_max^2 / (2 eps omega) < 1 and screen variance
/// omega^2 R(0) dz / (4 eta^2) < 1.
double max_stable_dz(const ScalingRegime& regime, const CovarianceModel& model, const Grid& grid);

using StepObserver = std::function<void(const WaveField&)>;

/// Strang split-step integrator for
///   du = (i eta / (2 eps omega)) Lap u dz - omega^2 R(0) / (8 eta^2) u dz + (i omega / (2 eta)) u dB.
/// The phase screen exp(i omega dB / (2 eta)) is unitary; its mean carries
/// the Ito damping, so no separate damping factor is applied.
/// Step k (counted from z = 0) uses noise from NoiseStream::engine(k / 2):
/// even steps take the real screen of the draw, odd steps the imaginary one.
class SplitStepSolver {
 public:
  SplitStepSolver(const ScalingRegime& regime, const CovarianceModel& model, const Grid& grid, double dz);

  double dz() const { return dz_; }
  const Grid& grid() const { return grid_; }
  const ScalingRegime& regime() const { return regime_; }
  const CovarianceModel& model() const { return model_; }

  /// One full Strang step.
  void step(WaveField& field, const NoiseStream& noise) const;

  /// Advances to z_target. Consecutive half diffractions are fused unless an
  /// observer is given, in which case it sees the field after every step.
  void propagate(WaveField& field, double z_target, const NoiseStream& noise,
                 const StepObserver& observer = {}) const;

  /// Advances several fields through the same medium realization.
  void propagate_shared(std::span<WaveField> fields, double z_target, const NoiseStream& noise) const;

  /// Applies the noiseless propagator exp(i eta dz Lap / (2 eps omega)).
  void free_propagate(WaveField& field, double dz) const;

 private:
  struct Plan;
  Plan make_plan(const WaveField& field, double z_target) const;
  void screen_for_step(std::uint64_t step, const NoiseStream& noise, std::vector<double>& screen,
                       std::vector<double>& spare, std::int64_t& cached_draw) const;

  ScalingRegime regime_;
  CovarianceModel model_;
  Grid grid_;
  double dz_;
  ScreenSynthesizer screens_;
  FftPlan plan_;
};

/// Called once per (realization, stop) with the field at z_stops[stop].
/// Realizations run concurrently; the sink must only write state owned by
/// its realization index.
using EnsembleSink = std::function<void(std::size_t realization, std::size_t stop, const WaveField& field)>;

/// Propagates copies of `initial` for realizations [first, first + count) with
/// streams NoiseStream{seed, i}, reporting each ascending stop in z_stops.
void run_ensemble(const SplitStepSolver& solver, const WaveField& initial, std::size_t first, std::size_t count,
                  std::uint64_t seed, unsigned threads, std::span<const double> z_stops,
                  const EnsembleSink& sink);

/// Fourier-side field with the free phase and the mean damping removed:
/// psi_hat(xi) = u_hat(xi) exp(i eta z |xi|^2 / (2 eps omega)) exp(omega^2 R(0) z / (8 eta^2)).
/// Its ensemble mean is constant in z.
struct CompensatedField {
  std::vector<Complex> values;
  double z = 0.0;
  double omega = 1.0;
  DVec k{0.0, 0.0};
  Grid grid;
};

/// Throws NumericalGuardError when omega^2 R(0) z / (8 eta^2) > 700.
CompensatedField phase_compensate(const WaveField& field, const ScalingRegime& regime,
                                  const CovarianceModel& model);

/// Evaluates the trigonometric interpolant of `field` at physical position x.
Complex sample_at(const WaveField& field, const DVec& x);

/// Returns the field translated so that out(x) = field(x + shift), by spectral phase.
WaveField spectral_shift(const WaveField& field, const DVec& shift);

}  // namespace speckle
