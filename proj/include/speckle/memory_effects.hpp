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
#include <utility>
#include <vector>

#include "speckle/core.hpp"
#include "speckle/covariance.hpp"
#include "speckle/statistics.hpp"

namespace speckle {

/// Tilt memory scan. Tilt offsets are scalars along the unit vector of tau
/// (the x axis when tau = 0).
struct TiltScan {
  DVec tau{0.0, 0.0};
  std::vector<double> dkappa_grid;
  std::vector<double> dkappa_prime_grid;
  double z = 1.0;
  double omega0 = 1.0;
  double sigma2 = 1.0;
  int d = 1;
  /// Gamma(k, 0), the source envelope spectrum; defaults to 1 at every k.
  std::function<double(const DVec&)> gamma_check;
};

/// -3 omega0 tau / (2 z): the analytic optimum of the tilt correlation.
DVec tilt_analytic_optimum(const TiltScan& scan);

/// 41 points spanning +-2 |analytic optimum| (or +-1 when tau = 0).
std::vector<double> make_tilt_grid(const TiltScan& scan, std::size_t points = 41);

/// Unit direction used for scalar tilt offsets.
DVec tilt_direction(const TiltScan& scan);

/// C = D(z, tau, dkappa) Gamma(dkappa - dkappa').
Complex tilt_correlation(const TiltScan& scan, const DVec& dkappa, const DVec& dkappa_prime);

struct TiltOptimum {
  double grid_argmax = 0.0;   // scalar along tilt_direction
  double refined = 0.0;       // golden-section refinement around the grid winner
  double analytic = 0.0;
  double cell = 0.0;          // grid spacing
  double value_at_optimum = 0.0;
  double value_at_zero = 0.0;
};

/// Argmax of |C| along dkappa = dkappa'. Throws ValidationError when the grid
/// winner sits on the grid boundary.
TiltOptimum tilt_optimum(const TiltScan& scan);

/// Ratio of the tau-FWHM of |C| with the per-tau optimal tilt to that with no tilt.
double tilt_fwhm_ratio(const TiltScan& scan);

struct TiltMcSetup {
  ScalingRegime regime;
  CovarianceModel model = CovarianceModel::gaussian(1.0, 1.0, 1);
  std::size_t n = 1024;
  double length = 0.0;  // physical cell length
  double dz = 0.01;
  double tau = 0.0;     // macroscopic separation; fields are compared eta*tau apart
  std::vector<double> dkappa;
  std::vector<double> dkappa_prime;
  std::size_t realizations = 100;
  std::uint64_t seed = 1;
  unsigned threads = 1;
  std::size_t batch = 50;
};

struct TiltMcResult {
  std::vector<std::vector<MomentEstimate>> estimate;        // [dkappa][dkappa']
  std::vector<std::vector<double>> analytic;                // limiting value, per unit cell
  std::vector<std::vector<double>> analytic_finite_eta;     // same with the medium's full Q
};

/// Monte Carlo tilt correlation, d = 1, plane-wave sources with tilts
/// +-eps dkappa'/2 propagated through one shared medium per realization:
///   C = (1/L) sum_X u1(X - eta tau/2) conj(u2(X + eta tau/2)) e^{-i eps dkappa X} dx.
/// Per unit cell, Gamma(dkappa - dkappa') is the Kronecker delta. All tilts
/// must be multiples of the grid's dual spacing.
TiltMcResult tilt_mc_correlation(const TiltMcSetup& setup);

struct ChromaScan {
  double Omega = 0.0;
  std::vector<double> h_grid;
  double z0 = 1.0;
  double omega0 = 1.0;
  double sigma2 = 1.0;
  int d = 1;
};

/// h_opt = b_I omega0 / (2 (b_R^2 + b_I^2)) from the closed-form b(z0).
double chroma_h_opt(const ChromaScan& scan);

/// 41 points spanning +-2 |h_opt| (or +-1 when h_opt = 0).
std::vector<double> make_chroma_grid(const ChromaScan& scan, std::size_t points = 41);

/// (h, |m11(h, 0; Omega)|) over the grid.
std::vector<std::pair<double, double>> chroma_profile(const ChromaScan& scan);

struct ChromaOptimum {
  double h_formula = 0.0;
  double grid_argmax = 0.0;
  double refined = 0.0;
  double cell = 0.0;
  double small_alpha = 0.0;  // -z0 Omega / (3 omega0)
  double alpha_z = 0.0;      // |alpha z0|
};

ChromaOptimum chroma_optimum(const ChromaScan& scan);

struct ChromaImprovement {
  double ratio = 1.0;           // |m11(h_opt, 0)| / |m11(0, 0)|
  double display_factor = 1.0;  // (1 + b_I^2 / b_R^2)^{d/4}
  double stated_factor = 1.0;   // 1 + b_I^2 / b_R^2
};

ChromaImprovement chroma_improvement(const ChromaScan& scan);

/// Golden-section maximizer of f on [lo, hi].
double golden_maximize(const std::function<double(double)>& f, double lo, double hi, double tol = 1e-12);

}  // namespace speckle
