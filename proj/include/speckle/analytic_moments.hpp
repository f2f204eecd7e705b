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

#include <span>
#include <vector>

#include "speckle/core.hpp"
#include "speckle/covariance.hpp"
#include "speckle/simulator.hpp"

namespace speckle {

/// Coefficients of the quadratic ansatz
///   breve-M(z, zeta, tau) = Gamma(zeta - kappa) exp(-[a + b|tau|^2 + c tau.zeta + d |zeta|^2]).
struct ABCDState {
  double z = 0.0;
  Complex a{}, b{}, c{}, d{};
};

/// Classical RK4 on
///   a' = i W b / w^2,           b' = -2 i W b^2 / w^2 + w^2 s2 / 8,
///   c' = -2 i W b c / w^2 + w s2 z / 4,  d' = -i W c^2 / (2 w^2) + s2 z^2 / 8,
/// with W = Omega, w = omega0, s2 = sigma2, from zero initial data. Returns the
/// trajectory including both endpoints; the last step is shortened to land on z.
/// Throws NumericalGuardError if |b| grows past 1e12.
std::vector<ABCDState> solve_abcd(double z, double Omega, double omega0, double sigma2, double dz_ode);

/// Final state of solve_abcd.
ABCDState abcd_at(double z, double Omega, double omega0, double sigma2, double dz_ode = 1e-3);

struct ClosedAB {
  Complex a{}, b{}, alpha{};
};

/// a = (1/2) log cosh(alpha z), b = (omega0^2 sigma2 / (8 alpha)) tanh(alpha z),
/// alpha = e^{i pi/4} sqrt(sigma2 Omega / 4). log cosh is evaluated as
/// w - log 2 + log(1 + e^{-2w}) with Re w >= 0, which is the branch continuous
/// from w = 0 along the ray. Omega < 0 uses a(-W) = conj a(W).
ClosedAB closed_ab(double z, double Omega, double omega0, double sigma2);

/// frak_b = b_R + i (b_I - omega0 / (2h)).
Complex frak_b(Complex b, double h, double omega0);

/// Plane-wave two-point function at axial offset h, lateral offset tau and
/// frequency offset Omega. h = 0 is the delta-kernel branch e^{-a - b|tau|^2}.
Complex m11_planewave(double h, const DVec& tau, double Omega, double z0, double omega0, double sigma2, int d);

/// Multiplies a spectrum on `grid` (FFT order) by exp(-i h |xi|^2 / (2 omega0))
/// and returns the inverse transform.
std::vector<Complex> fresnel_apply(std::span<const Complex> spectrum, const Grid& grid, double h, double omega0);

/// exp(-(omega0^2 sigma2 z / 8) [|tau|^2 + z (xi.tau) / omega0 + z^2 |xi|^2 / (3 omega0^2)]).
double diffusion_kernel(double z, const DVec& tau, const DVec& xi, double omega0, double sigma2);

/// Gamma(k) = integral |u0(y)|^2 e^{-i k.y} dy for a gaussian envelope,
/// (pi w^2)^{d/2} exp(-w^2 |k|^2 / 4).
double gamma_check(double width, const DVec& k, int d);

/// Inputs for the M11 solvers.
struct M11Problem {
  double z = 1.0;
  double Omega = 0.0;
  DVec kappa{0.0, 0.0};
  SourceSpec source;
  double omega0 = 1.0;
  double sigma2 = 1.0;
  int d = 1;
};

/// Nodes of the zeta integral, shared by all M11 solvers so that their
/// comparison isolates the z-integration. A plane wave has the single node
/// zeta = kappa with unit weight.
struct ZetaQuadrature {
  std::vector<double> nodes;
  double weight = 1.0;  // includes the 1/(2 pi) factor
  bool plane_wave = false;
};

/// Trapezoid nodes over kappa +- 12/w (gaussian) with `count` points.
ZetaQuadrature make_zeta_quadrature(const M11Problem& problem, std::size_t count = 161);

/// M11(z, r, tau) from the ABCD solution and the tau -> tau - zeta z / omega0 shift. d = 1 only
/// for gaussian sources; plane waves work for d = 1, 2.
class M11Abcd {
 public:
  explicit M11Abcd(const M11Problem& problem, double dz_ode = 1e-3);
  M11Abcd(const M11Problem& problem, ZetaQuadrature zeta, double dz_ode = 1e-3);

  Complex operator()(const DVec& r, const DVec& tau) const;
  const ABCDState& state() const { return state_; }

 private:
  M11Problem problem_;
  ZetaQuadrature zeta_;
  ABCDState state_;
};

Complex M11_general(const M11Problem& problem, const DVec& r, const DVec& tau, double dz_ode = 1e-3);

enum class ExplicitMode { finite, diffusive };

/// Equal-z moment at Omega = 0, evaluated by quadrature:
///   integral of u0(r' + v/2) conj u0(r' - v/2) e^{i xi (r - r')} e^{i kappa r'}
///   exp((omega0^2 z / (4 eta^2)) int_0^1 Q(eta tau - s eta xi z / omega0) ds) dxi dr' / (2 pi)^d
/// with v = eps eta (tau - xi z / omega0). `finite` uses Q of the medium and
/// the regime's eps, eta; `diffusive` replaces Q by its quadratic part and
/// drops v. The s-integral uses 32-point Gauss-Legendre. d = 1 only for
/// gaussian sources. Throws NumericalGuardError if halving the xi resolution
/// changes the result by more than 1e-9 of its scale.
Complex M11_omega0_explicit(double z, const DVec& r, const DVec& tau, const DVec& kappa,
                            const SourceSpec& source, const CovarianceModel& model,
                            const ScalingRegime& regime, ExplicitMode mode,
                            const ZetaQuadrature* zeta = nullptr);

/// (omega0^2 z / (4 eta^2)) * int_0^1 Q(eta tau - s eta xi z / omega0) ds by Gauss-Legendre.
double explicit_exponent(double z, const DVec& tau, const DVec& xi, const CovarianceModel& model,
                         double eta, double omega0, std::size_t nodes = 32);

struct PdeOptions {
  double tau_length = 64.0;
  std::size_t n_tau = 1024;
  double dz = 1e-3;
};

/// Direct solution of
///   dM/dz = (i Omega / (2 omega0^2)) Lap_tau M + (i / omega0) grad_r . grad_tau M - (omega0^2 sigma2 / 8) |tau|^2 M
/// after transforming r -> zeta; each zeta mode is advanced by Strang
/// splitting in tau (Fourier multiplier for the derivative terms, pointwise
/// exponential for the potential). d = 1 only.
class M11PdeSolution {
 public:
  M11PdeSolution(const M11Problem& problem, const PdeOptions& options, ZetaQuadrature zeta);

  /// Band-limited interpolation in tau, quadrature in zeta.
  Complex operator()(const DVec& r, const DVec& tau) const;

 private:
  M11Problem problem_;
  ZetaQuadrature zeta_;
  Grid tau_grid_;
  std::vector<std::vector<Complex>> spectra_;  // per zeta node, FFT of M in tau
};

/// Throws NumericalGuardError if dz |Omega| theta_max^2 / (2 omega0^2) > pi.
M11PdeSolution M11_pde_solve(const M11Problem& problem, const PdeOptions& options = {});

struct FresnelOptions {
  double tau_length = 64.0;
  std::size_t n_tau = 1024;
};

/// Limiting two-point function: the Fresnel transform in tau of M11(z0, r, .)
/// with parameter h (ABCD solver). h = 0 returns M11 itself.
Complex m11(double h, const DVec& tau, const M11Problem& problem, const DVec& r,
            const FresnelOptions& options = {});

}  // namespace speckle
