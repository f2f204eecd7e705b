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

#include "speckle/analytic_moments.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

#include "speckle/fft.hpp"
#include "speckle/quadrature.hpp"

namespace speckle {

namespace {

constexpr double kPi = std::numbers::pi;
const Complex kI(0.0, 1.0);

struct AbcdRhs {
  double Omega, w2, w, s2;

  std::array<Complex, 4> operator()(double z, const std::array<Complex, 4>& y) const {
    const Complex b = y[1], c = y[2];
    return {kI * Omega * b / w2, -2.0 * kI * Omega * b * b / w2 + w2 * s2 / 8.0,
            -2.0 * kI * Omega * b * c / w2 + w * s2 * z / 4.0, -kI * Omega * c * c / (2.0 * w2) + s2 * z * z / 8.0};
  }
};

std::array<Complex, 4> axpy(const std::array<Complex, 4>& y, double h, const std::array<Complex, 4>& k) {
  return {y[0] + h * k[0], y[1] + h * k[1], y[2] + h * k[2], y[3] + h * k[3]};
}

// tanh(w)/w, accurate near w = 0.
Complex tanh_over(Complex w) {
  if (std::abs(w) < 1e-4) {
    const Complex w2 = w * w;
    return 1.0 - w2 / 3.0 + 2.0 * w2 * w2 / 15.0;
  }
  return std::tanh(w) / w;
}

Complex closed_a_nonneg(Complex w) {
  if (std::abs(w) < 1e-4) {
    const Complex w2 = w * w;
    return 0.5 * (w2 / 2.0 - w2 * w2 / 12.0);
  }
  return 0.5 * (w - std::log(2.0) + std::log(1.0 + std::exp(-2.0 * w)));
}

// Trigonometric interpolant of a spectrum in FFT order at coordinate x.
Complex interpolate_spectrum(std::span<const Complex> spec, const Grid& grid, double x) {
  const double rel = x - grid.coordinate(0);
  const std::size_t n = grid.n();
  Complex acc = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    const double th = grid.wavenumber(j);
    const Complex ph = (j == n / 2) ? Complex(std::cos(th * rel), 0.0) : std::polar(1.0, th * rel);
    acc += spec[j] * ph;
  }
  return acc / static_cast<double>(n);
}

void require_d1(const M11Problem& p, const char* who) {
  if (p.d != 1 && p.source.profile != SourceSpec::Profile::plane_wave) {
    throw ValidationError(std::string(who) + ": gaussian sources are supported for d = 1 only");
  }
}

double gamma_for(const M11Problem& p, double zeta) {
  return gamma_check(p.source.width, DVec{zeta - p.kappa[0], 0.0}, 1);
}

}  // namespace

std::vector<ABCDState> solve_abcd(double z, double Omega, double omega0, double sigma2, double dz_ode) {
  if (!(dz_ode > 0.0)) throw ValidationError("dz_ode must be > 0");
  if (!(z >= 0.0)) throw ValidationError("z must be >= 0");
  const AbcdRhs f{Omega, omega0 * omega0, omega0, sigma2};
  std::vector<ABCDState> out;
  std::array<Complex, 4> y{};
  double zc = 0.0;
  out.push_back({0.0, 0.0, 0.0, 0.0, 0.0});
  const auto steps = static_cast<std::size_t>(std::ceil(z / dz_ode - 1e-9));
  out.reserve(steps + 1);
  for (std::size_t s = 0; s < steps; ++s) {
    const double h = std::min(dz_ode, z - zc);
    const auto k1 = f(zc, y);
    const auto k2 = f(zc + 0.5 * h, axpy(y, 0.5 * h, k1));
    const auto k3 = f(zc + 0.5 * h, axpy(y, 0.5 * h, k2));
    const auto k4 = f(zc + h, axpy(y, h, k3));
    for (int i = 0; i < 4; ++i) y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    zc = (s + 1 == steps) ? z : zc + h;
    if (!(std::abs(y[1]) < 1e12)) {
      std::ostringstream msg;
      msg << "ABCD integration diverged at z=" << zc << "; reduce dz_ode";
      throw NumericalGuardError(msg.str());
    }
    out.push_back({zc, y[0], y[1], y[2], y[3]});
  }
  return out;
}

ABCDState abcd_at(double z, double Omega, double omega0, double sigma2, double dz_ode) {
  return solve_abcd(z, Omega, omega0, sigma2, dz_ode).back();
}

ClosedAB closed_ab(double z, double Omega, double omega0, double sigma2) {
  if (Omega < 0.0) {
    ClosedAB r = closed_ab(z, -Omega, omega0, sigma2);
    return {std::conj(r.a), std::conj(r.b), std::conj(r.alpha)};
  }
  const Complex alpha = std::polar(std::sqrt(sigma2 * Omega / 4.0), kPi / 4.0);
  const Complex w = alpha * z;
  ClosedAB r;
  r.alpha = alpha;
  r.b = omega0 * omega0 * sigma2 * z / 8.0 * tanh_over(w);
  r.a = closed_a_nonneg(w);
  return r;
}

Complex frak_b(Complex b, double h, double omega0) {
  return {b.real(), b.imag() - omega0 / (2.0 * h)};
}

Complex m11_planewave(double h, const DVec& tau, double Omega, double z0, double omega0, double sigma2, int d) {
  const ClosedAB ab = closed_ab(z0, Omega, omega0, sigma2);
  const double t2 = norm2(tau);
  // The zero-order term accrues once per transverse axis, so the plane-wave
  // correlation factorises over dimensions.
  const Complex a = static_cast<double>(d) * ab.a;
  if (h == 0.0) return std::exp(-a - ab.b * t2);
  const Complex fb = frak_b(ab.b, h, omega0);
  // One-dimensional factor (omega0 / (2 i h fb))^{1/2} with the branch fixed by
  // the Fresnel integral: sqrt(omega0 / (2 pi |h|)) e^{-i pi sgn(h) / 4} sqrt(pi / fb).
  const Complex one_d = std::sqrt(omega0 / (2.0 * kPi * std::fabs(h))) *
                        std::polar(1.0, -(h > 0 ? 1.0 : -1.0) * kPi / 4.0) * std::sqrt(kPi / fb);
  Complex pref = 1.0;
  for (int i = 0; i < d; ++i) pref *= one_d;
  return pref * std::exp(-a - omega0 * omega0 * t2 / (4.0 * h * h * fb) + kI * omega0 * t2 / (2.0 * h));
}

std::vector<Complex> fresnel_apply(std::span<const Complex> spectrum, const Grid& grid, double h, double omega0) {
  if (spectrum.size() != grid.size()) throw ValidationError("fresnel_apply: spectrum size mismatch");
  std::vector<Complex> out(spectrum.begin(), spectrum.end());
  if (h != 0.0) {
    for (std::size_t j = 0; j < out.size(); ++j) {
      out[j] *= std::polar(1.0, -h * norm2(grid.wavevector(j)) / (2.0 * omega0));
    }
  }
  FftPlan(grid.n(), grid.dim()).inverse(out);
  return out;
}

double diffusion_kernel(double z, const DVec& tau, const DVec& xi, double omega0, double sigma2) {
  const double bracket =
      norm2(tau) + z * dot(xi, tau) / omega0 + z * z * norm2(xi) / (3.0 * omega0 * omega0);
  return std::exp(-omega0 * omega0 * sigma2 * z / 8.0 * bracket);
}

double gamma_check(double width, const DVec& k, int d) {
  const double w2 = width * width;
  return std::pow(kPi * w2, 0.5 * d) * std::exp(-w2 * norm2(k) / 4.0);
}

ZetaQuadrature make_zeta_quadrature(const M11Problem& problem, std::size_t count) {
  ZetaQuadrature q;
  if (problem.source.profile == SourceSpec::Profile::plane_wave) {
    q.plane_wave = true;
    q.nodes = {problem.kappa[0]};
    q.weight = 1.0;
    return q;
  }
  require_d1(problem, "make_zeta_quadrature");
  if (count < 3 || count % 2 == 0) throw ValidationError("zeta node count must be odd and >= 3");
  const double half = 12.0 / problem.source.width;
  const double step = 2.0 * half / static_cast<double>(count - 1);
  q.nodes.resize(count);
  for (std::size_t j = 0; j < count; ++j) q.nodes[j] = problem.kappa[0] - half + step * static_cast<double>(j);
  q.weight = step / (2.0 * kPi);
  return q;
}

M11Abcd::M11Abcd(const M11Problem& problem, double dz_ode)
    : M11Abcd(problem, make_zeta_quadrature(problem), dz_ode) {}

M11Abcd::M11Abcd(const M11Problem& problem, ZetaQuadrature zeta, double dz_ode)
    : problem_(problem), zeta_(std::move(zeta)) {
  require_d1(problem, "M11Abcd");
  state_ = abcd_at(problem.z, problem.Omega, problem.omega0, problem.sigma2, dz_ode);
}

Complex M11Abcd::operator()(const DVec& r, const DVec& tau) const {
  const auto& s = state_;
  const double zw = problem_.z / problem_.omega0;
  if (zeta_.plane_wave) {
    const DVec& k = problem_.kappa;
    const DVec sh = tau - zw * k;
    return std::polar(1.0, dot(k, r)) * std::exp(-(static_cast<double>(problem_.d) * s.a + s.b * norm2(sh) + s.c * dot(sh, k) + s.d * norm2(k)));
  }
  Complex acc = 0.0;
  for (double zeta : zeta_.nodes) {
    const double sh = tau[0] - zw * zeta;
    const Complex e = -(s.a + s.b * sh * sh + s.c * sh * zeta + s.d * zeta * zeta);
    acc += gamma_for(problem_, zeta) * std::exp(e + kI * zeta * r[0]);
  }
  return acc * zeta_.weight;
}

Complex M11_general(const M11Problem& problem, const DVec& r, const DVec& tau, double dz_ode) {
  return M11Abcd(problem, dz_ode)(r, tau);
}

double explicit_exponent(double z, const DVec& tau, const DVec& xi, const CovarianceModel& model, double eta,
                         double omega0, std::size_t nodes) {
  static thread_local std::size_t cached_n = 0;
  static thread_local QuadratureRule rule;
  if (cached_n != nodes) {
    rule = gauss_legendre(nodes, 0.0, 1.0);
    cached_n = nodes;
  }
  double acc = 0.0;
  for (std::size_t i = 0; i < nodes; ++i) {
    const double s = rule.nodes[i];
    const DVec x = eta * tau - (s * eta * z / omega0) * xi;
    acc += rule.weights[i] * model.Q(x);
  }
  return omega0 * omega0 * z / (4.0 * eta * eta) * acc;
}

Complex M11_omega0_explicit(double z, const DVec& r, const DVec& tau, const DVec& kappa, const SourceSpec& source,
                            const CovarianceModel& model, const ScalingRegime& regime, ExplicitMode mode,
                            const ZetaQuadrature* zeta) {
  M11Problem p;
  p.z = z;
  p.kappa = kappa;
  p.source = source;
  p.omega0 = regime.omega0;
  p.sigma2 = model.sigma2();
  p.d = regime.d;
  require_d1(p, "M11_omega0_explicit");
  const double w0 = regime.omega0;
  // The diffusive form is eta-independent; any eta works with the quadratic Q.
  const CovarianceModel quad = CovarianceModel::custom(
      "quadratic", [s2 = model.sigma2()](const DVec& x) { return -0.5 * s2 * norm2(x); },
      [](const DVec&) { return 0.0; }, 0.0, model.sigma2(), model.ell(), model.dim());
  const CovarianceModel& medium = mode == ExplicitMode::finite ? model : quad;
  const double eta = mode == ExplicitMode::finite ? regime.eta : 1.0;

  const ZetaQuadrature own = zeta ? ZetaQuadrature{} : make_zeta_quadrature(p);
  const ZetaQuadrature& zq = zeta ? *zeta : own;

  if (zq.plane_wave) {
    return std::polar(1.0, dot(kappa, r)) * std::exp(explicit_exponent(z, tau, kappa, medium, eta, w0));
  }
  const double w2 = source.width * source.width;
  const double ee = mode == ExplicitMode::finite ? regime.epsilon * regime.eta : 0.0;
  std::vector<Complex> terms(zq.nodes.size());
  double scale = 0.0;
  for (std::size_t j = 0; j < zq.nodes.size(); ++j) {
    const double xi = zq.nodes[j];
    const double v = ee * (tau[0] - xi * z / w0);
    const double env = std::exp(-v * v / (4.0 * w2));
    const double g = gamma_check(source.width, DVec{xi - kappa[0], 0.0}, 1);
    const double k = explicit_exponent(z, tau, DVec{xi, 0.0}, medium, eta, w0);
    terms[j] = g * env * std::exp(k) * std::polar(1.0, xi * r[0]);
    scale = std::max(scale, std::abs(terms[j]));
  }
  Complex full = 0.0, coarse = 0.0;
  for (std::size_t j = 0; j < terms.size(); ++j) {
    full += terms[j];
    if (j % 2 == 0) coarse += terms[j];
  }
  full *= zq.weight;
  coarse *= 2.0 * zq.weight;
  if (std::abs(full - coarse) > 1e-9 * std::max(scale * zq.weight * terms.size(), 1e-300)) {
    std::ostringstream s;
    s << "xi quadrature not converged: |full - half| = " << std::abs(full - coarse);
    throw NumericalGuardError(s.str());
  }
  return full;
}

M11PdeSolution::M11PdeSolution(const M11Problem& problem, const PdeOptions& options, ZetaQuadrature zeta)
    : problem_(problem), zeta_(std::move(zeta)), tau_grid_(build_grid(options.n_tau, options.tau_length, 1)) {
  if (problem.d != 1) throw ValidationError("M11_pde_solve supports d = 1 only");
  if (!(options.dz > 0.0)) throw ValidationError("pde dz must be > 0");
  const double w = problem.omega0;
  const double th_max = tau_grid_.nyquist();
  if (options.dz * std::fabs(problem.Omega) * th_max * th_max / (2.0 * w * w) > kPi) {
    throw NumericalGuardError("pde step too large for the tau resolution (phase per step exceeds pi)");
  }
  const std::size_t n = tau_grid_.n();
  const auto steps = static_cast<std::size_t>(std::max(1.0, std::ceil(problem.z / options.dz - 1e-9)));
  const double h = problem.z / static_cast<double>(steps);
  FftPlan plan(n, 1);

  std::vector<double> half_pot(n), full_pot(n);
  for (std::size_t j = 0; j < n; ++j) {
    const double t = tau_grid_.coordinate(j);
    const double v = w * w * problem.sigma2 * t * t / 8.0;
    half_pot[j] = std::exp(-0.5 * h * v);
    full_pot[j] = std::exp(-h * v);
  }
  spectra_.reserve(zeta_.nodes.size());
  std::vector<Complex> mult(n);
  for (double zeta : zeta_.nodes) {
    for (std::size_t j = 0; j < n; ++j) {
      const double th = tau_grid_.wavenumber(j);
      mult[j] = std::polar(1.0, -h * (problem.Omega * th * th / (2.0 * w * w) + zeta * th / w));
    }
    std::vector<Complex> m(n, Complex(1.0, 0.0));
    if (problem.z > 0.0) {
      for (std::size_t j = 0; j < n; ++j) m[j] *= half_pot[j];
      for (std::size_t s = 0; s < steps; ++s) {
        plan.forward(m);
        for (std::size_t j = 0; j < n; ++j) m[j] *= mult[j];
        plan.inverse(m);
        const auto& pot = (s + 1 == steps) ? half_pot : full_pot;
        for (std::size_t j = 0; j < n; ++j) m[j] *= pot[j];
      }
    }
    plan.forward(m);
    spectra_.push_back(std::move(m));
  }
}

Complex M11PdeSolution::operator()(const DVec& r, const DVec& tau) const {
  Complex acc = 0.0;
  for (std::size_t i = 0; i < zeta_.nodes.size(); ++i) {
    const double zeta = zeta_.nodes[i];
    const double g = zeta_.plane_wave ? 1.0 : gamma_for(problem_, zeta);
    acc += g * std::polar(1.0, zeta * r[0]) * interpolate_spectrum(spectra_[i], tau_grid_, tau[0]);
  }
  return acc * zeta_.weight;
}

M11PdeSolution M11_pde_solve(const M11Problem& problem, const PdeOptions& options) {
  return M11PdeSolution(problem, options, make_zeta_quadrature(problem));
}

Complex m11(double h, const DVec& tau, const M11Problem& problem, const DVec& r, const FresnelOptions& options) {
  if (problem.d != 1) throw ValidationError("m11 with a general source supports d = 1 only; use m11_planewave");
  const M11Abcd M(problem);
  if (h == 0.0) return M(r, tau);
  const Grid g = build_grid(options.n_tau, options.tau_length, 1);
  std::vector<Complex> v(g.n());
  for (std::size_t j = 0; j < g.n(); ++j) v[j] = M(r, DVec{g.coordinate(j), 0.0});
  FftPlan(g.n(), 1).forward(v);
  for (std::size_t j = 0; j < g.n(); ++j) {
    const double th = g.wavenumber(j);
    v[j] *= std::polar(1.0, -h * th * th / (2.0 * problem.omega0));
  }
  return interpolate_spectrum(v, g, tau[0]);
}

}  // namespace speckle
