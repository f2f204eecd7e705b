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

#include "speckle/memory_effects.hpp"

#include <cmath>
#include <sstream>

#include "speckle/analytic_moments.hpp"
#include "speckle/fft.hpp"
#include "speckle/parallel.hpp"
#include "speckle/simulator.hpp"

namespace speckle {

namespace {

double gamma_of(const TiltScan& scan, const DVec& k) { return scan.gamma_check ? scan.gamma_check(k) : 1.0; }

std::size_t argmax(const std::vector<double>& v) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < v.size(); ++i)
    if (v[i] > v[best]) best = i;
  return best;
}

std::vector<double> symmetric_grid(double half, std::size_t points) {
  std::vector<double> g(points);
  for (std::size_t i = 0; i < points; ++i) {
    g[i] = -half + 2.0 * half * static_cast<double>(i) / static_cast<double>(points - 1);
  }
  return g;
}

// Smallest t > 0 with f(t) <= level, for f decreasing from f(0) > level.
double half_point(const std::function<double(double)>& f, double level) {
  double hi = 1e-3;
  while (f(hi) > level) {
    hi *= 2.0;
    if (hi > 1e8) throw NumericalGuardError("half-maximum bracket not found");
  }
  double lo = 0.0;
  for (int it = 0; it < 200 && hi - lo > 1e-14 * hi; ++it) {
    const double mid = 0.5 * (lo + hi);
    (f(mid) > level ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace

double golden_maximize(const std::function<double(double)>& f, double lo, double hi, double tol) {
  const double g = 0.5 * (std::sqrt(5.0) - 1.0);
  double a = lo, b = hi;
  double c = b - g * (b - a), d = a + g * (b - a);
  double fc = f(c), fd = f(d);
  while (b - a > tol * std::max(1.0, std::fabs(a) + std::fabs(b))) {
    if (fc > fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - g * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + g * (b - a);
      fd = f(d);
    }
  }
  return 0.5 * (a + b);
}

DVec tilt_direction(const TiltScan& scan) {
  const double n = std::sqrt(norm2(scan.tau));
  if (n == 0.0) return {1.0, 0.0};
  return (1.0 / n) * scan.tau;
}

DVec tilt_analytic_optimum(const TiltScan& scan) { return (-1.5 * scan.omega0 / scan.z) * scan.tau; }

std::vector<double> make_tilt_grid(const TiltScan& scan, std::size_t points) {
  const double opt = std::sqrt(norm2(tilt_analytic_optimum(scan)));
  return symmetric_grid(opt > 0.0 ? 2.0 * opt : 1.0, points);
}

Complex tilt_correlation(const TiltScan& scan, const DVec& dkappa, const DVec& dkappa_prime) {
  return diffusion_kernel(scan.z, scan.tau, dkappa, scan.omega0, scan.sigma2) *
         gamma_of(scan, dkappa - dkappa_prime);
}

TiltOptimum tilt_optimum(const TiltScan& scan) {
  const std::vector<double> grid = scan.dkappa_grid.empty() ? make_tilt_grid(scan) : scan.dkappa_grid;
  if (grid.size() < 3) throw ValidationError("tilt grid needs at least 3 points");
  const DVec u = tilt_direction(scan);
  auto f = [&](double g) { return std::abs(tilt_correlation(scan, g * u, g * u)); };
  std::vector<double> vals(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) vals[i] = f(grid[i]);
  const std::size_t i = argmax(vals);
  if (i == 0 || i + 1 == grid.size()) throw ValidationError("tilt optimum lies on the grid boundary");
  TiltOptimum out;
  out.grid_argmax = grid[i];
  out.cell = grid[i + 1] - grid[i];
  out.refined = golden_maximize(f, grid[i - 1], grid[i + 1]);
  out.analytic = dot(tilt_analytic_optimum(scan), u);
  out.value_at_optimum = f(out.refined);
  out.value_at_zero = f(0.0);
  return out;
}

double tilt_fwhm_ratio(const TiltScan& scan) {
  const DVec u = tilt_direction(scan);
  auto at = [&](double t) {
    TiltScan s = scan;
    s.tau = t * u;
    return s;
  };
  auto optimal = [&](double t) {
    const TiltScan s = at(t);
    const double span = 4.0 * scan.omega0 * t / scan.z + 1.0;
    auto f = [&](double g) { return std::abs(tilt_correlation(s, g * u, g * u)); };
    return f(golden_maximize(f, -span, span));
  };
  auto plain = [&](double t) { return std::abs(tilt_correlation(at(t), DVec{0, 0}, DVec{0, 0})); };
  const double wa = half_point(optimal, 0.5 * optimal(0.0));
  const double wb = half_point(plain, 0.5 * plain(0.0));
  return wa / wb;
}

TiltMcResult tilt_mc_correlation(const TiltMcSetup& st) {
  if (st.regime.d != 1) throw ValidationError("Monte Carlo tilt correlation supports d = 1 only");
  if (st.dkappa.empty() || st.dkappa_prime.empty()) throw ValidationError("tilt grids must be non-empty");
  if (st.realizations < 2) throw ValidationError("ensemble too small: at least 2 realizations required");
  const Grid grid = build_grid(st.n, st.length, 1);
  const double eps = st.regime.epsilon, eta = st.regime.eta;
  auto commensurate = [&](double k, const char* what) {
    const double m = k / grid.dual_spacing();
    if (std::fabs(m - std::round(m)) > 1e-9) {
      std::ostringstream s;
      s << what << " wavevector " << k << " is not a multiple of the dual spacing " << grid.dual_spacing();
      throw ValidationError(s.str());
    }
  };
  for (double dk : st.dkappa) commensurate(eps * dk, "receiver");
  for (double dk : st.dkappa_prime) commensurate(0.5 * eps * dk, "source");

  const SplitStepSolver solver(st.regime, st.model, grid, st.dz);
  const std::size_t ni = st.dkappa.size(), nj = st.dkappa_prime.size();
  const std::size_t R = st.realizations;
  std::vector<Complex> samples(R * ni * nj);

  std::vector<std::vector<Complex>> receiver(ni, std::vector<Complex>(grid.n()));
  for (std::size_t i = 0; i < ni; ++i)
    for (std::size_t x = 0; x < grid.n(); ++x)
      receiver[i][x] = std::polar(1.0, -eps * st.dkappa[i] * grid.coordinate(x));

  const double shift = 0.5 * eta * st.tau;
  parallel_for(R, st.threads, [&](std::size_t r) {
    std::vector<WaveField> fields;
    fields.reserve(2 * nj);
    for (std::size_t j = 0; j < nj; ++j) {
      for (double sign : {1.0, -1.0}) {
        SourceSpec src;
        src.tilt = {sign * 0.5 * eps * st.dkappa_prime[j], 0.0};
        fields.push_back(init_source(st.regime, grid, src));
      }
    }
    solver.propagate_shared(fields, st.regime.z0, NoiseStream{st.seed, r});
    FftPlan plan(grid.n(), 1);
    auto shifted = [&](std::vector<Complex> v, double s) {
      plan.forward(v);
      for (std::size_t k = 0; k < v.size(); ++k) {
        const double xi = grid.wavenumber(k);
        v[k] *= (k == grid.n() / 2) ? Complex(std::cos(xi * s), 0.0) : std::polar(1.0, xi * s);
      }
      plan.inverse(v);
      return v;
    };
    for (std::size_t j = 0; j < nj; ++j) {
      const auto u1 = shifted(fields[2 * j].values, -shift);
      const auto u2 = shifted(fields[2 * j + 1].values, shift);
      for (std::size_t i = 0; i < ni; ++i) {
        Complex acc = 0.0;
        for (std::size_t x = 0; x < grid.n(); ++x) acc += u1[x] * std::conj(u2[x]) * receiver[i][x];
        samples[(r * ni + i) * nj + j] = acc / static_cast<double>(grid.n());
      }
    }
  });

  TiltMcResult out;
  out.estimate.assign(ni, std::vector<MomentEstimate>(nj));
  out.analytic.assign(ni, std::vector<double>(nj, 0.0));
  out.analytic_finite_eta.assign(ni, std::vector<double>(nj, 0.0));
  const double w = st.regime.omega0, z = st.regime.z0;
  for (std::size_t i = 0; i < ni; ++i) {
    for (std::size_t j = 0; j < nj; ++j) {
      std::vector<Complex> col(R);
      for (std::size_t r = 0; r < R; ++r) col[r] = samples[(r * ni + i) * nj + j];
      out.estimate[i][j] = estimate_mean(col, st.batch);
      if (std::fabs(st.dkappa[i] - st.dkappa_prime[j]) < 1e-12) {
        const DVec dk{st.dkappa[i], 0.0};
        out.analytic[i][j] = diffusion_kernel(z, DVec{st.tau, 0.0}, dk, w, st.model.sigma2());
        out.analytic_finite_eta[i][j] =
            std::exp(explicit_exponent(z, DVec{-st.tau, 0.0}, dk, st.model, eta, w));
      }
    }
  }
  return out;
}

double chroma_h_opt(const ChromaScan& scan) {
  const Complex b = closed_ab(scan.z0, scan.Omega, scan.omega0, scan.sigma2).b;
  return b.imag() * scan.omega0 / (2.0 * std::norm(b));
}

std::vector<double> make_chroma_grid(const ChromaScan& scan, std::size_t points) {
  const double h = std::fabs(chroma_h_opt(scan));
  return symmetric_grid(h > 0.0 ? 2.0 * h : 1.0, points);
}

std::vector<std::pair<double, double>> chroma_profile(const ChromaScan& scan) {
  const std::vector<double> grid = scan.h_grid.empty() ? make_chroma_grid(scan) : scan.h_grid;
  std::vector<std::pair<double, double>> out;
  out.reserve(grid.size());
  for (double h : grid) {
    out.emplace_back(h, std::abs(m11_planewave(h, DVec{0, 0}, scan.Omega, scan.z0, scan.omega0, scan.sigma2, scan.d)));
  }
  return out;
}

ChromaOptimum chroma_optimum(const ChromaScan& scan) {
  const auto prof = chroma_profile(scan);
  if (prof.size() < 3) throw ValidationError("chroma grid needs at least 3 points");
  std::vector<double> vals;
  for (const auto& [h, v] : prof) vals.push_back(v);
  const std::size_t i = argmax(vals);
  if (i == 0 || i + 1 == prof.size()) throw ValidationError("chroma optimum lies on the grid boundary");
  ChromaOptimum out;
  out.h_formula = chroma_h_opt(scan);
  out.grid_argmax = prof[i].first;
  out.cell = prof[i + 1].first - prof[i].first;
  auto f = [&](double h) {
    return std::abs(m11_planewave(h, DVec{0, 0}, scan.Omega, scan.z0, scan.omega0, scan.sigma2, scan.d));
  };
  out.refined = golden_maximize(f, prof[i - 1].first, prof[i + 1].first);
  out.small_alpha = -scan.z0 * scan.Omega / (3.0 * scan.omega0);
  out.alpha_z = std::abs(closed_ab(scan.z0, scan.Omega, scan.omega0, scan.sigma2).alpha) * scan.z0;
  return out;
}

ChromaImprovement chroma_improvement(const ChromaScan& scan) {
  const Complex b = closed_ab(scan.z0, scan.Omega, scan.omega0, scan.sigma2).b;
  ChromaImprovement out;
  const double q = b.real() != 0.0 ? (b.imag() * b.imag()) / (b.real() * b.real()) : 0.0;
  out.stated_factor = 1.0 + q;
  out.display_factor = std::pow(1.0 + q, scan.d / 4.0);
  const double h = chroma_h_opt(scan);
  const DVec zero{0, 0};
  const double top = std::abs(m11_planewave(h, zero, scan.Omega, scan.z0, scan.omega0, scan.sigma2, scan.d));
  const double base = std::abs(m11_planewave(0.0, zero, scan.Omega, scan.z0, scan.omega0, scan.sigma2, scan.d));
  out.ratio = top / base;
  return out;
}

}  // namespace speckle
