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

#include "speckle/covariance.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

namespace speckle {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

// Trapezoid rule over a symmetric box; spectrally accurate for smooth,
// rapidly decaying integrands.
template <class F>
double box_integral(int d, double half_width, int points, F&& f) {
  const double h = 2.0 * half_width / (points - 1);
  double sum = 0.0;
  if (d == 1) {
    for (int i = 0; i < points; ++i) {
      const double w = (i == 0 || i == points - 1) ? 0.5 : 1.0;
      sum += w * f(DVec{-half_width + i * h, 0.0});
    }
    return sum * h;
  }
  for (int i = 0; i < points; ++i) {
    const double wi = (i == 0 || i == points - 1) ? 0.5 : 1.0;
    for (int j = 0; j < points; ++j) {
      const double wj = (j == 0 || j == points - 1) ? 0.5 : 1.0;
      sum += wi * wj * f(DVec{-half_width + i * h, -half_width + j * h});
    }
  }
  return sum * h * h;
}

int quadrature_points(int d) { return d == 1 ? 2001 : 401; }

}  // namespace

CovarianceModel CovarianceModel::gaussian(double r0, double ell, int d) {
  if (!(r0 >= 0.0) || !std::isfinite(r0)) throw ValidationError("medium r0 must be >= 0");
  if (!(ell > 0.0) || !std::isfinite(ell)) throw ValidationError("medium ell must be > 0");
  if (d != 1 && d != 2) throw ValidationError("medium dimension must be 1 or 2");
  CovarianceModel m;
  m.family_ = "gaussian";
  m.r0_ = r0;
  m.ell_ = ell;
  m.d_ = d;
  m.sigma2_ = r0 / (ell * ell);
  const double inv2l2 = 1.0 / (2.0 * ell * ell);
  const double spec = r0 * std::pow(kTwoPi * ell * ell, 0.5 * d);
  const double half_l2 = 0.5 * ell * ell;
  m.R_ = [r0, inv2l2](const DVec& x) { return r0 * std::exp(-norm2(x) * inv2l2); };
  m.Rhat_ = [spec, half_l2](const DVec& k) { return spec * std::exp(-half_l2 * norm2(k)); };
  return m;
}

CovarianceModel CovarianceModel::custom(std::string family, Kernel R, Kernel Rhat, double r0,
                                        double sigma2, double scale, int d) {
  if (!R || !Rhat) throw ValidationError("custom medium needs both R and Rhat");
  if (!(scale > 0.0)) throw ValidationError("custom medium scale must be > 0");
  if (d != 1 && d != 2) throw ValidationError("medium dimension must be 1 or 2");
  if (family == "gaussian") family = "custom-gaussian";
  CovarianceModel m;
  m.family_ = std::move(family);
  m.R_ = std::move(R);
  m.Rhat_ = std::move(Rhat);
  m.r0_ = r0;
  m.sigma2_ = sigma2;
  m.ell_ = scale;
  m.d_ = d;
  return m;
}

DVec CovarianceModel::sample_wavevector(std::mt19937_64& rng) const {
  if (!has_sampler()) throw ValidationError("no jump-law sampler for medium family " + family_);
  std::normal_distribution<double> n(0.0, 1.0 / ell_);
  DVec k{n(rng), 0.0};
  if (d_ == 2) k[1] = n(rng);
  return k;
}

bool CovarianceReport::all_passed() const {
  for (const auto& c : checks)
    if (!c.passed) return false;
  return true;
}

double quadrature_R0(const CovarianceModel& model) {
  const int d = model.dim();
  const double K = 14.0 / model.ell();
  const double s = box_integral(d, K, quadrature_points(d), [&](const DVec& k) { return model.Rhat(k); });
  return s / std::pow(kTwoPi, d);
}

std::array<std::array<double, 2>, 2> quadrature_Sigma(const CovarianceModel& model) {
  const int d = model.dim();
  const double K = 14.0 / model.ell();
  std::array<std::array<double, 2>, 2> S{};
  const double norm = std::pow(kTwoPi, d);
  for (int i = 0; i < d; ++i) {
    for (int j = 0; j < d; ++j) {
      S[i][j] = box_integral(d, K, quadrature_points(d),
                             [&](const DVec& k) { return k[i] * k[j] * model.Rhat(k); }) /
                norm;
    }
  }
  return S;
}

CovarianceReport validate(const CovarianceModel& model) {
  CovarianceReport rep;
  const int d = model.dim();
  const double ell = model.ell();
  auto add = [&](std::string name, bool ok, double measured, double expected, std::string detail = {}) {
    rep.checks.push_back({std::move(name), ok, measured, expected, std::move(detail)});
  };

  {
    double worst = INFINITY;
    DVec at{0.0, 0.0};
    const int m = d == 1 ? 4001 : 201;
    const double K = 20.0 / ell;
    for (int i = 0; i < m; ++i) {
      for (int j = 0; j < (d == 1 ? 1 : m); ++j) {
        DVec k{-K + 2.0 * K * i / (m - 1), d == 1 ? 0.0 : -K + 2.0 * K * j / (m - 1)};
        const double v = model.Rhat(k);
        if (v < worst) {
          worst = v;
          at = k;
        }
      }
    }
    std::ostringstream s;
    s << "min Rhat at k=(" << at[0] << "," << at[1] << ")";
    add("spectrum_nonnegative", worst >= 0.0, worst, 0.0, s.str());
  }

  {
    double worst = 0.0;
    for (int i = 1; i <= 50; ++i) {
      const double t = 0.1 * i * ell;
      DVec x{t, d == 2 ? -0.37 * t : 0.0};
      worst = std::max(worst, std::fabs(model.R(x) - model.R(-1.0 * x)));
    }
    add("symmetric", worst <= 1e-14 * std::max(1.0, model.r0()), worst, 0.0);
  }

  {
    bool ok = true;
    double worst = 0.0;
    for (int i = 1; i <= 60; ++i) {
      const double t = 0.1 * i * ell;
      for (int a = 0; a < d; ++a) {
        DVec x{0.0, 0.0};
        x[a] = t;
        const double q = model.Q(x);
        worst = std::max(worst, q);
        if (!(q < 0.0) && model.R(x) != 0.0) ok = false;
      }
    }
    add("strict_maximum_at_origin", ok, worst, 0.0);
  }

  {
    const double h = 1e-3 * ell;
    std::array<std::array<double, 2>, 2> H{};
    for (int i = 0; i < d; ++i) {
      for (int j = 0; j < d; ++j) {
        DVec pp{0, 0}, pm{0, 0}, mp{0, 0}, mm{0, 0};
        pp[i] += h; pp[j] += h;
        pm[i] += h; pm[j] -= h;
        mp[i] -= h; mp[j] += h;
        mm[i] -= h; mm[j] -= h;
        H[i][j] = (model.R(pp) - model.R(pm) - model.R(mp) + model.R(mm)) / (4.0 * h * h);
      }
    }
    bool negdef = H[0][0] < 0.0;
    if (d == 2) negdef = negdef && (H[0][0] * H[1][1] - H[0][1] * H[1][0]) > 0.0;
    double err = 0.0;
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j) err = std::max(err, std::fabs(H[i][j] + (i == j ? model.sigma2() : 0.0)));
    add("hessian_negative_definite", negdef, H[0][0], -model.sigma2());
    add("hessian_matches_sigma2", err <= 1e-6 * std::max(1.0, model.sigma2()), err, 0.0);
  }

  {
    const double r0q = quadrature_R0(model);
    add("R0_from_spectrum", std::fabs(r0q - model.r0()) <= 1e-8 * std::max(1.0, model.r0()), r0q, model.r0());
  }

  {
    const auto S = quadrature_Sigma(model);
    double err = 0.0;
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j) err = std::max(err, std::fabs(S[i][j] - (i == j ? model.sigma2() : 0.0)));
    add("Sigma_from_spectrum", err <= 1e-6 * std::max(1.0, model.sigma2()), S[0][0], model.sigma2());
  }

  {
    // Full directional integrability is not grid-checkable; axes only.
    bool ok = true;
    double tail = 0.0;
    for (int a = 0; a < d; ++a) {
      auto along = [&](double t) {
        DVec x{0, 0};
        x[a] = t;
        return std::fabs(model.R(x));
      };
      double inner = 0.0, outer = 0.0;
      const double h = 0.01 * ell;
      for (double t = -20.0 * ell; t <= 20.0 * ell; t += h) inner += along(t) * h;
      for (double t = 20.0 * ell; t <= 40.0 * ell; t += h) outer += 2.0 * along(t) * h;
      tail = std::max(tail, outer);
      if (!std::isfinite(inner) || outer > 1e-6 * std::max(inner, 1e-300)) ok = false;
    }
    add("integrable_along_axes", ok, tail, 0.0);
  }
  return rep;
}

}  // namespace speckle
