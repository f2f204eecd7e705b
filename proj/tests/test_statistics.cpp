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

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "doctest.h"
#include "oracles.hpp"
#include "speckle/statistics.hpp"

using namespace speckle;

namespace {

// Circular complex gaussian pair with E|u1|^2 = E|u2|^2 = 1, E u1 conj(u2) = rho.
std::pair<Complex, Complex> gaussian_pair(std::mt19937_64& rng, Complex rho) {
  std::normal_distribution<double> g(0.0, std::sqrt(0.5));
  const Complex a(g(rng), g(rng)), b(g(rng), g(rng));
  const Complex u1 = a;
  const Complex u2 = std::conj(rho) * a + std::sqrt(1.0 - std::norm(rho)) * b;
  return {u1, u2};
}

}  // namespace

TEST_CASE("mean estimate and standard error for iid data") {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> g(2.0, 3.0);
  std::vector<Complex> x(20000);
  for (auto& v : x) v = {g(rng), g(rng)};
  const auto e = estimate_mean(x, 50);
  // Complex SE combines both parts: sqrt(9/n + 9/n).
  const double se = std::sqrt(18.0 / x.size());
  CHECK(e.stderr == doctest::Approx(se).epsilon(0.1));
  CHECK(std::abs(e.value - Complex(2.0, 2.0)) < 4 * se);
  CHECK(e.n_samples == x.size());
}

TEST_CASE("estimate value is invariant under realization order") {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> g;
  std::vector<Complex> x(777);
  for (auto& v : x) v = {g(rng), g(rng)};
  auto y = x;
  std::shuffle(y.begin(), y.end(), rng);
  CHECK(std::abs(estimate_mean(x).value - estimate_mean(y).value) < 1e-14);
}

TEST_CASE("estimators reject degenerate input") {
  std::vector<Complex> one(1, 1.0);
  CHECK_THROWS_AS(estimate_mean(one), ValidationError);
  MomentRequest bad;
  bad.p = 2;
  bad.q = 1;
  bad.points.resize(2);
  CHECK_THROWS_AS(bad.validate(), ValidationError);
  bad.points.resize(3);
  CHECK_NOTHROW(bad.validate());
  bad.p = 4;
  bad.q = 2;
  bad.points.resize(6);
  CHECK_THROWS_AS(bad.validate(), ValidationError);
}

TEST_CASE("jackknife of a ratio matches the delta method") {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g;
  const std::size_t n = 40000;
  std::vector<std::vector<Complex>> cols(2, std::vector<Complex>(n));
  for (std::size_t i = 0; i < n; ++i) {
    cols[0][i] = 1.0 + 0.5 * g(rng);
    cols[1][i] = 2.0 + 0.5 * g(rng);
  }
  const auto e = jackknife(cols, [](std::span<const Complex> m) { return m[0] / m[1]; }, 50);
  // Var(X/Y) ~ (1/4)(0.25) + (1/16)(0.25) for independent X, Y at means 1, 2.
  const double se = std::sqrt((0.25 / 4.0 + 0.25 / 16.0) / n);
  CHECK(e.value.real() == doctest::Approx(0.5).epsilon(0.01));
  CHECK(e.stderr == doctest::Approx(se).epsilon(0.15));
}

TEST_CASE("moment estimators agree between layouts") {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> g;
  FieldSamples fs(300, 1, 2);
  std::vector<std::vector<Complex>> per(300);
  for (std::size_t r = 0; r < 300; ++r) {
    fs.at(r, 0, 0) = {g(rng), g(rng)};
    fs.at(r, 0, 1) = {g(rng), g(rng)};
    per[r] = {fs.at(r, 0, 0), fs.at(r, 0, 1)};
  }
  MomentRequest req;
  req.p = 1;
  req.q = 1;
  req.points.resize(2);
  const auto a = estimate_moment(per, req);
  const auto b = estimate_moment(fs, 1, 1);
  CHECK(std::abs(a.value - b.value) < 1e-14);
  CHECK(a.stderr == doctest::Approx(b.stderr));
}

TEST_CASE("gaussian summation rule equals the matrix permanent") {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> g;
  for (int p = 1; p <= 4; ++p) {
    std::vector<std::vector<Complex>> m(p, std::vector<Complex>(p));
    for (auto& row : m)
      for (auto& v : row) v = {g(rng), g(rng)};
    CHECK(std::abs(gaussian_summation_prediction(m, p, p) - oracle::permanent(m)) < 1e-12);
    CHECK(gaussian_summation_prediction(m, p, p - 1 < 0 ? 0 : p - 1) == Complex(0.0));
  }
}

TEST_CASE("gaussianity report accepts circular gaussian speckle") {
  std::mt19937_64 rng(6);
  const Complex rho(0.5, 0.3);
  FieldSamples fs(5000, 4, 2);
  for (std::size_t r = 0; r < 5000; ++r)
    for (std::size_t t = 0; t < 4; ++t) {
      auto [a, b] = gaussian_pair(rng, rho);
      fs.at(r, t, 0) = a;
      fs.at(r, t, 1) = b;
    }
  const auto rep = gaussianity_report(fs, 50);
  CHECK(std::abs(rep.prediction - (1.0 + std::norm(rho))) < 0.05);
  CHECK(rep.z_deviation < 3.5);
  CHECK(rep.z_mu21 < 3.5);
  CHECK(rep.z_mu20 < 3.5);
  CHECK(std::fabs(rep.contrast.value.real() - 1.0) < 0.05);
}

TEST_CASE("gaussianity report flags constant-modulus fields") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> ph(0.0, 2.0 * M_PI);
  FieldSamples fs(2000, 4, 2);
  for (std::size_t r = 0; r < 2000; ++r)
    for (std::size_t t = 0; t < 4; ++t) {
      fs.at(r, t, 0) = std::polar(1.0, ph(rng));
      fs.at(r, t, 1) = std::polar(1.0, ph(rng));
    }
  const auto rep = gaussianity_report(fs, 50);
  CHECK(rep.contrast.value.real() < 0.1);
  CHECK(std::fabs(rep.z_contrast) > 10.0);
}

TEST_CASE("first moment check on synthetic damped fields") {
  std::mt19937_64 rng(8);
  std::normal_distribution<double> g(0.0, 0.3);
  const double damping = 0.4;
  FieldSamples fs(4000, 3, 1);
  std::vector<Complex> free = {1.0, Complex(0.0, 2.0), Complex(-1.0, 1.0)};
  for (std::size_t r = 0; r < 4000; ++r)
    for (std::size_t t = 0; t < 3; ++t) fs.at(r, t, 0) = free[t] * (damping + Complex(g(rng), g(rng)));
  const auto rep = first_moment_check(fs, free, damping, 50);
  CHECK(std::fabs(rep.z_score) < 4.0);
  CHECK(rep.ratio == doctest::Approx(damping).epsilon(0.02));
}

TEST_CASE("mean field damping closed form") {
  CHECK(mean_field_damping(1.0, 1.0, 1.0, 0.25) == doctest::Approx(oracle::mean_damping(1.0, 1.0, 1.0, 0.25)));
  CHECK(mean_field_damping(2.0, 0.5, 0.3, 0.7) == doctest::Approx(std::exp(-4.0 * 0.5 * 0.3 / (8 * 0.49))));
}

TEST_CASE("factorial sum identity converges to exp(p^2 c)") {
  for (int p : {1, 2, 3})
    for (double c : {0.1, 0.5, 1.0}) {
      const double target = std::exp(p * p * c);
      CHECK(std::fabs(factorial_sum_identity(p, c) - target) / target < 1e-10);
    }
  CHECK(factorial_sum_identity(2, 0.0) == 1.0);
}

TEST_CASE("factorial sum partial sums match brute-force enumeration for p = 2") {
  const double c = 0.7;
  const int n_max = 6;
  double brute = 0.0;
  for (int n = 0; n <= n_max; ++n)
    for (int n1 = 0; n1 <= 2 * n; ++n1) {
      const int n2 = 2 * n - n1;
      brute += std::pow(c, n) * std::tgamma(2 * n + 1.0) / (std::tgamma(n + 1.0) * std::tgamma(n1 + 1.0) * std::tgamma(n2 + 1.0));
    }
  CHECK(factorial_sum_identity(2, c, n_max) == doctest::Approx(brute).epsilon(1e-13));
  // Partial sums increase monotonically towards the limit.
  double prev = 0.0;
  for (int k = 0; k < 12; ++k) {
    const double s = factorial_sum_identity(3, 0.5, k);
    CHECK(s > prev);
    CHECK(s <= std::exp(4.5) * (1 + 1e-14));
    prev = s;
  }
}

TEST_CASE("factorial sum preconditions") {
  CHECK_THROWS_AS(factorial_sum_identity(0, 1.0), ValidationError);
  CHECK_THROWS_AS(factorial_sum_identity(2, -1.0), ValidationError);
}
