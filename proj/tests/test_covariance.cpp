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

#include <cmath>
#include <numbers>
#include <random>

#include "doctest.h"
#include "speckle/covariance.hpp"

using namespace speckle;

TEST_CASE("gaussian model values and curvature") {
  const auto m = CovarianceModel::gaussian(2.0, 0.5, 1);
  CHECK(m.R({0.0, 0.0}) == 2.0);
  CHECK(m.Q({0.0, 0.0}) == 0.0);
  CHECK(m.sigma2() == doctest::Approx(8.0));
  CHECK(m.R({0.5, 0.0}) == doctest::Approx(2.0 * std::exp(-0.5)));
}

TEST_CASE("validation passes for gaussian media in 1 and 2 dimensions") {
  for (int d : {1, 2}) {
    const auto rep = validate(CovarianceModel::gaussian(1.0, 1.3, d));
    for (const auto& c : rep.checks) {
      INFO(c.name << " measured " << c.measured << " expected " << c.expected << " " << c.detail);
      CHECK(c.passed);
    }
    CHECK(rep.all_passed());
  }
}

TEST_CASE("spectrum integrates back to R(0) and -Hessian") {
  const auto m = CovarianceModel::gaussian(1.7, 0.8, 2);
  CHECK(quadrature_R0(m) == doctest::Approx(1.7).epsilon(1e-8));
  const auto S = quadrature_Sigma(m);
  CHECK(S[0][0] == doctest::Approx(m.sigma2()).epsilon(1e-6));
  CHECK(S[1][1] == doctest::Approx(m.sigma2()).epsilon(1e-6));
  CHECK(std::fabs(S[0][1]) < 1e-8);
}

TEST_CASE("validation rejects a covariance without a strict maximum") {
  // R(x) = cos(x) is periodic: no strict maximum and a spectrum that is not a function.
  const auto m = CovarianceModel::custom(
      "cosine", [](const DVec& x) { return std::cos(x[0]); },
      [](const DVec&) { return 0.0; }, 1.0, 1.0, 1.0, 1);
  const auto rep = validate(m);
  CHECK_FALSE(rep.all_passed());
}

TEST_CASE("validation reports a mismatched sigma2") {
  const double ell = 1.0;
  const auto g = CovarianceModel::gaussian(1.0, ell, 1);
  const auto m = CovarianceModel::custom(
      "wrong-sigma", [g](const DVec& x) { return g.R(x); }, [g](const DVec& k) { return g.Rhat(k); }, 1.0, 2.0,
      ell, 1);
  const auto rep = validate(m);
  bool found = false;
  for (const auto& c : rep.checks)
    if (c.name == "hessian_matches_sigma2") {
      found = true;
      CHECK_FALSE(c.passed);
    }
  CHECK(found);
}

TEST_CASE("negative spectra are caught") {
  const auto g = CovarianceModel::gaussian(1.0, 1.0, 1);
  const auto m = CovarianceModel::custom(
      "negative", [g](const DVec& x) { return g.R(x); },
      [g](const DVec& k) { return g.Rhat(k) - 3.0 * std::exp(-norm2(k) / 8.0); }, 1.0, 1.0, 1.0, 1);
  bool neg_flagged = false;
  for (const auto& c : validate(m).checks)
    if (c.name == "spectrum_nonnegative") neg_flagged = !c.passed;
  CHECK(neg_flagged);
}

TEST_CASE("constructor preconditions") {
  CHECK_THROWS_AS(CovarianceModel::gaussian(-1.0, 1.0), ValidationError);
  CHECK_THROWS_AS(CovarianceModel::gaussian(1.0, 0.0), ValidationError);
  CHECK_THROWS_AS(CovarianceModel::gaussian(1.0, 1.0, 3), ValidationError);
}

TEST_CASE("wavevector sampler follows the normalised spectrum") {
  const auto m = CovarianceModel::gaussian(1.0, 0.5, 2);
  std::mt19937_64 rng(11);
  const int n = 200000;
  double s0 = 0.0, s1 = 0.0, s01 = 0.0;
  for (int i = 0; i < n; ++i) {
    const DVec k = m.sample_wavevector(rng);
    s0 += k[0] * k[0];
    s1 += k[1] * k[1];
    s01 += k[0] * k[1];
  }
  // Normalised spectrum is N(0, I / l^2); E k_i^2 = 4.
  const double se = 4.0 * std::sqrt(2.0 / n);
  CHECK(std::fabs(s0 / n - 4.0) < 4 * se);
  CHECK(std::fabs(s1 / n - 4.0) < 4 * se);
  CHECK(std::fabs(s01 / n) < 4 * 4.0 / std::sqrt(n));
}
