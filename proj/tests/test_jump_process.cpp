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
#include <random>

#include "doctest.h"
#include "oracles.hpp"
#include "speckle/jump_process.hpp"

using namespace speckle;

TEST_CASE("jump rate follows the diffusive scaling") {
  const auto m = CovarianceModel::gaussian(2.0, 0.5);
  const auto p = make_jump_params(m, 0.25, 1.5);
  CHECK(p.rate == doctest::Approx(1.5 * 1.5 * 2.0 / (4.0 * 0.0625)));
  CHECK_THROWS_AS(make_jump_params(m, 0.0, 1.0), ValidationError);
}

TEST_CASE("paths are piecewise constant with ordered jump times") {
  const auto p = make_jump_params(CovarianceModel::gaussian(1.0, 1.0), 0.25, 1.0);
  std::mt19937_64 rng(1);
  const JumpPath path = sample_path(p, {0.3, 0.0}, 0.5, 2.0, rng);
  CHECK(path.at(0.5)[0] == 0.3);
  for (std::size_t i = 1; i < path.times.size(); ++i) CHECK(path.times[i] > path.times[i - 1]);
  for (std::size_t i = 0; i < path.times.size(); ++i) {
    CHECK(path.times[i] > 0.5);
    CHECK(path.times[i] <= 2.0);
    CHECK(path.at(path.times[i])[0] == path.positions[i + 1][0]);
  }
  CHECK(path.end()[0] == path.positions.back()[0]);
  CHECK(path.positions.front()[1] == 0.0);
  CHECK(path.end()[1] == 0.0);  // d = 1 keeps the second axis at rest
}

TEST_CASE("potential integral is exact per segment") {
  JumpPath path;
  path.z_from = 0.0;
  path.z_to = 1.0;
  path.times = {0.25, 0.7};
  path.positions = {{1.0, 0.0}, {-2.0, 0.0}, {0.5, 0.0}};
  const PotentialSpec V{2.0, 1.0, {0.5, 0.0}};
  const double expected = 0.25 * V({1.0, 0.0}) + 0.45 * V({-2.0, 0.0}) + 0.3 * V({0.5, 0.0});
  CHECK(integrate_potential(path, V) == doctest::Approx(expected).epsilon(1e-15));
}

TEST_CASE("increment variance matches the Brownian limit") {
  const auto p = make_jump_params(CovarianceModel::gaussian(1.0, 1.0), 0.25, 1.0);
  const auto rep = brownian_limit_check(p, 1.0, 40000, 9, 1, 50);
  CHECK(rep.expected_variance == doctest::Approx(0.25));
  CHECK(std::fabs(rep.variance[0].value.real() - rep.expected_variance) < 3.5 * rep.variance[0].stderr);
  CHECK(std::fabs(rep.jump_count.value.real() - rep.expected_jump_count) < 3.5 * rep.jump_count.stderr);
  CHECK(std::fabs(rep.excess_kurtosis.value.real() - rep.expected_excess_kurtosis) < 3.5 * rep.excess_kurtosis.stderr);
  CHECK(rep.expected_excess_kurtosis == doctest::Approx(3.0 / rep.expected_jump_count));
}

TEST_CASE("two-dimensional components are independent and equal in variance") {
  const auto p = make_jump_params(CovarianceModel::gaussian(1.0, 1.0, 2), 0.5, 1.0);
  const auto rep = brownian_limit_check(p, 1.0, 40000, 4, 1, 50);
  for (int i = 0; i < 2; ++i) CHECK(std::fabs(rep.variance[i].value.real() - 0.25) < 3.5 * rep.variance[i].stderr);
}

TEST_CASE("reproducible across thread counts") {
  const auto p = make_jump_params(CovarianceModel::gaussian(1.0, 1.0), 0.25, 1.0);
  const PotentialSpec V{1.0, 1.0, {0.5, 0.0}};
  auto rho0 = [](const DVec& x) { return Complex(std::exp(-x[0] * x[0] / 8.0), 0.0); };
  const auto a = rho_estimator(p, V, rho0, 0.0, 1.0, {0.2, 0.0}, 2000, 5, 1, 50);
  const auto b = rho_estimator(p, V, rho0, 0.0, 1.0, {0.2, 0.0}, 2000, 5, 3, 50);
  CHECK(a.value == b.value);
  CHECK(a.stderr == b.stderr);
}

TEST_CASE("Riccati oracle reduces to heat-kernel smoothing without potential") {
  const double D = 0.25, s = 2.0, Z = 1.0, xi = 0.7;
  const double v = s * s + D * Z;
  const Complex ex = s / std::sqrt(v) * std::exp(-xi * xi / (2 * v));
  CHECK(std::abs(oracle::brownian_rho(D, 0.0, 1.0, 0.0, s, Z, xi) - ex) < 1e-12);
}

TEST_CASE("Feynman-Kac estimator approaches the Brownian value for small eta") {
  const auto m = CovarianceModel::gaussian(1.0, 1.0);
  const auto p = make_jump_params(m, 0.1, 1.0);
  const PotentialSpec V{1.0, 1.0, {0.5, 0.0}};
  auto rho0 = [](const DVec& x) { return Complex(std::exp(-x[0] * x[0] / 8.0), 0.0); };
  const double D = m.sigma2() / 4.0;
  for (double xi : {0.0, 0.8}) {
    const auto e = rho_estimator(p, V, rho0, 0.0, 1.0, {xi, 0.0}, 20000, 21, 1, 50);
    const Complex ref = oracle::brownian_rho(D, 1.0, 1.0, 0.5, 2.0, 1.0, xi);
    INFO("xi " << xi << " est " << e.value << " se " << e.stderr << " ref " << ref);
    CHECK(std::abs(e.value - ref) < 3.5 * e.stderr);
  }
}

TEST_CASE("estimator preconditions") {
  const auto p = make_jump_params(CovarianceModel::gaussian(1.0, 1.0), 0.25, 1.0);
  auto rho0 = [](const DVec&) { return Complex(1.0, 0.0); };
  CHECK_THROWS_AS(rho_estimator(p, {}, rho0, 1.0, 0.5, {0.0, 0.0}, 100, 1), ValidationError);
  CHECK_THROWS_AS(rho_estimator(p, {}, rho0, 0.0, 1.0, {0.0, 0.0}, 1, 1), ValidationError);
}
