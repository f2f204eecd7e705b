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
#include "speckle/core.hpp"
#include "speckle/fft.hpp"
#include "speckle/parallel.hpp"
#include "speckle/quadrature.hpp"
#include "speckle/rng.hpp"

using namespace speckle;

TEST_CASE("regime accepts the default diffusive preset") {
  ScalingRegime r;
  r.epsilon = 0.01;
  r.eta = 0.25;
  CHECK_NOTHROW(r.validate());
}

TEST_CASE("regime rejects epsilon >= eta with a message") {
  ScalingRegime r;
  r.epsilon = 0.3;
  r.eta = 0.2;
  try {
    r.validate();
    FAIL("no throw");
  } catch (const ValidationError& e) {
    CHECK(std::string(e.what()).find("epsilon must be < eta") != std::string::npos);
  }
}

TEST_CASE("regime rejects out-of-range fields") {
  ScalingRegime r;
  r.d = 3;
  CHECK_THROWS_AS(r.validate(), ValidationError);
  r = {};
  r.eta = 1.5;
  CHECK_THROWS_AS(r.validate(), ValidationError);
  r = {};
  r.omega0 = 0.0;
  CHECK_THROWS_AS(r.validate(), ValidationError);
  r = {};
  r.z0 = -1.0;
  CHECK_THROWS_AS(r.validate(), ValidationError);
  r = {};
  r.k0 = {0.0, 1.0};
  CHECK_THROWS_AS(r.validate(), ValidationError);
}

TEST_CASE("warnings flag small eta/epsilon ratios but do not throw") {
  ScalingRegime r;
  r.epsilon = 0.1;
  r.eta = 0.125;
  CHECK_NOTHROW(r.validate());
  CHECK(!r.warnings().empty());
}

TEST_CASE("offset mapping hits the documented coordinates") {
  ScalingRegime r;
  r.epsilon = 0.01;
  r.eta = 0.25;
  r.z0 = 1.0;
  r.omega0 = 2.0;
  QueryOffsets q;
  q.h = 1.0;
  q.x = {0.0, 0.0};
  q.r = {0.5, 0.0};
  q.Omega = 2.0;
  q.kappa = {3.0, 0.0};
  const MappedPoint p = map_offsets(r, q);
  CHECK(p.z == doctest::Approx(1.0025).epsilon(1e-15));
  CHECK(p.x[0] == doctest::Approx(50.0).epsilon(1e-15));
  CHECK(p.omega == doctest::Approx(2.005).epsilon(1e-15));
  CHECK(p.k[0] == doctest::Approx(0.03).epsilon(1e-15));
}

TEST_CASE("offset mapping round-trips for random offsets") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  ScalingRegime r;
  r.d = 2;
  r.k0 = {0.3, -0.2};
  for (int trial = 0; trial < 200; ++trial) {
    QueryOffsets q{u(rng), {u(rng), u(rng)}, u(rng), {u(rng), u(rng)}, {u(rng), u(rng)}};
    const QueryOffsets back = unmap_offsets(r, map_offsets(r, q), q.r);
    CHECK(back.h == doctest::Approx(q.h).epsilon(1e-9));
    CHECK(back.Omega == doctest::Approx(q.Omega).epsilon(1e-9));
    for (int i = 0; i < 2; ++i) {
      CHECK(std::fabs(back.x[i] - q.x[i]) < 1e-9);
      CHECK(std::fabs(back.kappa[i] - q.kappa[i]) < 1e-9);
    }
  }
}

TEST_CASE("grid construction rules") {
  CHECK_THROWS_AS(build_grid(100, 1.0), ValidationError);
  CHECK_THROWS_AS(build_grid(4, 1.0), ValidationError);
  CHECK_THROWS_AS(build_grid(64, 0.0), ValidationError);
  const Grid g = build_grid(16, 8.0);
  CHECK(g.spacing() == 0.5);
  CHECK(g.coordinate(0) == -4.0);
  CHECK(g.coordinate(8) == 0.0);
  CHECK(g.wavenumber(1) == doctest::Approx(2 * std::numbers::pi / 8.0));
  CHECK(g.wavenumber(15) == doctest::Approx(-2 * std::numbers::pi / 8.0));
  CHECK(g.wavenumber(8) == doctest::Approx(-g.nyquist()));
  const Grid g2 = build_grid(8, 4.0, 2);
  CHECK(g2.size() == 64);
  CHECK(g2.position(9)[0] == g2.coordinate(1));
  CHECK(g2.position(9)[1] == g2.coordinate(1));
  CHECK(g2.cell_measure() == doctest::Approx(0.25));
}

TEST_CASE("fft round trip and normalisation") {
  for (int d : {1, 2}) {
    const std::size_t n = 16;
    FftPlan plan(n, d);
    std::mt19937_64 rng(3);
    std::normal_distribution<double> g;
    std::vector<Complex> a(plan.size());
    for (auto& v : a) v = {g(rng), g(rng)};
    auto b = a;
    plan.forward(b);
    // Parseval for the unnormalised forward transform.
    double ea = 0.0, eb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
      ea += std::norm(a[i]);
      eb += std::norm(b[i]);
    }
    CHECK(eb == doctest::Approx(ea * a.size()).epsilon(1e-12));
    plan.inverse(b);
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(std::abs(a[i] - b[i]) < 1e-12);
  }
}

TEST_CASE("fft matches a direct DFT") {
  const std::size_t n = 8;
  FftPlan plan(n, 1);
  std::vector<Complex> a(n);
  for (std::size_t j = 0; j < n; ++j) a[j] = {std::sin(0.3 * j), std::cos(1.1 * j)};
  auto b = a;
  plan.forward(b);
  for (std::size_t k = 0; k < n; ++k) {
    Complex s = 0.0;
    for (std::size_t j = 0; j < n; ++j) s += a[j] * std::polar(1.0, -2.0 * std::numbers::pi * j * k / n);
    CHECK(std::abs(s - b[k]) < 1e-12);
  }
}

TEST_CASE("engines are reproducible and streams differ") {
  auto a = make_engine(1, 2, 3);
  auto b = make_engine(1, 2, 3);
  auto c = make_engine(1, 2, 4);
  auto d = make_engine(1, 3, 3);
  const auto va = a();
  CHECK(va == b());
  CHECK(va != c());
  CHECK(va != d());
}

TEST_CASE("parallel_for visits every index and propagates errors") {
  std::vector<int> hits(1000, 0);
  parallel_for(hits.size(), 4, [&](std::size_t i) { hits[i] += 1; });
  for (int h : hits) CHECK(h == 1);
  CHECK_THROWS_AS(parallel_for(10, 3, [](std::size_t i) {
                    if (i == 5) throw std::runtime_error("boom");
                  }),
                  std::runtime_error);
}

TEST_CASE("gauss-legendre integrates polynomials exactly") {
  const auto rule = gauss_legendre(8, 0.0, 2.0);
  double s = 0.0;
  for (std::size_t i = 0; i < rule.nodes.size(); ++i) s += rule.weights[i] * std::pow(rule.nodes[i], 15);
  CHECK(s == doctest::Approx(std::pow(2.0, 16) / 16.0).epsilon(1e-13));
}

TEST_CASE("compensated sum survives cancellation") {
  CompensatedSum s;
  s.add(1e16);
  for (int i = 0; i < 1000; ++i) s.add(1.0);
  s.add(-1e16);
  CHECK(s.value() == 1000.0);
}
