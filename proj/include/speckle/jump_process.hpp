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
#include <vector>

#include "speckle/core.hpp"
#include "speckle/covariance.hpp"
#include "speckle/statistics.hpp"

namespace speckle {

/// Compound Poisson process in wavenumber space: jumps at rate
/// omega0^2 R(0) / (4 eta^2), each of size eta k with k ~ Rhat / ((2 pi)^d R(0)).
struct JumpProcessParams {
  double rate = 0.0;
  double eta = 1.0;
  double omega0 = 1.0;
  CovarianceModel model = CovarianceModel::gaussian(1.0, 1.0, 1);

  int dim() const { return model.dim(); }
};

/// Throws ValidationError if the model has no jump-law sampler or R(0) <= 0.
JumpProcessParams make_jump_params(const CovarianceModel& model, double eta, double omega0);

/// Piecewise-constant path. positions[0] is the start; positions[i] holds on
/// [times[i-1], times[i]) with times[-1] = z_from and times[size] = z_to.
struct JumpPath {
  double z_from = 0.0;
  double z_to = 0.0;
  std::vector<double> times;
  std::vector<DVec> positions;

  DVec at(double z) const;
  DVec end() const { return positions.back(); }
  std::size_t jumps() const { return times.size(); }
};

JumpPath sample_path(const JumpProcessParams& params, const DVec& start, double z_from, double z_to,
                     std::mt19937_64& rng);

/// V(xi) = Omega |xi|^2 / (2 omega0^2) + xi.zeta / omega0.
struct PotentialSpec {
  double Omega = 0.0;
  double omega0 = 1.0;
  DVec zeta{0.0, 0.0};

  double operator()(const DVec& xi) const {
    return Omega * norm2(xi) / (2.0 * omega0 * omega0) + dot(xi, zeta) / omega0;
  }
};

/// Exact integral of V along the path (constant on each segment).
double integrate_potential(const JumpPath& path, const PotentialSpec& potential);

using InitialProfile = std::function<Complex(const DVec&)>;

/// E[rho0(X(Z)) exp(i int_z^Z V(X(s)) ds) | X(z) = xi] over n_paths forward
/// paths. Path p uses make_engine(seed, p, 0).
MomentEstimate rho_estimator(const JumpProcessParams& params, const PotentialSpec& potential,
                             const InitialProfile& rho0, double z, double Z, const DVec& xi,
                             std::size_t n_paths, std::uint64_t seed, unsigned threads = 1,
                             std::size_t batch = 50);

struct BrownianLimitReport {
  double z = 0.0;
  double eta = 0.0;
  std::array<MomentEstimate, 2> variance;  // per component, E[(X_i(z) - X_i(0))^2]
  double expected_variance = 0.0;          // omega0^2 sigma2 z / 4
  MomentEstimate excess_kurtosis;          // first component
  double expected_excess_kurtosis = 0.0;   // compound-Poisson value
  MomentEstimate fourth_cumulant;          // first component
  double expected_fourth_cumulant = 0.0;   // rate z eta^4 E[k_1^4]
  MomentEstimate jump_count;
  double expected_jump_count = 0.0;
};

BrownianLimitReport brownian_limit_check(const JumpProcessParams& params, double z, std::size_t n_paths,
                                         std::uint64_t seed, unsigned threads = 1, std::size_t batch = 50);

}  // namespace speckle
