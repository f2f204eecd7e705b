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

#include "speckle/jump_process.hpp"

#include <algorithm>
#include <cmath>

#include "speckle/parallel.hpp"
#include "speckle/rng.hpp"

namespace speckle {

JumpProcessParams make_jump_params(const CovarianceModel& model, double eta, double omega0) {
  if (!model.has_sampler()) throw ValidationError("no jump-law sampler for medium family " + model.family());
  if (!(model.r0() > 0.0)) throw ValidationError("jump process needs R(0) > 0");
  if (!(eta > 0.0)) throw ValidationError("eta must be > 0");
  if (!(omega0 > 0.0)) throw ValidationError("omega0 must be > 0");
  JumpProcessParams p;
  p.model = model;
  p.eta = eta;
  p.omega0 = omega0;
  p.rate = omega0 * omega0 * model.r0() / (4.0 * eta * eta);
  return p;
}

DVec JumpPath::at(double z) const {
  const auto it = std::upper_bound(times.begin(), times.end(), z);
  return positions[static_cast<std::size_t>(it - times.begin())];
}

JumpPath sample_path(const JumpProcessParams& params, const DVec& start, double z_from, double z_to,
                     std::mt19937_64& rng) {
  if (z_to < z_from) throw ValidationError("sample_path needs z_to >= z_from");
  JumpPath path;
  path.z_from = z_from;
  path.z_to = z_to;
  path.positions.push_back(start);
  std::exponential_distribution<double> gap(params.rate);
  double t = z_from;
  for (;;) {
    t += gap(rng);
    if (!(t < z_to)) break;
    const DVec k = params.model.sample_wavevector(rng);
    path.times.push_back(t);
    path.positions.push_back(path.positions.back() + params.eta * k);
  }
  return path;
}

double integrate_potential(const JumpPath& path, const PotentialSpec& potential) {
  double acc = 0.0;
  double from = path.z_from;
  for (std::size_t i = 0; i < path.positions.size(); ++i) {
    const double to = i < path.times.size() ? path.times[i] : path.z_to;
    acc += potential(path.positions[i]) * (to - from);
    from = to;
  }
  return acc;
}

MomentEstimate rho_estimator(const JumpProcessParams& params, const PotentialSpec& potential,
                             const InitialProfile& rho0, double z, double Z, const DVec& xi, std::size_t n_paths,
                             std::uint64_t seed, unsigned threads, std::size_t batch) {
  if (Z < z) throw ValidationError("rho_estimator needs Z >= z");
  if (n_paths < 2) throw ValidationError("rho_estimator needs at least 2 paths");
  std::vector<Complex> samples(n_paths);
  parallel_for(n_paths, threads, [&](std::size_t p) {
    auto rng = make_engine(seed, p, 0);
    const JumpPath path = sample_path(params, xi, z, Z, rng);
    samples[p] = rho0(path.end()) * std::polar(1.0, integrate_potential(path, potential));
  });
  return estimate_mean(samples, batch);
}

BrownianLimitReport brownian_limit_check(const JumpProcessParams& params, double z, std::size_t n_paths,
                                         std::uint64_t seed, unsigned threads, std::size_t batch) {
  if (n_paths < 2) throw ValidationError("brownian_limit_check needs at least 2 paths");
  const int d = params.dim();
  // Columns: x1^2, x1^4, x2^2, jump count.
  std::vector<std::vector<Complex>> cols(4, std::vector<Complex>(n_paths));
  parallel_for(n_paths, threads, [&](std::size_t p) {
    auto rng = make_engine(seed, p, 0);
    const JumpPath path = sample_path(params, DVec{0.0, 0.0}, 0.0, z, rng);
    const DVec x = path.end();
    cols[0][p] = x[0] * x[0];
    cols[1][p] = x[0] * x[0] * x[0] * x[0];
    cols[2][p] = x[1] * x[1];
    cols[3][p] = static_cast<double>(path.jumps());
  });
  BrownianLimitReport rep;
  rep.z = z;
  rep.eta = params.eta;
  auto pick = [](std::size_t c) { return [c](std::span<const Complex> m) { return m[c]; }; };
  rep.variance[0] = jackknife(cols, pick(0), batch);
  if (d == 2) rep.variance[1] = jackknife(cols, pick(2), batch);
  rep.excess_kurtosis = jackknife(
      cols, [](std::span<const Complex> m) { return m[1] / (m[0] * m[0]) - 3.0; }, batch);
  rep.fourth_cumulant = jackknife(
      cols, [](std::span<const Complex> m) { return m[1] - 3.0 * m[0] * m[0]; }, batch);
  rep.jump_count = jackknife(cols, pick(3), batch);

  const double ell = params.model.ell();
  const double k4 = 3.0 / std::pow(ell, 4);  // E[k_1^4] for the gaussian jump law
  const double eta = params.eta;
  rep.expected_variance = params.omega0 * params.omega0 * params.model.sigma2() * z / 4.0;
  rep.expected_fourth_cumulant = params.rate * z * std::pow(eta, 4) * k4;
  rep.expected_excess_kurtosis =
      rep.expected_variance > 0.0 ? rep.expected_fourth_cumulant / (rep.expected_variance * rep.expected_variance)
                                  : 0.0;
  rep.expected_jump_count = params.rate * z;
  return rep;
}

}  // namespace speckle
