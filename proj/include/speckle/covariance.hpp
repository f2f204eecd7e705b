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

#include <functional>
#include <random>
#include <string>
#include <vector>

#include "speckle/core.hpp"

namespace speckle {

/// Lateral covariance R of the random medium together with its spectrum.
/// The Hessian of R at the origin is -sigma2 * Identity.
class CovarianceModel {
 public:
  using Kernel = std::function<double(const DVec&)>;

  /// R(x) = r0 exp(-|x|^2 / (2 ell^2)).
  static CovarianceModel gaussian(double r0, double ell, int d = 1);

  /// Arbitrary (R, Rhat) pair. `scale` is a correlation length used to size
  /// quadrature and validation grids. No sampler for the jump law is provided.
  static CovarianceModel custom(std::string family, Kernel R, Kernel Rhat, double r0, double sigma2,
                                double scale, int d = 1);

  const std::string& family() const { return family_; }
  int dim() const { return d_; }
  double r0() const { return r0_; }
  double ell() const { return ell_; }
  double sigma2() const { return sigma2_; }
  bool has_sampler() const { return family_ == "gaussian"; }

  double R(const DVec& x) const { return R_(x); }
  double Rhat(const DVec& k) const { return Rhat_(k); }
  /// R(x) - R(0), non-positive.
  double Q(const DVec& x) const { return R_(x) - r0_; }

  /// Draws k with density Rhat(k) / ((2 pi)^d R(0)).
  DVec sample_wavevector(std::mt19937_64& rng) const;

 private:
  std::string family_;
  Kernel R_;
  Kernel Rhat_;
  double r0_ = 0.0;
  double ell_ = 1.0;
  double sigma2_ = 0.0;
  int d_ = 1;
};

inline double eval_R(const CovarianceModel& m, const DVec& x) { return m.R(x); }
inline double eval_Rhat(const CovarianceModel& m, const DVec& k) { return m.Rhat(k); }
inline double eval_Q(const CovarianceModel& m, const DVec& x) { return m.Q(x); }

struct CovarianceCheck {
  std::string name;
  bool passed = false;
  double measured = 0.0;
  double expected = 0.0;
  std::string detail;
};

struct CovarianceReport {
  std::vector<CovarianceCheck> checks;
  bool all_passed() const;
};

/// Medium assumptions: Rhat >= 0, R even, strict maximum at 0 with negative
/// definite Hessian, R(0) and Sigma recovered from the spectrum, integrability
/// of R along each coordinate axis.
CovarianceReport validate(const CovarianceModel& model);

/// (2 pi)^-d * integral of Rhat, by trapezoid quadrature.
double quadrature_R0(const CovarianceModel& model);
/// (2 pi)^-d * integral of k_i k_j Rhat.
std::array<std::array<double, 2>, 2> quadrature_Sigma(const CovarianceModel& model);

}  // namespace speckle
