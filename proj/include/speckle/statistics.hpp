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

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "speckle/core.hpp"

namespace speckle {

/// Complex Monte Carlo estimate. stderr is sqrt(Var Re + Var Im) of the
/// estimator, so |value - truth| < 3 stderr is the acceptance test.
struct MomentEstimate {
  Complex value{};
  double stderr = 0.0;
  std::size_t n_samples = 0;
};

/// p plain and q conjugated field factors evaluated at the listed offsets.
struct MomentRequest {
  int p = 1;
  int q = 1;
  std::vector<QueryOffsets> points;

  /// Throws ValidationError unless 1 <= p + q <= 4 and points.size() == p + q.
  void validate() const;
};

/// Field values of an ensemble laid out as [realization][translate][point].
/// Translates are lateral shifts of the whole point set; their products are
/// averaged within a realization before the across-realization statistics.
class FieldSamples {
 public:
  FieldSamples(std::size_t realizations, std::size_t translates, std::size_t points);

  std::size_t realizations() const { return n_real_; }
  std::size_t translates() const { return n_trans_; }
  std::size_t points() const { return n_pts_; }

  Complex& at(std::size_t r, std::size_t t, std::size_t k) { return data_[(r * n_trans_ + t) * n_pts_ + k]; }
  const Complex& at(std::size_t r, std::size_t t, std::size_t k) const {
    return data_[(r * n_trans_ + t) * n_pts_ + k];
  }

  /// Per-realization translate average of prod_{j in plain} u_j * prod_{l in conj} conj(u_l).
  std::vector<Complex> products(std::span<const std::size_t> plain, std::span<const std::size_t> conj) const;

 private:
  std::size_t n_real_, n_trans_, n_pts_;
  std::vector<Complex> data_;
};

/// Jackknife over batch means for a smooth statistic of k sample columns.
/// columns[c][i] is column c of realization i. With fewer than two full
/// batches the batch size falls back to 1.
MomentEstimate jackknife(const std::vector<std::vector<Complex>>& columns,
                         const std::function<Complex(std::span<const Complex>)>& statistic,
                         std::size_t batch = 50);

/// Mean of per-realization samples with jackknife standard error. The value
/// is computed with compensated summation and does not depend on order.
MomentEstimate estimate_mean(std::span<const Complex> samples, std::size_t batch = 50);

/// samples[i] holds the p + q field values of realization i at the request
/// points; the first p enter plain, the remaining q conjugated.
MomentEstimate estimate_moment(std::span<const std::vector<Complex>> samples, const MomentRequest& req,
                               std::size_t batch = 50);

/// Same, with translate averaging; points are columns of `samples`.
MomentEstimate estimate_moment(const FieldSamples& samples, int p, int q, std::size_t batch = 50);

/// Permutation sum over pi of prod_j m11[j][pi(j)]; zero when p != q. p <= 4.
Complex gaussian_summation_prediction(const std::vector<std::vector<Complex>>& m11, int p, int q);

struct GaussianityReport {
  MomentEstimate mu22;          // E |u1|^2 |u2|^2
  Complex prediction{};         // m11(1,1) m11(2,2) + m11(1,2) m11(2,1) from the same ensemble
  MomentEstimate deviation;     // mu22 - prediction, jackknifed jointly
  MomentEstimate mu21;          // E u1 u2 conj(u1)
  MomentEstimate mu20;          // E u1 u2
  MomentEstimate contrast;      // sqrt(E|u|^4 - (E|u|^2)^2) / E|u|^2 over both points
  double z_deviation = 0.0;
  double z_mu21 = 0.0;
  double z_mu20 = 0.0;
  double z_contrast = 0.0;      // (contrast - 1) / stderr
};

/// Two-point fourth-order check; `samples` must have exactly two points.
GaussianityReport gaussianity_report(const FieldSamples& samples, std::size_t batch = 50);

struct FirstMomentReport {
  MomentEstimate mean_ratio;  // E[u / u_free], complex
  double ratio = 0.0;         // |E[u / u_free]|
  double expected = 0.0;      // exp(-omega^2 R(0) z / (8 eta^2))
  double z_score = 0.0;
};

/// `samples` has one point; `free_field[t]` is the noiseless field at translate t.
FirstMomentReport first_moment_check(const FieldSamples& samples, std::span<const Complex> free_field,
                                     double expected, std::size_t batch = 50);

/// exp(-omega^2 R(0) z / (8 eta^2)).
double mean_field_damping(double omega, double r0, double z, double eta);

/// Partial sum over n <= n_max of c^n (2n)! / (n! n_1! ... n_p!) over
/// compositions n_1 + ... + n_p = 2n, accumulated in the log domain.
/// n_max < 0 selects the smallest n_max whose tail bound is below 1e-14 e^{p^2 c}.
double factorial_sum_identity(int p, double c, int n_max = -1);

/// Truncation chosen by factorial_sum_identity for n_max < 0.
int factorial_sum_truncation(int p, double c);

}  // namespace speckle
