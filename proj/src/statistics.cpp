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

#include "speckle/statistics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "speckle/quadrature.hpp"

namespace speckle {

namespace {

class ComplexSum {
 public:
  void add(Complex v) {
    re_.add(v.real());
    im_.add(v.imag());
  }
  Complex value() const { return {re_.value(), im_.value()}; }

 private:
  CompensatedSum re_, im_;
};

double z_of(Complex deviation, double se) {
  if (se > 0.0) return std::abs(deviation) / se;
  return std::abs(deviation) == 0.0 ? 0.0 : INFINITY;
}

}  // namespace

void MomentRequest::validate() const {
  if (p < 0 || q < 0 || p + q < 1 || p + q > 4) throw ValidationError("moment order must satisfy 1 <= p + q <= 4");
  if (points.size() != static_cast<std::size_t>(p + q)) throw ValidationError("moment request needs p + q points");
}

FieldSamples::FieldSamples(std::size_t realizations, std::size_t translates, std::size_t points)
    : n_real_(realizations), n_trans_(translates), n_pts_(points), data_(realizations * translates * points) {}

std::vector<Complex> FieldSamples::products(std::span<const std::size_t> plain,
                                            std::span<const std::size_t> conj) const {
  std::vector<Complex> out(n_real_);
  for (std::size_t r = 0; r < n_real_; ++r) {
    ComplexSum acc;
    for (std::size_t t = 0; t < n_trans_; ++t) {
      Complex v(1.0, 0.0);
      for (auto k : plain) v *= at(r, t, k);
      for (auto k : conj) v *= std::conj(at(r, t, k));
      acc.add(v);
    }
    out[r] = acc.value() / static_cast<double>(n_trans_);
  }
  return out;
}

MomentEstimate jackknife(const std::vector<std::vector<Complex>>& columns,
                         const std::function<Complex(std::span<const Complex>)>& statistic, std::size_t batch) {
  if (columns.empty()) throw ValidationError("jackknife needs at least one column");
  const std::size_t n = columns[0].size();
  for (const auto& c : columns)
    if (c.size() != n) throw ValidationError("jackknife columns differ in length");
  if (n < 2) throw ValidationError("insufficient samples: at least 2 realizations required");
  if (batch == 0) batch = 1;
  std::size_t nb = n / batch;
  if (nb < 2) nb = n;
  const std::size_t k = columns.size();

  std::vector<Complex> total(k);
  std::vector<std::vector<Complex>> bsum(nb, std::vector<Complex>(k));
  std::vector<std::size_t> bcount(nb);
  for (std::size_t c = 0; c < k; ++c) {
    ComplexSum all;
    for (std::size_t j = 0; j < nb; ++j) {
      const std::size_t lo = j * n / nb, hi = (j + 1) * n / nb;
      ComplexSum part;
      for (std::size_t i = lo; i < hi; ++i) {
        part.add(columns[c][i]);
        all.add(columns[c][i]);
      }
      bsum[j][c] = part.value();
      bcount[j] = hi - lo;
    }
    total[c] = all.value();
  }
  std::vector<Complex> mean(k);
  for (std::size_t c = 0; c < k; ++c) mean[c] = total[c] / static_cast<double>(n);

  MomentEstimate est;
  est.n_samples = n;
  est.value = statistic(mean);
  std::vector<Complex> theta(nb);
  std::vector<Complex> loo(k);
  ComplexSum tsum;
  for (std::size_t j = 0; j < nb; ++j) {
    for (std::size_t c = 0; c < k; ++c) loo[c] = (total[c] - bsum[j][c]) / static_cast<double>(n - bcount[j]);
    theta[j] = statistic(loo);
    tsum.add(theta[j]);
  }
  const Complex tbar = tsum.value() / static_cast<double>(nb);
  CompensatedSum var;
  for (const auto& t : theta) var.add(std::norm(t - tbar));
  est.stderr = std::sqrt(static_cast<double>(nb - 1) / static_cast<double>(nb) * var.value());
  return est;
}

MomentEstimate estimate_mean(std::span<const Complex> samples, std::size_t batch) {
  std::vector<std::vector<Complex>> cols{std::vector<Complex>(samples.begin(), samples.end())};
  return jackknife(cols, [](std::span<const Complex> m) { return m[0]; }, batch);
}

MomentEstimate estimate_moment(std::span<const std::vector<Complex>> samples, const MomentRequest& req,
                               std::size_t batch) {
  req.validate();
  const std::size_t np = static_cast<std::size_t>(req.p + req.q);
  std::vector<Complex> prod(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (samples[i].size() != np) throw ValidationError("realization sample has the wrong number of points");
    Complex v(1.0, 0.0);
    for (std::size_t j = 0; j < np; ++j) v *= (static_cast<int>(j) < req.p) ? samples[i][j] : std::conj(samples[i][j]);
    prod[i] = v;
  }
  return estimate_mean(prod, batch);
}

MomentEstimate estimate_moment(const FieldSamples& samples, int p, int q, std::size_t batch) {
  if (p < 0 || q < 0 || p + q < 1 || p + q > 4) throw ValidationError("moment order must satisfy 1 <= p + q <= 4");
  if (samples.points() != static_cast<std::size_t>(p + q)) throw ValidationError("sample point count != p + q");
  std::vector<std::size_t> plain(static_cast<std::size_t>(p)), conj(static_cast<std::size_t>(q));
  std::iota(plain.begin(), plain.end(), 0);
  std::iota(conj.begin(), conj.end(), static_cast<std::size_t>(p));
  return estimate_mean(samples.products(plain, conj), batch);
}

Complex gaussian_summation_prediction(const std::vector<std::vector<Complex>>& m11, int p, int q) {
  if (p != q) return 0.0;
  if (p < 1 || p > 4) throw ValidationError("permutation rule implemented for 1 <= p <= 4");
  if (m11.size() != static_cast<std::size_t>(p)) throw ValidationError("second-moment matrix must be p x p");
  for (const auto& row : m11)
    if (row.size() != static_cast<std::size_t>(p)) throw ValidationError("second-moment matrix must be p x p");
  std::vector<int> perm(static_cast<std::size_t>(p));
  std::iota(perm.begin(), perm.end(), 0);
  Complex sum = 0.0;
  do {
    Complex term(1.0, 0.0);
    for (int j = 0; j < p; ++j) term *= m11[j][perm[j]];
    sum += term;
  } while (std::next_permutation(perm.begin(), perm.end()));
  return sum;
}

GaussianityReport gaussianity_report(const FieldSamples& s, std::size_t batch) {
  if (s.points() != 2) throw ValidationError("gaussianity report needs exactly two points");
  const std::size_t R = s.realizations();
  // Columns: |u1|^2, |u2|^2, u1 conj(u2), |u1|^2|u2|^2, u1 u2 conj(u1), u1 u2, mean |u|^4, mean |u|^2.
  std::vector<std::vector<Complex>> cols(8, std::vector<Complex>(R));
  for (std::size_t r = 0; r < R; ++r) {
    std::array<ComplexSum, 8> acc;
    for (std::size_t t = 0; t < s.translates(); ++t) {
      const Complex u1 = s.at(r, t, 0), u2 = s.at(r, t, 1);
      const double i1 = std::norm(u1), i2 = std::norm(u2);
      acc[0].add(i1);
      acc[1].add(i2);
      acc[2].add(u1 * std::conj(u2));
      acc[3].add(i1 * i2);
      acc[4].add(u1 * u2 * std::conj(u1));
      acc[5].add(u1 * u2);
      acc[6].add(0.5 * (i1 * i1 + i2 * i2));
      acc[7].add(0.5 * (i1 + i2));
    }
    for (std::size_t c = 0; c < 8; ++c) cols[c][r] = acc[c].value() / static_cast<double>(s.translates());
  }
  auto pick = [](std::size_t c) { return [c](std::span<const Complex> m) { return m[c]; }; };
  auto predict = [](std::span<const Complex> m) {
    return gaussian_summation_prediction({{m[0], m[2]}, {std::conj(m[2]), m[1]}}, 2, 2);
  };
  GaussianityReport rep;
  rep.mu22 = jackknife(cols, pick(3), batch);
  rep.prediction = jackknife(cols, predict, batch).value;
  rep.deviation = jackknife(cols, [&](std::span<const Complex> m) { return m[3] - predict(m); }, batch);
  rep.mu21 = jackknife(cols, pick(4), batch);
  rep.mu20 = jackknife(cols, pick(5), batch);
  rep.contrast = jackknife(
      cols,
      [](std::span<const Complex> m) {
        const double i4 = m[6].real(), i2 = m[7].real();
        return Complex(std::sqrt(std::max(i4 - i2 * i2, 0.0)) / i2, 0.0);
      },
      batch);
  rep.z_deviation = z_of(rep.deviation.value, rep.deviation.stderr);
  rep.z_mu21 = z_of(rep.mu21.value, rep.mu21.stderr);
  rep.z_mu20 = z_of(rep.mu20.value, rep.mu20.stderr);
  rep.z_contrast = z_of(rep.contrast.value - 1.0, rep.contrast.stderr);
  return rep;
}

double mean_field_damping(double omega, double r0, double z, double eta) {
  return std::exp(-omega * omega * r0 * z / (8.0 * eta * eta));
}

FirstMomentReport first_moment_check(const FieldSamples& samples, std::span<const Complex> free_field,
                                     double expected, std::size_t batch) {
  if (samples.points() != 1) throw ValidationError("first moment check needs one point per translate");
  if (free_field.size() != samples.translates()) throw ValidationError("free field size != translate count");
  std::vector<Complex> ratio(samples.realizations());
  for (std::size_t r = 0; r < samples.realizations(); ++r) {
    ComplexSum acc;
    for (std::size_t t = 0; t < samples.translates(); ++t) acc.add(samples.at(r, t, 0) / free_field[t]);
    ratio[r] = acc.value() / static_cast<double>(samples.translates());
  }
  FirstMomentReport rep;
  rep.mean_ratio = estimate_mean(ratio, batch);
  rep.ratio = std::abs(rep.mean_ratio.value);
  rep.expected = expected;
  rep.z_score = z_of(rep.ratio - expected, rep.mean_ratio.stderr);
  return rep;
}

namespace {

// Sum over compositions of `remaining` into `parts` of exp(-sum lgamma(n_i + 1)).
void compositions(int parts, int remaining, double log_acc, double log_base, CompensatedSum& out) {
  if (parts == 1) {
    out.add(std::exp(log_base + log_acc - std::lgamma(remaining + 1.0)));
    return;
  }
  for (int k = 0; k <= remaining; ++k) {
    compositions(parts - 1, remaining - k, log_acc - std::lgamma(k + 1.0), log_base, out);
  }
}

}  // namespace

int factorial_sum_truncation(int p, double c) {
  if (p < 1) throw ValidationError("p must be >= 1");
  if (!(c >= 0.0) || !std::isfinite(c)) throw ValidationError("c must be finite and >= 0");
  if (c == 0.0) return 0;
  // The n-th block sums to x^n / n! with x = p^2 c; bound the tail by a geometric series.
  const double x = p * p * c;
  const double log_target = x + std::log(1e-14);
  for (int n = 0; n < 100000; ++n) {
    const double m = n + 1.0;
    if (m + 1.0 > x) {
      const double log_tail = m * std::log(x) - std::lgamma(m + 1.0) - std::log(1.0 - x / (m + 1.0));
      if (log_tail < log_target) return n;
    }
  }
  throw NumericalGuardError("factorial sum truncation did not converge");
}

double factorial_sum_identity(int p, double c, int n_max) {
  if (p < 1) throw ValidationError("p must be >= 1");
  if (!(c >= 0.0) || !std::isfinite(c)) throw ValidationError("c must be finite and >= 0");
  if (n_max < 0) n_max = factorial_sum_truncation(p, c);
  CompensatedSum sum;
  sum.add(1.0);
  if (c == 0.0) return 1.0;
  const double lc = std::log(c);
  for (int n = 1; n <= n_max; ++n) {
    const double log_base = n * lc + std::lgamma(2.0 * n + 1.0) - std::lgamma(n + 1.0);
    if (!std::isfinite(log_base)) throw NumericalGuardError("factorial sum overflow");
    compositions(p, 2 * n, 0.0, log_base, sum);
  }
  return sum.value();
}

}  // namespace speckle
