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

#include "speckle/core.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

namespace speckle {

namespace {

bool finite(const DVec& v) { return std::isfinite(v[0]) && std::isfinite(v[1]); }

}  // namespace

void ScalingRegime::validate() const {
  if (d != 1 && d != 2) throw ValidationError("d must be 1 or 2");
  if (!(epsilon > 0.0) || !std::isfinite(epsilon)) throw ValidationError("epsilon must be > 0");
  if (!(eta > 0.0) || eta > 1.0) throw ValidationError("eta must be in (0, 1]");
  if (!(epsilon < eta)) throw ValidationError("epsilon must be < eta");
  if (!(omega0 > 0.0) || !std::isfinite(omega0)) throw ValidationError("omega0 must be > 0");
  if (!(z0 >= 0.0) || !std::isfinite(z0)) throw ValidationError("z0 must be >= 0");
  if (!finite(k0)) throw ValidationError("k0 must be finite");
  if (d == 1 && k0[1] != 0.0) throw ValidationError("k0[1] must be 0 when d = 1");
}

std::vector<std::string> ScalingRegime::warnings() const {
  std::vector<std::string> out;
  // Coupling eta ~ 1/log|log eps| is asymptotic; only flag gross mismatch.
  const double ll = std::log(std::fabs(std::log(epsilon)));
  if (ll > 0.0) {
    const double ref = 1.0 / ll;
    if (eta > 4.0 * ref || eta < 0.25 * ref) {
      std::ostringstream s;
      s << "eta=" << eta << " is far from 1/log|log eps|=" << ref;
      out.push_back(s.str());
    }
  }
  if (eta < 10.0 * epsilon) {
    std::ostringstream s;
    s << "eta/epsilon=" << eta / epsilon << " is small; O(eps/eta) corrections may be visible";
    out.push_back(s.str());
  }
  return out;
}

MappedPoint map_offsets(const ScalingRegime& regime, const QueryOffsets& q) {
  const double e = regime.epsilon;
  const double n = regime.eta;
  MappedPoint p;
  p.z = regime.z0 + e * n * q.h;
  p.omega = regime.omega0 + e * n * q.Omega;
  for (int i = 0; i < 2; ++i) {
    p.x[i] = q.r[i] / e + n * q.x[i];
    p.k[i] = regime.k0[i] + e * q.kappa[i];
  }
  return p;
}

QueryOffsets unmap_offsets(const ScalingRegime& regime, const MappedPoint& p, const DVec& r) {
  const double e = regime.epsilon;
  const double n = regime.eta;
  QueryOffsets q;
  q.r = r;
  q.h = (p.z - regime.z0) / (e * n);
  q.Omega = (p.omega - regime.omega0) / (e * n);
  for (int i = 0; i < 2; ++i) {
    q.x[i] = (p.x[i] - r[i] / e) / n;
    q.kappa[i] = (p.k[i] - regime.k0[i]) / e;
  }
  return q;
}

Grid::Grid(std::size_t n, double length, int d) : n_(n), length_(length), d_(d) {}

double Grid::dual_spacing() const { return 2.0 * std::numbers::pi / length_; }

double Grid::nyquist() const { return std::numbers::pi / spacing(); }

std::size_t Grid::size() const { return d_ == 1 ? n_ : n_ * n_; }

double Grid::cell_measure() const { return std::pow(spacing(), d_); }

double Grid::dual_cell_measure() const { return std::pow(dual_spacing(), d_); }

double Grid::coordinate(std::size_t j) const {
  return (static_cast<double>(j) - static_cast<double>(n_ / 2)) * spacing();
}

double Grid::wavenumber(std::size_t j) const {
  const auto jj = static_cast<long long>(j);
  const auto nn = static_cast<long long>(n_);
  const long long m = jj < nn / 2 ? jj : jj - nn;
  return static_cast<double>(m) * dual_spacing();
}

DVec Grid::position(std::size_t flat) const {
  if (d_ == 1) return {coordinate(flat), 0.0};
  return {coordinate(flat / n_), coordinate(flat % n_)};
}

DVec Grid::wavevector(std::size_t flat) const {
  if (d_ == 1) return {wavenumber(flat), 0.0};
  return {wavenumber(flat / n_), wavenumber(flat % n_)};
}

Grid build_grid(std::size_t n, double length, int d) {
  if (n < 8 || (n & (n - 1)) != 0) {
    throw ValidationError("grid size n=" + std::to_string(n) + " must be a power of two >= 8");
  }
  if (!(length > 0.0) || !std::isfinite(length)) throw ValidationError("grid length must be > 0");
  if (d != 1 && d != 2) throw ValidationError("grid dimension must be 1 or 2");
  return Grid(n, length, d);
}

double WaveField::energy() const {
  double s = 0.0;
  for (const auto& v : values) s += std::norm(v);
  return s * grid.cell_measure();
}

}  // namespace speckle
