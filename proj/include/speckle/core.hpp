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

#include <array>
#include <complex>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace speckle {

using Complex = std::complex<double>;

/// Transverse vector. Only the first `d` components are meaningful; the
/// remaining ones are kept at zero.
using DVec = std::array<double, 2>;

inline double dot(const DVec& a, const DVec& b) { return a[0] * b[0] + a[1] * b[1]; }
inline double norm2(const DVec& a) { return dot(a, a); }
inline DVec operator+(const DVec& a, const DVec& b) { return {a[0] + b[0], a[1] + b[1]}; }
inline DVec operator-(const DVec& a, const DVec& b) { return {a[0] - b[0], a[1] - b[1]}; }
inline DVec operator*(double s, const DVec& a) { return {s * a[0], s * a[1]}; }

/// Thrown when inputs violate a documented precondition.
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Thrown when a numerical guard trips (overflow, divergence, under-resolution).
class NumericalGuardError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Parameters of the weak-coupling / diffusive scaling.
struct ScalingRegime {
  double epsilon = 0.01;
  double eta = 0.25;
  double omega0 = 1.0;
  DVec k0{0.0, 0.0};
  double z0 = 1.0;
  int d = 1;

  /// Throws ValidationError when an invariant is violated.
  void validate() const;

  /// Non-fatal remarks, e.g. when eta is far from (log|log eps|)^-1.
  std::vector<std::string> warnings() const;

  bool operator==(const ScalingRegime&) const = default;
};

/// Offsets around the macroscopic point (z0, r, omega0, k0).
struct QueryOffsets {
  double h = 0.0;
  DVec x{0.0, 0.0};
  double Omega = 0.0;
  DVec kappa{0.0, 0.0};
  DVec r{0.0, 0.0};
};

/// A point in physical simulation coordinates.
struct MappedPoint {
  double z = 0.0;
  DVec x{0.0, 0.0};
  double omega = 0.0;
  DVec k{0.0, 0.0};
};

/// (z0 + eps*eta*h, r/eps + eta*x, omega0 + eps*eta*Omega, k0 + eps*kappa)
MappedPoint map_offsets(const ScalingRegime& regime, const QueryOffsets& q);

/// Inverse of map_offsets for a fixed macroscopic position r.
QueryOffsets unmap_offsets(const ScalingRegime& regime, const MappedPoint& p, const DVec& r);

/// Periodic transverse grid with n points per dimension on [-L/2, L/2).
class Grid {
 public:
  Grid() = default;
  Grid(std::size_t n, double length, int d = 1);

  std::size_t n() const { return n_; }
  int dim() const { return d_; }
  double length() const { return length_; }
  double spacing() const { return length_ / static_cast<double>(n_); }
  double dual_spacing() const;
  double nyquist() const;
  /// Total number of samples, n^d.
  std::size_t size() const;
  /// Area (or length) of one cell, spacing^d.
  double cell_measure() const;
  /// Area of one dual-grid cell, (2*pi/L)^d.
  double dual_cell_measure() const;

  /// Coordinate of index j along one axis: (j - n/2) * spacing.
  double coordinate(std::size_t j) const;
  /// Wavenumber of index j along one axis in FFT order.
  double wavenumber(std::size_t j) const;

  DVec position(std::size_t flat) const;
  DVec wavevector(std::size_t flat) const;

  bool operator==(const Grid& other) const {
    return n_ == other.n_ && d_ == other.d_ && length_ == other.length_;
  }

 private:
  std::size_t n_ = 0;
  double length_ = 0.0;
  int d_ = 1;
};

/// Throws ValidationError for non-power-of-two n, n < 8, or L <= 0.
Grid build_grid(std::size_t n, double length, int d = 1);

/// Complex amplitude sampled on a periodic grid at axial position z.
struct WaveField {
  std::vector<Complex> values;
  double z = 0.0;
  double omega = 1.0;
  DVec k{0.0, 0.0};
  Grid grid;

  /// sum |u|^2 dx^d
  double energy() const;
};

}  // namespace speckle
