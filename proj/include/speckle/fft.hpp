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

#include <complex>
#include <cstddef>
#include <memory>
#include <span>

namespace speckle {

/// In-place complex FFT on n (d=1) or n x n (d=2, row-major) samples.
/// forward() is the unnormalized DFT sum_j u_j e^{-2 pi i jk/n}; inverse() includes 1/N.
/// Plans are created with FFTW_ESTIMATE so results are bit-reproducible.
class FftPlan {
 public:
  FftPlan(std::size_t n, int d);
  ~FftPlan();
  FftPlan(const FftPlan&) = delete;
  FftPlan& operator=(const FftPlan&) = delete;
  FftPlan(FftPlan&&) noexcept;
  FftPlan& operator=(FftPlan&&) noexcept;

  std::size_t size() const { return total_; }

  void forward(std::span<std::complex<double>> data) const;
  void inverse(std::span<std::complex<double>> data) const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  std::size_t total_ = 0;
};

}  // namespace speckle
