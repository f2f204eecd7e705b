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

#include "speckle/fft.hpp"

#include <fftw3.h>

#include <mutex>
#include <stdexcept>
#include <vector>

namespace speckle {

namespace {

// FFTW planner is not thread-safe; execution of distinct plans is.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

}  // namespace

struct FftPlan::Impl {
  fftw_plan fwd = nullptr;
  fftw_plan bwd = nullptr;

  ~Impl() {
    std::lock_guard<std::mutex> lock(planner_mutex());
    if (fwd) fftw_destroy_plan(fwd);
    if (bwd) fftw_destroy_plan(bwd);
  }
};

FftPlan::FftPlan(std::size_t n, int d) : impl_(std::make_unique<Impl>()) {
  if (d != 1 && d != 2) throw std::invalid_argument("FftPlan: d must be 1 or 2");
  total_ = d == 1 ? n : n * n;
  std::vector<std::complex<double>> scratch(total_);
  auto* p = reinterpret_cast<fftw_complex*>(scratch.data());
  const unsigned flags = FFTW_ESTIMATE | FFTW_UNALIGNED;
  const int ni = static_cast<int>(n);
  std::lock_guard<std::mutex> lock(planner_mutex());
  if (d == 1) {
    impl_->fwd = fftw_plan_dft_1d(ni, p, p, FFTW_FORWARD, flags);
    impl_->bwd = fftw_plan_dft_1d(ni, p, p, FFTW_BACKWARD, flags);
  } else {
    impl_->fwd = fftw_plan_dft_2d(ni, ni, p, p, FFTW_FORWARD, flags);
    impl_->bwd = fftw_plan_dft_2d(ni, ni, p, p, FFTW_BACKWARD, flags);
  }
  if (!impl_->fwd || !impl_->bwd) throw std::runtime_error("FftPlan: FFTW planning failed");
}

FftPlan::~FftPlan() = default;
FftPlan::FftPlan(FftPlan&&) noexcept = default;
FftPlan& FftPlan::operator=(FftPlan&&) noexcept = default;

void FftPlan::forward(std::span<std::complex<double>> data) const {
  if (data.size() != total_) throw std::invalid_argument("FftPlan: size mismatch");
  auto* p = reinterpret_cast<fftw_complex*>(data.data());
  fftw_execute_dft(impl_->fwd, p, p);
}

void FftPlan::inverse(std::span<std::complex<double>> data) const {
  if (data.size() != total_) throw std::invalid_argument("FftPlan: size mismatch");
  auto* p = reinterpret_cast<fftw_complex*>(data.data());
  fftw_execute_dft(impl_->bwd, p, p);
  const double s = 1.0 / static_cast<double>(total_);
  for (auto& v : data) v *= s;
}

}  // namespace speckle
