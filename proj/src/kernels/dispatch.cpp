// Copyright 2026 The fedspd Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <atomic>
#include <cmath>
#include <cstdlib>
#include <string_view>

#include "fedspd/kernels.hpp"

namespace fedspd::simd {
namespace {

const KernelTable* Detect() {
  const char* forced = std::getenv("FEDSPD_KERNELS");
  if (forced != nullptr && std::string_view(forced) == "scalar") {
    return &ScalarKernels();
  }
  if (const KernelTable* avx2 = Avx2Kernels()) return avx2;
  return &ScalarKernels();
}

std::atomic<const KernelTable*>& Slot() {
  static std::atomic<const KernelTable*> slot{Detect()};
  return slot;
}

}  // namespace

const KernelTable& Active() { return *Slot().load(std::memory_order_acquire); }

void SetActive(const KernelTable& table) {
  Slot().store(&table, std::memory_order_release);
}

double Dot(std::span<const double> a, std::span<const double> b) {
  return Active().dot(a.data(), b.data(), a.size());
}

double SquaredNorm(std::span<const double> a) {
  return Active().squared_norm(a.data(), a.size());
}

double Norm(std::span<const double> a) { return std::sqrt(SquaredNorm(a)); }

double SquaredDistance(std::span<const double> a, std::span<const double> b) {
  return Active().squared_distance(a.data(), b.data(), a.size());
}

double AbsSum(std::span<const double> a) {
  return Active().abs_sum(a.data(), a.size());
}

void Axpy(double alpha, std::span<const double> x, std::span<double> y) {
  Active().axpy(alpha, x.data(), y.data(), x.size());
}

void Scale(double alpha, std::span<double> y) {
  Active().scale(alpha, y.data(), y.size());
}

}  // namespace fedspd::simd
