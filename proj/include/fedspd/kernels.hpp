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

#pragma once

// Dense vector kernels used by every inner loop of the simulator.
//
// Two implementations exist: a portable scalar reference and an AVX2+FMA
// variant. The active table is chosen once at startup from CPUID, unless
// the FEDSPD_KERNELS environment variable forces one ("scalar" or "avx2").
// All kernels accept unaligned pointers and any length, including zero.

#include <cstddef>
#include <span>
#include <string_view>

namespace fedspd::simd {

struct KernelTable {
  std::string_view name;
  double (*dot)(const double* a, const double* b, std::size_t n);
  double (*squared_norm)(const double* a, std::size_t n);
  double (*squared_distance)(const double* a, const double* b, std::size_t n);
  double (*abs_sum)(const double* a, std::size_t n);
  // y += alpha * x
  void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
  // y *= alpha
  void (*scale)(double alpha, double* y, std::size_t n);
  // out = sign(v) * max(|v| - threshold, 0)
  void (*soft_threshold)(const double* v, double threshold, double* out,
                         std::size_t n);
  // out = scale * (a * x + b * y + z - w)
  void (*affine4)(double a, const double* x, double b, const double* y,
                  const double* z, const double* w, double scale, double* out,
                  std::size_t n);
};

const KernelTable& ScalarKernels();

// Null when the build has no AVX2 variant or the CPU lacks AVX2/FMA.
const KernelTable* Avx2Kernels();

// The table every library routine goes through.
const KernelTable& Active();

// Overrides the active table; intended for tests and benchmarks.
void SetActive(const KernelTable& table);

// Convenience span wrappers over Active().
double Dot(std::span<const double> a, std::span<const double> b);
double SquaredNorm(std::span<const double> a);
double Norm(std::span<const double> a);
double SquaredDistance(std::span<const double> a, std::span<const double> b);
double AbsSum(std::span<const double> a);
void Axpy(double alpha, std::span<const double> x, std::span<double> y);
void Scale(double alpha, std::span<double> y);

}  // namespace fedspd::simd
