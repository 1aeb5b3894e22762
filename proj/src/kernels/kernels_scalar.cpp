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

#include <cmath>

#include "fedspd/kernels.hpp"

namespace fedspd::simd {
namespace {

double DotScalar(const double* a, const double* b, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
  return s;
}

double SquaredNormScalar(const double* a, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += a[i] * a[i];
  return s;
}

double SquaredDistanceScalar(const double* a, const double* b, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

double AbsSumScalar(const double* a, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += std::fabs(a[i]);
  return s;
}

void AxpyScalar(double alpha, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void ScaleScalar(double alpha, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] *= alpha;
}

void SoftThresholdScalar(const double* v, double threshold, double* out,
                         std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    const double mag = std::fabs(v[i]) - threshold;
    out[i] = mag > 0.0 ? std::copysign(mag, v[i]) : 0.0;
  }
}

void Affine4Scalar(double a, const double* x, double b, const double* y,
                   const double* z, const double* w, double scale, double* out,
                   std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = scale * (a * x[i] + b * y[i] + z[i] - w[i]);
  }
}

}  // namespace

const KernelTable& ScalarKernels() {
  static const KernelTable table{
      "scalar",          DotScalar,  SquaredNormScalar,   SquaredDistanceScalar,
      AbsSumScalar,      AxpyScalar, ScaleScalar,         SoftThresholdScalar,
      Affine4Scalar,
  };
  return table;
}

}  // namespace fedspd::simd
