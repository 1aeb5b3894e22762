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

#include "fedspd/linmodel.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "fedspd/errors.hpp"
#include "fedspd/kernels.hpp"

namespace fedspd {
namespace {

void CheckLabel(int label) {
  if (label != 1 && label != -1) {
    throw InvalidInput("label must be +1 or -1, got " + std::to_string(label));
  }
}

void CheckDims(std::size_t model_dim, const MiniBatch& batch) {
  if (batch.data == nullptr) throw InvalidInput("mini-batch has no dataset");
  if (model_dim != batch.data->dim()) {
    throw InvalidInput("model dimension " + std::to_string(model_dim) +
                       " does not match data dimension " +
                       std::to_string(batch.data->dim()));
  }
  if (batch.indices.empty()) throw InvalidInput("mini-batch is empty");
}

}  // namespace

Dataset::Dataset(std::size_t dim, std::vector<double> features,
                 std::vector<int> labels, std::string provenance)
    : dim_(dim),
      features_(std::move(features)),
      labels_(std::move(labels)),
      provenance_(std::move(provenance)) {
  if (features_.size() != dim_ * labels_.size()) {
    throw InvalidInput("feature buffer size does not equal dim * rows");
  }
  for (int l : labels_) CheckLabel(l);
}

Dataset Dataset::FromSamples(std::span<const LabeledSample> samples,
                             std::string provenance) {
  if (samples.empty()) return Dataset(0, {}, {}, std::move(provenance));
  Dataset out(samples.front().features.size());
  out.provenance_ = std::move(provenance);
  for (const auto& s : samples) out.Add(s.features, s.label);
  return out;
}

void Dataset::Add(std::span<const double> features, int label) {
  if (features.size() != dim_) {
    throw InvalidInput("sample dimension " + std::to_string(features.size()) +
                       " does not match dataset dimension " + std::to_string(dim_));
  }
  CheckLabel(label);
  features_.insert(features_.end(), features.begin(), features.end());
  labels_.push_back(label);
}

Dataset Dataset::Subset(std::span<const std::size_t> indices) const {
  Dataset out(dim_);
  out.provenance_ = provenance_;
  out.features_.reserve(indices.size() * dim_);
  out.labels_.reserve(indices.size());
  for (std::size_t i : indices) {
    if (i >= size()) throw InvalidInput("subset index out of range");
    const auto r = row(i);
    out.features_.insert(out.features_.end(), r.begin(), r.end());
    out.labels_.push_back(labels_[i]);
  }
  return out;
}

MiniBatch FullBatch(const Dataset& data, std::vector<std::size_t>& scratch) {
  scratch.resize(data.size());
  std::iota(scratch.begin(), scratch.end(), std::size_t{0});
  return MiniBatch{&data, scratch};
}

namespace linmodel {

double Softplus(double z) {
  return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
}

double Sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

double LogisticLoss(std::span<const double> model, const MiniBatch& batch) {
  CheckDims(model.size(), batch);
  double total = 0.0;
  for (std::size_t idx : batch.indices) {
    const double margin = batch.data->label(idx) * simd::Dot(model, batch.data->row(idx));
    total += Softplus(-margin);
  }
  return total / static_cast<double>(batch.size());
}

double LogisticLoss(std::span<const double> model, const Dataset& data) {
  std::vector<std::size_t> all;
  return LogisticLoss(model, FullBatch(data, all));
}

void SampleGrad(std::span<const double> model, std::span<const double> features,
                int label, std::span<double> grad) {
  const double margin = label * simd::Dot(model, features);
  const double coeff = -label * Sigmoid(-margin);
  std::fill(grad.begin(), grad.end(), 0.0);
  simd::Axpy(coeff, features, grad);
}

void LogisticGrad(std::span<const double> model, const MiniBatch& batch,
                  std::span<double> grad) {
  CheckDims(model.size(), batch);
  if (grad.size() != model.size()) throw InvalidInput("gradient buffer size mismatch");
  std::fill(grad.begin(), grad.end(), 0.0);
  const double inv = 1.0 / static_cast<double>(batch.size());
  for (std::size_t idx : batch.indices) {
    const auto a = batch.data->row(idx);
    const int b = batch.data->label(idx);
    const double margin = b * simd::Dot(model, a);
    simd::Axpy(-b * Sigmoid(-margin) * inv, a, grad);
  }
}

ModelVector LogisticGrad(std::span<const double> model, const MiniBatch& batch) {
  ModelVector g(model.size());
  LogisticGrad(model, batch, g);
  return g;
}

ModelVector LogisticGrad(std::span<const double> model, const Dataset& data) {
  std::vector<std::size_t> all;
  return LogisticGrad(model, FullBatch(data, all));
}

double ClipToNormInPlace(std::span<double> v, double bound) {
  if (!(bound > 0.0)) throw InvalidInput("clip bound must be positive");
  const double norm = simd::Norm(v);
  if (norm > bound) simd::Scale(bound / norm, v);
  return norm;
}

ModelVector ClipToNorm(std::span<const double> v, double bound) {
  ModelVector out(v.begin(), v.end());
  ClipToNormInPlace(out, bound);
  return out;
}

void ProxL1InPlace(std::span<double> v, double threshold) {
  if (threshold < 0.0) throw InvalidInput("soft threshold must be nonnegative");
  simd::Active().soft_threshold(v.data(), threshold, v.data(), v.size());
}

ModelVector ProxL1(std::span<const double> v, double threshold) {
  ModelVector out(v.begin(), v.end());
  ProxL1InPlace(out, threshold);
  return out;
}

int Predict(std::span<const double> model, std::span<const double> features) {
  return simd::Dot(model, features) >= 0.0 ? 1 : -1;
}

double Accuracy(std::span<const double> model, const Dataset& test) {
  if (test.empty()) throw InvalidInput("accuracy needs a nonempty test set");
  if (model.size() != test.dim()) throw InvalidInput("model/test dimension mismatch");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < test.size(); ++i) {
    if (Predict(model, test.row(i)) == test.label(i)) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(test.size());
}

}  // namespace linmodel
}  // namespace fedspd
