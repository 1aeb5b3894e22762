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

// L1-regularized binary logistic regression primitives.
//
// Labels are +1/-1. Features live in a row-major dense matrix owned by a
// Dataset; mini-batches are index lists into it so that sampling never
// copies feature rows. Everything here is a pure function of its inputs.

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace fedspd {

using ModelVector = std::vector<double>;

struct LabeledSample {
  std::vector<double> features;
  int label = 1;  // +1 or -1
};

// Immutable-after-construction sample store. Rows are contiguous.
class Dataset {
 public:
  Dataset() = default;
  explicit Dataset(std::size_t dim) : dim_(dim) {}
  Dataset(std::size_t dim, std::vector<double> features, std::vector<int> labels,
          std::string provenance = {});

  static Dataset FromSamples(std::span<const LabeledSample> samples,
                             std::string provenance = {});

  void Add(std::span<const double> features, int label);

  std::size_t dim() const { return dim_; }
  std::size_t size() const { return labels_.size(); }
  bool empty() const { return labels_.empty(); }

  std::span<const double> row(std::size_t i) const {
    return {features_.data() + i * dim_, dim_};
  }
  int label(std::size_t i) const { return labels_[i]; }

  std::span<const double> features() const { return features_; }
  std::span<const int> labels() const { return labels_; }

  const std::string& provenance() const { return provenance_; }
  void set_provenance(std::string p) { provenance_ = std::move(p); }

  // Copies the given rows, in order, into a new dataset.
  Dataset Subset(std::span<const std::size_t> indices) const;

  friend bool operator==(const Dataset&, const Dataset&) = default;

 private:
  std::size_t dim_ = 0;
  std::vector<double> features_;
  std::vector<int> labels_;
  std::string provenance_;
};

// A mini-batch: an ordered list of row indices into a dataset. Indices may
// repeat (sampling with replacement).
struct MiniBatch {
  const Dataset* data = nullptr;
  std::span<const std::size_t> indices;

  std::size_t size() const { return indices.size(); }
};

MiniBatch FullBatch(const Dataset& data, std::vector<std::size_t>& scratch);

namespace linmodel {

// Numerically stable ln(1 + exp(z)).
double Softplus(double z);

// Logistic sigmoid 1 / (1 + exp(-z)).
double Sigmoid(double z);

// (1/|B|) sum_j ln(1 + exp(-b_j <x, a_j>)). Regularizer not included.
double LogisticLoss(std::span<const double> model, const MiniBatch& batch);
double LogisticLoss(std::span<const double> model, const Dataset& data);

// (1/|B|) sum_j -b_j sigmoid(-b_j <x, a_j>) a_j, written into `grad`.
void LogisticGrad(std::span<const double> model, const MiniBatch& batch,
                  std::span<double> grad);
ModelVector LogisticGrad(std::span<const double> model, const MiniBatch& batch);
ModelVector LogisticGrad(std::span<const double> model, const Dataset& data);

// Gradient of a single sample's loss.
void SampleGrad(std::span<const double> model, std::span<const double> features,
                int label, std::span<double> grad);

// Scales v down to norm `bound` when it exceeds it. Returns the pre-clip norm.
double ClipToNormInPlace(std::span<double> v, double bound);
ModelVector ClipToNorm(std::span<const double> v, double bound);

// Element-wise soft threshold sign(v) max(|v| - threshold, 0).
ModelVector ProxL1(std::span<const double> v, double threshold);
void ProxL1InPlace(std::span<double> v, double threshold);

// Fraction of samples whose sign(<x, a>) equals the label; a zero score
// predicts +1.
double Accuracy(std::span<const double> model, const Dataset& test);

int Predict(std::span<const double> model, std::span<const double> features);

}  // namespace linmodel
}  // namespace fedspd
