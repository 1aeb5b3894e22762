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

// Seeded, reproducible randomness.
//
// Each entity (server = stream 0, client i = stream i + 1) owns a
// RandomStream derived from the master seed with SplitMix64, so adding
// clients never perturbs existing streams. Uniform integers and normals are
// produced by portable algorithms rather than the implementation-defined
// <random> distributions, so draw sequences match across standard libraries.

#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace fedspd {

enum class SamplingMode { kWithoutReplacement, kWithReplacement };

const char* ToString(SamplingMode mode);
SamplingMode ParseSamplingMode(const std::string& text);

class RandomStream {
 public:
  RandomStream() : RandomStream(0, 0) {}
  RandomStream(std::uint64_t seed, std::uint64_t stream_id);

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream_id() const { return stream_id_; }

  std::uint64_t NextU64() { return engine_(); }

  // Uniform on [0, 1) with 53 random bits.
  double Uniform();

  // Uniform on [0, bound); bound >= 1. Unbiased (Lemire's method).
  std::uint64_t UniformInt(std::uint64_t bound);

  // Standard normal via the Marsaglia polar method.
  double Normal();

 private:
  std::uint64_t seed_;
  std::uint64_t stream_id_;
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

// SplitMix64 finalizer; used to derive independent stream seeds.
std::uint64_t SplitMix64(std::uint64_t x);

constexpr std::uint64_t kServerStream = 0;
constexpr std::uint64_t ClientStream(std::size_t client) { return client + 1; }

namespace sampling {

struct ClientSubset {
  std::size_t round = 0;
  std::vector<std::size_t> members;  // sorted ascending, no duplicates
};

// Uniform K-subset of [0, N). Each client is included with probability K/N.
ClientSubset SampleClients(std::size_t n, std::size_t k, RandomStream& rng,
                           std::size_t round = 0);

// b indices in [0, m): distinct for WOR, i.i.d. for WR.
std::vector<std::size_t> SampleMinibatch(std::size_t m, std::size_t b,
                                         SamplingMode mode, RandomStream& rng);

// A uniformly random permutation of [0, n).
std::vector<std::size_t> Permutation(std::size_t n, RandomStream& rng);

}  // namespace sampling
}  // namespace fedspd
