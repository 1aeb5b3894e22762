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

#include "fedspd/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "fedspd/errors.hpp"

namespace fedspd {

const char* ToString(SamplingMode mode) {
  return mode == SamplingMode::kWithoutReplacement ? "wor" : "wr";
}

SamplingMode ParseSamplingMode(const std::string& text) {
  std::string t = text;
  std::transform(t.begin(), t.end(), t.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (t == "wor") return SamplingMode::kWithoutReplacement;
  if (t == "wr") return SamplingMode::kWithReplacement;
  throw InvalidInput("sampling mode must be WOR or WR, got '" + text + "'");
}

std::uint64_t SplitMix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

RandomStream::RandomStream(std::uint64_t seed, std::uint64_t stream_id)
    : seed_(seed),
      stream_id_(stream_id),
      engine_(SplitMix64(SplitMix64(seed) ^ SplitMix64(~stream_id))) {}

double RandomStream::Uniform() {
  return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

std::uint64_t RandomStream::UniformInt(std::uint64_t bound) {
  if (bound == 0) throw InvalidInput("UniformInt bound must be positive");
  unsigned __int128 product = static_cast<unsigned __int128>(engine_()) * bound;
  auto low = static_cast<std::uint64_t>(product);
  if (low < bound) {
    const std::uint64_t threshold = (0 - bound) % bound;
    while (low < threshold) {
      product = static_cast<unsigned __int128>(engine_()) * bound;
      low = static_cast<std::uint64_t>(product);
    }
  }
  return static_cast<std::uint64_t>(product >> 64);
}

double RandomStream::Normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  double u, v, s;
  do {
    u = 2.0 * Uniform() - 1.0;
    v = 2.0 * Uniform() - 1.0;
    s = u * u + v * v;
  } while (s >= 1.0 || s == 0.0);
  const double factor = std::sqrt(-2.0 * std::log(s) / s);
  spare_ = v * factor;
  has_spare_ = true;
  return u * factor;
}

namespace sampling {

std::vector<std::size_t> Permutation(std::size_t n, RandomStream& rng) {
  std::vector<std::size_t> p(n);
  std::iota(p.begin(), p.end(), std::size_t{0});
  for (std::size_t i = n; i > 1; --i) {
    std::swap(p[i - 1], p[rng.UniformInt(i)]);
  }
  return p;
}

ClientSubset SampleClients(std::size_t n, std::size_t k, RandomStream& rng,
                           std::size_t round) {
  if (k == 0 || k > n) {
    throw InvalidInput("client sample size K must satisfy 1 <= K <= N (K=" +
                       std::to_string(k) + ", N=" + std::to_string(n) + ")");
  }
  ClientSubset subset{round, {}};
  if (k == n) {
    subset.members.resize(n);
    std::iota(subset.members.begin(), subset.members.end(), std::size_t{0});
    return subset;
  }
  std::vector<std::size_t> pool(n);
  std::iota(pool.begin(), pool.end(), std::size_t{0});
  for (std::size_t i = 0; i < k; ++i) {
    std::swap(pool[i], pool[i + rng.UniformInt(n - i)]);
  }
  subset.members.assign(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(k));
  std::sort(subset.members.begin(), subset.members.end());
  return subset;
}

std::vector<std::size_t> SampleMinibatch(std::size_t m, std::size_t b,
                                         SamplingMode mode, RandomStream& rng) {
  if (m == 0 || b == 0) throw InvalidInput("mini-batch needs m >= 1 and b >= 1");
  std::vector<std::size_t> out;
  out.reserve(b);
  if (mode == SamplingMode::kWithReplacement) {
    for (std::size_t j = 0; j < b; ++j) out.push_back(rng.UniformInt(m));
    return out;
  }
  if (b > m) {
    throw InvalidInput("WOR mini-batch of size " + std::to_string(b) +
                       " exceeds shard size " + std::to_string(m));
  }
  std::vector<std::size_t> pool(m);
  std::iota(pool.begin(), pool.end(), std::size_t{0});
  for (std::size_t j = 0; j < b; ++j) {
    std::swap(pool[j], pool[j + rng.UniformInt(m - j)]);
    out.push_back(pool[j]);
  }
  return out;
}

}  // namespace sampling
}  // namespace fedspd
