// Copyright 2026 The privbias Authors
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

#ifndef PRIVBIAS_RNG_H_
#define PRIVBIAS_RNG_H_

#include <array>
#include <cstdint>
#include <limits>

namespace privbias {

// Separates the key spaces of the different consumers of randomness so that
// e.g. document 3 / token 7 never shares a stream with calibration word 3 /
// query 7.
enum class StreamDomain : uint64_t {
  kCorpus = 1,
  kCalibration = 2,
  kSubsetDraw = 3,
  kIndexBuild = 4,
  kUser = 5,
};

// Identifies one independent random stream: (seed, domain, major, minor).
// For corpus privatization major/minor are (doc id, token position); for
// calibration they are (word index, query index).
struct StreamKey {
  uint64_t seed = 0;
  StreamDomain domain = StreamDomain::kUser;
  uint64_t major = 0;
  uint64_t minor = 0;
};

// Keyed xoshiro256** generator. The state is derived from the key alone, so
// identical keys give identical sequences regardless of which thread or in
// which order streams are created. Satisfies UniformRandomBitGenerator.
//
// The normal and gamma samplers are implemented here rather than taken from
// <random> because the standard distributions are implementation-defined and
// would make outputs differ between standard libraries.
class RngStream {
 public:
  using result_type = uint64_t;

  explicit RngStream(const StreamKey& key);

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() {
    return std::numeric_limits<result_type>::max();
  }
  result_type operator()();

  // Uniform on the open interval (0, 1).
  double Uniform();
  // Unbiased integer in [0, n); n > 0.
  uint64_t UniformInt(uint64_t n);
  // Standard normal (Marsaglia polar method).
  double Normal();
  // Gamma(shape, scale), Marsaglia-Tsang. shape > 0, scale > 0.
  double Gamma(double shape, double scale);

 private:
  std::array<uint64_t, 4> s_;
  double spare_normal_ = 0.0;
  bool has_spare_ = false;
};

// SplitMix64 finalizer; exposed for deterministic hashing of keys.
uint64_t Mix64(uint64_t x);

}  // namespace privbias

#endif  // PRIVBIAS_RNG_H_
