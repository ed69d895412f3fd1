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

#include "privbias/synthetic.h"

#include <cmath>
#include <string>
#include <vector>

#include "privbias/errors.h"
#include "privbias/rng.h"

namespace privbias {

EmbeddingStore MakeSyntheticStore(const SyntheticSpec& spec) {
  if (spec.vocabulary == 0 || spec.dimension == 0) {
    throw InvalidArgument("synthetic store needs a positive size and dimension");
  }
  if (!(spec.mean_cluster_size >= 1.0)) {
    throw InvalidArgument("mean cluster size must be at least 1");
  }
  RngStream rng({spec.seed, StreamDomain::kUser, 0x5717, 0});
  const size_t d = spec.dimension;
  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(d));
  const double p_stop = 1.0 / spec.mean_cluster_size;

  std::vector<std::string> words;
  std::vector<float> values;
  words.reserve(spec.vocabulary);
  values.reserve(spec.vocabulary * d);
  std::vector<double> center(d);
  while (words.size() < spec.vocabulary) {
    size_t members = 1;
    while (rng.Uniform() > p_stop) ++members;
    for (double& c : center) c = rng.Normal() * inv_sqrt_d * spec.center_scale;
    const double radius = spec.median_radius * std::exp(rng.Normal() * spec.radius_log_sigma);
    for (size_t m = 0; m < members && words.size() < spec.vocabulary; ++m) {
      words.push_back("w" + std::to_string(words.size()));
      for (size_t k = 0; k < d; ++k) {
        values.push_back(static_cast<float>(center[k] + rng.Normal() * inv_sqrt_d * radius));
      }
    }
  }
  return EmbeddingStore(std::move(words), std::move(values), d);
}

}  // namespace privbias
