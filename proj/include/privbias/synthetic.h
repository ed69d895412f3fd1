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

#ifndef PRIVBIAS_SYNTHETIC_H_
#define PRIVBIAS_SYNTHETIC_H_

#include <cstddef>
#include <cstdint>

#include "privbias/embedding_store.h"

namespace privbias {

// Clustered stand-in for a word-embedding space. Cluster sizes are geometric
// with mean `mean_cluster_size`; centers are N(0, center_scale^2 / d); each
// cluster draws a radius median_radius * exp(N(0, radius_log_sigma^2)) and its
// members are center + N(0, radius^2 / d). Words are "w0", "w1", ...
struct SyntheticSpec {
  size_t vocabulary = 1000;
  size_t dimension = 300;
  double mean_cluster_size = 5.0;
  double center_scale = 10.0;
  double median_radius = 5.0;
  double radius_log_sigma = 0.5;
  uint64_t seed = 1;
};

EmbeddingStore MakeSyntheticStore(const SyntheticSpec& spec);

}  // namespace privbias

#endif  // PRIVBIAS_SYNTHETIC_H_
