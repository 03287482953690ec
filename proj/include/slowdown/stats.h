// Copyright 2026 The Slowdown Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Order statistics shared by the baseline and confidence code.

#pragma once

#include <span>
#include <vector>

namespace slowdown {

// Nearest-rank percentile of an ascending sequence: the value at rank
// ceil(p/100 * n), clamped to [1, n]. p in [0, 100].
double nearest_rank_percentile(std::span<const double> sorted, double p);

double median(std::vector<double> values);
double mean(std::span<const double> values);
// Population standard deviation.
double stddev(std::span<const double> values);

}  // namespace slowdown
