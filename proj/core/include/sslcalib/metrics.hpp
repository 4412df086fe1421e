// Copyright 2026 The sslcalib Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef SSLCALIB_METRICS_HPP_
#define SSLCALIB_METRICS_HPP_

#include <ostream>
#include <span>
#include <vector>

namespace sslcalib {

struct Prediction {
  double confidence = 0.0;  // max softmax probability
  int predicted = 0;
  int truth = 0;

  bool correct() const { return predicted == truth; }
};

using PredictionTrace = std::vector<Prediction>;

inline constexpr std::size_t kDefaultBuckets = 20;

// Percentage of mispredicted examples.
double error_rate(std::span<const Prediction> trace);

// Equal-width buckets over [0, 1]; bucket i holds [i/m, (i+1)/m), the last
// bucket is closed so confidence 1.0 lands in it.
double ece(std::span<const Prediction> trace, std::size_t buckets = kDefaultBuckets);
double mce(std::span<const Prediction> trace, std::size_t buckets = kDefaultBuckets);

// Equal-mass buckets over the confidence-sorted trace: floor(N/m) each, with
// the N mod m leftovers given one apiece to the highest-confidence buckets.
double ace(std::span<const Prediction> trace, std::size_t buckets = kDefaultBuckets);

struct ReliabilityBin {
  double lo = 0.0;
  double hi = 0.0;
  std::size_t count = 0;
  double mean_confidence = 0.0;
  double accuracy = 0.0;
  double gap = 0.0;  // |mean_confidence - accuracy|
};

std::vector<ReliabilityBin> reliability_table(std::span<const Prediction> trace,
                                              std::size_t buckets = kDefaultBuckets);
void write_reliability_csv(std::ostream& out, std::span<const ReliabilityBin> bins);

}  // namespace sslcalib

#endif  // SSLCALIB_METRICS_HPP_
