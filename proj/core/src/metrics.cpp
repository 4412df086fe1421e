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

#include "sslcalib/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numeric>
#include <stdexcept>

namespace sslcalib {
namespace {

void require_nonempty(std::span<const Prediction> trace, const char* what) {
  if (trace.empty()) throw std::invalid_argument(std::string(what) + ": empty prediction trace");
}

void require_buckets(std::size_t buckets, const char* what) {
  if (buckets == 0) throw std::invalid_argument(std::string(what) + ": need at least one bucket");
}

std::size_t bucket_of(double confidence, std::size_t buckets) {
  if (confidence >= 1.0) return buckets - 1;
  if (confidence <= 0.0) return 0;
  return std::min(static_cast<std::size_t>(confidence * static_cast<double>(buckets)), buckets - 1);
}

}  // namespace

double error_rate(std::span<const Prediction> trace) {
  require_nonempty(trace, "error_rate");
  const auto wrong = std::count_if(trace.begin(), trace.end(), [](const Prediction& p) {
    return !p.correct();
  });
  return 100.0 * static_cast<double>(wrong) / static_cast<double>(trace.size());
}

std::vector<ReliabilityBin> reliability_table(std::span<const Prediction> trace,
                                              std::size_t buckets) {
  require_buckets(buckets, "reliability_table");
  std::vector<ReliabilityBin> bins(buckets);
  std::vector<double> conf_sum(buckets, 0.0), hits(buckets, 0.0);
  for (const auto& p : trace) {
    const std::size_t b = bucket_of(p.confidence, buckets);
    ++bins[b].count;
    conf_sum[b] += p.confidence;
    hits[b] += p.correct() ? 1.0 : 0.0;
  }
  for (std::size_t b = 0; b < buckets; ++b) {
    auto& bin = bins[b];
    bin.lo = static_cast<double>(b) / static_cast<double>(buckets);
    bin.hi = static_cast<double>(b + 1) / static_cast<double>(buckets);
    if (bin.count > 0) {
      bin.mean_confidence = conf_sum[b] / static_cast<double>(bin.count);
      bin.accuracy = hits[b] / static_cast<double>(bin.count);
      bin.gap = std::abs(bin.mean_confidence - bin.accuracy);
    }
  }
  return bins;
}

double ece(std::span<const Prediction> trace, std::size_t buckets) {
  require_nonempty(trace, "ece");
  const auto bins = reliability_table(trace, buckets);
  double total = 0.0;
  for (const auto& bin : bins) {
    total += static_cast<double>(bin.count) / static_cast<double>(trace.size()) * bin.gap;
  }
  return total;
}

double mce(std::span<const Prediction> trace, std::size_t buckets) {
  require_nonempty(trace, "mce");
  double worst = 0.0;
  for (const auto& bin : reliability_table(trace, buckets)) {
    if (bin.count > 0) worst = std::max(worst, bin.gap);
  }
  return worst;
}

double ace(std::span<const Prediction> trace, std::size_t buckets) {
  require_nonempty(trace, "ace");
  require_buckets(buckets, "ace");
  const std::size_t n = trace.size();
  if (buckets > n) {
    throw std::invalid_argument("ace: " + std::to_string(buckets) + " buckets exceed " +
                                std::to_string(n) + " predictions");
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return trace[a].confidence < trace[b].confidence;
  });
  const std::size_t base = n / buckets;
  const std::size_t extra = n % buckets;
  double total = 0.0;
  std::size_t pos = 0;
  for (std::size_t b = 0; b < buckets; ++b) {
    const std::size_t size = base + (b >= buckets - extra ? 1 : 0);
    double conf = 0.0, hits = 0.0;
    for (std::size_t k = 0; k < size; ++k) {
      const auto& p = trace[order[pos + k]];
      conf += p.confidence;
      hits += p.correct() ? 1.0 : 0.0;
    }
    pos += size;
    const double gap = std::abs(conf - hits) / static_cast<double>(size);
    total += static_cast<double>(size) / static_cast<double>(n) * gap;
  }
  return total;
}

void write_reliability_csv(std::ostream& out, std::span<const ReliabilityBin> bins) {
  out << "lo,hi,count,mean_conf,accuracy,gap\n" << std::setprecision(17);
  for (const auto& b : bins) {
    out << b.lo << ',' << b.hi << ',' << b.count << ',' << b.mean_confidence << ','
        << b.accuracy << ',' << b.gap << '\n';
  }
}

}  // namespace sslcalib
