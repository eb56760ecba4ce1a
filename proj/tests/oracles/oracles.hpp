/*
 * Copyright 2026 The halluprobe Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

// Independent reference implementations used only by the tests. They are
// deliberately naive (quadratic, exhaustive, long double) so they share no
// code paths with the library.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <random>
#include <set>
#include <vector>

namespace oracle {

// Probability that a random positive outranks a random negative, ties 1/2.
inline double PairwiseAuc(const std::vector<double>& scores, const std::vector<int>& labels) {
  long double num = 0.0L;
  std::size_t pos = 0;
  std::size_t neg = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (labels[i] == 1) ++pos;
    else ++neg;
  }
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (labels[i] != 1) continue;
    for (std::size_t j = 0; j < scores.size(); ++j) {
      if (labels[j] != 0) continue;
      if (scores[i] > scores[j]) num += 1.0L;
      else if (scores[i] == scores[j]) num += 0.5L;
    }
  }
  return static_cast<double>(num / (static_cast<long double>(pos) * neg));
}

// Largest recall over every threshold "score >= t" (t ranging over +inf and
// each distinct score) whose false-positive rate is at most cap.
inline double ExhaustiveRecallAtFpr(const std::vector<double>& scores,
                                    const std::vector<int>& labels, double cap) {
  std::set<double> thresholds(scores.begin(), scores.end());
  thresholds.insert(std::numeric_limits<double>::infinity());
  std::size_t pos = 0;
  std::size_t neg = 0;
  for (int y : labels) (y == 1 ? pos : neg)++;
  double best = 0.0;
  for (double t : thresholds) {
    std::size_t tp = 0;
    std::size_t fp = 0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
      if (scores[i] >= t) (labels[i] == 1 ? tp : fp)++;
    }
    const double fpr = static_cast<double>(fp) / static_cast<double>(neg);
    if (fpr <= cap) best = std::max(best, static_cast<double>(tp) / static_cast<double>(pos));
  }
  return best;
}

// max over scores[start..end] by linear scan.
inline double BruteSpanMax(const std::vector<double>& scores, std::size_t start,
                           std::size_t end) {
  double m = -std::numeric_limits<double>::infinity();
  for (std::size_t i = start; i <= end; ++i) {
    if (scores[i] > m) m = scores[i];
  }
  return m;
}

// -sum p ln p in long double.
inline double DirectEntropy(const std::vector<double>& p) {
  long double h = 0.0L;
  for (double x : p) {
    if (x > 0.0) h -= static_cast<long double>(x) * std::log(static_cast<long double>(x));
  }
  return static_cast<double>(h);
}

// Entropy of cluster sizes by direct summation.
inline double ClusterEntropy(const std::vector<std::size_t>& sizes) {
  long double k = 0.0L;
  for (auto s : sizes) k += s;
  long double h = 0.0L;
  for (auto s : sizes) {
    const long double p = s / k;
    if (p > 0) h -= p * std::log(p);
  }
  return static_cast<double>(h);
}

// Planted-signal data: h = N(0, I) + y * strength * v for a fixed unit v.
struct PlantedSet {
  std::vector<std::vector<double>> h;
  std::vector<int> y;
};

inline std::vector<double> UnitVector(std::size_t d, std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  std::vector<double> v(d);
  double norm = 0.0;
  for (auto& x : v) {
    x = n(rng);
    norm += x * x;
  }
  for (auto& x : v) x /= std::sqrt(norm);
  return v;
}

inline PlantedSet MakePlanted(std::size_t n, const std::vector<double>& v, double strength,
                              std::mt19937_64& rng, double positive_rate = 0.5) {
  std::normal_distribution<double> noise(0.0, 1.0);
  std::bernoulli_distribution coin(positive_rate);
  PlantedSet s;
  for (std::size_t i = 0; i < n; ++i) {
    const int y = coin(rng) ? 1 : 0;
    std::vector<double> h(v.size());
    for (std::size_t k = 0; k < v.size(); ++k) h[k] = noise(rng) + y * strength * v[k];
    s.h.push_back(std::move(h));
    s.y.push_back(y);
  }
  return s;
}

}  // namespace oracle
