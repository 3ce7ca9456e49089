// SPDX-License-Identifier: Apache-2.0
//
// Test-only oracles, kept independent of the library code paths they check.
#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <vector>

#include "bitsearch/archive.hpp"
#include "bitsearch/config_space.hpp"
#include "bitsearch/moea.hpp"
#include "bitsearch/synthetic.hpp"

namespace testing {

/// Average ranks (1-based), ties share the mean rank.
inline std::vector<double> ranks(const std::vector<double>& v) {
  std::vector<std::size_t> order(v.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> r(v.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) ++j;
    const double mean = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) r[order[k]] = mean;
    i = j + 1;
  }
  return r;
}

inline double spearman(const std::vector<double>& a, const std::vector<double>& b) {
  const auto ra = ranks(a);
  const auto rb = ranks(b);
  const double n = static_cast<double>(a.size());
  const double ma = std::accumulate(ra.begin(), ra.end(), 0.0) / n;
  const double mb = std::accumulate(rb.begin(), rb.end(), 0.0) / n;
  double cov = 0, va = 0, vb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    cov += (ra[i] - ma) * (rb[i] - mb);
    va += (ra[i] - ma) * (ra[i] - ma);
    vb += (rb[i] - mb) * (rb[i] - mb);
  }
  return cov / std::sqrt(va * vb);
}

/// Indices not dominated by any other point; written out as two plain loops
/// with the dominance test spelled inline.
inline std::vector<std::size_t> pairwise_nondominated(const std::vector<bitsearch::Objectives>& pts) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    bool dominated = false;
    for (std::size_t j = 0; j < pts.size() && !dominated; ++j) {
      if (j == i) continue;
      const bool no_worse = pts[j].score <= pts[i].score && pts[j].bits <= pts[i].bits;
      const bool better = pts[j].score < pts[i].score || pts[j].bits < pts[i].bits;
      dominated = no_worse && better;
    }
    if (!dominated) out.push_back(i);
  }
  return out;
}

/// Full-scan effective bits with per-layer floating-point terms.
inline double scalar_effective_bits(const bitsearch::BitConfig& c, const bitsearch::SearchSpace& s) {
  double num = 0.0, den = 0.0;
  const double ovh = static_cast<double>(s.overhead().scale_bits + s.overhead().zero_bits) /
                     static_cast<double>(s.overhead().group_size);
  for (std::size_t i = 0; i < s.layer_count(); ++i) {
    const double p = static_cast<double>(s.layer(i).param_count);
    num += p * (static_cast<double>(c[i]) + ovh);
    den += p;
  }
  return num / den;
}

inline std::set<std::vector<int>> config_set(const bitsearch::ParetoFront& front) {
  std::set<std::vector<int>> out;
  for (const auto& e : front) out.insert(e.config.bits());
  return out;
}

/// Separable model with weight 1 everywhere and `outlier_weight` on one layer.
inline bitsearch::SyntheticModel planted_outlier_model(std::size_t layers, std::size_t outlier,
                                                       double outlier_weight) {
  bitsearch::SyntheticModel m;
  m.kind = bitsearch::SyntheticKind::Separable;
  m.weights.assign(layers, 1.0);
  m.weights[outlier] = outlier_weight;
  m.penalty = {{2, 1.0}, {3, 0.3}, {4, 0.1}};
  return m;
}

}  // namespace testing
