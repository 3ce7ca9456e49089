// SPDX-License-Identifier: Apache-2.0
//
// Per-layer sensitivity probing and outlier-based search-space pruning.
#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include <json.hpp>

#include "bitsearch/config_space.hpp"
#include "bitsearch/evaluator.hpp"

namespace bitsearch {

struct SensitivityProfile {
  /// Evaluator score with layer i at its min choice and every other layer at
  /// its max choice.
  std::vector<double> scores;
  double median = 0.0;
};

/// Median; the mean of the two central values for even lengths.
double median_of(std::span<const double> values);

/// Issues exactly one batch of L probe configs. Frozen entries of `space`
/// are ignored while probing.
SensitivityProfile measure_sensitivity(const SearchSpace& space, Evaluator& evaluator);

struct PruneResult {
  SearchSpace space;
  /// Layers whose score exceeded multiplier * median, in layer order.
  std::vector<std::size_t> outliers;
  /// outliers / layer count.
  double excluded_fraction = 0.0;
};

/// Freezes every layer with score > multiplier * median at its max choice.
PruneResult prune_space(const SearchSpace& space, const SensitivityProfile& profile,
                        double multiplier = 2.0);

/// {"scores", "median", "frozen", "excluded_fraction"}.
nlohmann::json to_json(const SensitivityProfile& profile, const PruneResult& pruned);

}  // namespace bitsearch
