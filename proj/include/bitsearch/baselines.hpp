// SPDX-License-Identifier: Apache-2.0
//
// Lightweight heuristic allocators used as comparison points for the search.
#pragma once

#include <cstddef>
#include <optional>

#include "bitsearch/config_space.hpp"
#include "bitsearch/evaluator.hpp"
#include "bitsearch/sensitivity.hpp"

namespace bitsearch {

/// Ranks free layers by descending sensitivity (ties by index) and puts the
/// top of the ranking at max bits and the rest at min bits, choosing the
/// cut whose effective bits land closest to `target_bits`. On equal
/// distance the cheaper config wins. No evaluator calls.
BitConfig one_shot_search(const SearchSpace& space, const SensitivityProfile& profile,
                          double target_bits);

struct GreedyResult {
  BitConfig config;
  double bits = 0.0;
  /// Score of the final config when it was evaluated during the search
  /// (absent when no demotion round ran).
  std::optional<double> score;
  std::size_t evaluations = 0;
  std::size_t rounds = 0;
};

/// Starts at all-max and, each round, tries demoting every remaining max-bit
/// free layer to its min choice (one batch), keeping the demotion with the
/// lowest score. Stops at the first config with bits <= target + tolerance.
GreedyResult greedy_search(const SearchSpace& space, Evaluator& evaluator, double target_bits,
                           double tolerance = 0.0);

}  // namespace bitsearch
