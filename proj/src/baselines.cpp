// SPDX-License-Identifier: Apache-2.0
#include "bitsearch/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "bitsearch/error.hpp"

namespace bitsearch {

namespace {

constexpr double kSlack = 1e-12;

void check_reachable(const SearchSpace& space, double target_bits, bool need_upper) {
  const double lo = effective_bits(space.min_config(), space);
  const double hi = effective_bits(space.max_config(), space);
  if (target_bits < lo - kSlack || (need_upper && target_bits > hi + kSlack))
    throw ConfigError("target " + std::to_string(target_bits) + " bits is outside the achievable range [" +
                      std::to_string(lo) + ", " + std::to_string(hi) + "]");
}

}  // namespace

BitConfig one_shot_search(const SearchSpace& space, const SensitivityProfile& profile,
                          double target_bits) {
  if (profile.scores.size() != space.layer_count())
    throw ConfigError("sensitivity profile does not match the search space");
  check_reachable(space, target_bits, true);

  std::vector<std::size_t> ranked = space.free_layers();
  std::stable_sort(ranked.begin(), ranked.end(), [&](std::size_t a, std::size_t b) {
    return profile.scores[a] > profile.scores[b];
  });

  BitConfig config = space.min_config();
  BitConfig best = config;
  double best_gap = std::abs(effective_bits(config, space) - target_bits);
  for (std::size_t cut = 1; cut <= ranked.size(); ++cut) {
    config[ranked[cut - 1]] = space.layer(ranked[cut - 1]).max_choice();
    const double gap = std::abs(effective_bits(config, space) - target_bits);
    if (gap < best_gap) {
      best_gap = gap;
      best = config;
    }
  }
  return best;
}

GreedyResult greedy_search(const SearchSpace& space, Evaluator& evaluator, double target_bits,
                           double tolerance) {
  if (tolerance < 0.0) throw ConfigError("tolerance must be non-negative");
  check_reachable(space, target_bits + tolerance, false);

  GreedyResult result;
  result.config = space.max_config();
  result.bits = effective_bits(result.config, space);
  std::vector<std::size_t> remaining;
  for (std::size_t i : space.free_layers())
    if (space.layer(i).min_choice() < space.layer(i).max_choice()) remaining.push_back(i);

  while (result.bits > target_bits + tolerance + kSlack) {
    if (remaining.empty()) throw ConfigError("greedy search cannot reach the target");
    std::vector<BitConfig> trials;
    trials.reserve(remaining.size());
    for (std::size_t i : remaining) {
      BitConfig trial = result.config;
      trial[i] = space.layer(i).min_choice();
      trials.push_back(std::move(trial));
    }
    const auto scores = evaluator.evaluate_batch(trials);
    if (scores.size() != trials.size())
      throw EvaluationError("evaluator returned a short batch during greedy search");
    result.evaluations += trials.size();
    const auto best = static_cast<std::size_t>(
        std::min_element(scores.begin(), scores.end()) - scores.begin());
    result.config = std::move(trials[best]);
    result.bits = effective_bits(result.config, space);
    result.score = scores[best];
    remaining.erase(remaining.begin() + static_cast<std::ptrdiff_t>(best));
    ++result.rounds;
  }
  return result;
}

}  // namespace bitsearch
