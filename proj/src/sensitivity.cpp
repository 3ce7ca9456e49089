// SPDX-License-Identifier: Apache-2.0
#include "bitsearch/sensitivity.hpp"

#include <algorithm>
#include <cmath>

#include "bitsearch/error.hpp"

namespace bitsearch {

double median_of(std::span<const double> values) {
  if (values.empty()) throw Error("median of an empty sequence");
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  const std::size_t mid = sorted.size() / 2;
  return sorted.size() % 2 == 1 ? sorted[mid] : 0.5 * (sorted[mid - 1] + sorted[mid]);
}

SensitivityProfile measure_sensitivity(const SearchSpace& space, Evaluator& evaluator) {
  const std::size_t n = space.layer_count();
  const BitConfig all_max = space.unfrozen().max_config();
  std::vector<BitConfig> probes;
  probes.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    BitConfig probe = all_max;
    probe[i] = space.layer(i).min_choice();
    probes.push_back(std::move(probe));
  }

  SensitivityProfile profile;
  try {
    profile.scores = evaluator.evaluate_batch(probes);
  } catch (const EvaluationError& e) {
    throw EvaluationError(std::string("sensitivity probing failed: ") + e.what());
  }
  if (profile.scores.size() != n)
    throw EvaluationError("evaluator returned " + std::to_string(profile.scores.size()) +
                          " sensitivity scores for " + std::to_string(n) + " layers");
  for (std::size_t i = 0; i < n; ++i)
    if (!std::isfinite(profile.scores[i]))
      throw EvaluationError("non-finite sensitivity score for layer " + std::to_string(i) + " ('" +
                            space.layer(i).name + "')");
  profile.median = median_of(profile.scores);
  return profile;
}

PruneResult prune_space(const SearchSpace& space, const SensitivityProfile& profile,
                        double multiplier) {
  if (!(multiplier > 0.0)) throw ConfigError("prune multiplier must be positive");
  if (profile.scores.size() != space.layer_count())
    throw ConfigError("sensitivity profile does not match the search space");
  const double threshold = multiplier * profile.median;
  std::map<std::size_t, BitWidth> extra;
  std::vector<std::size_t> outliers;
  for (std::size_t i = 0; i < space.layer_count(); ++i) {
    if (profile.scores[i] > threshold) {
      outliers.push_back(i);
      extra[i] = space.layer(i).max_choice();
    }
  }
  const double fraction =
      static_cast<double>(outliers.size()) / static_cast<double>(space.layer_count());
  return PruneResult{space.with_frozen(extra), std::move(outliers), fraction};
}

nlohmann::json to_json(const SensitivityProfile& profile, const PruneResult& pruned) {
  nlohmann::json frozen = nlohmann::json::array();
  for (std::size_t i : pruned.outliers) frozen.push_back(pruned.space.layer(i).name);
  return {{"scores", profile.scores},
          {"median", profile.median},
          {"frozen", frozen},
          {"excluded_fraction", pruned.excluded_fraction}};
}

}  // namespace bitsearch
