// SPDX-License-Identifier: Apache-2.0
//
// Two-objective NSGA-II over bit-width configurations. Both objectives are
// minimized: a quality loss and the effective bits per weight.
#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <utility>
#include <vector>

#include "bitsearch/config_space.hpp"

namespace bitsearch {

struct Objectives {
  double score = 0.0;
  double bits = 0.0;
};

struct ObjectivePoint {
  double score = 0.0;
  double bits = 0.0;
  BitConfig payload;
};

/// Defaults follow the published search hyper-parameters.
struct NsgaParams {
  std::size_t population = 200;
  std::size_t generations = 20;
  double crossover_prob = 0.9;
  double mutation_prob = 0.1;
  std::uint64_t seed = 0;

  void validate() const;
};

/// True iff `a` is no worse than `b` in both objectives and strictly better
/// in at least one.
bool dominates(const Objectives& a, const Objectives& b);
inline bool dominates(const ObjectivePoint& a, const ObjectivePoint& b) {
  return dominates(Objectives{a.score, a.bits}, Objectives{b.score, b.bits});
}

using Fronts = std::vector<std::vector<std::size_t>>;

/// Fast non-dominated sort. Fronts hold indices into `points` in input order.
Fronts non_dominated_sort(std::span<const Objectives> points);
Fronts non_dominated_sort(std::span<const ObjectivePoint> points);

/// Crowding distance of each member of one front; boundary points are +inf.
std::vector<double> crowding_distance(std::span<const Objectives> front);
std::vector<double> crowding_distance(std::span<const ObjectivePoint> front);

/// Uniform crossover: with probability `prob` each free gene is swapped with
/// probability 1/2, otherwise the children are copies of the parents.
std::pair<BitConfig, BitConfig> crossover(const BitConfig& a, const BitConfig& b,
                                          const SearchSpace& space, Rng& rng, double prob);

/// With probability `prob`, resamples each free gene at rate 1/L to a
/// different allowed value (L = number of free layers).
BitConfig mutate(const BitConfig& config, const SearchSpace& space, Rng& rng, double prob);

using ObjectiveFn = std::function<std::vector<Objectives>(std::span<const BitConfig>)>;

struct NsgaResult {
  /// Final population, ordered by (rank, crowding desc, position).
  std::vector<ObjectivePoint> population;
  Fronts fronts;
  std::vector<std::size_t> rank;
  std::vector<double> crowding;
  /// Objective evaluations requested for the seed population.
  std::size_t seed_evaluations = 0;
  /// Objective evaluations requested for offspring (population x generations).
  std::size_t offspring_evaluations = 0;
  /// Distinct configs actually passed to the objective (after memoization).
  std::size_t objective_calls = 0;
};

/// Runs `params.generations` rounds of tournament selection, crossover,
/// mutation and (mu + lambda) survival. Deterministic given the seed
/// population order and `params.seed`.
NsgaResult nsga2_run(std::span<const BitConfig> seed_population, const ObjectiveFn& objective,
                     const NsgaParams& params, const SearchSpace& space);

}  // namespace bitsearch
