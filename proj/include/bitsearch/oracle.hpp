// SPDX-License-Identifier: Apache-2.0
//
// Ground truth for small spaces: exhaustive fronts, 2-D hypervolume and the
// front-coincidence check for monotone transforms of the quality score.
#pragma once

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include <json.hpp>

#include "bitsearch/archive.hpp"
#include "bitsearch/config_space.hpp"
#include "bitsearch/evaluator.hpp"
#include "bitsearch/moea.hpp"

namespace bitsearch {

inline constexpr std::uint64_t kDefaultEnumerationCap = 1'000'000;

struct ReferencePoint {
  double score = 0.0;
  double bits = 0.0;
};

/// Every config of the space in lexicographic order over free layers (last
/// free layer varies fastest). Throws ConfigError above `cap`.
std::vector<BitConfig> enumerate_configs(const SearchSpace& space,
                                         std::uint64_t cap = kDefaultEnumerationCap);

/// All configs with their scores, in enumeration order.
std::vector<ArchiveEntry> enumerate_all(const SearchSpace& space, Evaluator& evaluator,
                                        std::uint64_t cap = kDefaultEnumerationCap);

/// Exact Pareto front under (score, bits); tied non-dominated configs are all
/// kept.
ParetoFront enumerate_front(const SearchSpace& space, Evaluator& evaluator,
                            std::uint64_t cap = kDefaultEnumerationCap);

/// Area dominated by `front` up to `reference`. Dominated points contribute
/// nothing. Throws when a point lies beyond the reference.
double hypervolume(std::span<const Objectives> front, ReferencePoint reference);
double hypervolume(std::span<const ArchiveEntry> front, ReferencePoint reference);

/// (max score + 10% of its magnitude, max choice + overhead + 0.1).
ReferencePoint default_reference(const SearchSpace& space, std::span<const ArchiveEntry> entries);

struct FrontComparison {
  double hypervolume_ratio = 0.0;
  /// In the reference front but not the candidate (by config).
  std::vector<ObjectivePoint> missing_points;
  /// In the candidate front but not the reference (by config).
  std::vector<ObjectivePoint> spurious_points;

  bool coincident() const { return missing_points.empty() && spurious_points.empty(); }
};

/// Compares a candidate front against the exact one by config set and by
/// hypervolume ratio HV(candidate) / HV(reference front).
FrontComparison compare_fronts(const ParetoFront& reference_front, const ParetoFront& candidate,
                               ReferencePoint reference);

/// Enumerates fronts under q1 and q2. The ratio is the q2-hypervolume of the
/// q1-front configs relative to the q2 front; missing are q2-front configs
/// absent from the q1 front, spurious the reverse (both scored under q2).
FrontComparison verify_front_coincidence(const SearchSpace& space, Evaluator& q1, Evaluator& q2,
                                         std::uint64_t cap = kDefaultEnumerationCap);

nlohmann::json to_json(const FrontComparison& comparison);

}  // namespace bitsearch
