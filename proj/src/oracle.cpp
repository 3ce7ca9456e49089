// SPDX-License-Identifier: Apache-2.0
#include "bitsearch/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <unordered_map>
#include <unordered_set>

#include "bitsearch/engine.hpp"
#include "bitsearch/error.hpp"

namespace bitsearch {

std::vector<BitConfig> enumerate_configs(const SearchSpace& space, std::uint64_t cap) {
  const auto count = space.config_count();
  if (!count || *count > cap)
    throw ConfigError("search space has 10^" + std::to_string(space.log10_config_count()) +
                      " configs, above the enumeration cap of " + std::to_string(cap));
  const auto& free = space.free_layers();
  std::vector<std::size_t> digit(free.size(), 0);
  std::vector<BitConfig> out;
  out.reserve(*count);
  BitConfig config = space.min_config();
  for (std::uint64_t n = 0; n < *count; ++n) {
    out.push_back(config);
    for (std::size_t k = free.size(); k-- > 0;) {
      const auto& choices = space.layer(free[k]).choices;
      if (++digit[k] < choices.size()) {
        config[free[k]] = choices[digit[k]];
        break;
      }
      digit[k] = 0;
      config[free[k]] = choices[0];
    }
  }
  return out;
}

std::vector<ArchiveEntry> enumerate_all(const SearchSpace& space, Evaluator& evaluator,
                                        std::uint64_t cap) {
  const auto configs = enumerate_configs(space, cap);
  constexpr std::size_t kBatch = 4096;
  std::vector<ArchiveEntry> entries;
  entries.reserve(configs.size());
  for (std::size_t start = 0; start < configs.size(); start += kBatch) {
    const auto batch = std::span<const BitConfig>(configs).subspan(
        start, std::min(kBatch, configs.size() - start));
    const auto scores = evaluator.evaluate_batch(batch);
    if (scores.size() != batch.size()) throw EvaluationError("evaluator returned a short batch");
    for (std::size_t i = 0; i < batch.size(); ++i)
      entries.push_back({batch[i], scores[i], effective_bits(batch[i], space), 0});
  }
  return entries;
}

ParetoFront enumerate_front(const SearchSpace& space, Evaluator& evaluator, std::uint64_t cap) {
  const auto entries = enumerate_all(space, evaluator, cap);
  return pareto_front(std::span<const ArchiveEntry>(entries));
}

double hypervolume(std::span<const Objectives> front, ReferencePoint reference) {
  std::vector<Objectives> points(front.begin(), front.end());
  for (const auto& p : points)
    if (p.score > reference.score || p.bits > reference.bits)
      throw Error("hypervolume: point (" + std::to_string(p.score) + ", " + std::to_string(p.bits) +
                  ") does not dominate the reference point");
  std::sort(points.begin(), points.end(), [](const Objectives& a, const Objectives& b) {
    return a.score != b.score ? a.score < b.score : a.bits < b.bits;
  });
  double area = 0.0;
  double floor_bits = reference.bits;
  for (const auto& p : points) {
    if (p.bits >= floor_bits) continue;
    area += (reference.score - p.score) * (floor_bits - p.bits);
    floor_bits = p.bits;
  }
  return area;
}

double hypervolume(std::span<const ArchiveEntry> front, ReferencePoint reference) {
  std::vector<Objectives> points;
  points.reserve(front.size());
  for (const auto& e : front) points.push_back({e.score, e.bits});
  return hypervolume(std::span<const Objectives>(points), reference);
}

ReferencePoint default_reference(const SearchSpace& space, std::span<const ArchiveEntry> entries) {
  if (entries.empty()) throw Error("reference point needs at least one entry");
  double max_score = entries.front().score;
  for (const auto& e : entries) max_score = std::max(max_score, e.score);
  BitWidth max_choice = 0;
  for (const auto& layer : space.layers()) max_choice = std::max(max_choice, layer.max_choice());
  return {max_score + 0.1 * std::abs(max_score), max_choice + space.overhead().bits_per_weight() + 0.1};
}

namespace {

std::vector<ObjectivePoint> difference(const ParetoFront& from, const ParetoFront& minus) {
  std::unordered_set<BitConfig> excluded;
  for (const auto& e : minus) excluded.insert(e.config);
  std::vector<ObjectivePoint> out;
  for (const auto& e : from)
    if (!excluded.contains(e.config)) out.push_back({e.score, e.bits, e.config});
  return out;
}

}  // namespace

FrontComparison compare_fronts(const ParetoFront& reference_front, const ParetoFront& candidate,
                               ReferencePoint reference) {
  FrontComparison out;
  const double exact = hypervolume(std::span<const ArchiveEntry>(reference_front), reference);
  const double found = hypervolume(std::span<const ArchiveEntry>(candidate), reference);
  out.hypervolume_ratio = exact > 0.0 ? found / exact : (found > 0.0 ? INFINITY : 1.0);
  out.missing_points = difference(reference_front, candidate);
  out.spurious_points = difference(candidate, reference_front);
  return out;
}

FrontComparison verify_front_coincidence(const SearchSpace& space, Evaluator& q1, Evaluator& q2,
                                         std::uint64_t cap) {
  const auto under_q1 = enumerate_all(space, q1, cap);
  const auto under_q2 = enumerate_all(space, q2, cap);
  const ParetoFront front1 = pareto_front(std::span<const ArchiveEntry>(under_q1));
  const ParetoFront front2 = pareto_front(std::span<const ArchiveEntry>(under_q2));

  // Re-score the q1 front under q2 so both sides live in one objective space.
  std::unordered_map<BitConfig, const ArchiveEntry*> q2_of;
  for (const auto& e : under_q2) q2_of.emplace(e.config, &e);
  ParetoFront front1_in_q2;
  for (const auto& e : front1) front1_in_q2.push_back(*q2_of.at(e.config));

  const auto reference = default_reference(space, std::span<const ArchiveEntry>(under_q2));
  return compare_fronts(front2, front1_in_q2, reference);
}

nlohmann::json to_json(const FrontComparison& comparison) {
  auto points = [](const std::vector<ObjectivePoint>& list) {
    nlohmann::json out = nlohmann::json::array();
    for (const auto& p : list)
      out.push_back({{"eff_bits", p.bits}, {"score", p.score}, {"bits", p.payload.bits()}});
    return out;
  };
  return {{"hypervolume_ratio", comparison.hypervolume_ratio},
          {"coincident", comparison.coincident()},
          {"missing", points(comparison.missing_points)},
          {"spurious", points(comparison.spurious_points)}};
}

}  // namespace bitsearch
