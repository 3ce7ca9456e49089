// SPDX-License-Identifier: Apache-2.0
//
// The outer surrogate-assisted search loop: random initial archive, then
// repeated predictor fit -> NSGA-II on predicted quality and effective bits
// -> verification of a diverse candidate subset -> archive update.
#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "bitsearch/archive.hpp"
#include "bitsearch/config_space.hpp"
#include "bitsearch/evaluator.hpp"
#include "bitsearch/moea.hpp"
#include "bitsearch/sensitivity.hpp"

namespace bitsearch {

struct SearchParams {
  std::size_t initial_samples = 250;
  std::size_t iterations = 200;
  std::size_t candidates_per_iter = 50;
  NsgaParams nsga;
  std::size_t subset_pool = 100;
  /// Sensitivity pruning before the search; disabled when empty.
  std::optional<double> prune_multiplier;
  double regularization = 1e-8;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Maps configs to predicted scores.
using Predictor = std::function<std::vector<double>(std::span<const BitConfig>)>;
/// Builds a predictor from the current archive; called once per iteration.
using SurrogateFactory = std::function<Predictor(const Archive&)>;

/// Cubic RBF refit from scratch on the whole archive.
SurrogateFactory rbf_surrogate(double regularization = 1e-8);

/// Resumable loop state, emitted after initialization and every iteration.
struct SearchState {
  Archive archive;
  /// Number of completed outer iterations.
  std::size_t iteration = 0;
  Rng rng;
};

struct SearchOptions {
  /// Defaults to rbf_surrogate(params.regularization).
  SurrogateFactory surrogate;
  std::function<void(const SearchState&)> on_checkpoint;
  std::optional<SearchState> resume;
  std::function<void(const std::string&)> log;
};

struct SearchStats {
  /// Initial samples plus verified candidates (excludes sensitivity probes).
  std::size_t true_evaluations = 0;
  std::size_t sensitivity_evaluations = 0;
  /// Offspring predictions requested by NSGA-II, population x generations
  /// per iteration.
  std::size_t predictor_invocations = 0;
  /// Predictions requested for NSGA-II seed populations.
  std::size_t seed_predictions = 0;
  /// Distinct configs actually sent to the predictor.
  std::size_t predictor_calls = 0;
  /// Pool members dropped because they were already archived.
  std::size_t archive_collisions = 0;
  std::vector<std::size_t> verified_per_iteration;
};

enum class SearchStatus { Completed, EvaluatorFailed };

struct SearchResult {
  Archive archive;
  ParetoFront front;
  SearchStats stats;
  SearchStatus status = SearchStatus::Completed;
  std::string error;
  /// Outer iteration that failed (1-based), when status != Completed.
  std::size_t failed_iteration = 0;
  std::optional<SensitivityProfile> sensitivity;
  std::vector<std::size_t> pruned_layers;
  std::vector<std::string> warnings;
};

/// Up to `n` distinct random configs, verified in one batch. When the space
/// runs out of unseen configs the archive is partial and a warning is added.
Archive initialize_archive(const SearchSpace& space, Evaluator& evaluator, std::size_t n, Rng& rng,
                           std::vector<std::string>* warnings = nullptr);

SearchResult search(const SearchSpace& space, Evaluator& evaluator, const SearchParams& params,
                    const SearchOptions& options = {});

/// Best `subset_pool` members of the NSGA-II result by (rank, crowding),
/// minus archived configs, thinned to `k` by farthest-first traversal in
/// normalized objective space.
std::vector<BitConfig> select_candidates(const NsgaResult& nsga, const Archive& archive,
                                         std::size_t k, std::size_t subset_pool,
                                         std::size_t* collisions = nullptr);

ParetoFront pareto_front(std::span<const ArchiveEntry> entries);
ParetoFront pareto_front(const Archive& archive);

/// Lowest-score entry with |bits - target| <= tolerance; ties go to fewer
/// bits, then earlier insertion. Throws NotFoundError otherwise.
const ArchiveEntry& select_optimal(const Archive& archive, double target_bits,
                                   double tolerance = 0.005);

}  // namespace bitsearch
