// SPDX-License-Identifier: Apache-2.0
#include "bitsearch/engine.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <unordered_set>

#include "bitsearch/error.hpp"
#include "bitsearch/surrogate.hpp"

namespace bitsearch {

void SearchParams::validate() const {
  nsga.validate();
  if (initial_samples == 0) throw ConfigError("initial samples must be >= 1");
  if (candidates_per_iter == 0) throw ConfigError("candidates per iteration must be >= 1");
  if (candidates_per_iter > nsga.population)
    throw ConfigError("candidates per iteration cannot exceed the NSGA-II population");
  if (subset_pool < candidates_per_iter)
    throw ConfigError("subset pool must be at least the candidate count");
  if (prune_multiplier && !(*prune_multiplier > 0.0))
    throw ConfigError("prune multiplier must be positive");
  if (regularization < 0.0) throw ConfigError("regularization must be non-negative");
}

SurrogateFactory rbf_surrogate(double regularization) {
  return [regularization](const Archive& archive) -> Predictor {
    std::vector<BitConfig> configs;
    Vector<double> targets(static_cast<Eigen::Index>(archive.size()));
    for (std::size_t i = 0; i < archive.size(); ++i) {
      configs.push_back(archive.entries()[i].config);
      targets(static_cast<Eigen::Index>(i)) = archive.entries()[i].score;
    }
    const SearchSpace& space = archive.space();
    auto model = fit_rbf(encode_batch(configs, space), targets, regularization);
    return [model = std::move(model), space](std::span<const BitConfig> batch) {
      const Vector<double> predicted = model.predict_batch(encode_batch(batch, space));
      return std::vector<double>(predicted.begin(), predicted.end());
    };
  };
}

Archive initialize_archive(const SearchSpace& space, Evaluator& evaluator, std::size_t n, Rng& rng,
                           std::vector<std::string>* warnings) {
  if (n == 0) throw ConfigError("initial sample count must be >= 1");
  std::vector<BitConfig> configs;
  std::unordered_set<BitConfig> seen;
  const std::size_t max_attempts = std::max<std::size_t>(1000, 50 * n);
  for (std::size_t attempt = 0; attempt < max_attempts && configs.size() < n; ++attempt) {
    BitConfig c = random_config(space, rng);
    if (seen.insert(c).second) configs.push_back(std::move(c));
  }
  if (configs.size() < n && warnings)
    warnings->push_back("search space yielded only " + std::to_string(configs.size()) +
                        " distinct configs of the " + std::to_string(n) + " requested");

  const auto scores = evaluator.evaluate_batch(configs);
  if (scores.size() != configs.size())
    throw EvaluationError("evaluator returned " + std::to_string(scores.size()) + " scores for " +
                          std::to_string(configs.size()) + " configs");
  Archive archive(space);
  for (std::size_t i = 0; i < configs.size(); ++i) archive.insert(configs[i], scores[i], 0);
  return archive;
}

ParetoFront pareto_front(std::span<const ArchiveEntry> entries) {
  if (entries.empty()) throw Error("pareto front of an empty archive");
  std::vector<Objectives> objs;
  objs.reserve(entries.size());
  for (const auto& e : entries) objs.push_back({e.score, e.bits});
  // Only front 0 is needed; an O(N) sweep over a (bits, score) order finds it.
  std::vector<std::size_t> order(entries.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (objs[a].bits != objs[b].bits) return objs[a].bits < objs[b].bits;
    return objs[a].score < objs[b].score;
  });
  ParetoFront front;
  double best_score = std::numeric_limits<double>::infinity();
  double best_bits = std::numeric_limits<double>::quiet_NaN();
  for (std::size_t i : order) {
    const auto& o = objs[i];
    if (o.score < best_score) {
      front.push_back(entries[i]);
      best_score = o.score;
      best_bits = o.bits;
    } else if (o.score == best_score && o.bits == best_bits) {
      front.push_back(entries[i]);  // exact tie, mutually non-dominated
    }
  }
  return front;
}

ParetoFront pareto_front(const Archive& archive) {
  return pareto_front(std::span<const ArchiveEntry>(archive.entries()));
}

const ArchiveEntry& select_optimal(const Archive& archive, double target_bits, double tolerance) {
  if (tolerance < 0.0) throw ConfigError("tolerance must be non-negative");
  // Absorbs representation error at the window edge (e.g. 2.505 vs 2.5).
  const double window = tolerance + 1e-12;
  const ArchiveEntry* best = nullptr;
  const ArchiveEntry* nearest = nullptr;
  for (const auto& e : archive.entries()) {
    if (!nearest || std::abs(e.bits - target_bits) < std::abs(nearest->bits - target_bits)) nearest = &e;
    if (std::abs(e.bits - target_bits) > window) continue;
    if (!best || e.score < best->score || (e.score == best->score && e.bits < best->bits)) best = &e;
  }
  if (!best) {
    std::string msg = "no archived config within " + std::to_string(tolerance) + " bits of " +
                      std::to_string(target_bits);
    if (nearest) msg += "; nearest has " + std::to_string(nearest->bits) + " bits";
    throw NotFoundError(msg);
  }
  return *best;
}

std::vector<BitConfig> select_candidates(const NsgaResult& nsga, const Archive& archive,
                                         std::size_t k, std::size_t subset_pool,
                                         std::size_t* collisions) {
  const std::size_t pool_size = std::min(subset_pool, nsga.population.size());
  std::vector<const ObjectivePoint*> pool;
  std::unordered_set<BitConfig> seen;
  std::size_t dropped = 0;
  for (std::size_t i = 0; i < pool_size; ++i) {
    const auto& p = nsga.population[i];
    if (!seen.insert(p.payload).second) continue;
    if (archive.contains(p.payload)) {
      ++dropped;
      continue;
    }
    pool.push_back(&p);
  }
  if (collisions) *collisions = dropped;

  std::vector<BitConfig> chosen;
  if (pool.size() <= k) {
    for (const auto* p : pool) chosen.push_back(p->payload);
    return chosen;
  }

  auto range_of = [&](auto member) {
    auto [lo, hi] = std::minmax_element(pool.begin(), pool.end(), [&](auto* a, auto* b) {
      return a->*member < b->*member;
    });
    const double r = (*hi)->*member - (*lo)->*member;
    return r > 0.0 ? r : 1.0;
  };
  const double score_range = range_of(&ObjectivePoint::score);
  const double bits_range = range_of(&ObjectivePoint::bits);
  auto distance = [&](const ObjectivePoint* a, const ObjectivePoint* b) {
    const double ds = (a->score - b->score) / score_range;
    const double db = (a->bits - b->bits) / bits_range;
    return std::sqrt(ds * ds + db * db);
  };

  // Farthest-first from the best-ranked member; ties go to pool order.
  std::vector<bool> taken(pool.size(), false);
  std::vector<double> gap(pool.size(), std::numeric_limits<double>::infinity());
  std::size_t next = 0;
  for (std::size_t round = 0; round < k; ++round) {
    taken[next] = true;
    chosen.push_back(pool[next]->payload);
    std::size_t best = pool.size();
    for (std::size_t j = 0; j < pool.size(); ++j) {
      if (taken[j]) continue;
      gap[j] = std::min(gap[j], distance(pool[j], pool[next]));
      if (best == pool.size() || gap[j] > gap[best]) best = j;
    }
    if (best == pool.size()) break;
    next = best;
  }
  return chosen;
}

namespace {

std::vector<BitConfig> seed_population(const ParetoFront& front, const SearchSpace& space,
                                       std::size_t population, Rng& rng) {
  std::vector<BitConfig> seeds;
  if (front.size() > population) {
    std::vector<Objectives> objs;
    for (const auto& e : front) objs.push_back({e.score, e.bits});
    const auto distance = crowding_distance(std::span<const Objectives>(objs));
    std::vector<std::size_t> order(front.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return distance[a] > distance[b]; });
    order.resize(population);
    std::sort(order.begin(), order.end());
    for (std::size_t i : order) seeds.push_back(front[i].config);
    return seeds;
  }
  for (const auto& e : front) seeds.push_back(e.config);
  std::uniform_int_distribution<std::size_t> pick(0, front.size() - 1);
  for (std::size_t slot = 0; seeds.size() < population; ++slot) {
    if (slot % 2 == 0)
      seeds.push_back(mutate(front[pick(rng)].config, space, rng, 1.0));
    else
      seeds.push_back(random_config(space, rng));
  }
  return seeds;
}

}  // namespace

SearchResult search(const SearchSpace& input_space, Evaluator& evaluator, const SearchParams& params,
                    const SearchOptions& options) {
  params.validate();
  auto log = [&](const std::string& msg) {
    if (options.log) options.log(msg);
  };
  const SurrogateFactory surrogate =
      options.surrogate ? options.surrogate : rbf_surrogate(params.regularization);

  SearchStats stats;
  std::optional<SensitivityProfile> profile;
  std::vector<std::size_t> pruned_layers;
  std::vector<std::string> warnings;

  std::optional<SearchState> state;
  if (options.resume) {
    state = *options.resume;
    stats.true_evaluations = state->archive.size();
    log("resuming after iteration " + std::to_string(state->iteration) + " with " +
        std::to_string(state->archive.size()) + " archived configs");
  } else {
    SearchSpace space = input_space;
    if (params.prune_multiplier) {
      CountingEvaluator counter(evaluator);
      profile = measure_sensitivity(space, counter);
      stats.sensitivity_evaluations = counter.evaluations();
      auto pruned = prune_space(space, *profile, *params.prune_multiplier);
      pruned_layers = pruned.outliers;
      space = std::move(pruned.space);
      log("pruned " + std::to_string(pruned_layers.size()) + " outlier layers");
    }
    Rng rng(params.seed);
    Archive archive = initialize_archive(space, evaluator, params.initial_samples, rng, &warnings);
    stats.true_evaluations = archive.size();
    state = SearchState{std::move(archive), 0, rng};
    if (options.on_checkpoint) options.on_checkpoint(*state);
  }

  SearchResult result{state->archive, {}, {}, SearchStatus::Completed, {}, 0, profile,
                      pruned_layers, warnings};
  const SearchSpace& space = state->archive.space();
  NsgaParams nsga = params.nsga;

  for (std::size_t it = state->iteration + 1; it <= params.iterations; ++it) {
    const Predictor predictor = surrogate(state->archive);
    const ObjectiveFn objective = [&](std::span<const BitConfig> configs) {
      const auto scores = predictor(configs);
      std::vector<Objectives> out;
      out.reserve(configs.size());
      for (std::size_t i = 0; i < configs.size(); ++i)
        out.push_back({scores[i], effective_bits(configs[i], space)});
      return out;
    };

    const ParetoFront front = pareto_front(state->archive);
    const auto seeds = seed_population(front, space, nsga.population, state->rng);
    nsga.seed = state->rng();
    const NsgaResult evolved = nsga2_run(seeds, objective, nsga, space);
    stats.predictor_invocations += evolved.offspring_evaluations;
    stats.seed_predictions += evolved.seed_evaluations;
    stats.predictor_calls += evolved.objective_calls;

    std::size_t collisions = 0;
    const auto candidates = select_candidates(evolved, state->archive, params.candidates_per_iter,
                                              params.subset_pool, &collisions);
    stats.archive_collisions += collisions;

    std::vector<double> scores;
    try {
      scores = evaluator.evaluate_batch(candidates);
      if (scores.size() != candidates.size())
        throw EvaluationError("evaluator returned " + std::to_string(scores.size()) +
                              " scores for " + std::to_string(candidates.size()) + " candidates");
    } catch (const EvaluationError& e) {
      result.status = SearchStatus::EvaluatorFailed;
      result.error = e.what();
      result.failed_iteration = it;
      log("iteration " + std::to_string(it) + " failed: " + e.what());
      break;
    }
    for (std::size_t i = 0; i < candidates.size(); ++i)
      state->archive.insert(candidates[i], scores[i], it);
    stats.true_evaluations += candidates.size();
    stats.verified_per_iteration.push_back(candidates.size());
    state->iteration = it;
    log("iteration " + std::to_string(it) + ": verified " + std::to_string(candidates.size()) +
        ", archive " + std::to_string(state->archive.size()));
    if (options.on_checkpoint) options.on_checkpoint(*state);
  }

  result.archive = state->archive;
  result.front = pareto_front(result.archive);
  result.stats = std::move(stats);
  return result;
}

}  // namespace bitsearch
