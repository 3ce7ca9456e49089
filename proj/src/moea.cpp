// SPDX-License-Identifier: Apache-2.0
#include "bitsearch/moea.hpp"

#include <algorithm>
#include <limits>
#include <numeric>
#include <unordered_map>

#include "bitsearch/error.hpp"

namespace bitsearch {

void NsgaParams::validate() const {
  if (population < 4 || population % 2 != 0)
    throw ConfigError("NSGA-II population must be even and at least 4");
  if (crossover_prob < 0.0 || crossover_prob > 1.0)
    throw ConfigError("crossover probability must lie in [0, 1]");
  if (mutation_prob < 0.0 || mutation_prob > 1.0)
    throw ConfigError("mutation probability must lie in [0, 1]");
}

bool dominates(const Objectives& a, const Objectives& b) {
  return a.score <= b.score && a.bits <= b.bits && (a.score < b.score || a.bits < b.bits);
}

Fronts non_dominated_sort(std::span<const Objectives> points) {
  const std::size_t n = points.size();
  std::vector<std::vector<std::size_t>> dominated(n);
  std::vector<std::size_t> domination_count(n, 0);
  Fronts fronts;
  std::vector<std::size_t> current;
  for (std::size_t p = 0; p < n; ++p) {
    for (std::size_t q = p + 1; q < n; ++q) {
      if (dominates(points[p], points[q])) {
        dominated[p].push_back(q);
        ++domination_count[q];
      } else if (dominates(points[q], points[p])) {
        dominated[q].push_back(p);
        ++domination_count[p];
      }
    }
  }
  for (std::size_t p = 0; p < n; ++p)
    if (domination_count[p] == 0) current.push_back(p);
  while (!current.empty()) {
    std::vector<std::size_t> next;
    for (std::size_t p : current)
      for (std::size_t q : dominated[p])
        if (--domination_count[q] == 0) next.push_back(q);
    std::sort(next.begin(), next.end());
    fronts.push_back(std::move(current));
    current = std::move(next);
  }
  return fronts;
}

namespace {

std::vector<Objectives> objectives_of(std::span<const ObjectivePoint> points) {
  std::vector<Objectives> out;
  out.reserve(points.size());
  for (const auto& p : points) out.push_back({p.score, p.bits});
  return out;
}

}  // namespace

Fronts non_dominated_sort(std::span<const ObjectivePoint> points) {
  const auto objs = objectives_of(points);
  return non_dominated_sort(std::span<const Objectives>(objs));
}

std::vector<double> crowding_distance(std::span<const Objectives> front) {
  constexpr double kInf = std::numeric_limits<double>::infinity();
  const std::size_t n = front.size();
  std::vector<double> distance(n, 0.0);
  if (n <= 2) {
    std::fill(distance.begin(), distance.end(), kInf);
    return distance;
  }
  std::vector<std::size_t> order(n);
  for (auto member : {&Objectives::score, &Objectives::bits}) {
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return front[a].*member < front[b].*member;
    });
    const double lo = front[order.front()].*member;
    const double hi = front[order.back()].*member;
    distance[order.front()] = kInf;
    distance[order.back()] = kInf;
    const double range = hi - lo;
    if (range <= 0.0) continue;
    for (std::size_t k = 1; k + 1 < n; ++k)
      distance[order[k]] += (front[order[k + 1]].*member - front[order[k - 1]].*member) / range;
  }
  return distance;
}

std::vector<double> crowding_distance(std::span<const ObjectivePoint> front) {
  const auto objs = objectives_of(front);
  return crowding_distance(std::span<const Objectives>(objs));
}

std::pair<BitConfig, BitConfig> crossover(const BitConfig& a, const BitConfig& b,
                                          const SearchSpace& space, Rng& rng, double prob) {
  if (a.size() != space.layer_count() || b.size() != space.layer_count())
    throw ConfigError("crossover: parents do not match the search space");
  std::pair<BitConfig, BitConfig> children{a, b};
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  if (unit(rng) >= prob) return children;
  std::bernoulli_distribution swap(0.5);
  for (std::size_t i : space.free_layers())
    if (swap(rng)) std::swap(children.first[i], children.second[i]);
  return children;
}

BitConfig mutate(const BitConfig& config, const SearchSpace& space, Rng& rng, double prob) {
  BitConfig out = config;
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  if (unit(rng) >= prob) return out;
  const auto& free = space.free_layers();
  const double gene_rate = 1.0 / static_cast<double>(free.size());
  for (std::size_t i : free) {
    if (unit(rng) >= gene_rate) continue;
    const auto& choices = space.layer(i).choices;
    if (choices.size() < 2) continue;
    // Uniform over the other choices: draw from size-1 slots and skip ours.
    std::uniform_int_distribution<std::size_t> pick(0, choices.size() - 2);
    std::size_t k = pick(rng);
    const auto current = static_cast<std::size_t>(
        std::find(choices.begin(), choices.end(), out[i]) - choices.begin());
    if (k >= current) ++k;
    out[i] = choices[k];
  }
  return out;
}

namespace {

struct Ranking {
  Fronts fronts;
  std::vector<std::size_t> rank;
  std::vector<double> crowding;
};

Ranking rank_population(std::span<const Objectives> objs) {
  Ranking r;
  r.fronts = non_dominated_sort(objs);
  r.rank.assign(objs.size(), 0);
  r.crowding.assign(objs.size(), 0.0);
  std::vector<Objectives> members;
  for (std::size_t f = 0; f < r.fronts.size(); ++f) {
    members.clear();
    for (std::size_t i : r.fronts[f]) {
      r.rank[i] = f;
      members.push_back(objs[i]);
    }
    const auto distance = crowding_distance(std::span<const Objectives>(members));
    for (std::size_t k = 0; k < r.fronts[f].size(); ++k) r.crowding[r.fronts[f][k]] = distance[k];
  }
  return r;
}

// (rank asc, crowding desc, index asc)
bool better(const Ranking& r, std::size_t a, std::size_t b) {
  if (r.rank[a] != r.rank[b]) return r.rank[a] < r.rank[b];
  if (r.crowding[a] != r.crowding[b]) return r.crowding[a] > r.crowding[b];
  return a < b;
}

class MemoizedObjective {
 public:
  MemoizedObjective(const ObjectiveFn& fn, NsgaResult& stats) : fn_(fn), stats_(stats) {}

  std::vector<Objectives> operator()(std::span<const BitConfig> configs) {
    std::vector<BitConfig> missing;
    std::unordered_map<BitConfig, std::size_t> pending;
    for (const auto& c : configs)
      if (!cache_.contains(c) && pending.emplace(c, missing.size()).second) missing.push_back(c);
    if (!missing.empty()) {
      const auto values = fn_(std::span<const BitConfig>(missing));
      if (values.size() != missing.size())
        throw EvaluationError("objective returned " + std::to_string(values.size()) +
                              " values for " + std::to_string(missing.size()) + " configs");
      for (std::size_t k = 0; k < missing.size(); ++k) cache_.emplace(missing[k], values[k]);
      stats_.objective_calls += missing.size();
    }
    std::vector<Objectives> out;
    out.reserve(configs.size());
    for (const auto& c : configs) out.push_back(cache_.at(c));
    return out;
  }

 private:
  const ObjectiveFn& fn_;
  NsgaResult& stats_;
  std::unordered_map<BitConfig, Objectives> cache_;
};

}  // namespace

NsgaResult nsga2_run(std::span<const BitConfig> seed_population, const ObjectiveFn& objective,
                     const NsgaParams& params, const SearchSpace& space) {
  params.validate();
  if (seed_population.empty()) throw ConfigError("NSGA-II needs a non-empty seed population");
  for (const auto& c : seed_population) space.validate(c);

  NsgaResult result;
  MemoizedObjective evaluate(objective, result);
  Rng rng(params.seed);

  std::vector<BitConfig> population(seed_population.begin(), seed_population.end());
  std::vector<Objectives> objs = evaluate(population);
  result.seed_evaluations = population.size();

  const std::size_t mu = params.population;
  for (std::size_t gen = 0; gen < params.generations; ++gen) {
    const Ranking ranking = rank_population(objs);
    std::uniform_int_distribution<std::size_t> pick(0, population.size() - 1);
    auto tournament = [&]() -> const BitConfig& {
      const std::size_t a = pick(rng);
      const std::size_t b = pick(rng);
      return population[better(ranking, a, b) || a == b ? a : b];
    };

    std::vector<BitConfig> offspring;
    offspring.reserve(mu);
    while (offspring.size() < mu) {
      const BitConfig& mother = tournament();
      const BitConfig& father = tournament();
      auto [first, second] = crossover(mother, father, space, rng, params.crossover_prob);
      offspring.push_back(mutate(first, space, rng, params.mutation_prob));
      if (offspring.size() < mu) offspring.push_back(mutate(second, space, rng, params.mutation_prob));
    }
    const auto offspring_objs = evaluate(offspring);
    result.offspring_evaluations += offspring.size();

    // (mu + lambda) survival; parents precede offspring so ties favor parents.
    std::vector<BitConfig> combined = std::move(population);
    combined.insert(combined.end(), std::make_move_iterator(offspring.begin()),
                    std::make_move_iterator(offspring.end()));
    std::vector<Objectives> combined_objs = std::move(objs);
    combined_objs.insert(combined_objs.end(), offspring_objs.begin(), offspring_objs.end());

    const Fronts fronts = non_dominated_sort(std::span<const Objectives>(combined_objs));
    std::vector<std::size_t> survivors;
    survivors.reserve(mu);
    for (const auto& front : fronts) {
      if (survivors.size() + front.size() <= mu) {
        survivors.insert(survivors.end(), front.begin(), front.end());
        if (survivors.size() == mu) break;
        continue;
      }
      std::vector<Objectives> members;
      for (std::size_t i : front) members.push_back(combined_objs[i]);
      const auto distance = crowding_distance(std::span<const Objectives>(members));
      std::vector<std::size_t> order(front.size());
      std::iota(order.begin(), order.end(), 0);
      std::stable_sort(order.begin(), order.end(),
                       [&](std::size_t a, std::size_t b) { return distance[a] > distance[b]; });
      for (std::size_t k = 0; survivors.size() < mu; ++k) survivors.push_back(front[order[k]]);
      break;
    }

    population.clear();
    objs.clear();
    for (std::size_t i : survivors) {
      population.push_back(std::move(combined[i]));
      objs.push_back(combined_objs[i]);
    }
  }

  const Ranking ranking = rank_population(objs);
  std::vector<std::size_t> order(population.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return better(ranking, a, b); });
  std::vector<std::size_t> position(order.size());
  for (std::size_t k = 0; k < order.size(); ++k) position[order[k]] = k;

  for (std::size_t k = 0; k < order.size(); ++k) {
    const std::size_t i = order[k];
    result.population.push_back({objs[i].score, objs[i].bits, population[i]});
    result.rank.push_back(ranking.rank[i]);
    result.crowding.push_back(ranking.crowding[i]);
  }
  for (const auto& front : ranking.fronts) {
    std::vector<std::size_t> mapped;
    for (std::size_t i : front) mapped.push_back(position[i]);
    std::sort(mapped.begin(), mapped.end());
    result.fronts.push_back(std::move(mapped));
  }
  return result;
}

}  // namespace bitsearch
