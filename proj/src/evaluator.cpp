// SPDX-License-Identifier: Apache-2.0
#include "bitsearch/evaluator.hpp"

#include <exception>
#include <thread>

#include "bitsearch/error.hpp"

namespace bitsearch {

std::vector<double> FunctionEvaluator::evaluate_batch(std::span<const BitConfig> configs) {
  std::vector<double> scores;
  scores.reserve(configs.size());
  for (const auto& c : configs) scores.push_back(fn_(c));
  return scores;
}

std::vector<double> CountingEvaluator::evaluate_batch(std::span<const BitConfig> configs) {
  evaluations_ += configs.size();
  ++batches_;
  return inner_.evaluate_batch(configs);
}

std::vector<double> TransformedEvaluator::evaluate_batch(std::span<const BitConfig> configs) {
  auto scores = inner_.evaluate_batch(configs);
  for (auto& s : scores) s = transform_(s);
  return scores;
}

ParallelEvaluator::ParallelEvaluator(std::vector<std::unique_ptr<Evaluator>> workers)
    : workers_(std::move(workers)) {
  if (workers_.empty()) throw ConfigError("parallel evaluator needs at least one worker");
}

std::vector<double> ParallelEvaluator::evaluate_batch(std::span<const BitConfig> configs) {
  const std::size_t n = configs.size();
  const std::size_t lanes = std::min(workers_.size(), std::max<std::size_t>(n, 1));
  if (lanes <= 1) return workers_.front()->evaluate_batch(configs);

  std::vector<double> scores(n);
  std::vector<std::exception_ptr> errors(lanes);
  {
    std::vector<std::jthread> threads;
    const std::size_t chunk = (n + lanes - 1) / lanes;
    for (std::size_t w = 0; w < lanes; ++w) {
      const std::size_t begin = w * chunk;
      const std::size_t end = std::min(n, begin + chunk);
      if (begin >= end) break;
      threads.emplace_back([&, w, begin, end] {
        try {
          const auto part = workers_[w]->evaluate_batch(configs.subspan(begin, end - begin));
          if (part.size() != end - begin) throw EvaluationError("worker returned a short batch");
          std::copy(part.begin(), part.end(), scores.begin() + static_cast<std::ptrdiff_t>(begin));
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    }
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);
  return scores;
}

}  // namespace bitsearch
