// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <atomic>
#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <vector>

#include "bitsearch/config_space.hpp"

namespace bitsearch {

/// Verified quality scoring (lower is better). Implementations must be
/// deterministic: the same config always yields the same score.
class Evaluator {
 public:
  virtual ~Evaluator() = default;
  virtual std::vector<double> evaluate_batch(std::span<const BitConfig> configs) = 0;

  double evaluate(const BitConfig& config) {
    return evaluate_batch(std::span<const BitConfig>(&config, 1)).front();
  }
};

/// Adapts a per-config function.
class FunctionEvaluator : public Evaluator {
 public:
  explicit FunctionEvaluator(std::function<double(const BitConfig&)> fn) : fn_(std::move(fn)) {}
  std::vector<double> evaluate_batch(std::span<const BitConfig> configs) override;

 private:
  std::function<double(const BitConfig&)> fn_;
};

/// Forwards to another evaluator and counts configs and batches.
class CountingEvaluator : public Evaluator {
 public:
  explicit CountingEvaluator(Evaluator& inner) : inner_(inner) {}
  std::vector<double> evaluate_batch(std::span<const BitConfig> configs) override;

  std::size_t evaluations() const { return evaluations_; }
  std::size_t batches() const { return batches_; }

 private:
  Evaluator& inner_;
  std::atomic<std::size_t> evaluations_{0};
  std::atomic<std::size_t> batches_{0};
};

/// Applies a scalar transform g to another evaluator's scores.
class TransformedEvaluator : public Evaluator {
 public:
  TransformedEvaluator(Evaluator& inner, std::function<double(double)> transform)
      : inner_(inner), transform_(std::move(transform)) {}
  std::vector<double> evaluate_batch(std::span<const BitConfig> configs) override;

 private:
  Evaluator& inner_;
  std::function<double(double)> transform_;
};

/// Splits each batch into contiguous chunks served concurrently by the given
/// workers; scores are returned in input order.
class ParallelEvaluator : public Evaluator {
 public:
  explicit ParallelEvaluator(std::vector<std::unique_ptr<Evaluator>> workers);
  std::vector<double> evaluate_batch(std::span<const BitConfig> configs) override;

 private:
  std::vector<std::unique_ptr<Evaluator>> workers_;
};

}  // namespace bitsearch
