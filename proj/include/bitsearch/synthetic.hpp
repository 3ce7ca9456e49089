// SPDX-License-Identifier: Apache-2.0
//
// Closed-form stand-ins for a real quantization-quality evaluator, with the
// per-layer sensitivity heterogeneity seen on real models.
#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <vector>

#include <json.hpp>

#include "bitsearch/config_space.hpp"
#include "bitsearch/evaluator.hpp"
#include "bitsearch/linalg.hpp"

namespace bitsearch {

enum class SyntheticKind { Separable, Interaction };

struct SyntheticModel {
  SyntheticKind kind = SyntheticKind::Separable;
  /// Per-layer sensitivity weight s_i.
  std::vector<double> weights;
  /// Penalty p(b), strictly decreasing in b.
  std::map<BitWidth, double> penalty;
  /// Symmetric non-negative couplings M_ij (interaction kind only).
  Matrix<double> interaction;
  /// Std-dev of Gaussian observation noise, seeded per config.
  double noise = 0.0;
  std::uint64_t seed = 0;

  /// Throws ConfigError when an invariant fails or the model does not cover
  /// `space` (layer count, penalty entries for every choice).
  void validate(const SearchSpace& space) const;
};

/// sum_i s_i p(b_i) + noise. Requires kind == Separable.
double separable_eval(const SyntheticModel& model, const BitConfig& config);
/// Separable term + sum_{i<j} M_ij p(b_i) p(b_j) + noise.
double interaction_eval(const SyntheticModel& model, const BitConfig& config);

class SyntheticEvaluator : public Evaluator {
 public:
  explicit SyntheticEvaluator(SyntheticModel model) : model_(std::move(model)) {}
  std::vector<double> evaluate_batch(std::span<const BitConfig> configs) override;
  const SyntheticModel& model() const { return model_; }

 private:
  SyntheticModel model_;
};

/// Heterogeneous random model over `space`: log-normal weights, geometric
/// penalty 0.3^(b - b_min) and, for the interaction kind, sparse couplings.
SyntheticModel random_synthetic_model(const SearchSpace& space, SyntheticKind kind,
                                      std::uint64_t seed);

/// `layers` equal-size layers named layers.<i>.linear with the given choices.
SearchSpace uniform_space(std::size_t layers, std::vector<BitWidth> choices = {2, 3, 4},
                          std::uint64_t params = 4096 * 4096);

SyntheticModel synthetic_model_from_json(const nlohmann::json& doc);
nlohmann::json to_json(const SyntheticModel& model);
SyntheticModel load_synthetic_model(const std::filesystem::path& path);

}  // namespace bitsearch
