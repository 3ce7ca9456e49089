// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <atomic>

#include "bitsearch/error.hpp"
#include "bitsearch/evaluator.hpp"
#include "bitsearch/synthetic.hpp"

using namespace bitsearch;

namespace {

SyntheticModel three_layer_interaction() {
  SyntheticModel m;
  m.kind = SyntheticKind::Interaction;
  m.weights = {1.0, 2.0, 0.5};
  m.penalty = {{2, 1.0}, {3, 0.3}, {4, 0.1}};
  m.interaction = Matrix<double>::Zero(3, 3);
  m.interaction(0, 1) = m.interaction(1, 0) = 0.2;
  m.interaction(0, 2) = m.interaction(2, 0) = 0.4;
  m.interaction(1, 2) = m.interaction(2, 1) = 0.1;
  return m;
}

}  // namespace

TEST_CASE("hand-computed synthetic scores") {
  auto m = three_layer_interaction();
  const BitConfig c({2, 3, 4});
  // 1*1 + 2*0.3 + 0.5*0.1 = 1.65; 0.2*1*0.3 + 0.4*1*0.1 + 0.1*0.3*0.1 = 0.103
  CHECK(interaction_eval(m, c) == doctest::Approx(1.753).epsilon(1e-14));
  CHECK_THROWS_AS(separable_eval(m, c), EvaluationError);
  m.kind = SyntheticKind::Separable;
  CHECK(separable_eval(m, c) == doctest::Approx(1.65).epsilon(1e-14));
  CHECK_NOTHROW(three_layer_interaction().validate(uniform_space(3)));
}

TEST_CASE("noise is deterministic per config") {
  const auto space = uniform_space(6);
  auto model = random_synthetic_model(space, SyntheticKind::Separable, 4);
  model.noise = 0.05;
  SyntheticEvaluator a(model), b(model);
  Rng rng(1);
  std::vector<BitConfig> configs;
  for (int i = 0; i < 50; ++i) configs.push_back(random_config(space, rng));
  CHECK(a.evaluate_batch(configs) == b.evaluate_batch(configs));
  std::reverse(configs.begin(), configs.end());
  auto reversed = a.evaluate_batch(configs);
  std::reverse(reversed.begin(), reversed.end());
  std::reverse(configs.begin(), configs.end());
  CHECK(reversed == a.evaluate_batch(configs));
  model.noise = 0.0;
  CHECK(SyntheticEvaluator(model).evaluate_batch(configs) != a.evaluate_batch(configs));
}

TEST_CASE("model validation") {
  const auto space = uniform_space(3);
  auto m = three_layer_interaction();
  m.interaction(0, 1) = 0.3;
  CHECK_THROWS_AS(m.validate(space), ConfigError);
  m = three_layer_interaction();
  m.penalty[3] = 2.0;
  CHECK_THROWS_AS(m.validate(space), ConfigError);
  m = three_layer_interaction();
  m.penalty.erase(4);
  CHECK_THROWS_AS(m.validate(space), ConfigError);
  m = three_layer_interaction();
  m.weights.pop_back();
  CHECK_THROWS_AS(m.validate(space), ConfigError);
}

TEST_CASE("json round trip") {
  const auto space = uniform_space(9);
  const auto model = random_synthetic_model(space, SyntheticKind::Interaction, 12);
  const auto back = synthetic_model_from_json(to_json(model));
  Rng rng(3);
  for (int i = 0; i < 20; ++i) {
    const auto c = random_config(space, rng);
    CHECK(interaction_eval(back, c) == interaction_eval(model, c));
  }
  CHECK_THROWS_AS(synthetic_model_from_json(nlohmann::json{{"kind", "cubic"}}), ConfigError);
}

TEST_CASE("random interaction model has a symmetric non-negative coupling matrix") {
  const auto space = uniform_space(20);
  const auto model = random_synthetic_model(space, SyntheticKind::Interaction, 8);
  CHECK_NOTHROW(model.validate(space));
  CHECK(model.interaction.diagonal().isZero());
  CHECK((model.interaction.array() > 0).count() > 0);
}

TEST_CASE("counting and transformed wrappers") {
  FunctionEvaluator inner([](const BitConfig& c) { return static_cast<double>(c[0]); });
  CountingEvaluator counting(inner);
  std::vector<BitConfig> configs{BitConfig({2}), BitConfig({3}), BitConfig({4})};
  CHECK(counting.evaluate_batch(configs) == std::vector<double>{2, 3, 4});
  CHECK(counting.evaluate(BitConfig({4})) == 4.0);
  CHECK(counting.evaluations() == 4);
  CHECK(counting.batches() == 2);

  TransformedEvaluator squared(inner, [](double s) { return s * s; });
  CHECK(squared.evaluate_batch(configs) == std::vector<double>{4, 9, 16});
}

TEST_CASE("parallel evaluator keeps input order and propagates errors") {
  std::vector<std::unique_ptr<Evaluator>> workers;
  for (int w = 0; w < 3; ++w)
    workers.push_back(std::make_unique<FunctionEvaluator>(
        [](const BitConfig& c) { return static_cast<double>(c[0] * 10 + c[1]); }));
  ParallelEvaluator parallel(std::move(workers));
  std::vector<BitConfig> configs;
  std::vector<double> expected;
  for (int i = 0; i < 10; ++i) {
    configs.push_back(BitConfig({i % 3 + 2, i % 2 + 2}));
    expected.push_back((i % 3 + 2) * 10 + i % 2 + 2);
  }
  CHECK(parallel.evaluate_batch(configs) == expected);
  CHECK(parallel.evaluate_batch(std::span<const BitConfig>(configs).first(1)) ==
        std::vector<double>{expected[0]});

  std::vector<std::unique_ptr<Evaluator>> failing;
  failing.push_back(std::make_unique<FunctionEvaluator>([](const BitConfig&) { return 1.0; }));
  failing.push_back(std::make_unique<FunctionEvaluator>(
      [](const BitConfig&) -> double { throw EvaluationError("worker down"); }));
  ParallelEvaluator broken(std::move(failing));
  CHECK_THROWS_AS(broken.evaluate_batch(configs), EvaluationError);
  CHECK_THROWS_AS(ParallelEvaluator({}), ConfigError);
}
