// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <random>
#include <unordered_set>

#include "bitsearch/error.hpp"
#include "bitsearch/surrogate.hpp"
#include "bitsearch/synthetic.hpp"
#include "support.hpp"

using namespace bitsearch;

namespace {

Matrix<double> random_points(Rng& rng, Eigen::Index n, Eigen::Index dim) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Matrix<double> x(n, dim);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < dim; ++j) x(i, j) = u(rng);
  return x;
}

std::vector<BitConfig> distinct_configs(const SearchSpace& space, Rng& rng, std::size_t n,
                                        std::unordered_set<BitConfig>& seen) {
  std::vector<BitConfig> out;
  while (out.size() < n) {
    auto c = random_config(space, rng);
    if (seen.insert(c).second) out.push_back(std::move(c));
  }
  return out;
}

}  // namespace

TEST_CASE("encode scales free layers to [0,1]") {
  const auto space = SearchSpace({{"a", 1, {2, 3, 4}}, {"b", 1, {2, 8}}, {"c", 1, {4}}}, QuantOverhead{},
                                 {{1, 8}});
  const auto x = encode(BitConfig({3, 8, 4}), space);
  REQUIRE(x.size() == 2);
  CHECK(x(0) == 0.5);
  CHECK(x(1) == 0.0);  // singleton alphabet
}

TEST_CASE("interpolates training points with lambda = 0") {
  Rng rng(3);
  for (Eigen::Index dim : {1, 3, 8, 24}) {
    const auto x = random_points(rng, 60, dim);
    Vector<double> y(60);
    for (Eigen::Index i = 0; i < 60; ++i) y(i) = std::sin(3 * x.row(i).sum()) + x(i, 0) * x(i, 0);
    const auto model = fit_rbf(x, y, 0.0);
    for (Eigen::Index i = 0; i < 60; ++i) CHECK(std::abs(model.predict(x.row(i).transpose()) - y(i)) <= 1e-8);
    const Vector<double> batch = model.predict_batch(x);
    CHECK((batch - y).cwiseAbs().maxCoeff() <= 1e-8);
  }
}

TEST_CASE("reproduces affine functions exactly") {
  Rng rng(8);
  const auto x = random_points(rng, 40, 5);
  Vector<double> a(5);
  a << 0.5, -1.25, 3.0, 0.0, 2.0;
  const Vector<double> y = (x * a).array() + 1.5;
  const auto model = fit_rbf(x, y, 0.0);
  CHECK(model.weights().cwiseAbs().maxCoeff() <= 1e-6);
  CHECK(std::abs(model.tail_coefficients()(0) - 1.5) <= 1e-6);
  CHECK((model.tail_coefficients().tail(5) - a).cwiseAbs().maxCoeff() <= 1e-6);
  const auto probe = random_points(rng, 100, 5);
  const Vector<double> expected = (probe * a).array() + 1.5;
  CHECK((model.predict_batch(probe) - expected).cwiseAbs().maxCoeff() <= 1e-6);
}

TEST_CASE("ranks held-out configs of a smooth objective") {
  const auto space = uniform_space(10);
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    SyntheticEvaluator eval(random_synthetic_model(space, SyntheticKind::Separable, seed));
    Rng rng(seed);
    std::unordered_set<BitConfig> seen;
    const auto train = distinct_configs(space, rng, 50, seen);
    const auto test = distinct_configs(space, rng, 200, seen);
    const auto ytrain = eval.evaluate_batch(train);
    const auto ytest = eval.evaluate_batch(test);
    const auto model =
        fit_rbf(encode_batch(train, space), Eigen::Map<const Vector<double>>(ytrain.data(), 50));
    const Vector<double> pred = model.predict_batch(encode_batch(test, space));
    const std::vector<double> predicted(pred.data(), pred.data() + pred.size());
    CHECK(testing::spearman(predicted, ytest) >= 0.9);
  }
}

TEST_CASE("batch and pointwise prediction agree across blocks") {
  Rng rng(12);
  const auto x = random_points(rng, 80, 6);
  Vector<double> y = x.rowwise().squaredNorm();
  const auto model = fit_rbf(x, y);
  const auto queries = random_points(rng, 1300, 6);
  const Vector<double> batch = model.predict_batch(queries);
  for (Eigen::Index i = 0; i < queries.rows(); i += 37)
    CHECK(std::abs(batch(i) - model.predict(queries.row(i).transpose())) <= 1e-9);
}

TEST_CASE("duplicates are merged by averaging") {
  Matrix<double> x(6, 1);
  x << 0.0, 0.25, 0.5, 0.5, 0.75, 1.0;
  Vector<double> y(6);
  y << 0.0, 1.0, 2.0, 4.0, 1.0, 0.0;
  const auto model = fit_rbf(x, y, 0.0);
  CHECK(model.center_count() == 5);
  Vector<double> q(1);
  q << 0.5;
  CHECK(model.predict(q) == doctest::Approx(3.0).epsilon(1e-9));
}

TEST_CASE("too few distinct samples is a fit error") {
  Matrix<double> x(4, 3);
  x.setRandom();
  Vector<double> y = Vector<double>::Ones(4);
  CHECK_THROWS_AS(fit_rbf(x, y), FitError);
  Matrix<double> same = Matrix<double>::Ones(10, 2);
  CHECK_THROWS_AS(fit_rbf(same, Vector<double>::Ones(10)), FitError);
  CHECK_THROWS_AS(fit_rbf(x, Vector<double>::Ones(3)), FitError);
}

TEST_CASE("single precision fits") {
  Rng rng(4);
  const Matrix<float> x = random_points(rng, 30, 3).cast<float>();
  const Vector<float> y = x.rowwise().sum();
  const auto model = fit_rbf(x, y, 0.0f);
  CHECK((model.predict_batch(x) - y).cwiseAbs().maxCoeff() <= 1e-3f);
}
