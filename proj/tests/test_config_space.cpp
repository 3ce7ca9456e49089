// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "bitsearch/config_space.hpp"
#include "bitsearch/error.hpp"
#include "bitsearch/synthetic.hpp"
#include "support.hpp"

using namespace bitsearch;

namespace {

std::filesystem::path write_temp(const std::string& name, const std::string& text) {
  const auto path = std::filesystem::temp_directory_path() / name;
  std::ofstream(path) << text;
  return path;
}

SearchSpace two_layer(std::uint64_t p0, std::uint64_t p1, QuantOverhead ovh) {
  return SearchSpace({{"a", p0, {2, 3, 4}}, {"b", p1, {2, 3, 4}}}, ovh);
}

}  // namespace

TEST_CASE("load_search_space round-trips declared fields") {
  const auto path = write_temp("bs_space4.json", R"({
    "group_size": 128, "scale_bits": 16, "zero_bits": 16,
    "layers": [
      {"name": "l0.q", "params": 100, "choices": [2,3,4]},
      {"name": "l0.k", "params": 200, "choices": [2,3,4]},
      {"name": "l0.v", "params": 300, "choices": [2,3,4]},
      {"name": "l0.o", "params": 400, "choices": [2,3,4]}
    ],
    "frozen": {"l0.v": 4}
  })");
  const auto space = load_search_space(path);
  CHECK(space.layer_count() == 4);
  CHECK(space.overhead().group_size == 128);
  CHECK(space.overhead().scale_bits == 16);
  CHECK(space.overhead().zero_bits == 16);
  CHECK(space.layer(3).param_count == 400);
  CHECK(space.is_frozen(2));
  CHECK(space.free_layers() == std::vector<std::size_t>{0, 1, 3});
  CHECK(search_space_from_json(to_json(space)) == space);
}

TEST_CASE("invalid space files name the offending layer") {
  const auto empty = write_temp("bs_empty.json",
                                R"({"layers": [{"name": "ok", "params": 5, "choices": [2]},
                                               {"name": "broken", "params": 5, "choices": []}]})");
  try {
    load_search_space(empty);
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("broken") != std::string::npos);
  }

  const auto dup = write_temp("bs_dup.json", R"({"layers": [{"name": "x", "params": 5, "choices": [2]},
                                                          {"name": "x", "params": 5, "choices": [2]}]})");
  CHECK_THROWS_AS(load_search_space(dup), ConfigError);
  const auto unsorted = write_temp("bs_unsorted.json", R"({"layers": [{"name": "u", "params": 5, "choices": [4,2]}]})");
  CHECK_THROWS_AS(load_search_space(unsorted), ConfigError);
  const auto bad_frozen = write_temp(
      "bs_badfrozen.json",
      R"({"layers": [{"name": "a", "params": 5, "choices": [2,4]}, {"name": "b", "params": 5, "choices": [2,4]}],
          "frozen": {"a": 3}})");
  CHECK_THROWS_AS(load_search_space(bad_frozen), ConfigError);
  CHECK_THROWS_AS(load_search_space("/nonexistent/space.json"), ConfigError);
  CHECK_THROWS_AS(load_search_space(write_temp("bs_garbage.json", "{not json")), ConfigError);
}

TEST_CASE("fully frozen space is rejected") {
  CHECK_THROWS_AS(SearchSpace({{"a", 1, {2, 4}}}, QuantOverhead{}, {{0, 4}}), ConfigError);
}

TEST_CASE("224-layer space has 3^224 configs") {
  const auto space = uniform_space(224);
  CHECK_FALSE(space.config_count().has_value());
  CHECK(space.log10_config_count() == doctest::Approx(224 * std::log10(3.0)).epsilon(1e-12));
  CHECK(std::floor(space.log10_config_count()) == 106);
}

TEST_CASE("effective bits examples") {
  const auto space = uniform_space(4);
  CHECK(effective_bits(space.min_config(), space) == 2.25);
  CHECK(effective_bits(space.max_config(), space) == 4.25);

  const auto pair = two_layer(1000, 1000, QuantOverhead{});
  CHECK(effective_bits(BitConfig({2, 4}), pair) == doctest::Approx(3.25).epsilon(1e-15));

  const auto weighted = two_layer(3, 1, QuantOverhead{128, 0, 0});
  CHECK(effective_bits(BitConfig({2, 4}), weighted) == doctest::Approx(2.5).epsilon(1e-15));
}

TEST_CASE("effective bits: monotone and matches the scalar oracle") {
  Rng rng(7);
  std::vector<LayerSpec> layers;
  std::uniform_int_distribution<std::uint64_t> size(1, 50'000'000);
  for (int i = 0; i < 40; ++i) layers.push_back({"l" + std::to_string(i), size(rng), {2, 3, 4, 8}});
  const SearchSpace space(layers, QuantOverhead{64, 16, 8});
  for (int trial = 0; trial < 2000; ++trial) {
    const auto c = random_config(space, rng);
    const double value = effective_bits(c, space);
    CHECK(std::abs(value - testing::scalar_effective_bits(c, space)) <= 1e-12 * value);
    CHECK(value >= 2.0 + 24.0 / 64 - 1e-12);
    CHECK(value <= 8.0 + 24.0 / 64 + 1e-12);
    // Raising any one layer strictly increases the result.
    const std::size_t i = trial % space.layer_count();
    const auto& choices = space.layer(i).choices;
    const auto pos = std::find(choices.begin(), choices.end(), c[i]) - choices.begin();
    if (pos + 1 < static_cast<std::ptrdiff_t>(choices.size())) {
      BitConfig up = c;
      up[i] = choices[static_cast<std::size_t>(pos + 1)];
      CHECK(effective_bits(up, space) > value);
    }
  }
}

TEST_CASE("random_config: singleton alphabet, determinism, frozen layers") {
  const SearchSpace single({{"only", 10, {3}}, {"other", 10, {2, 4}}}, QuantOverhead{}, {{1, 4}});
  Rng rng(1);
  for (int i = 0; i < 100; ++i) CHECK(random_config(single, rng) == BitConfig({3, 4}));

  const auto space = uniform_space(12);
  Rng a(42), b(42);
  CHECK(random_config(space, a) == random_config(space, b));

  const auto frozen = space.with_frozen({{0, 2}, {5, 4}, {11, 3}});
  Rng r(3);
  for (int i = 0; i < 10'000; ++i) {
    const auto c = random_config(frozen, r);
    CHECK(frozen.contains(c));
  }
}

TEST_CASE("random_config is uniform over choices") {
  // One free layer with {2,3,4}; 10^4 draws, each frequency within 3 sigma of 1/3.
  const SearchSpace space({{"x", 1, {2, 3, 4}}}, QuantOverhead{});
  Rng rng(2024);
  const int draws = 10'000;
  int counts[3] = {0, 0, 0};
  for (int i = 0; i < draws; ++i) ++counts[random_config(space, rng)[0] - 2];
  const double sigma = std::sqrt(draws * (1.0 / 3) * (2.0 / 3));
  double chi2 = 0.0;
  for (int c : counts) {
    CHECK(std::abs(c - draws / 3.0) <= 3 * sigma);
    chi2 += (c - draws / 3.0) * (c - draws / 3.0) / (draws / 3.0);
  }
  CHECK(chi2 < 13.82);  // chi-square, 2 dof, p = 0.001
}

TEST_CASE("validate rejects frozen and alphabet violations") {
  const auto space = uniform_space(3).with_frozen({{1, 4}});
  CHECK_NOTHROW(space.validate(BitConfig({2, 4, 3})));
  CHECK_THROWS_AS(space.validate(BitConfig({2, 3, 3})), ConfigError);
  CHECK_THROWS_AS(space.validate(BitConfig({5, 4, 3})), ConfigError);
  CHECK_THROWS_AS(space.validate(BitConfig({2, 4})), ConfigError);
}

TEST_CASE("BitConfig equality and hashing follow the bits vector") {
  const BitConfig a({2, 3, 4}), b({2, 3, 4}), c({2, 4, 3});
  CHECK(a == b);
  CHECK(std::hash<BitConfig>{}(a) == std::hash<BitConfig>{}(b));
  CHECK_FALSE(a == c);
}
