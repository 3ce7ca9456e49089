// SPDX-License-Identifier: Apache-2.0
#include "bitsearch/synthetic.hpp"

#include <cmath>
#include <fstream>
#include <random>

#include "bitsearch/error.hpp"

namespace bitsearch {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

double penalty_of(const SyntheticModel& model, BitWidth b) {
  auto it = model.penalty.find(b);
  if (it == model.penalty.end())
    throw EvaluationError("synthetic model has no penalty for " + std::to_string(b) + " bits");
  return it->second;
}

double separable_term(const SyntheticModel& model, const BitConfig& config) {
  if (config.size() != model.weights.size())
    throw EvaluationError("synthetic model expects " + std::to_string(model.weights.size()) +
                          " layers, config has " + std::to_string(config.size()));
  double total = 0.0;
  for (std::size_t i = 0; i < config.size(); ++i) total += model.weights[i] * penalty_of(model, config[i]);
  return total;
}

// Noise is a function of (config, seed) only, so repeated calls agree.
double noise_term(const SyntheticModel& model, const BitConfig& config) {
  if (model.noise == 0.0) return 0.0;
  Rng rng(splitmix64(hash_value(config) ^ splitmix64(model.seed)));
  std::normal_distribution<double> gauss(0.0, model.noise);
  return gauss(rng);
}

}  // namespace

void SyntheticModel::validate(const SearchSpace& space) const {
  if (weights.size() != space.layer_count())
    throw ConfigError("synthetic model has " + std::to_string(weights.size()) +
                      " weights for a space of " + std::to_string(space.layer_count()) + " layers");
  for (double w : weights)
    if (!std::isfinite(w) || w < 0.0) throw ConfigError("synthetic weights must be finite and >= 0");
  if (penalty.empty()) throw ConfigError("synthetic penalty table is empty");
  double previous = INFINITY;
  for (const auto& [bits, p] : penalty) {
    if (!(p > 0.0) || !std::isfinite(p)) throw ConfigError("synthetic penalties must be positive");
    if (p >= previous) throw ConfigError("synthetic penalty must decrease strictly with bit-width");
    previous = p;
  }
  for (const auto& layer : space.layers())
    for (BitWidth b : layer.choices)
      if (!penalty.contains(b))
        throw ConfigError("synthetic penalty table lacks " + std::to_string(b) + " bits (layer '" +
                          layer.name + "')");
  if (noise < 0.0) throw ConfigError("synthetic noise must be non-negative");
  if (kind == SyntheticKind::Interaction) {
    const auto n = static_cast<Eigen::Index>(weights.size());
    if (interaction.rows() != n || interaction.cols() != n)
      throw ConfigError("interaction matrix must be " + std::to_string(n) + "x" + std::to_string(n));
    if (interaction != interaction.transpose())
      throw ConfigError("interaction matrix must be symmetric");
    if ((interaction.array() < 0.0).any()) throw ConfigError("interaction matrix must be non-negative");
  }
}

double separable_eval(const SyntheticModel& model, const BitConfig& config) {
  if (model.kind != SyntheticKind::Separable)
    throw EvaluationError("separable_eval called on an interaction model");
  return separable_term(model, config) + noise_term(model, config);
}

double interaction_eval(const SyntheticModel& model, const BitConfig& config) {
  double total = separable_term(model, config);
  const auto n = static_cast<Eigen::Index>(config.size());
  if (model.interaction.size() != 0) {
    for (Eigen::Index i = 0; i < n; ++i) {
      const double pi = penalty_of(model, config[static_cast<std::size_t>(i)]);
      for (Eigen::Index j = i + 1; j < n; ++j)
        total += model.interaction(i, j) * pi * penalty_of(model, config[static_cast<std::size_t>(j)]);
    }
  }
  return total + noise_term(model, config);
}

std::vector<double> SyntheticEvaluator::evaluate_batch(std::span<const BitConfig> configs) {
  std::vector<double> scores;
  scores.reserve(configs.size());
  for (const auto& c : configs)
    scores.push_back(model_.kind == SyntheticKind::Separable ? separable_eval(model_, c)
                                                             : interaction_eval(model_, c));
  return scores;
}

SyntheticModel random_synthetic_model(const SearchSpace& space, SyntheticKind kind,
                                      std::uint64_t seed) {
  Rng rng(splitmix64(seed));
  SyntheticModel model;
  model.kind = kind;
  model.seed = seed;
  std::lognormal_distribution<double> spread(0.0, 1.0);
  for (std::size_t i = 0; i < space.layer_count(); ++i) model.weights.push_back(spread(rng));

  BitWidth lowest = space.layer(0).min_choice();
  for (const auto& layer : space.layers()) lowest = std::min(lowest, layer.min_choice());
  for (const auto& layer : space.layers())
    for (BitWidth b : layer.choices) model.penalty[b] = std::pow(0.3, b - lowest);

  if (kind == SyntheticKind::Interaction) {
    const auto n = static_cast<Eigen::Index>(space.layer_count());
    model.interaction = Matrix<double>::Zero(n, n);
    std::bernoulli_distribution coupled(0.3);
    std::uniform_real_distribution<double> strength(0.0, 0.5);
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = i + 1; j < n; ++j) {
        if (!coupled(rng)) continue;
        const double m = strength(rng) * std::sqrt(model.weights[static_cast<std::size_t>(i)] *
                                                   model.weights[static_cast<std::size_t>(j)]);
        model.interaction(i, j) = m;
        model.interaction(j, i) = m;
      }
  }
  return model;
}

SearchSpace uniform_space(std::size_t layers, std::vector<BitWidth> choices, std::uint64_t params) {
  std::vector<LayerSpec> specs;
  for (std::size_t i = 0; i < layers; ++i)
    specs.push_back({"layers." + std::to_string(i) + ".linear", params, choices});
  return SearchSpace(std::move(specs), QuantOverhead{});
}

SyntheticModel synthetic_model_from_json(const nlohmann::json& doc) {
  try {
    SyntheticModel model;
    const auto kind = doc.at("kind").get<std::string>();
    if (kind == "separable") {
      model.kind = SyntheticKind::Separable;
    } else if (kind == "interaction") {
      model.kind = SyntheticKind::Interaction;
    } else {
      throw ConfigError("unknown synthetic kind '" + kind + "'");
    }
    model.weights = doc.at("weights").get<std::vector<double>>();
    for (const auto& [bits, p] : doc.at("penalty").items()) model.penalty[std::stoi(bits)] = p.get<double>();
    model.noise = doc.value("noise", 0.0);
    model.seed = doc.value("seed", std::uint64_t{0});
    if (doc.contains("interaction")) {
      const auto rows = doc["interaction"].get<std::vector<std::vector<double>>>();
      const auto n = static_cast<Eigen::Index>(rows.size());
      model.interaction = Matrix<double>::Zero(n, n);
      for (Eigen::Index i = 0; i < n; ++i) {
        if (static_cast<Eigen::Index>(rows[static_cast<std::size_t>(i)].size()) != n)
          throw ConfigError("interaction matrix must be square");
        for (Eigen::Index j = 0; j < n; ++j)
          model.interaction(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
      }
    }
    return model;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("synthetic model: ") + e.what());
  } catch (const std::invalid_argument&) {
    throw ConfigError("synthetic model: penalty keys must be integers");
  }
}

nlohmann::json to_json(const SyntheticModel& model) {
  nlohmann::json doc;
  doc["kind"] = model.kind == SyntheticKind::Separable ? "separable" : "interaction";
  doc["weights"] = model.weights;
  auto& penalty = doc["penalty"] = nlohmann::json::object();
  for (const auto& [bits, p] : model.penalty) penalty[std::to_string(bits)] = p;
  doc["noise"] = model.noise;
  doc["seed"] = model.seed;
  if (model.kind == SyntheticKind::Interaction) {
    auto& rows = doc["interaction"] = nlohmann::json::array();
    for (Eigen::Index i = 0; i < model.interaction.rows(); ++i) {
      std::vector<double> row(static_cast<std::size_t>(model.interaction.cols()));
      for (Eigen::Index j = 0; j < model.interaction.cols(); ++j)
        row[static_cast<std::size_t>(j)] = model.interaction(i, j);
      rows.push_back(row);
    }
  }
  return doc;
}

SyntheticModel load_synthetic_model(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open synthetic model file '" + path.string() + "'");
  try {
    return synthetic_model_from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("cannot parse '" + path.string() + "': " + e.what());
  }
}

}  // namespace bitsearch
