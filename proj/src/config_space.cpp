// SPDX-License-Identifier: Apache-2.0
#include "bitsearch/config_space.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "bitsearch/error.hpp"

namespace bitsearch {

std::size_t hash_value(const BitConfig& config) {
  // FNV-1a; stable across runs and platforms, synthetic noise seeds from it.
  std::uint64_t h = 1469598103934665603ULL;
  for (BitWidth b : config.bits()) {
    auto v = static_cast<std::uint32_t>(b);
    for (int k = 0; k < 4; ++k) {
      h ^= (v >> (8 * k)) & 0xffU;
      h *= 1099511628211ULL;
    }
  }
  return static_cast<std::size_t>(h);
}

SearchSpace::SearchSpace(std::vector<LayerSpec> layers, QuantOverhead overhead,
                         std::map<std::size_t, BitWidth> frozen)
    : layers_(std::move(layers)), overhead_(overhead), frozen_(std::move(frozen)) {
  if (layers_.empty()) throw ConfigError("search space has no layers");
  if (overhead_.group_size == 0) throw ConfigError("group_size must be >= 1");

  std::set<std::string> names;
  for (const auto& layer : layers_) {
    if (!names.insert(layer.name).second)
      throw ConfigError("duplicate layer name '" + layer.name + "'");
    if (layer.param_count == 0)
      throw ConfigError("layer '" + layer.name + "' has zero parameters");
    if (layer.choices.empty())
      throw ConfigError("layer '" + layer.name + "' has no bit-width choices");
    for (std::size_t k = 0; k < layer.choices.size(); ++k) {
      if (layer.choices[k] < 1)
        throw ConfigError("layer '" + layer.name + "' has a bit-width below 1");
      if (k > 0 && layer.choices[k] <= layer.choices[k - 1])
        throw ConfigError("layer '" + layer.name + "' choices must be strictly ascending");
    }
  }
  for (const auto& [index, bits] : frozen_) {
    if (index >= layers_.size())
      throw ConfigError("frozen layer index " + std::to_string(index) + " out of range");
    const auto& choices = layers_[index].choices;
    if (std::find(choices.begin(), choices.end(), bits) == choices.end())
      throw ConfigError("layer '" + layers_[index].name + "' frozen at " + std::to_string(bits) +
                        " which is not one of its choices");
  }
  for (std::size_t i = 0; i < layers_.size(); ++i)
    if (!frozen_.contains(i)) free_.push_back(i);
  if (free_.empty()) throw ConfigError("every layer is frozen; nothing to search");
}

std::optional<std::size_t> SearchSpace::index_of(const std::string& name) const {
  for (std::size_t i = 0; i < layers_.size(); ++i)
    if (layers_[i].name == name) return i;
  return std::nullopt;
}

SearchSpace SearchSpace::with_frozen(const std::map<std::size_t, BitWidth>& extra) const {
  auto frozen = frozen_;
  for (const auto& [index, bits] : extra) frozen[index] = bits;
  return SearchSpace(layers_, overhead_, std::move(frozen));
}

SearchSpace SearchSpace::unfrozen() const { return SearchSpace(layers_, overhead_, {}); }

std::optional<std::uint64_t> SearchSpace::config_count() const {
  std::uint64_t count = 1;
  for (std::size_t i : free_) {
    const std::uint64_t n = layers_[i].choices.size();
    if (count > UINT64_MAX / n) return std::nullopt;
    count *= n;
  }
  return count;
}

double SearchSpace::log10_config_count() const {
  double total = 0.0;
  for (std::size_t i : free_) total += std::log10(static_cast<double>(layers_[i].choices.size()));
  return total;
}

BitConfig SearchSpace::min_config() const {
  std::vector<BitWidth> bits(layers_.size());
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    auto it = frozen_.find(i);
    bits[i] = it != frozen_.end() ? it->second : layers_[i].min_choice();
  }
  return BitConfig(std::move(bits));
}

BitConfig SearchSpace::max_config() const {
  std::vector<BitWidth> bits(layers_.size());
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    auto it = frozen_.find(i);
    bits[i] = it != frozen_.end() ? it->second : layers_[i].max_choice();
  }
  return BitConfig(std::move(bits));
}

void SearchSpace::validate(const BitConfig& config) const {
  if (config.size() != layers_.size())
    throw ConfigError("config has " + std::to_string(config.size()) + " entries, space has " +
                      std::to_string(layers_.size()) + " layers");
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const auto& choices = layers_[i].choices;
    if (std::find(choices.begin(), choices.end(), config[i]) == choices.end())
      throw ConfigError("layer '" + layers_[i].name + "' cannot take bit-width " +
                        std::to_string(config[i]));
    auto it = frozen_.find(i);
    if (it != frozen_.end() && it->second != config[i])
      throw ConfigError("layer '" + layers_[i].name + "' is frozen at " +
                        std::to_string(it->second));
  }
}

bool SearchSpace::contains(const BitConfig& config) const {
  try {
    validate(config);
    return true;
  } catch (const ConfigError&) {
    return false;
  }
}

bool SearchSpace::operator==(const SearchSpace& other) const {
  auto same_layer = [](const LayerSpec& a, const LayerSpec& b) {
    return a.name == b.name && a.param_count == b.param_count && a.choices == b.choices;
  };
  return std::equal(layers_.begin(), layers_.end(), other.layers_.begin(), other.layers_.end(),
                    same_layer) &&
         overhead_.group_size == other.overhead_.group_size &&
         overhead_.scale_bits == other.overhead_.scale_bits &&
         overhead_.zero_bits == other.overhead_.zero_bits && frozen_ == other.frozen_;
}

double effective_bits(const BitConfig& config, const SearchSpace& space) {
  // Integer accumulation keeps the weighted numerator exact.
  std::uint64_t weighted = 0;
  std::uint64_t total = 0;
  const auto& layers = space.layers();
  for (std::size_t i = 0; i < layers.size(); ++i) {
    weighted += layers[i].param_count * static_cast<std::uint64_t>(config[i]);
    total += layers[i].param_count;
  }
  return static_cast<double>(weighted) / static_cast<double>(total) +
         space.overhead().bits_per_weight();
}

BitConfig random_config(const SearchSpace& space, Rng& rng) {
  BitConfig config = space.max_config();
  for (std::size_t i : space.free_layers()) {
    const auto& choices = space.layer(i).choices;
    std::uniform_int_distribution<std::size_t> pick(0, choices.size() - 1);
    config[i] = choices[pick(rng)];
  }
  return config;
}

namespace {

template <typename T>
T required(const nlohmann::json& obj, const char* key, const std::string& where) {
  if (!obj.contains(key)) throw ConfigError(where + ": missing field '" + key + "'");
  try {
    return obj.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(where + ": field '" + key + "' has the wrong type");
  }
}

}  // namespace

SearchSpace search_space_from_json(const nlohmann::json& doc) {
  if (!doc.is_object()) throw ConfigError("search space: top level must be an object");
  QuantOverhead overhead;
  overhead.group_size = doc.value("group_size", 128U);
  overhead.scale_bits = doc.value("scale_bits", 16U);
  overhead.zero_bits = doc.value("zero_bits", 16U);

  if (!doc.contains("layers") || !doc["layers"].is_array())
    throw ConfigError("search space: 'layers' must be an array");
  std::vector<LayerSpec> layers;
  for (const auto& entry : doc["layers"]) {
    LayerSpec layer;
    layer.name = required<std::string>(entry, "name", "layer");
    const std::string where = "layer '" + layer.name + "'";
    const auto params = required<std::int64_t>(entry, "params", where);
    if (params < 1) throw ConfigError(where + ": params must be >= 1");
    layer.param_count = static_cast<std::uint64_t>(params);
    layer.choices = required<std::vector<BitWidth>>(entry, "choices", where);
    if (layer.choices.empty()) throw ConfigError(where + ": choices must not be empty");
    layers.push_back(std::move(layer));
  }

  std::map<std::size_t, BitWidth> frozen;
  if (doc.contains("frozen")) {
    if (!doc["frozen"].is_object()) throw ConfigError("search space: 'frozen' must be an object");
    for (const auto& [name, value] : doc["frozen"].items()) {
      auto it = std::find_if(layers.begin(), layers.end(),
                             [&](const LayerSpec& l) { return l.name == name; });
      if (it == layers.end()) throw ConfigError("frozen entry names unknown layer '" + name + "'");
      frozen[static_cast<std::size_t>(it - layers.begin())] = value.get<BitWidth>();
    }
  }
  return SearchSpace(std::move(layers), overhead, std::move(frozen));
}

nlohmann::json to_json(const SearchSpace& space) {
  nlohmann::json doc;
  doc["group_size"] = space.overhead().group_size;
  doc["scale_bits"] = space.overhead().scale_bits;
  doc["zero_bits"] = space.overhead().zero_bits;
  auto& layers = doc["layers"] = nlohmann::json::array();
  for (const auto& layer : space.layers())
    layers.push_back({{"name", layer.name}, {"params", layer.param_count}, {"choices", layer.choices}});
  if (!space.frozen().empty()) {
    auto& frozen = doc["frozen"] = nlohmann::json::object();
    for (const auto& [index, bits] : space.frozen()) frozen[space.layer(index).name] = bits;
  }
  return doc;
}

SearchSpace load_search_space(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open search space file '" + path.string() + "'");
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("cannot parse '" + path.string() + "': " + e.what());
  }
  return search_space_from_json(doc);
}

nlohmann::json to_json(const BitConfig& config) { return config.bits(); }

}  // namespace bitsearch
