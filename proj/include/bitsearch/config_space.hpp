// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

namespace bitsearch {

using BitWidth = int;
using Rng = std::mt19937_64;

struct LayerSpec {
  std::string name;
  std::uint64_t param_count = 1;
  /// Allowed bit-widths, strictly ascending.
  std::vector<BitWidth> choices;

  BitWidth min_choice() const { return choices.front(); }
  BitWidth max_choice() const { return choices.back(); }
};

/// Per-group scale/zero-point storage cost of grouped quantization.
struct QuantOverhead {
  std::uint32_t group_size = 128;
  std::uint32_t scale_bits = 16;
  std::uint32_t zero_bits = 16;

  /// Extra bits per weight, (scale_bits + zero_bits) / group_size.
  double bits_per_weight() const {
    return static_cast<double>(scale_bits + zero_bits) / static_cast<double>(group_size);
  }
};

/// A bit-width per layer, aligned with SearchSpace::layers(). Frozen layers
/// are stored explicitly so a serialized config is self-describing.
class BitConfig {
 public:
  BitConfig() = default;
  explicit BitConfig(std::vector<BitWidth> bits) : bits_(std::move(bits)) {}

  const std::vector<BitWidth>& bits() const { return bits_; }
  std::size_t size() const { return bits_.size(); }
  BitWidth operator[](std::size_t i) const { return bits_[i]; }
  BitWidth& operator[](std::size_t i) { return bits_[i]; }

  friend bool operator==(const BitConfig&, const BitConfig&) = default;
  friend auto operator<=>(const BitConfig&, const BitConfig&) = default;

 private:
  std::vector<BitWidth> bits_;
};

std::size_t hash_value(const BitConfig& config);

/// The layered model being searched: layers, overhead and frozen layers.
/// Immutable once constructed; the constructor enforces every invariant and
/// throws ConfigError naming the offending layer.
class SearchSpace {
 public:
  SearchSpace(std::vector<LayerSpec> layers, QuantOverhead overhead,
              std::map<std::size_t, BitWidth> frozen = {});

  const std::vector<LayerSpec>& layers() const { return layers_; }
  const LayerSpec& layer(std::size_t i) const { return layers_.at(i); }
  std::size_t layer_count() const { return layers_.size(); }
  const QuantOverhead& overhead() const { return overhead_; }
  const std::map<std::size_t, BitWidth>& frozen() const { return frozen_; }
  bool is_frozen(std::size_t i) const { return frozen_.contains(i); }

  /// Indices of non-frozen layers in layer order.
  const std::vector<std::size_t>& free_layers() const { return free_; }

  std::optional<std::size_t> index_of(const std::string& name) const;

  /// Copy with extra layers frozen (existing frozen entries are kept unless
  /// overridden).
  SearchSpace with_frozen(const std::map<std::size_t, BitWidth>& extra) const;
  /// Copy with no frozen layers.
  SearchSpace unfrozen() const;

  /// Number of distinct configs, or nullopt when it overflows 64 bits.
  std::optional<std::uint64_t> config_count() const;
  double log10_config_count() const;

  /// Every free layer at its min (max) choice, frozen layers at their value.
  BitConfig min_config() const;
  BitConfig max_config() const;

  /// Throws ConfigError when the config is not a member of this space.
  void validate(const BitConfig& config) const;
  bool contains(const BitConfig& config) const;

  bool operator==(const SearchSpace& other) const;

 private:
  std::vector<LayerSpec> layers_;
  QuantOverhead overhead_;
  std::map<std::size_t, BitWidth> frozen_;
  std::vector<std::size_t> free_;
};

/// Parameter-count weighted bits per weight including group overhead.
double effective_bits(const BitConfig& config, const SearchSpace& space);

/// Uniform draw over each free layer's choices; frozen layers keep their value.
BitConfig random_config(const SearchSpace& space, Rng& rng);

// Search-space file (JSON) helpers.
SearchSpace search_space_from_json(const nlohmann::json& doc);
nlohmann::json to_json(const SearchSpace& space);
SearchSpace load_search_space(const std::filesystem::path& path);

nlohmann::json to_json(const BitConfig& config);

}  // namespace bitsearch

template <>
struct std::hash<bitsearch::BitConfig> {
  std::size_t operator()(const bitsearch::BitConfig& c) const noexcept {
    return bitsearch::hash_value(c);
  }
};
