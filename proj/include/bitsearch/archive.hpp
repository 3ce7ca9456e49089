// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "bitsearch/config_space.hpp"

namespace bitsearch {

/// A verified sample: config, true evaluator score and effective bits.
struct ArchiveEntry {
  BitConfig config;
  double score = 0.0;
  double bits = 0.0;
  /// 0 for initial samples, j for samples verified in outer iteration j.
  std::size_t iteration = 0;
};

/// Mutually non-dominated entries sorted by ascending bits.
using ParetoFront = std::vector<ArchiveEntry>;

/// Insertion-ordered set of verified samples keyed by config.
class Archive {
 public:
  explicit Archive(SearchSpace space) : space_(std::move(space)) {}

  const SearchSpace& space() const { return space_; }
  const std::vector<ArchiveEntry>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  bool contains(const BitConfig& config) const { return index_.contains(config); }

  /// Validates the config and computes its effective bits. Returns false
  /// (and leaves the archive unchanged) when the config is already present.
  bool insert(const BitConfig& config, double score, std::size_t iteration);

  /// JSON Lines, one {"bits","eff_bits","iter","score"} object per entry.
  std::string to_jsonl() const;
  void write_jsonl(const std::filesystem::path& path) const;
  static Archive from_jsonl(SearchSpace space, const std::string& text);
  static Archive read_jsonl(SearchSpace space, const std::filesystem::path& path);

 private:
  SearchSpace space_;
  std::vector<ArchiveEntry> entries_;
  std::unordered_map<BitConfig, std::size_t> index_;
};

nlohmann::json to_json(const ArchiveEntry& entry);
/// Sorted list of {"eff_bits", "score", "bits"}.
nlohmann::json front_to_json(const ParetoFront& front);

}  // namespace bitsearch
