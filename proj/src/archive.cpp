// SPDX-License-Identifier: Apache-2.0
#include "bitsearch/archive.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "bitsearch/error.hpp"

namespace bitsearch {

bool Archive::insert(const BitConfig& config, double score, std::size_t iteration) {
  space_.validate(config);
  if (!std::isfinite(score)) throw EvaluationError("non-finite score cannot be archived");
  if (index_.contains(config)) return false;
  index_.emplace(config, entries_.size());
  entries_.push_back({config, score, effective_bits(config, space_), iteration});
  return true;
}

nlohmann::json to_json(const ArchiveEntry& entry) {
  return {{"bits", entry.config.bits()},
          {"score", entry.score},
          {"eff_bits", entry.bits},
          {"iter", entry.iteration}};
}

std::string Archive::to_jsonl() const {
  std::string out;
  for (const auto& entry : entries_) {
    out += to_json(entry).dump();
    out += '\n';
  }
  return out;
}

void Archive::write_jsonl(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write archive '" + path.string() + "'");
  out << to_jsonl();
}

Archive Archive::from_jsonl(SearchSpace space, const std::string& text) {
  Archive archive(std::move(space));
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      const auto doc = nlohmann::json::parse(line);
      const BitConfig config(doc.at("bits").get<std::vector<BitWidth>>());
      const double score = doc.at("score").get<double>();
      const double stored_bits = doc.at("eff_bits").get<double>();
      if (!archive.insert(config, score, doc.at("iter").get<std::size_t>()))
        throw ConfigError("duplicate config");
      const double recomputed = archive.entries().back().bits;
      if (std::abs(recomputed - stored_bits) > 1e-12 * std::max(1.0, std::abs(recomputed)))
        throw ConfigError("eff_bits disagrees with the search space");
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError("archive line " + std::to_string(line_no) + ": " + e.what());
    } catch (const Error& e) {
      throw ConfigError("archive line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return archive;
}

Archive Archive::read_jsonl(SearchSpace space, const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open archive '" + path.string() + "'");
  std::stringstream buffer;
  buffer << in.rdbuf();
  return from_jsonl(std::move(space), buffer.str());
}

nlohmann::json front_to_json(const ParetoFront& front) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& entry : front)
    out.push_back({{"eff_bits", entry.bits}, {"score", entry.score}, {"bits", entry.config.bits()}});
  return out;
}

}  // namespace bitsearch
