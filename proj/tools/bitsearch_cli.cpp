// SPDX-License-Identifier: Apache-2.0
//
// bitsearch: sensitivity | search | baseline | oracle | synth
//
// Exit codes: 0 success, 1 runtime error, 2 usage or configuration error.
#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "bitsearch/archive.hpp"
#include "bitsearch/baselines.hpp"
#include "bitsearch/engine.hpp"
#include "bitsearch/error.hpp"
#include "bitsearch/evaluator.hpp"
#include "bitsearch/external.hpp"
#include "bitsearch/oracle.hpp"
#include "bitsearch/sensitivity.hpp"
#include "bitsearch/synthetic.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace bitsearch;

namespace {

struct RunConfig {
  std::string space_path;
  std::string evaluator;
  std::uint64_t seed = 0;
  std::size_t parallel = 1;
  std::string out = ".";
  std::optional<std::uint64_t> eval_timeout_ms;
  bool verbose = false;
};

struct SearchFlags {
  SearchParams params;
  std::string prune = "2";
  std::vector<double> targets;
  double tolerance = 0.005;
  std::string resume;
};

// --- helpers ---------------------------------------------------------------

std::string format_bits(double v) {
  std::ostringstream os;
  os << v;
  return os.str();
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write '" + path.string() + "'");
  out << text;
}

void write_json(const fs::path& path, const json& doc) { write_text(path, doc.dump(2) + "\n"); }

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open '" + path.string() + "'");
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError("'" + path.string() + "' is not valid JSON: " + e.what());
  }
}

fs::path prepare_out(const RunConfig& run) {
  const fs::path dir(run.out);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw ConfigError("cannot create output directory '" + run.out + "'");
  const auto probe = dir / ".write-test";
  {
    std::ofstream test(probe);
    if (!test) throw ConfigError("output directory '" + run.out + "' is not writable");
  }
  fs::remove(probe, ec);
  return dir;
}

// An evaluator stack: the owned instances plus the one callers should use.
struct EvaluatorHandle {
  std::vector<std::unique_ptr<Evaluator>> owned;
  Evaluator* active = nullptr;
  Evaluator& operator*() const { return *active; }
};

std::unique_ptr<Evaluator> make_single(const RunConfig& run, const SearchSpace& space) {
  const auto colon = run.evaluator.find(':');
  const std::string kind = run.evaluator.substr(0, colon);
  const std::string arg = colon == std::string::npos ? "" : run.evaluator.substr(colon + 1);
  if (kind == "synthetic" && !arg.empty()) {
    auto model = load_synthetic_model(arg);
    model.validate(space);
    return std::make_unique<SyntheticEvaluator>(std::move(model));
  }
  if (kind == "exec" && !arg.empty()) {
    ExternalOptions options;
    if (run.eval_timeout_ms) options.timeout = std::chrono::milliseconds(*run.eval_timeout_ms);
    return std::make_unique<ExternalEvaluator>(arg, space, options);
  }
  throw ConfigError("--evaluator must be synthetic:<params.json> or exec:<command>, got '" +
                    run.evaluator + "'");
}

EvaluatorHandle make_evaluator(const RunConfig& run, const SearchSpace& space) {
  if (run.parallel == 0) throw ConfigError("--parallel must be >= 1");
  EvaluatorHandle handle;
  if (run.parallel == 1) {
    handle.owned.push_back(make_single(run, space));
    handle.active = handle.owned.back().get();
    return handle;
  }
  std::vector<std::unique_ptr<Evaluator>> workers;
  for (std::size_t w = 0; w < run.parallel; ++w) workers.push_back(make_single(run, space));
  handle.owned.push_back(std::make_unique<ParallelEvaluator>(std::move(workers)));
  handle.active = handle.owned.back().get();
  return handle;
}

std::optional<double> parse_prune(const std::string& text) {
  if (text == "off" || text == "none") return std::nullopt;
  try {
    std::size_t used = 0;
    const double value = std::stod(text, &used);
    if (used != text.size() || !(value > 0.0)) throw std::invalid_argument(text);
    return value;
  } catch (const std::exception&) {
    throw ConfigError("--prune-multiplier must be a positive number or 'off', got '" + text + "'");
  }
}

json params_to_json(const SearchParams& p) {
  return {{"initial", p.initial_samples},
          {"iterations", p.iterations},
          {"candidates", p.candidates_per_iter},
          {"population", p.nsga.population},
          {"generations", p.nsga.generations},
          {"crossover", p.nsga.crossover_prob},
          {"mutation", p.nsga.mutation_prob},
          {"subset_pool", p.subset_pool},
          {"prune_multiplier", p.prune_multiplier ? json(*p.prune_multiplier) : json("off")},
          {"regularization", p.regularization},
          {"seed", p.seed}};
}

std::string rng_state(const Rng& rng) {
  std::ostringstream os;
  os << rng;
  return os.str();
}

Rng rng_from_state(const std::string& text) {
  Rng rng;
  std::istringstream in(text);
  in >> rng;
  if (!in) throw ConfigError("checkpoint has a corrupt RNG state");
  return rng;
}

json checkpoint_json(const SearchState& state) {
  json entries = json::array();
  for (const auto& e : state.archive.entries()) entries.push_back(to_json(e));
  return {{"iteration", state.iteration},
          {"rng", rng_state(state.rng)},
          {"space", to_json(state.archive.space())},
          {"archive", entries}};
}

SearchState load_checkpoint(const fs::path& path) {
  const auto doc = read_json(path);
  try {
    const auto space = search_space_from_json(doc.at("space"));
    std::string lines;
    for (const auto& e : doc.at("archive")) lines += e.dump() + "\n";
    return SearchState{Archive::from_jsonl(space, lines), doc.at("iteration").get<std::size_t>(),
                       rng_from_state(doc.at("rng").get<std::string>())};
  } catch (const json::exception& e) {
    throw ConfigError("checkpoint '" + path.string() + "': " + e.what());
  }
}

std::string module_of(const std::string& name) {
  const auto dot = name.rfind('.');
  return dot == std::string::npos ? name : name.substr(dot + 1);
}

std::string block_of(const std::string& name) {
  std::size_t start = 0;
  while (start < name.size()) {
    auto end = name.find('.', start);
    if (end == std::string::npos) end = name.size();
    const auto part = name.substr(start, end - start);
    if (!part.empty() && std::all_of(part.begin(), part.end(), ::isdigit)) return part;
    start = end + 1;
  }
  return "";
}

std::string allocation_csv(const SearchSpace& space, const BitConfig& config) {
  std::string out = "layer,block,module,bits\n";
  for (std::size_t i = 0; i < space.layer_count(); ++i) {
    const auto& name = space.layer(i).name;
    out += name + "," + block_of(name) + "," + module_of(name) + "," + std::to_string(config[i]) + "\n";
  }
  return out;
}

json layers_json(const SearchSpace& space, const BitConfig& config) {
  json out = json::array();
  for (std::size_t i = 0; i < space.layer_count(); ++i)
    out.push_back({{"name", space.layer(i).name}, {"bits", config[i]}});
  return out;
}

void print_prune_summary(const SearchSpace& space, const SensitivityProfile& profile) {
  for (double m : {1.5, 2.0, 3.0, 5.0}) {
    const auto pruned = prune_space(space, profile, m);
    std::printf("multiplier %-4s excluded %zu/%zu layers (%.2f%%)\n", format_bits(m).c_str(),
                pruned.outliers.size(), space.layer_count(), 100.0 * pruned.excluded_fraction);
  }
}

// --- commands ---------------------------------------------------------------

int cmd_sensitivity(const RunConfig& run, const std::string& prune) {
  const auto space = load_search_space(run.space_path);
  const auto multiplier = parse_prune(prune).value_or(2.0);
  const auto dir = prepare_out(run);
  auto eval = make_evaluator(run, space);
  const auto profile = measure_sensitivity(space, *eval);
  const auto pruned = prune_space(space, profile, multiplier);
  auto doc = to_json(profile, pruned);
  doc["multiplier"] = multiplier;
  doc["layers"] = json::array();
  for (const auto& layer : space.layers()) doc["layers"].push_back(layer.name);
  write_json(dir / "sensitivity.json", doc);
  std::printf("median sensitivity %.6g over %zu layers\n", profile.median, space.layer_count());
  print_prune_summary(space, profile);
  for (std::size_t i : pruned.outliers)
    std::printf("frozen at multiplier %s: %s\n", format_bits(multiplier).c_str(), space.layer(i).name.c_str());
  return 0;
}

int cmd_search(const RunConfig& run, SearchFlags flags) {
  auto& params = flags.params;
  params.seed = run.seed;
  params.prune_multiplier = parse_prune(flags.prune);
  params.validate();
  if (flags.tolerance < 0.0) throw ConfigError("--tolerance must be non-negative");
  const auto space = load_search_space(run.space_path);
  const auto dir = prepare_out(run);

  SearchOptions options;
  if (!flags.resume.empty()) {
    options.resume = load_checkpoint(flags.resume);
    if (!(options.resume->archive.space().unfrozen() == space.unfrozen()))
      throw ConfigError("checkpoint '" + flags.resume + "' was written for a different search space");
  }
  auto eval = make_evaluator(run, space);
  if (run.verbose) options.log = [](const std::string& msg) { std::fprintf(stderr, "%s\n", msg.c_str()); };
  options.on_checkpoint = [&](const SearchState& state) {
    write_json(dir / "checkpoint.json", checkpoint_json(state));
  };
  auto result = search(space, *eval, params, options);
  const SearchSpace& searched = result.archive.space();

  result.archive.write_jsonl(dir / "archive.jsonl");
  write_json(dir / "front.json", front_to_json(result.front));
  if (result.sensitivity) {
    const auto pruned = prune_space(space, *result.sensitivity, *params.prune_multiplier);
    write_json(dir / "sensitivity.json", to_json(*result.sensitivity, pruned));
  }

  json selections = json::array();
  std::vector<std::string> missing;
  for (double target : flags.targets) {
    const std::string tag = format_bits(target);
    try {
      const auto& best = select_optimal(result.archive, target, flags.tolerance);
      json doc{{"target_bits", target},
               {"tolerance", flags.tolerance},
               {"config", best.config.bits()},
               {"eff_bits", best.bits},
               {"score", best.score},
               {"iteration", best.iteration},
               {"layers", layers_json(searched, best.config)}};
      write_json(dir / ("selection_" + tag + ".json"), doc);
      write_text(dir / ("allocation_" + tag + ".csv"), allocation_csv(searched, best.config));
      selections.push_back({{"target_bits", target}, {"eff_bits", best.bits}, {"score", best.score}});
      std::printf("target %s: score %.6g at %.4f bits\n", tag.c_str(), best.score, best.bits);
    } catch (const NotFoundError& e) {
      missing.push_back(e.what());
      selections.push_back({{"target_bits", target}, {"error", e.what()}});
    }
  }

  // Layers frozen by pruning, either in this run or in the resumed one.
  json pruned_names = json::array();
  for (std::size_t i = 0; i < space.layer_count(); ++i)
    if (searched.is_frozen(i) && !space.is_frozen(i)) pruned_names.push_back(space.layer(i).name);
  const json manifest{
      {"tool", "bitsearch"},
      {"version", BITSEARCH_VERSION},
      {"command", "search"},
      {"seed", run.seed},
      {"space", run.space_path},
      {"evaluator", run.evaluator},
      {"parallel", run.parallel},
      {"resume", flags.resume},
      {"params", params_to_json(params)},
      {"target_bits", flags.targets},
      {"tolerance", flags.tolerance},
      {"status", result.status == SearchStatus::Completed ? "completed" : "evaluator_failed"},
      {"error", result.error},
      {"failed_iteration", result.failed_iteration},
      {"pruned_layers", pruned_names},
      {"warnings", result.warnings},
      {"stats",
       {{"true_evaluations", result.stats.true_evaluations},
        {"sensitivity_evaluations", result.stats.sensitivity_evaluations},
        {"predictor_invocations", result.stats.predictor_invocations},
        {"seed_predictions", result.stats.seed_predictions},
        {"predictor_calls", result.stats.predictor_calls},
        {"archive_collisions", result.stats.archive_collisions},
        {"archive_size", result.archive.size()},
        {"front_size", result.front.size()}}},
      {"selections", selections}};
  write_json(dir / "manifest.json", manifest);

  std::printf("archive %zu configs, front %zu, true evaluations %zu\n", result.archive.size(),
              result.front.size(), result.stats.true_evaluations);
  for (const auto& w : result.warnings) std::fprintf(stderr, "warning: %s\n", w.c_str());
  if (result.status != SearchStatus::Completed) {
    std::fprintf(stderr, "error: evaluator failed in iteration %zu: %s\n", result.failed_iteration,
                 result.error.c_str());
    std::fprintf(stderr, "resume with --resume %s\n", (dir / "checkpoint.json").string().c_str());
    return 1;
  }
  for (const auto& m : missing) std::fprintf(stderr, "error: %s\n", m.c_str());
  return missing.empty() ? 0 : 1;
}

int cmd_baseline(const RunConfig& run, const std::string& method, const std::vector<double>& targets,
                 double tolerance) {
  if (method != "one-shot" && method != "greedy")
    throw ConfigError("--method must be one-shot or greedy, got '" + method + "'");
  if (targets.empty()) throw ConfigError("--target-bits is required");
  const auto space = load_search_space(run.space_path);
  const auto dir = prepare_out(run);
  auto handle = make_evaluator(run, space);
  CountingEvaluator eval(*handle);

  std::optional<SensitivityProfile> profile;
  std::size_t sensitivity_evals = 0;
  if (method == "one-shot") {
    profile = measure_sensitivity(space, eval);
    sensitivity_evals = eval.evaluations();
  }
  for (double target : targets) {
    BitConfig config;
    std::optional<double> score;
    std::size_t search_evals = 0;
    std::size_t rounds = 0;
    if (method == "one-shot") {
      config = one_shot_search(space, *profile, target);
    } else {
      auto result = greedy_search(space, eval, target, tolerance);
      config = std::move(result.config);
      score = result.score;
      search_evals = result.evaluations;
      rounds = result.rounds;
    }
    std::size_t scoring_evals = 0;
    if (!score) {
      score = eval.evaluate(config);
      scoring_evals = 1;
    }
    const std::string tag = format_bits(target);
    const double bits = effective_bits(config, space);
    json doc{{"method", method},
             {"target_bits", target},
             {"config", config.bits()},
             {"eff_bits", bits},
             {"score", *score},
             {"rounds", rounds},
             {"evaluations",
              {{"search", search_evals}, {"sensitivity", sensitivity_evals}, {"scoring", scoring_evals}}},
             {"layers", layers_json(space, config)}};
    write_json(dir / ("baseline_" + method + "_" + tag + ".json"), doc);
    write_text(dir / ("allocation_" + method + "_" + tag + ".csv"), allocation_csv(space, config));
    std::printf("%s target %s: score %.6g at %.4f bits, %zu search evaluations\n", method.c_str(),
                tag.c_str(), *score, bits, search_evals);
  }
  return 0;
}

int cmd_oracle(const RunConfig& run, const std::string& front_path, const std::string& transform,
               std::uint64_t cap) {
  const auto space = load_search_space(run.space_path);
  const auto dir = prepare_out(run);
  std::function<double(double)> g;
  if (transform == "identity") g = [](double s) { return s; };
  else if (transform == "cubic") g = [](double s) { return s * s * s + s; };
  else if (transform == "reverse") g = [](double s) { return -s; };
  else throw ConfigError("--transform must be identity, cubic or reverse, got '" + transform + "'");

  auto handle = make_evaluator(run, space);
  const auto entries = enumerate_all(space, *handle, cap);
  const auto exact = pareto_front(std::span<const ArchiveEntry>(entries));
  const auto reference = default_reference(space, entries);
  json doc{{"configs", entries.size()},
           {"front", front_to_json(exact)},
           {"reference", {{"score", reference.score}, {"eff_bits", reference.bits}}},
           {"hypervolume", hypervolume(std::span<const ArchiveEntry>(exact), reference)}};
  std::printf("exhaustive front: %zu of %zu configs\n", exact.size(), entries.size());

  if (!front_path.empty()) {
    const auto supplied = read_json(front_path);
    ParetoFront candidate;
    try {
      for (const auto& item : supplied) {
        BitConfig config(item.at("bits").get<std::vector<BitWidth>>());
        space.validate(config);
        candidate.push_back({config, item.at("score").get<double>(), effective_bits(config, space), 0});
      }
    } catch (const json::exception& e) {
      throw ConfigError("front file '" + front_path + "': " + e.what());
    }
    const auto cmp = compare_fronts(exact, candidate, reference);
    doc["comparison"] = to_json(cmp);
    std::printf("hypervolume ratio: %.6f\n", cmp.hypervolume_ratio);
  }

  // Scores from the enumeration are reused; g is applied on top.
  std::unordered_map<BitConfig, double> cached;
  for (const auto& e : entries) cached.emplace(e.config, e.score);
  FunctionEvaluator base([&](const BitConfig& c) { return cached.at(c); });
  TransformedEvaluator transformed(base, g);
  const auto coincidence = verify_front_coincidence(space, base, transformed, cap);
  doc["transform"] = transform;
  doc["coincidence"] = to_json(coincidence);
  std::printf("transform %s coincident: %s\n", transform.c_str(), coincidence.coincident() ? "true" : "false");
  write_json(dir / "oracle.json", doc);
  return 0;
}

int cmd_synth(const std::string& out, std::size_t layers, const std::string& kind, std::uint64_t seed,
              std::optional<std::size_t> outlier, double outlier_weight, double noise) {
  if (layers == 0) throw ConfigError("--layers must be >= 1");
  const auto space = uniform_space(layers);
  const SyntheticKind k = kind == "interaction" ? SyntheticKind::Interaction
                          : kind == "separable" ? SyntheticKind::Separable
                                                : throw ConfigError("--kind must be separable or interaction");
  auto model = random_synthetic_model(space, k, seed);
  if (outlier) {
    if (*outlier >= layers) throw ConfigError("--outlier is out of range");
    std::vector<double> others = model.weights;
    others.erase(others.begin() + static_cast<std::ptrdiff_t>(*outlier));
    model.weights[*outlier] = outlier_weight * (others.empty() ? 1.0 : median_of(others));
  }
  model.noise = noise;
  model.validate(space);
  RunConfig run;
  run.out = out;
  const auto dir = prepare_out(run);
  write_json(dir / "space.json", to_json(space));
  write_json(dir / "model.json", to_json(model));
  std::printf("wrote %s and %s\n", (dir / "space.json").string().c_str(), (dir / "model.json").string().c_str());
  return 0;
}

void add_common(CLI::App* cmd, RunConfig& run) {
  cmd->add_option("--space", run.space_path, "search space JSON")->required();
  cmd->add_option("--evaluator", run.evaluator, "synthetic:<params.json> or exec:<command>")->required();
  cmd->add_option("--seed", run.seed, "random seed");
  cmd->add_option("--parallel", run.parallel, "evaluator instances");
  cmd->add_option("--out", run.out, "output directory");
  cmd->add_option("--eval-timeout-ms", run.eval_timeout_ms, "per-batch timeout for exec evaluators");
  cmd->add_flag("--verbose,-v", run.verbose, "log progress to stderr");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Mixed-precision bit-width search"};
  app.set_version_flag("--version", std::string(BITSEARCH_VERSION));
  app.require_subcommand(1);

  RunConfig run;
  SearchFlags flags;
  std::string prune_sensitivity = "2";
  std::string method;
  double greedy_tolerance = 0.0;
  std::string front_path;
  std::string transform = "identity";
  std::uint64_t cap = kDefaultEnumerationCap;
  std::string synth_out = ".";
  std::size_t synth_layers = 8;
  std::string synth_kind = "separable";
  std::uint64_t synth_seed = 0;
  std::optional<std::size_t> synth_outlier;
  double synth_outlier_weight = 10.0;
  double synth_noise = 0.0;

  auto* sens = app.add_subcommand("sensitivity", "probe per-layer sensitivity and report pruning");
  add_common(sens, run);
  sens->add_option("--prune-multiplier", prune_sensitivity, "threshold multiplier for the profile");

  auto* srch = app.add_subcommand("search", "surrogate-assisted search");
  add_common(srch, run);
  auto& p = flags.params;
  srch->add_option("--iterations", p.iterations)->capture_default_str();
  srch->add_option("--initial", p.initial_samples)->capture_default_str();
  srch->add_option("--candidates", p.candidates_per_iter)->capture_default_str();
  srch->add_option("--population", p.nsga.population)->capture_default_str();
  srch->add_option("--generations", p.nsga.generations)->capture_default_str();
  srch->add_option("--crossover", p.nsga.crossover_prob)->capture_default_str();
  srch->add_option("--mutation", p.nsga.mutation_prob)->capture_default_str();
  srch->add_option("--subset-pool", p.subset_pool)->capture_default_str();
  srch->add_option("--regularization", p.regularization)->capture_default_str();
  srch->add_option("--prune-multiplier", flags.prune, "FLOAT or off")->capture_default_str();
  srch->add_option("--target-bits", flags.targets, "comma-separated targets")->delimiter(',');
  srch->add_option("--tolerance", flags.tolerance)->capture_default_str();
  srch->add_option("--resume", flags.resume, "checkpoint.json from an earlier run");

  auto* base = app.add_subcommand("baseline", "one-shot or greedy allocation");
  add_common(base, run);
  base->add_option("--method", method, "one-shot | greedy")->required();
  base->add_option("--target-bits", flags.targets, "comma-separated targets")->delimiter(',')->required();
  base->add_option("--tolerance", greedy_tolerance, "greedy stopping slack")->capture_default_str();

  auto* orc = app.add_subcommand("oracle", "exhaustive front and coincidence check");
  add_common(orc, run);
  orc->add_option("--front", front_path, "front.json to compare");
  orc->add_option("--transform", transform, "identity | cubic | reverse")->capture_default_str();
  orc->add_option("--cap", cap, "enumeration cap")->capture_default_str();

  auto* syn = app.add_subcommand("synth", "write a synthetic space and model");
  syn->add_option("--out", synth_out)->capture_default_str();
  syn->add_option("--layers", synth_layers)->capture_default_str();
  syn->add_option("--kind", synth_kind)->capture_default_str();
  syn->add_option("--seed", synth_seed)->capture_default_str();
  syn->add_option("--outlier", synth_outlier, "layer index given outlier-weight x median weight");
  syn->add_option("--outlier-weight", synth_outlier_weight)->capture_default_str();
  syn->add_option("--noise", synth_noise)->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*sens) return cmd_sensitivity(run, prune_sensitivity);
    if (*srch) return cmd_search(run, flags);
    if (*base) return cmd_baseline(run, method, flags.targets, greedy_tolerance);
    if (*orc) return cmd_oracle(run, front_path, transform, cap);
    if (*syn)
      return cmd_synth(synth_out, synth_layers, synth_kind, synth_seed, synth_outlier, synth_outlier_weight,
                       synth_noise);
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 2;
}
