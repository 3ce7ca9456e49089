// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <regex>
#include <sstream>

#include <json.hpp>

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Run {
  int code = -1;
  std::string out;
  std::string err;
};

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

fs::path workdir() {
  static const fs::path dir = [] {
    auto d = fs::temp_directory_path() / "bitsearch_cli_test";
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

Run cli(const std::string& args) {
  const auto out = workdir() / "stdout.txt";
  const auto err = workdir() / "stderr.txt";
  const std::string cmd = std::string("'") + BITSEARCH_CLI_PATH + "' " + args + " >'" + out.string() +
                          "' 2>'" + err.string() + "'";
  const int status = std::system(cmd.c_str());
  Run r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = slurp(out);
  r.err = slurp(err);
  return r;
}

json load(const fs::path& path) { return json::parse(slurp(path)); }

// 8 layers with a planted outlier at layer 3.
const fs::path& fixture() {
  static const fs::path dir = [] {
    const auto d = workdir() / "synth";
    const auto r = cli("synth --out '" + d.string() + "' --layers 8 --seed 4 --outlier 3 --outlier-weight 10");
    REQUIRE(r.code == 0);
    return d;
  }();
  return dir;
}

std::string common(const std::string& out) {
  return "--space '" + (fixture() / "space.json").string() + "' --evaluator 'synthetic:" +
         (fixture() / "model.json").string() + "' --out '" + (workdir() / out).string() + "'";
}

const std::string kSmallSearch =
    " --seed 11 --initial 80 --iterations 8 --candidates 16 --population 32 --generations 10"
    " --subset-pool 32 --prune-multiplier off";

}  // namespace

TEST_CASE("missing space file exits 2 naming the path") {
  const auto r = cli("sensitivity --space /nonexistent/space.json --evaluator synthetic:/x.json --out " +
                     (workdir() / "missing").string());
  CHECK(r.code == 2);
  CHECK(r.err.find("/nonexistent/space.json") != std::string::npos);
}

TEST_CASE("usage errors exit 2") {
  CHECK(cli("").code == 2);
  CHECK(cli("search --space x.json").code == 2);
  CHECK(cli("search " + common("bad_eval") + " --evaluator bogus").code == 2);
  CHECK(cli("search " + common("bad_prune") + " --prune-multiplier -3").code == 2);
  CHECK(cli("--version").code == 0);
}

TEST_CASE("sensitivity names the planted layer and prints percentages") {
  const auto r = cli("sensitivity " + common("sens"));
  REQUIRE(r.code == 0);
  const auto doc = load(workdir() / "sens" / "sensitivity.json");
  const auto frozen = doc["frozen"].get<std::vector<std::string>>();
  CHECK(std::find(frozen.begin(), frozen.end(), "layers.3.linear") != frozen.end());
  CHECK(doc["scores"].size() == 8);
  for (const char* m : {"multiplier 1.5", "multiplier 2 ", "multiplier 3 ", "multiplier 5 "})
    CHECK(r.out.find(m) != std::string::npos);
  CHECK(std::regex_search(r.out, std::regex(R"(\(\d+\.\d\d%\))")));
}

TEST_CASE("search writes all artifacts and is reproducible") {
  const auto targets = " --target-bits 2.5,3.0,3.5,4.0";
  const auto a = cli("search " + common("search_a") + kSmallSearch + targets);
  REQUIRE_MESSAGE(a.code == 0, a.err);
  const auto b = cli("search " + common("search_b") + kSmallSearch + targets);
  REQUIRE(b.code == 0);
  const auto da = workdir() / "search_a";
  const auto db = workdir() / "search_b";
  CHECK(slurp(da / "archive.jsonl") == slurp(db / "archive.jsonl"));
  CHECK(slurp(da / "front.json") == slurp(db / "front.json"));
  for (const char* t : {"2.5", "3", "3.5", "4"}) {
    CHECK(fs::exists(da / ("selection_" + std::string(t) + ".json")));
    const auto csv = slurp(da / ("allocation_" + std::string(t) + ".csv"));
    CHECK(csv.rfind("layer,block,module,bits\nlayers.0.linear,0,linear,", 0) == 0);
  }
  const auto manifest = load(da / "manifest.json");
  CHECK(manifest["seed"] == 11);
  CHECK(manifest["params"]["iterations"] == 8);
  CHECK(manifest["stats"]["true_evaluations"] == manifest["stats"]["archive_size"]);
  CHECK(manifest["status"] == "completed");

  // Every output file re-emits byte-identically after a parse.
  const auto front_text = slurp(da / "front.json");
  CHECK(load(da / "front.json").dump(2) + "\n" == front_text);
  std::istringstream lines(slurp(da / "archive.jsonl"));
  std::string line;
  while (std::getline(lines, line)) CHECK(json::parse(line).dump() == line);

  const auto selection = load(da / "selection_3.json");
  CHECK(std::abs(selection["eff_bits"].get<double>() - 3.0) <= 0.005 + 1e-12);
}

TEST_CASE("resume continues from a checkpoint") {
  const auto full = cli("search " + common("resume_full") + kSmallSearch);
  REQUIRE(full.code == 0);
  std::string short_run = kSmallSearch;
  short_run.replace(short_run.find("--iterations 8"), 14, "--iterations 2");
  REQUIRE(cli("search " + common("resume_part") + short_run).code == 0);
  const auto ckpt = workdir() / "resume_part" / "checkpoint.json";
  CHECK(load(ckpt)["iteration"] == 2);
  const auto resumed = cli("search " + common("resume_rest") + kSmallSearch + " --resume '" + ckpt.string() + "'");
  REQUIRE_MESSAGE(resumed.code == 0, resumed.err);
  CHECK(slurp(workdir() / "resume_rest" / "archive.jsonl") == slurp(workdir() / "resume_full" / "archive.jsonl"));
}

TEST_CASE("search prunes by default and reports the frozen layer") {
  const auto r = cli("search " + common("pruned") +
                     " --seed 2 --initial 40 --iterations 2 --candidates 10 --population 20 --generations 5"
                     " --subset-pool 20");
  REQUIRE_MESSAGE(r.code == 0, r.err);
  const auto manifest = load(workdir() / "pruned" / "manifest.json");
  const auto pruned = manifest["pruned_layers"].get<std::vector<std::string>>();
  CHECK(std::find(pruned.begin(), pruned.end(), "layers.3.linear") != pruned.end());
  CHECK(manifest["stats"]["sensitivity_evaluations"] == 8);
}

TEST_CASE("search through an external evaluator") {
  const std::string eval = std::string("--evaluator \"exec:'") + FAKE_EVALUATOR_PATH + "' --reverse\"";
  const auto r = cli("search --space '" + (fixture() / "space.json").string() + "' " + eval + " --out '" +
                     (workdir() / "external").string() + "'" + kSmallSearch + " --parallel 2");
  REQUIRE_MESSAGE(r.code == 0, r.err);
  const auto stats = load(workdir() / "external" / "manifest.json")["stats"];
  CHECK(stats["true_evaluations"] == stats["archive_size"]);
  CHECK(stats["true_evaluations"].get<int>() > 80);
}

TEST_CASE("failing external evaluator exits 1 naming the iteration") {
  const std::string eval = std::string("--evaluator \"exec:'") + FAKE_EVALUATOR_PATH + "' --error-after 1\"";
  const auto r = cli("search --space '" + (fixture() / "space.json").string() + "' " + eval + " --out '" +
                     (workdir() / "crash").string() + "'" + kSmallSearch);
  CHECK(r.code == 1);
  CHECK(r.err.find("iteration 1") != std::string::npos);
  CHECK(fs::exists(workdir() / "crash" / "checkpoint.json"));
}

TEST_CASE("baselines report evaluation counts") {
  const auto dir = workdir() / "ten";
  REQUIRE(cli("synth --out '" + dir.string() + "' --layers 10 --seed 1").code == 0);
  const auto args = "--space '" + (dir / "space.json").string() + "' --evaluator 'synthetic:" +
                    (dir / "model.json").string() + "' --out '" + (workdir() / "baseline").string() + "'";
  REQUIRE(cli("baseline " + args + " --method greedy --target-bits 2.25").code == 0);
  const auto greedy = load(workdir() / "baseline" / "baseline_greedy_2.25.json");
  CHECK(greedy["evaluations"]["search"] == 55);
  CHECK(greedy["eff_bits"] == 2.25);

  REQUIRE(cli("baseline " + args + " --method one-shot --target-bits 3.25").code == 0);
  const auto one_shot = load(workdir() / "baseline" / "baseline_one-shot_3.25.json");
  CHECK(one_shot["evaluations"]["search"] == 0);
  CHECK(one_shot["evaluations"]["sensitivity"] == 10);
  CHECK(one_shot["evaluations"]["scoring"] == 1);

  CHECK(cli("baseline " + args + " --method one-shot --target-bits 9").code == 2);
  CHECK(cli("baseline " + args + " --method random --target-bits 3").code == 2);
}

TEST_CASE("oracle reports coincidence and front ratios") {
  const auto identity = cli("oracle " + common("oracle_id"));
  REQUIRE(identity.code == 0);
  CHECK(identity.out.find("coincident: true") != std::string::npos);
  const auto reverse = cli("oracle " + common("oracle_rev") + " --transform reverse");
  REQUIRE(reverse.code == 0);
  CHECK(reverse.out.find("coincident: false") != std::string::npos);
  const auto doc = load(workdir() / "oracle_rev" / "oracle.json");
  CHECK_FALSE(doc["coincidence"]["spurious"].empty());

  const auto front = workdir() / "search_a" / "front.json";
  if (fs::exists(front)) {
    const auto cmp = cli("oracle " + common("oracle_cmp") + " --front '" + front.string() + "'");
    REQUIRE(cmp.code == 0);
    CHECK(cmp.out.find("hypervolume ratio: ") != std::string::npos);
    const auto ratio = load(workdir() / "oracle_cmp" / "oracle.json")["comparison"]["hypervolume_ratio"];
    CHECK(ratio.get<double>() > 0.5);
  }
  CHECK(cli("oracle " + common("oracle_cap") + " --cap 100").code == 2);
}
