#include <doctest.h>

#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

#include "dyncart/baselines.hpp"
#include "dyncart/characterize.hpp"
#include "dyncart/cli.hpp"
#include "dyncart/io.hpp"
#include "oracles.hpp"
#include "test_support.hpp"

using namespace dyncart;
using testing::fixture;
using testing::slurp;
using testing::TempDir;

namespace fs = std::filesystem;

namespace {

struct Outcome {
  int code;
  std::string out;
  std::string err;
};

Outcome run_cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = run(args, out, err);
  return {code, out.str(), err.str()};
}

fs::path golden(const std::string& command) { return fixture("golden") / command; }

std::vector<std::string> golden_args(const std::string& command, const fs::path& out) {
  const std::string log = fixture("small_log.jsonl").string();
  const std::string lex_a = fixture("antonyms.tsv").string();
  const std::string lex_d = fixture("dictionary.txt").string();
  const std::string assignments = (golden("characterize") / "assignments.csv").string();
  std::vector<std::string> args{command, "--log", log, "--out", out.string()};
  if (command == "heuristics" || command == "stats" || command == "report") {
    args.insert(args.end(), {"--antonyms", lex_a, "--dictionary", lex_d});
  }
  if (command == "stats" || command == "report") args.insert(args.end(), {"--assignments", assignments});
  return args;
}

std::map<std::string, std::string> files_in(const fs::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::directory_iterator(dir)) {
    const auto name = e.path().filename().string();
    if (name != "manifest.json") out[name] = slurp(e.path());
  }
  return out;
}

std::vector<std::vector<std::string>> read_csv(const fs::path& path) {
  std::istringstream in(slurp(path));
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(in, line)) rows.push_back(split_csv_line(line));
  return rows;
}

std::vector<std::string> lines_of(const fs::path& path) {
  std::istringstream in(slurp(path));
  std::vector<std::string> out;
  std::string line;
  while (std::getline(in, line)) out.push_back(line);
  return out;
}

}  // namespace

TEST_CASE("validate: exit codes and diagnostics") {
  SUBCASE("valid fixture") {
    const auto r = run_cli({"validate", "--log", fixture("small_log.jsonl").string()});
    CHECK(r.code == kExitOk);
    CHECK(r.out == "valid: 18 instances, 3 labels; ph=4 h=4 epochs\n");
  }
  SUBCASE("arity-broken fixture is line numbered") {
    const auto r = run_cli({"validate", "--log", fixture("arity_broken.jsonl").string()});
    CHECK(r.code == kExitInvalid);
    CHECK(r.err.find("line 26") != std::string::npos);
  }
  SUBCASE("empty file") {
    const auto r = run_cli({"validate", "--log", fixture("empty.jsonl").string()});
    CHECK(r.code == kExitInvalid);
    CHECK(r.err.find("missing header") != std::string::npos);
  }
  SUBCASE("missing file") {
    CHECK(run_cli({"validate", "--log", "/nonexistent/log.jsonl"}).code == kExitInvalid);
  }
}

TEST_CASE("usage errors and help") {
  CHECK(run_cli({}).code == kExitInvalid);
  CHECK(run_cli({"frobnicate"}).code == kExitInvalid);
  CHECK(run_cli({"--help"}).code == kExitOk);
  const auto help = run_cli({"characterize", "--help"});
  CHECK(help.code == kExitOk);
  CHECK(help.out.find("--seed") != std::string::npos);
  CHECK(run_cli({"--version"}).code == kExitOk);
  TempDir dir;
  const auto log = fixture("small_log.jsonl").string();
  CHECK(run_cli({"characterize", "--log", log}).code == kExitInvalid);
  CHECK(run_cli({"characterize", "--log", log, "--out", dir.str(), "--k", "0"}).code == kExitInvalid);
  CHECK(run_cli({"characterize", "--log", log, "--out", dir.str(), "--tol", "-1"}).code == kExitInvalid);
  CHECK(run_cli({"baselines", "--log", log, "--out", dir.str(), "--datamaps-top-q", "150"}).code ==
        kExitInvalid);
  CHECK(run_cli({"baselines", "--log", log, "--out", dir.str(), "--aum-band", "70,20"}).code == kExitInvalid);
}

TEST_CASE("clean errors on empty or single-setting data") {
  TempDir dir;
  const auto empty = run_cli({"characterize", "--log", fixture("header_only.jsonl").string(), "--out", dir.str()});
  CHECK(empty.code == kExitInvalid);
  CHECK(empty.err.find("empty") != std::string::npos);

  const auto ph = fixture("ph_only.jsonl").string();
  const auto missing = run_cli({"characterize", "--log", ph, "--out", (dir / "a").string()});
  CHECK(missing.code == kExitInvalid);
  CHECK(missing.err.find("single-setting") != std::string::npos);
  CHECK(run_cli({"characterize", "--log", ph, "--out", (dir / "b").string(), "--single-setting"}).code == kExitOk);
  CHECK(slurp(dir / "b" / "features.csv").rfind("instance_id,conf_ph,var_ph,corr_ph,aum_ph\n", 0) == 0);
}

TEST_CASE("every command reproduces its golden files") {
  for (const std::string command : {"features", "characterize", "baselines", "heuristics", "stats", "report"}) {
    CAPTURE(command);
    TempDir dir;
    const auto r = run_cli(golden_args(command, dir.path()));
    REQUIRE(r.code == kExitOk);
    const auto got = files_in(dir.path());
    const auto want = files_in(golden(command));
    CHECK(got.size() == want.size());
    for (const auto& [name, text] : want) {
      CAPTURE(name);
      REQUIRE(got.count(name) == 1);
      CHECK(got.at(name) == text);
    }
    CHECK(fs::exists(dir / "manifest.json"));
  }
}

TEST_CASE("golden features agree with the brute-force oracle") {
  const auto log = parse_log_file(fixture("small_log.jsonl"));
  const auto rows = read_csv(golden("features") / "features.csv");
  REQUIRE(rows.size() == log.size() + 1);
  for (std::size_t i = 0; i < log.size(); ++i) {
    CHECK(rows[i + 1][0] == log.instances()[i].id);
    for (std::size_t b = 0; b < 2; ++b) {
      const auto o = oracle::dynamics(log.series(i, kAllSettings[b]), log.gold_index(i));
      const long double expect[4] = {o.conf, o.var, o.corr, o.aum};
      for (std::size_t m = 0; m < 4; ++m) {
        CHECK(std::abs(std::stod(rows[i + 1][1 + 4 * b + m]) - static_cast<double>(expect[m])) < 1e-12);
      }
    }
  }
}

TEST_CASE("golden baselines agree with the brute-force filters") {
  const auto log = parse_log_file(fixture("small_log.jsonl"));
  std::vector<double> var, margin;
  for (std::size_t i = 0; i < log.size(); ++i) {
    const auto o = oracle::dynamics(log.series(i, Setting::ph), log.gold_index(i));
    var.push_back(static_cast<double>(o.var));
    margin.push_back(static_cast<double>(o.aum));
  }
  auto ids = [&](const std::vector<std::size_t>& idx) {
    std::vector<std::string> out;
    for (auto i : idx) out.push_back(log.instances()[i].id);
    std::sort(out.begin(), out.end());
    return out;
  };
  CHECK(lines_of(golden("baselines") / "datamaps_ambiguous.txt") == ids(oracle::top_percent(var, 66)));
  CHECK(lines_of(golden("baselines") / "aum_ambiguous.txt") == ids(oracle::band(margin, 33, 66)));
}

TEST_CASE("golden characterization matches the constructed groups") {
  // s01-s06 are built easy, s07-s12 ambiguous, s13-s18 hard.
  std::ifstream in(golden("characterize") / "assignments.csv");
  const auto a = read_assignments_csv(in);
  REQUIRE(a.size() == 18);
  for (std::size_t i = 0; i < 18; ++i) CHECK(a.difficulty[i] == kAllDifficulties[i / 6]);
  for (auto d : kAllDifficulties) {
    const auto path = golden("characterize") / (std::string(to_string(d)) + ".jsonl");
    CHECK(lines_of(path).size() == 6);
  }
  // Reference predictions are wrong on the 4th and 8th instance built.
  // Easy split: s04 wrong; ambiguous: s08, s12 wrong; hard: s16 wrong.
  const auto summary = slurp(golden("characterize") / "split_summary.csv");
  CHECK(summary ==
        "difficulty,count,fraction,accuracy\n"
        "easy,6,0.33333333333333331,0.83333333333333337\n"
        "ambiguous,6,0.33333333333333331,0.66666666666666663\n"
        "hard,6,0.33333333333333331,0.83333333333333337\n");
}

TEST_CASE("reruns are byte-identical, manifests included") {
  TempDir a, b;
  const auto log = fixture("small_log.jsonl").string();
  REQUIRE(run_cli({"characterize", "--log", log, "--out", a.str(), "--seed", "3"}).code == kExitOk);
  REQUIRE(run_cli({"characterize", "--log", log, "--out", b.str(), "--seed", "3"}).code == kExitOk);
  auto fa = files_in(a.path());
  auto fb = files_in(b.path());
  CHECK(fa == fb);
  CHECK(slurp(a / "manifest.json") == slurp(b / "manifest.json"));
}

TEST_CASE("manifest records config, input hashes and outputs") {
  TempDir dir;
  const auto log = fixture("small_log.jsonl");
  REQUIRE(run_cli({"features", "--log", log.string(), "--out", dir.str()}).code == kExitOk);
  const auto j = nlohmann::json::parse(slurp(dir / "manifest.json"));
  CHECK(j["tool"] == "dyncart");
  CHECK(j["command"] == "features");
  CHECK(j["config"]["single_setting"] == false);
  CHECK(j["inputs"][0]["role"] == "log");
  CHECK(j["inputs"][0]["sha256"] == sha256_file(log));
  CHECK(j["outputs"][0]["file"] == "features.csv");
  CHECK(j["outputs"][0]["sha256"] == sha256_file(dir / "features.csv"));
}

TEST_CASE("config file: flags override, file fills the rest") {
  TempDir dir;
  const auto log = fixture("small_log.jsonl").string();
  testing::spit(dir / "run.toml", "seed = 5\nn_init = 3\nlog = \"" + log + "\"\n");
  REQUIRE(run_cli({"characterize", "--config", (dir / "run.toml").string(), "--out", (dir / "a").string()}).code ==
        kExitOk);
  auto cfg = nlohmann::json::parse(slurp(dir / "a" / "manifest.json"))["config"];
  CHECK(cfg["seed"] == 5);
  CHECK(cfg["n_init"] == 3);

  REQUIRE(run_cli({"characterize", "--config", (dir / "run.toml").string(), "--out", (dir / "b").string(),
                   "--seed", "9"})
              .code == kExitOk);
  cfg = nlohmann::json::parse(slurp(dir / "b" / "manifest.json"))["config"];
  CHECK(cfg["seed"] == 9);
  CHECK(cfg["n_init"] == 3);

  testing::spit(dir / "bad.toml", "sed = 5\n");
  CHECK(run_cli({"characterize", "--config", (dir / "bad.toml").string(), "--log", log, "--out",
                 (dir / "c").string()})
            .code == kExitInvalid);
  testing::spit(dir / "range.toml", "k = -4\n");
  CHECK(run_cli({"characterize", "--config", (dir / "range.toml").string(), "--log", log, "--out",
                 (dir / "d").string()})
            .code == kExitInvalid);
}

TEST_CASE("assignments must cover the log exactly") {
  TempDir dir;
  testing::spit(dir / "a.csv", "instance_id,cluster_id,difficulty,max_responsibility\ns01,0,easy,1\n");
  const auto r = run_cli({"report", "--log", fixture("small_log.jsonl").string(), "--assignments",
                          (dir / "a.csv").string(), "--out", (dir / "out").string()});
  CHECK(r.code == kExitInvalid);
}

TEST_CASE("golden heuristics hold hand-derived values") {
  const auto text = slurp(golden("heuristics") / "heuristics.csv");
  // 8 premise tokens, 5 hypothesis types, 4 shared.
  CHECK(text.find("\ns01,0.80000000000000004,0,0.23076923076923078,0,0\n") != std::string::npos);
  // young/old and standing/sits, each against 5 hypothesis types.
  CHECK(text.find("\ns06,0.40000000000000002,0.40000000000000002,0.16666666666666666,0,0\n") !=
        std::string::npos);
  // "libary" and "writting" out of 11 tokens.
  CHECK(text.find("\ns14,0,0,0.45454545454545453,0.18181818181818182,0\n") != std::string::npos);
  // "isn't" carries the negation.
  CHECK(text.find("\ns12,0.33333333333333331,0,0,0,1\n") != std::string::npos);
}
