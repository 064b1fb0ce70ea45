#include "dyncart/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <functional>
#include <ostream>
#include <sstream>

#include "dyncart/baselines.hpp"
#include "dyncart/characterize.hpp"
#include "dyncart/dynamics_log.hpp"
#include "dyncart/error.hpp"
#include "dyncart/features.hpp"
#include "dyncart/heuristics.hpp"
#include "dyncart/io.hpp"
#include "dyncart/report.hpp"
#include "dyncart/stat_tests.hpp"

#ifndef DYNCART_VERSION
#define DYNCART_VERSION "unknown"
#endif

namespace dyncart {

namespace {

namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;

struct RunConfig {
  std::string log;
  std::string out;
  std::string config;
  std::string assignments;
  std::string antonyms;
  std::string dictionary;
  std::string negations;
  bool single_setting = false;
  bool no_symmetrize = false;
  std::uint64_t seed = 0;
  std::size_t k = 3;
  std::size_t n_init = 10;
  std::size_t max_iter = 200;
  double tol = 1e-6;
  double epsilon = 1e-6;
  double datamaps_top_q = 66.0;
  std::vector<double> aum_band{33.0, 66.0};
};

// Which option groups a command registers; drives both parsing and the
// config echo in the manifest.
enum Group : unsigned {
  kLog = 1u << 0,
  kOut = 1u << 1,
  kSingle = 1u << 2,
  kGmm = 1u << 3,
  kLexicons = 1u << 4,
  kBaselines = 1u << 5,
  kAssignments = 1u << 6,
};

void register_options(CLI::App& sub, RunConfig& cfg, unsigned groups) {
  sub.add_option("--config", cfg.config,
                 "TOML/INI file of option values (e.g. seed = 3); command-line flags win")
      ->check(CLI::ExistingFile);
  if (groups & kLog) {
    sub.add_option("--log", cfg.log, "Training-dynamics JSONL log (required)")->check(CLI::ExistingFile);
  }
  if (groups & kOut) {
    sub.add_option("--out", cfg.out, "Run directory for outputs, created if missing (required)");
  }
  if (groups & kSingle) {
    sub.add_flag("--single-setting", cfg.single_setting,
                 "Use only the first logged setting (4-D features)");
  }
  if (groups & kGmm) {
    sub.add_option("--seed", cfg.seed, "GMM random seed")->capture_default_str();
    sub.add_option("--k", cfg.k, "Number of mixture components")
        ->check(CLI::Range(std::size_t{1}, std::size_t{1000}))
        ->capture_default_str();
    sub.add_option("--n-init", cfg.n_init, "EM restarts")
        ->check(CLI::Range(std::size_t{1}, std::size_t{100000}))
        ->capture_default_str();
    sub.add_option("--max-iter", cfg.max_iter, "EM iteration cap per restart")
        ->check(CLI::Range(std::size_t{1}, std::size_t{1000000}))
        ->capture_default_str();
    sub.add_option("--tol", cfg.tol, "Relative log-likelihood convergence tolerance")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    sub.add_option("--epsilon", cfg.epsilon, "Covariance diagonal regularization")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
  }
  if (groups & kLexicons) {
    sub.add_option("--antonyms", cfg.antonyms, "Antonym TSV (word<TAB>antonym)")
        ->check(CLI::ExistingFile);
    sub.add_option("--dictionary", cfg.dictionary, "Word list, one word per line")
        ->check(CLI::ExistingFile);
    sub.add_option("--negations", cfg.negations,
                   "Negation word list replacing the default {no, not, never, none}")
        ->check(CLI::ExistingFile);
    sub.add_flag("--no-symmetrize", cfg.no_symmetrize,
                 "Keep antonym pairs one-directional as listed");
  }
  if (groups & kBaselines) {
    sub.add_option("--datamaps-top-q", cfg.datamaps_top_q,
                   "Data Maps rule: keep the top q percent by ph variability")
        ->check(CLI::Range(0.0, 100.0))
        ->capture_default_str();
    sub.add_option("--aum-band", cfg.aum_band, "AUM rule percentile band as LOWER,UPPER")
        ->delimiter(',')
        ->expected(2)
        ->check(CLI::Range(0.0, 100.0))
        ->capture_default_str();
  }
  if (groups & kAssignments) {
    sub.add_option("--assignments", cfg.assignments, "assignments.csv from characterize (required)")
        ->check(CLI::ExistingFile);
  }
}

Json config_echo(const RunConfig& cfg, unsigned groups) {
  Json j = Json::object();
  if (groups & kLog) j["log"] = cfg.log;
  if (groups & kSingle) j["single_setting"] = cfg.single_setting;
  if (groups & kGmm) {
    j["seed"] = cfg.seed;
    j["k"] = cfg.k;
    j["n_init"] = cfg.n_init;
    j["max_iter"] = cfg.max_iter;
    j["tol"] = cfg.tol;
    j["epsilon"] = cfg.epsilon;
  }
  if (groups & kLexicons) {
    j["antonyms"] = cfg.antonyms.empty() ? Json(nullptr) : Json(cfg.antonyms);
    j["dictionary"] = cfg.dictionary.empty() ? Json(nullptr) : Json(cfg.dictionary);
    j["negations"] = cfg.negations.empty() ? Json(nullptr) : Json(cfg.negations);
    j["symmetrize_antonyms"] = !cfg.no_symmetrize;
  }
  if (groups & kBaselines) {
    j["datamaps_top_q"] = cfg.datamaps_top_q;
    j["aum_band"] = cfg.aum_band;
  }
  if (groups & kAssignments) j["assignments"] = cfg.assignments;
  return j;
}

class RunDir {
 public:
  RunDir(std::string command, const RunConfig& cfg, unsigned groups)
      : command_(std::move(command)), dir_(cfg.out) {
    std::error_code ec;
    fs::create_directories(dir_, ec);
    if (ec || !fs::is_directory(dir_)) {
      throw InputError("cannot create output directory " + dir_.string());
    }
    config_ = config_echo(cfg, groups);
    add_input("config", cfg.config);
    if (groups & kLog) add_input("log", cfg.log);
    if (groups & kLexicons) {
      add_input("antonyms", cfg.antonyms);
      add_input("dictionary", cfg.dictionary);
      add_input("negations", cfg.negations);
    }
    if (groups & kAssignments) add_input("assignments", cfg.assignments);
  }

  void write(const std::string& name, std::string_view contents) {
    write_text_file(dir_ / name, contents);
    outputs_.push_back(name);
  }

  void write_with(const std::string& name, const std::function<void(std::ostream&)>& fn) {
    std::ostringstream s;
    fn(s);
    write(name, s.str());
  }

  void warn(std::string w) { warnings_.push_back(std::move(w)); }
  void warn_all(const std::vector<std::string>& ws) {
    for (const auto& w : ws) warn(w);
  }
  Json& extra() { return extra_; }

  void finish(std::ostream& err) {
    for (const auto& w : warnings_) err << "warning: " << w << '\n';
    Json j;
    j["tool"] = "dyncart";
    j["version"] = DYNCART_VERSION;
    j["command"] = command_;
    j["config"] = config_;
    j["inputs"] = inputs_;
    auto outputs = Json::array();
    std::vector<std::string> names = outputs_;
    std::sort(names.begin(), names.end());
    for (const auto& n : names) {
      outputs.push_back({{"file", n}, {"sha256", sha256_file(dir_ / n)}});
    }
    j["outputs"] = outputs;
    j["warnings"] = warnings_;
    for (auto it = extra_.begin(); it != extra_.end(); ++it) j[it.key()] = it.value();
    write_text_file(dir_ / "manifest.json", j.dump(2) + '\n');
  }

 private:
  void add_input(const std::string& role, const std::string& path) {
    if (path.empty()) return;
    inputs_.push_back({{"role", role}, {"path", path}, {"sha256", sha256_file(path)}});
  }

  std::string command_;
  fs::path dir_;
  Json config_;
  Json inputs_ = Json::array();
  std::vector<std::string> outputs_;
  std::vector<std::string> warnings_;
  Json extra_ = Json::object();
};

LexiconSet load_lexicons(const RunConfig& cfg) {
  LexiconSet lex;
  if (!cfg.antonyms.empty()) lex.antonyms = load_antonyms_file(cfg.antonyms, !cfg.no_symmetrize);
  if (!cfg.dictionary.empty()) lex.dictionary = load_word_list_file(cfg.dictionary);
  if (!cfg.negations.empty()) lex.negations = load_word_list_file(cfg.negations);
  return lex;
}

DifficultyAssignment load_assignments(const RunConfig& cfg, const DynamicsLog& log) {
  std::ifstream in(cfg.assignments);
  if (!in) throw InputError("cannot open " + cfg.assignments);
  auto a = read_assignments_csv(in);
  for (const auto& m : log.instances()) {
    if (!a.find(m.id)) {
      throw InputError("assignments file has no row for instance '" + m.id + "'");
    }
  }
  for (const auto& id : a.ids) {
    if (!log.find(id)) throw InputError("assignments file lists unknown instance '" + id + "'");
  }
  return a;
}

void write_report_files(RunDir& run, const SplitReport& report) {
  run.write("report.json", report_to_json(report).dump(2) + '\n');
  run.write_with("split_summary.csv", [&](std::ostream& o) { write_split_summary_csv(o, report); });
  run.write_with("class_counts.csv",
                 [&](std::ostream& o) { write_class_counts_csv(o, report.class_counts); });
  if (report.heuristics) {
    run.write_with("heuristics_aggregate.csv", [&](std::ostream& o) {
      write_heuristic_aggregates_csv(o, *report.heuristics);
    });
  }
  run.warn_all(report.notes);
}

int cmd_validate(const RunConfig& cfg, std::ostream& out) {
  const auto log = parse_log_file(cfg.log);
  out << "valid: " << log.size() << " instances, " << log.labels().size() << " labels;";
  for (const auto& [s, n] : log.epochs_per_setting()) out << ' ' << to_string(s) << '=' << n;
  out << " epochs\n";
  return kExitOk;
}

int cmd_features(const RunConfig& cfg, std::ostream& err) {
  RunDir run("features", cfg, kLog | kOut | kSingle);
  const auto log = parse_log_file(cfg.log);
  const auto table = build_feature_vectors(log, {cfg.single_setting});
  run.write_with("features.csv", [&](std::ostream& o) { write_features_csv(o, table); });
  run.finish(err);
  return kExitOk;
}

int cmd_characterize(const RunConfig& cfg, std::ostream& err) {
  RunDir run("characterize", cfg, kLog | kOut | kSingle | kGmm);
  const auto log = parse_log_file(cfg.log);
  CharacterizeOptions opts;
  opts.features.single_setting = cfg.single_setting;
  opts.gmm.components = cfg.k;
  opts.gmm.seed = cfg.seed;
  opts.gmm.n_init = cfg.n_init;
  opts.gmm.max_iter = cfg.max_iter;
  opts.gmm.tol = cfg.tol;
  opts.gmm.epsilon = cfg.epsilon;
  const auto result = characterize(log, opts);

  run.write_with("features.csv", [&](std::ostream& o) { write_features_csv(o, result.features); });
  run.write_with("assignments.csv",
                 [&](std::ostream& o) { write_assignments_csv(o, result.assignment); });

  Json model = model_to_json(result.fit.model);
  model["best_restart"] = result.fit.best_restart;
  model["columns"] = result.features.column_names();
  model["scaling"] = {{"means", result.scaled.column_means}, {"stds", result.scaled.column_stds}};
  const auto& ranking = result.assignment.ranking;
  auto clusters = Json::array();
  for (std::size_t c = 0; c < ranking.difficulty.size(); ++c) {
    clusters.push_back({{"cluster", c},
                        {"mean_confidence", ranking.mean_confidence[c]},
                        {"difficulty", to_string(ranking.difficulty[c])}});
  }
  model["ranking"] = clusters;
  run.write("model.json", model.dump(2) + '\n');

  const auto splits = build_splits(result.assignment, log.instances());
  for (auto d : kAllDifficulties) {
    std::string body;
    for (const auto& m : splits[d]) body += instance_line(m) + '\n';
    run.write(std::string(to_string(d)) + ".jsonl", body);
  }

  write_report_files(run, build_report(log.instances(), result.assignment, log.labels()));
  run.warn_all(result.warnings);
  run.extra()["refits"] = result.refits;
  run.finish(err);
  return kExitOk;
}

int cmd_baselines(const RunConfig& cfg, std::ostream& err) {
  RunDir run("baselines", cfg, kLog | kOut | kSingle | kBaselines);
  const auto log = parse_log_file(cfg.log);
  if (cfg.aum_band.size() != 2) throw InputError("--aum-band needs exactly two values");
  const auto table = build_feature_vectors(log, {cfg.single_setting});
  const auto dm = datamaps_ambiguous(table, cfg.datamaps_top_q);
  const auto au = aum_ambiguous(table, cfg.aum_band[0], cfg.aum_band[1]);
  for (const auto& [stem, sel] : {std::pair{"datamaps_ambiguous", &dm}, {"aum_ambiguous", &au}}) {
    std::string ids;
    for (const auto& id : sel->selected) ids += id + '\n';
    run.write(std::string(stem) + ".txt", ids);
    run.write(std::string(stem) + ".json", selection_sidecar(*sel).dump(2) + '\n');
  }
  run.finish(err);
  return kExitOk;
}

int cmd_heuristics(const RunConfig& cfg, std::ostream& err) {
  RunDir run("heuristics", cfg, kLog | kOut | kLexicons);
  const auto log = parse_log_file(cfg.log);
  if (log.size() == 0) throw InputError("dataset is empty");
  const auto lex = load_lexicons(cfg);
  run.warn_all(lexicon_warnings(lex));
  const auto profiles = profile_dataset(log.instances(), lex);
  run.write_with("heuristics.csv", [&](std::ostream& o) { write_profiles_csv(o, profiles); });
  run.finish(err);
  return kExitOk;
}

int cmd_stats(const RunConfig& cfg, std::ostream& err) {
  RunDir run("stats", cfg, kLog | kOut | kLexicons | kAssignments);
  const auto log = parse_log_file(cfg.log);
  if (log.size() == 0) throw InputError("dataset is empty");
  const auto assignment = load_assignments(cfg, log);
  const auto lex = load_lexicons(cfg);
  run.warn_all(lexicon_warnings(lex));
  const auto profiles = profile_dataset(log.instances(), lex);
  const auto report = compare_splits(profiles, assignment, log.instances(), log.labels());
  run.write_with("significance.csv", [&](std::ostream& o) { write_significance_csv(o, report); });
  run.write("significance_summary.json", significance_summary(report).dump(2) + '\n');
  for (const auto& s : report.skipped) {
    run.warn("skipped " + std::string(to_string(s.difficulty)) + "/" +
             std::string(to_string(s.measure)) + " " + s.class_a + " vs " + s.class_b + " (n=" +
             std::to_string(s.n_a) + "," + std::to_string(s.n_b) + ")");
  }
  run.finish(err);
  return kExitOk;
}

int cmd_report(const RunConfig& cfg, std::ostream& err) {
  RunDir run("report", cfg, kLog | kOut | kLexicons | kAssignments);
  const auto log = parse_log_file(cfg.log);
  if (log.size() == 0) throw InputError("dataset is empty");
  const auto assignment = load_assignments(cfg, log);
  const auto lex = load_lexicons(cfg);
  run.warn_all(lexicon_warnings(lex));
  const auto profiles = profile_dataset(log.instances(), lex);
  const auto report = build_report(log.instances(), assignment, log.labels(),
                                   std::span<const HeuristicProfile>(profiles));
  write_report_files(run, report);
  run.finish(err);
  return kExitOk;
}

// Config-file values fill every option the command line left unset. Keys
// may use '-' or '_'; a key no command knows is an error, while keys that
// belong to other commands are ignored so one file can serve a whole run.
void apply_config_file(const CLI::App& app, CLI::App& sub, const std::string& path) {
  std::vector<CLI::ConfigItem> items;
  try {
    items = CLI::ConfigTOML().from_file(path);
  } catch (const CLI::ParseError& e) {
    throw InputError("config file " + path + ": " + e.what());
  }
  for (const auto& item : items) {
    if (item.name == "++" || item.name == "--") continue;  // section markers
    if (!item.parents.empty() && item.parents.front() != sub.get_name()) continue;
    std::string key = item.name;
    std::replace(key.begin(), key.end(), '_', '-');
    if (key == "config") throw InputError("config file " + path + " may not name another config");
    CLI::Option* opt = sub.get_option_no_throw("--" + key);
    if (opt == nullptr) {
      const auto others = app.get_subcommands([&](const CLI::App* a) {
        return a->get_option_no_throw("--" + key) != nullptr;
      });
      if (others.empty()) throw InputError("config file " + path + ": unknown key '" + item.name + "'");
      continue;
    }
    if (opt->count() > 0) continue;
    try {
      opt->add_result(item.inputs);
      opt->run_callback();
    } catch (const CLI::Error& e) {
      throw InputError("config file " + path + ": " + item.name + ": " + e.what());
    }
  }
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Training-dynamics dataset characterization"};
  app.name("dyncart");
  app.set_version_flag("--version", DYNCART_VERSION);
  app.require_subcommand(1);

  RunConfig cfg;
  struct Command {
    const char* name;
    const char* help;
    unsigned groups;
  };
  const std::vector<Command> commands{
      {"validate", "Check a dynamics log and report line-numbered problems", kLog},
      {"features", "Export the per-instance dynamics feature vectors", kLog | kOut | kSingle},
      {"characterize", "Fit the mixture model and write easy/ambiguous/hard splits",
       kLog | kOut | kSingle | kGmm},
      {"baselines", "Select Data Maps and AUM ambiguous sets by percentile rules",
       kLog | kOut | kSingle | kBaselines},
      {"heuristics", "Compute the lexical heuristic measures per instance",
       kLog | kOut | kLexicons},
      {"stats", "Mann-Whitney comparisons of heuristics between classes per split",
       kLog | kOut | kLexicons | kAssignments},
      {"report", "Split sizes, accuracies, class counts and heuristic aggregates",
       kLog | kOut | kLexicons | kAssignments},
  };
  for (const auto& c : commands) register_options(*app.add_subcommand(c.name, c.help), cfg, c.groups);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitInvalid;
  }

  CLI::App& sub = *app.get_subcommands().front();
  const std::string command = sub.get_name();
  try {
    if (!cfg.config.empty()) apply_config_file(app, sub, cfg.config);
    for (const char* name : {"--log", "--out", "--assignments"}) {
      const auto* opt = sub.get_option_no_throw(name);
      if (opt != nullptr && opt->count() == 0) {
        throw InputError(std::string(name) + " is required (on the command line or in --config)");
      }
    }
    if (command == "validate") return cmd_validate(cfg, out);
    if (command == "features") return cmd_features(cfg, err);
    if (command == "characterize") return cmd_characterize(cfg, err);
    if (command == "baselines") return cmd_baselines(cfg, err);
    if (command == "heuristics") return cmd_heuristics(cfg, err);
    if (command == "stats") return cmd_stats(cfg, err);
    if (command == "report") return cmd_report(cfg, err);
    err << "error: unknown command " << command << '\n';
    return kExitInvalid;
  } catch (const LogFormatError& e) {
    err << cfg.log << ": " << e.diagnostics().size() << " problem(s)\n";
    for (const auto& d : e.diagnostics()) err << "  " << format_diagnostic(d) << '\n';
    return kExitInvalid;
  } catch (const InputError& e) {
    err << "error: " << e.what() << '\n';
    return kExitInvalid;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << '\n';
    return kExitInternal;
  }
}

}  // namespace dyncart
