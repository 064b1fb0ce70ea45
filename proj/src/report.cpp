#include "dyncart/report.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <unordered_map>

#include "dyncart/error.hpp"
#include "dyncart/io.hpp"

namespace dyncart {

namespace {

std::size_t level(Difficulty d) { return static_cast<std::size_t>(d); }

Difficulty difficulty_of(const DifficultyAssignment& assignment, const std::string& id) {
  auto idx = assignment.find(id);
  if (!idx) throw InputError("instance '" + id + "' is missing from the difficulty assignment");
  return assignment.difficulty[*idx];
}

std::size_t gold_of(const InstanceMeta& m, const LabelSpace& labels) {
  auto g = labels.index_of(m.gold);
  if (!g) throw InputError("instance '" + m.id + "' has unknown gold label '" + m.gold + "'");
  return *g;
}

std::string optional_number(const std::optional<double>& v) {
  return v ? format_double(*v) : std::string();
}

nlohmann::ordered_json optional_json(const std::optional<double>& v) {
  return v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json(nullptr);
}

}  // namespace

DifficultySplits build_splits(const DifficultyAssignment& assignment,
                              std::span<const InstanceMeta> instances) {
  DifficultySplits splits;
  for (const auto& m : instances) {
    splits.levels[level(difficulty_of(assignment, m.id))].push_back(m);
  }
  for (auto& l : splits.levels) {
    std::sort(l.begin(), l.end(),
              [](const InstanceMeta& a, const InstanceMeta& b) { return a.id < b.id; });
  }
  return splits;
}

SplitAccuracy split_accuracy(std::span<const InstanceMeta> instances,
                             const DifficultyAssignment& assignment, const LabelSpace& labels) {
  std::vector<std::string> missing;
  for (const auto& m : instances) {
    if (!m.reference_prediction) missing.push_back(m.id);
  }
  if (!missing.empty()) {
    std::sort(missing.begin(), missing.end());
    std::string msg = std::to_string(missing.size()) + " instance(s) lack a reference_prediction:";
    for (const auto& id : missing) msg += " " + id;
    throw InputError(msg);
  }

  PerDifficulty<std::size_t> n{};
  PerDifficulty<std::size_t> hits{};
  PerDifficulty<std::vector<std::size_t>> class_n;
  PerDifficulty<std::vector<std::size_t>> class_hits;
  for (std::size_t d = 0; d < kAllDifficulties.size(); ++d) {
    class_n[d].assign(labels.size(), 0);
    class_hits[d].assign(labels.size(), 0);
  }
  std::size_t all_hits = 0;
  for (const auto& m : instances) {
    const auto d = level(difficulty_of(assignment, m.id));
    const auto g = gold_of(m, labels);
    const bool correct = *m.reference_prediction == m.gold;
    ++n[d];
    ++class_n[d][g];
    if (correct) {
      ++hits[d];
      ++class_hits[d][g];
      ++all_hits;
    }
  }

  SplitAccuracy acc;
  for (std::size_t d = 0; d < kAllDifficulties.size(); ++d) {
    if (n[d] > 0) acc.overall[d] = static_cast<double>(hits[d]) / static_cast<double>(n[d]);
    for (std::size_t c = 0; c < labels.size(); ++c) {
      acc.per_class[d].push_back(class_n[d][c] > 0 ? std::optional<double>(
                                                         static_cast<double>(class_hits[d][c]) /
                                                         static_cast<double>(class_n[d][c]))
                                                   : std::nullopt);
    }
  }
  if (!instances.empty()) {
    acc.global = static_cast<double>(all_hits) / static_cast<double>(instances.size());
  }
  return acc;
}

ClassCounts class_counts(const DifficultyAssignment& assignment,
                         std::span<const InstanceMeta> instances, const LabelSpace& labels) {
  ClassCounts cc;
  cc.classes = labels.names();
  for (auto& row : cc.counts) row.assign(labels.size(), 0);
  for (const auto& m : instances) {
    ++cc.counts[level(difficulty_of(assignment, m.id))][gold_of(m, labels)];
  }
  return cc;
}

std::vector<CellAggregate> aggregate_heuristics(std::span<const HeuristicProfile> profiles,
                                                const DifficultyAssignment& assignment,
                                                std::span<const InstanceMeta> instances,
                                                const LabelSpace& labels) {
  std::unordered_map<std::string_view, const HeuristicProfile*> by_id;
  for (const auto& p : profiles) by_id.emplace(p.instance_id, &p);

  // [difficulty][class] -> profiles
  PerDifficulty<std::vector<std::vector<const HeuristicProfile*>>> cells;
  for (auto& row : cells) row.resize(labels.size());
  for (const auto& m : instances) {
    auto it = by_id.find(m.id);
    if (it == by_id.end()) throw InputError("instance '" + m.id + "' has no heuristic profile");
    cells[level(difficulty_of(assignment, m.id))][gold_of(m, labels)].push_back(it->second);
  }

  std::vector<CellAggregate> out;
  for (auto d : kAllDifficulties) {
    for (std::size_t c = 0; c < labels.size(); ++c) {
      const auto& members = cells[level(d)][c];
      for (auto h : kAllHeuristics) {
        CellAggregate agg{d, labels.name(c), h, members.size(), std::nullopt, std::nullopt};
        if (!members.empty()) {
          double sum = 0.0;
          for (const auto* p : members) sum += p->value(h);
          const double mean = sum / static_cast<double>(members.size());
          double ss = 0.0;
          for (const auto* p : members) ss += (p->value(h) - mean) * (p->value(h) - mean);
          agg.mean = mean;
          agg.std = std::sqrt(ss / static_cast<double>(members.size()));
        }
        out.push_back(std::move(agg));
      }
    }
  }
  return out;
}

SplitReport build_report(std::span<const InstanceMeta> instances,
                         const DifficultyAssignment& assignment, const LabelSpace& labels,
                         std::optional<std::span<const HeuristicProfile>> profiles) {
  if (instances.empty()) throw InputError("dataset is empty");
  SplitReport r;
  r.total = instances.size();
  for (const auto& m : instances) ++r.counts[level(difficulty_of(assignment, m.id))];
  for (std::size_t d = 0; d < kAllDifficulties.size(); ++d) {
    r.fractions[d] = static_cast<double>(r.counts[d]) / static_cast<double>(r.total);
  }

  const auto with_reference = std::count_if(instances.begin(), instances.end(), [](const auto& m) {
    return m.reference_prediction.has_value();
  });
  if (with_reference == 0) {
    r.notes.emplace_back("no reference predictions in the log; split accuracy omitted");
  } else {
    r.accuracy = split_accuracy(instances, assignment, labels);
  }

  r.class_counts = class_counts(assignment, instances, labels);
  if (profiles) {
    r.heuristics = aggregate_heuristics(*profiles, assignment, instances, labels);
    for (const auto& cell : *r.heuristics) {
      if (cell.n == 0 && cell.measure == kAllHeuristics.front()) {
        r.notes.push_back("empty cell: " + std::string(to_string(cell.difficulty)) + "/" +
                          cell.class_name);
      }
    }
  }
  return r;
}

nlohmann::ordered_json report_to_json(const SplitReport& r) {
  nlohmann::ordered_json j;
  j["total"] = r.total;
  auto splits = nlohmann::ordered_json::array();
  for (auto d : kAllDifficulties) {
    const auto i = level(d);
    nlohmann::ordered_json s;
    s["difficulty"] = to_string(d);
    s["count"] = r.counts[i];
    s["fraction"] = r.fractions[i];
    if (r.accuracy) {
      s["accuracy"] = optional_json(r.accuracy->overall[i]);
      nlohmann::ordered_json per_class = nlohmann::ordered_json::object();
      for (std::size_t c = 0; c < r.class_counts.classes.size(); ++c) {
        per_class[r.class_counts.classes[c]] = optional_json(r.accuracy->per_class[i][c]);
      }
      s["accuracy_per_class"] = per_class;
    } else {
      s["accuracy"] = nullptr;
    }
    nlohmann::ordered_json counts = nlohmann::ordered_json::object();
    for (std::size_t c = 0; c < r.class_counts.classes.size(); ++c) {
      counts[r.class_counts.classes[c]] = r.class_counts.counts[i][c];
    }
    s["class_counts"] = counts;
    splits.push_back(s);
  }
  j["splits"] = splits;
  j["global_accuracy"] = r.accuracy ? optional_json(r.accuracy->global) : nullptr;
  if (r.heuristics) {
    auto cells = nlohmann::ordered_json::array();
    for (const auto& c : *r.heuristics) {
      cells.push_back({{"difficulty", to_string(c.difficulty)},
                       {"class", c.class_name},
                       {"measure", to_string(c.measure)},
                       {"n", c.n},
                       {"mean", optional_json(c.mean)},
                       {"std", optional_json(c.std)},
                       {"empty", c.n == 0}});
    }
    j["heuristics"] = cells;
    j["heuristic_normalization"] = {
        {"word_overlap", "shared types / hypothesis types"},
        {"antonym_score", "premise-token antonym hits in hypothesis / hypothesis types"},
        {"length_mismatch", "(premise tokens - hypothesis tokens) / total tokens"},
        {"misspelled_ratio", "alphabetic tokens not in dictionary / total tokens"},
        {"contains_negation", "proportion true"}};
  }
  j["notes"] = r.notes;
  return j;
}

void write_split_summary_csv(std::ostream& out, const SplitReport& r) {
  out << "difficulty,count,fraction,accuracy\n";
  for (auto d : kAllDifficulties) {
    const auto i = level(d);
    out << to_string(d) << ',' << r.counts[i] << ',' << format_double(r.fractions[i]) << ','
        << (r.accuracy ? optional_number(r.accuracy->overall[i]) : std::string()) << '\n';
  }
}

void write_class_counts_csv(std::ostream& out, const ClassCounts& counts) {
  out << "difficulty,class,count\n";
  for (auto d : kAllDifficulties) {
    for (std::size_t c = 0; c < counts.classes.size(); ++c) {
      out << to_string(d) << ',' << csv_escape(counts.classes[c]) << ','
          << counts.counts[level(d)][c] << '\n';
    }
  }
}

void write_heuristic_aggregates_csv(std::ostream& out, std::span<const CellAggregate> cells) {
  out << "difficulty,class,measure,n,mean,std\n";
  for (const auto& c : cells) {
    out << to_string(c.difficulty) << ',' << csv_escape(c.class_name) << ',' << to_string(c.measure)
        << ',' << c.n << ',' << optional_number(c.mean) << ',' << optional_number(c.std) << '\n';
  }
}

void write_split_files(const std::filesystem::path& dir, const DifficultySplits& splits) {
  for (auto d : kAllDifficulties) {
    std::string body;
    for (const auto& m : splits[d]) body += instance_line(m) + '\n';
    write_text_file(dir / (std::string(to_string(d)) + ".jsonl"), body);
  }
}

}  // namespace dyncart
