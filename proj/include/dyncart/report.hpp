#pragma once

// Per-split summaries: sizes, fractions, reference-model accuracy, class
// counts and heuristic aggregates, plus the split files themselves.

#include <array>
#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "dyncart/characterize.hpp"
#include "dyncart/dynamics_log.hpp"
#include "dyncart/heuristics.hpp"

namespace dyncart {

template <typename T>
using PerDifficulty = std::array<T, kAllDifficulties.size()>;

struct DifficultySplits {
  PerDifficulty<std::vector<InstanceMeta>> levels;  // each sorted by id

  const std::vector<InstanceMeta>& operator[](Difficulty d) const {
    return levels[static_cast<std::size_t>(d)];
  }
};

// Disjoint, exhaustive partition. Throws InputError if an instance has no
// assignment.
DifficultySplits build_splits(const DifficultyAssignment& assignment,
                              std::span<const InstanceMeta> instances);

struct SplitAccuracy {
  PerDifficulty<std::optional<double>> overall;                 // null for empty splits
  PerDifficulty<std::vector<std::optional<double>>> per_class;  // label-space order
  std::optional<double> global;
};

// Fraction of instances whose reference prediction equals the gold label.
// Throws InputError listing every instance without a reference prediction.
SplitAccuracy split_accuracy(std::span<const InstanceMeta> instances,
                             const DifficultyAssignment& assignment, const LabelSpace& labels);

struct ClassCounts {
  std::vector<std::string> classes;              // label-space order
  PerDifficulty<std::vector<std::size_t>> counts;  // [difficulty][class]
};

ClassCounts class_counts(const DifficultyAssignment& assignment,
                         std::span<const InstanceMeta> instances, const LabelSpace& labels);

struct CellAggregate {
  Difficulty difficulty;
  std::string class_name;
  Heuristic measure;
  std::size_t n = 0;
  std::optional<double> mean;  // null when the cell is empty
  std::optional<double> std;   // population std
};

// Ordered by difficulty, class, measure. Booleans aggregate as the
// proportion true.
std::vector<CellAggregate> aggregate_heuristics(std::span<const HeuristicProfile> profiles,
                                                const DifficultyAssignment& assignment,
                                                std::span<const InstanceMeta> instances,
                                                const LabelSpace& labels);

struct SplitReport {
  std::size_t total = 0;
  PerDifficulty<std::size_t> counts{};
  PerDifficulty<double> fractions{};
  std::optional<SplitAccuracy> accuracy;
  ClassCounts class_counts;
  std::optional<std::vector<CellAggregate>> heuristics;
  std::vector<std::string> notes;
};

// Accuracy is reported when every instance has a reference prediction and
// omitted (with a note) when none has one; a partial set is an error.
// Heuristic aggregates are included when profiles are supplied.
SplitReport build_report(std::span<const InstanceMeta> instances,
                         const DifficultyAssignment& assignment, const LabelSpace& labels,
                         std::optional<std::span<const HeuristicProfile>> profiles = std::nullopt);

nlohmann::ordered_json report_to_json(const SplitReport& report);

// difficulty,count,fraction,accuracy
void write_split_summary_csv(std::ostream& out, const SplitReport& report);
// difficulty,class,count
void write_class_counts_csv(std::ostream& out, const ClassCounts& counts);
// difficulty,class,measure,n,mean,std
void write_heuristic_aggregates_csv(std::ostream& out, std::span<const CellAggregate> cells);

// easy.jsonl, ambiguous.jsonl, hard.jsonl of instance lines.
void write_split_files(const std::filesystem::path& dir, const DifficultySplits& splits);

}  // namespace dyncart
