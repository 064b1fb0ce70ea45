#pragma once

// The end-to-end characterization: dynamics features -> standard scaling ->
// mixture fit -> hard assignment -> confidence ranking.

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "dyncart/dynamics_log.hpp"
#include "dyncart/features.hpp"
#include "dyncart/gmm.hpp"

namespace dyncart {

// Instance -> difficulty, sorted by instance id.
struct DifficultyAssignment {
  std::vector<std::string> ids;
  std::vector<std::size_t> cluster;
  std::vector<Difficulty> difficulty;
  std::vector<double> max_responsibility;
  ClusterRanking ranking;

  std::size_t size() const { return ids.size(); }
  std::optional<std::size_t> find(std::string_view id) const;
};

struct CharacterizeOptions {
  FeatureOptions features;
  GmmOptions gmm;
  // Refits with seed+1, seed+2, ... when a cluster ends up empty.
  std::size_t max_refits = 5;
};

struct Characterization {
  FeatureTable features;
  ScaledFeatureMatrix scaled;
  GmmFit fit;
  DifficultyAssignment assignment;
  std::size_t refits = 0;
  std::vector<std::string> warnings;
};

Characterization characterize(const DynamicsLog& log, const CharacterizeOptions& options);

// Ranking column: raw confidence of the first setting block (ph by default).
std::vector<double> ranking_confidence(const FeatureTable& features);

nlohmann::ordered_json model_to_json(const GmmModel& model);

// CSV instance_id,cluster_id,difficulty,max_responsibility
void write_assignments_csv(std::ostream& out, const DifficultyAssignment& assignment);
// Reads the CSV back. The ranking is not stored in the file and stays empty.
DifficultyAssignment read_assignments_csv(std::istream& in);

}  // namespace dyncart
