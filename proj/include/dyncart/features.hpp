#pragma once

// Training-dynamics measures per setting and the concatenated feature
// vectors clustered downstream.

#include <array>
#include <cstddef>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "dyncart/dynamics_log.hpp"

namespace dyncart {

enum class DynamicsMeasure { confidence, variability, correctness, aum };

inline constexpr std::array<DynamicsMeasure, 4> kAllDynamicsMeasures{
    DynamicsMeasure::confidence, DynamicsMeasure::variability, DynamicsMeasure::correctness,
    DynamicsMeasure::aum};

// Short column prefix: conf, var, corr, aum.
std::string_view column_prefix(DynamicsMeasure m);

// Mean gold-label probability across epochs.
double confidence(std::span<const double> gold_probs);
// Population standard deviation of the gold-label probability.
double variability(std::span<const double> gold_probs);
// Fraction of epochs whose argmax (lowest index on ties) is the gold label.
double correctness(const LogitSeries& series, std::size_t gold_index);
// Mean over epochs of gold logit minus the largest other logit.
double aum(const LogitSeries& series, std::size_t gold_index);

std::vector<double> gold_probabilities(const LogitSeries& series, std::size_t gold_index);

struct SettingDynamics {
  double confidence = 0.0;
  double variability = 0.0;
  double correctness = 0.0;
  double aum = 0.0;

  double get(DynamicsMeasure m) const;
};

SettingDynamics setting_dynamics(const LogitSeries& series, std::size_t gold_index);

struct FeatureVector {
  std::string instance_id;
  std::vector<double> values;
};

// Rows sorted by instance id. Columns are blocks of the four measures, one
// block per entry of `settings` (ph then h in the default two-setting mode).
struct FeatureTable {
  std::vector<Setting> settings;
  std::vector<FeatureVector> rows;

  std::size_t dim() const { return settings.size() * kAllDynamicsMeasures.size(); }
  std::optional<std::size_t> column(Setting s, DynamicsMeasure m) const;
  std::vector<double> column_values(std::size_t col) const;
  std::vector<std::string> column_names() const;
  Eigen::MatrixXd matrix() const;
};

struct FeatureOptions {
  // Accept a log with one setting (or use only ph when both exist),
  // producing 4-D vectors.
  bool single_setting = false;
};

FeatureTable build_feature_vectors(const DynamicsLog& log, const FeatureOptions& options = {});

struct ScaledFeatureMatrix {
  Eigen::MatrixXd values;  // N x D
  std::vector<double> column_means;
  std::vector<double> column_stds;  // population std; 0 for constant columns
};

// Per-column (x - mean) / std with population std. Constant columns map to
// zeros. Requires at least two rows.
ScaledFeatureMatrix standard_scale(const Eigen::MatrixXd& x);

// CSV with header instance_id,conf_ph,...; values at 17 significant digits.
void write_features_csv(std::ostream& out, const FeatureTable& table);

}  // namespace dyncart
