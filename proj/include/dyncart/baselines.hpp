#pragma once

// Percentile-threshold "ambiguous" selections used as baselines: the Data
// Maps variability rule and the AUM band rule.

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "dyncart/features.hpp"

namespace dyncart {

// Nearest-rank percentile: the ceil(q/100 * N)-th smallest value, with
// q = 0 giving the minimum.
double percentile(std::span<const double> values, double q);

// The ceil(top_q/100 * N)-th largest value; selecting values at or above it
// keeps the top top_q percent, ties included.
double top_percent_threshold(std::span<const double> values, double top_q);

enum class BaselineMethod { datamaps, aum };

std::string_view to_string(BaselineMethod m);

struct PercentileRule {
  Setting setting = Setting::ph;
  DynamicsMeasure feature = DynamicsMeasure::variability;
  double lower_q = 0.0;
  double upper_q = 100.0;
};

struct BaselineSelection {
  BaselineMethod method = BaselineMethod::datamaps;
  PercentileRule rule;
  double lower_threshold = 0.0;
  std::optional<double> upper_threshold;  // AUM band only
  std::vector<std::string> selected;      // sorted instance ids
  std::size_t total = 0;
};

// Instances whose ph variability is in the top top_q percent, ties at the
// threshold included. top_q in (0, 100].
BaselineSelection datamaps_ambiguous(const FeatureTable& features, double top_q = 66.0);

// Instances whose ph AUM lies in [P(lower_q), P(upper_q)], inclusive.
BaselineSelection aum_ambiguous(const FeatureTable& features, double lower_q = 33.0,
                                double upper_q = 66.0);

nlohmann::ordered_json selection_sidecar(const BaselineSelection& selection);

// Writes <stem>.txt (one id per line) and <stem>.json (rule, thresholds, counts).
void write_selection(const std::filesystem::path& dir, std::string_view stem,
                     const BaselineSelection& selection);

}  // namespace dyncart
