#include "dyncart/baselines.hpp"

#include <algorithm>
#include <cmath>

#include "dyncart/error.hpp"
#include "dyncart/io.hpp"

namespace dyncart {

namespace {

// ceil(q/100 * n) without letting 33/100*100 round up to 34.
std::size_t rank_for(double q, std::size_t n) {
  const double x = q * static_cast<double>(n) / 100.0;
  const double nearest = std::round(x);
  const double r = std::abs(x - nearest) <= 1e-9 * std::max(1.0, x) ? nearest : std::ceil(x);
  return static_cast<std::size_t>(r);
}

void check_q(double q) {
  if (!(q >= 0.0 && q <= 100.0)) throw InputError("percentile must lie in [0, 100]");
}

std::vector<double> sorted_copy(std::span<const double> values) {
  std::vector<double> v(values.begin(), values.end());
  std::sort(v.begin(), v.end());
  return v;
}

std::vector<double> ph_column(const FeatureTable& features, DynamicsMeasure m) {
  if (features.rows.empty()) throw InputError("dataset is empty");
  auto col = features.column(Setting::ph, m);
  if (!col) {
    throw InputError("baseline needs the ph " + std::string(column_prefix(m)) +
                     " feature, which this feature table does not have");
  }
  return features.column_values(*col);
}

}  // namespace

double percentile(std::span<const double> values, double q) {
  if (values.empty()) throw InputError("percentile of an empty sample");
  check_q(q);
  const auto v = sorted_copy(values);
  const std::size_t rank = std::clamp<std::size_t>(rank_for(q, v.size()), 1, v.size());
  return v[rank - 1];
}

double top_percent_threshold(std::span<const double> values, double top_q) {
  if (values.empty()) throw InputError("threshold of an empty sample");
  if (!(top_q > 0.0 && top_q <= 100.0)) throw InputError("top percentage must lie in (0, 100]");
  const auto v = sorted_copy(values);
  const std::size_t keep = std::clamp<std::size_t>(rank_for(top_q, v.size()), 1, v.size());
  return v[v.size() - keep];
}

std::string_view to_string(BaselineMethod m) {
  return m == BaselineMethod::datamaps ? "datamaps" : "aum";
}

BaselineSelection datamaps_ambiguous(const FeatureTable& features, double top_q) {
  const auto values = ph_column(features, DynamicsMeasure::variability);
  BaselineSelection sel;
  sel.method = BaselineMethod::datamaps;
  sel.rule = {Setting::ph, DynamicsMeasure::variability, 100.0 - top_q, 100.0};
  sel.lower_threshold = top_percent_threshold(values, top_q);
  sel.total = values.size();
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (values[i] >= sel.lower_threshold) sel.selected.push_back(features.rows[i].instance_id);
  }
  std::sort(sel.selected.begin(), sel.selected.end());
  return sel;
}

BaselineSelection aum_ambiguous(const FeatureTable& features, double lower_q, double upper_q) {
  check_q(lower_q);
  check_q(upper_q);
  if (!(lower_q < upper_q)) throw InputError("AUM band needs lower percentile < upper percentile");
  const auto values = ph_column(features, DynamicsMeasure::aum);
  BaselineSelection sel;
  sel.method = BaselineMethod::aum;
  sel.rule = {Setting::ph, DynamicsMeasure::aum, lower_q, upper_q};
  sel.lower_threshold = percentile(values, lower_q);
  sel.upper_threshold = percentile(values, upper_q);
  sel.total = values.size();
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (values[i] >= sel.lower_threshold && values[i] <= *sel.upper_threshold) {
      sel.selected.push_back(features.rows[i].instance_id);
    }
  }
  std::sort(sel.selected.begin(), sel.selected.end());
  return sel;
}

nlohmann::ordered_json selection_sidecar(const BaselineSelection& s) {
  nlohmann::ordered_json j;
  j["method"] = to_string(s.method);
  j["rule"] = {{"feature", std::string(column_prefix(s.rule.feature)) + "_" +
                               std::string(to_string(s.rule.setting))},
               {"lower_q", s.rule.lower_q},
               {"upper_q", s.rule.upper_q}};
  if (s.method == BaselineMethod::datamaps) j["rule"]["top_q"] = 100.0 - s.rule.lower_q;
  j["percentile_convention"] = "nearest-rank, inclusive thresholds";
  j["lower_threshold"] = s.lower_threshold;
  if (s.upper_threshold) j["upper_threshold"] = *s.upper_threshold;
  j["selected"] = s.selected.size();
  j["total"] = s.total;
  return j;
}

void write_selection(const std::filesystem::path& dir, std::string_view stem,
                     const BaselineSelection& selection) {
  std::string ids;
  for (const auto& id : selection.selected) ids += id + '\n';
  write_text_file(dir / (std::string(stem) + ".txt"), ids);
  write_text_file(dir / (std::string(stem) + ".json"), selection_sidecar(selection).dump(2) + '\n');
}

}  // namespace dyncart
