#include "dyncart/features.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>

#include "dyncart/error.hpp"
#include "dyncart/io.hpp"

namespace dyncart {

std::string_view column_prefix(DynamicsMeasure m) {
  switch (m) {
    case DynamicsMeasure::confidence: return "conf";
    case DynamicsMeasure::variability: return "var";
    case DynamicsMeasure::correctness: return "corr";
    case DynamicsMeasure::aum: return "aum";
  }
  return "?";
}

namespace {

void require_non_empty(std::size_t n, const char* what) {
  if (n == 0) throw InputError(std::string(what) + " of an empty series");
}

std::size_t argmax_lowest(const Logits& z) {
  return static_cast<std::size_t>(std::max_element(z.begin(), z.end()) - z.begin());
}

}  // namespace

double confidence(std::span<const double> gold_probs) {
  require_non_empty(gold_probs.size(), "confidence");
  double sum = 0.0;
  for (double p : gold_probs) sum += p;
  return sum / static_cast<double>(gold_probs.size());
}

double variability(std::span<const double> gold_probs) {
  require_non_empty(gold_probs.size(), "variability");
  const double mu = confidence(gold_probs);
  double ss = 0.0;
  for (double p : gold_probs) ss += (p - mu) * (p - mu);
  return std::sqrt(ss / static_cast<double>(gold_probs.size()));
}

double correctness(const LogitSeries& series, std::size_t gold_index) {
  require_non_empty(series.size(), "correctness");
  std::size_t hits = 0;
  for (const auto& z : series) {
    if (gold_index >= z.size()) throw InputError("gold index out of range");
    if (argmax_lowest(z) == gold_index) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(series.size());
}

double aum(const LogitSeries& series, std::size_t gold_index) {
  require_non_empty(series.size(), "aum");
  double sum = 0.0;
  for (const auto& z : series) {
    if (z.size() < 2) throw InputError("aum needs at least 2 classes");
    if (gold_index >= z.size()) throw InputError("gold index out of range");
    double other = -std::numeric_limits<double>::infinity();
    for (std::size_t y = 0; y < z.size(); ++y) {
      if (y != gold_index) other = std::max(other, z[y]);
    }
    sum += z[gold_index] - other;
  }
  return sum / static_cast<double>(series.size());
}

std::vector<double> gold_probabilities(const LogitSeries& series, std::size_t gold_index) {
  std::vector<double> out;
  out.reserve(series.size());
  for (const auto& z : series) {
    if (gold_index >= z.size()) throw InputError("gold index out of range");
    out.push_back(softmax(z)[gold_index]);
  }
  return out;
}

double SettingDynamics::get(DynamicsMeasure m) const {
  switch (m) {
    case DynamicsMeasure::confidence: return confidence;
    case DynamicsMeasure::variability: return variability;
    case DynamicsMeasure::correctness: return correctness;
    case DynamicsMeasure::aum: return aum;
  }
  return 0.0;
}

SettingDynamics setting_dynamics(const LogitSeries& series, std::size_t gold_index) {
  const auto probs = gold_probabilities(series, gold_index);
  return {confidence(probs), variability(probs), correctness(series, gold_index),
          aum(series, gold_index)};
}

std::optional<std::size_t> FeatureTable::column(Setting s, DynamicsMeasure m) const {
  auto it = std::find(settings.begin(), settings.end(), s);
  if (it == settings.end()) return std::nullopt;
  return static_cast<std::size_t>(it - settings.begin()) * kAllDynamicsMeasures.size() +
         static_cast<std::size_t>(m);
}

std::vector<double> FeatureTable::column_values(std::size_t col) const {
  std::vector<double> out;
  out.reserve(rows.size());
  for (const auto& r : rows) out.push_back(r.values.at(col));
  return out;
}

std::vector<std::string> FeatureTable::column_names() const {
  std::vector<std::string> names;
  for (auto s : settings) {
    for (auto m : kAllDynamicsMeasures) {
      names.push_back(std::string(column_prefix(m)) + "_" + std::string(to_string(s)));
    }
  }
  return names;
}

Eigen::MatrixXd FeatureTable::matrix() const {
  Eigen::MatrixXd x(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(dim()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < dim(); ++j) {
      x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i].values[j];
    }
  }
  return x;
}

FeatureTable build_feature_vectors(const DynamicsLog& log, const FeatureOptions& options) {
  if (log.size() == 0) throw InputError("dataset is empty");

  FeatureTable table;
  const auto declared = log.settings();
  if (options.single_setting) {
    table.settings = {declared.front()};
  } else {
    if (declared.size() != 2) {
      throw InputError("log declares only the '" + std::string(to_string(declared.front())) +
                       "' setting; both ph and h are required unless single-setting mode is enabled");
    }
    table.settings = declared;
  }

  table.rows.reserve(log.size());
  for (std::size_t i = 0; i < log.size(); ++i) {
    const auto& meta = log.instances()[i];
    FeatureVector fv{meta.id, {}};
    for (auto s : table.settings) {
      const auto& series = log.series(i, s);
      if (series.empty()) {
        throw InputError("instance '" + meta.id + "' has no records for setting '" +
                         std::string(to_string(s)) + "'");
      }
      const auto d = setting_dynamics(series, log.gold_index(i));
      for (auto m : kAllDynamicsMeasures) fv.values.push_back(d.get(m));
    }
    table.rows.push_back(std::move(fv));
  }
  return table;
}

ScaledFeatureMatrix standard_scale(const Eigen::MatrixXd& x) {
  const Eigen::Index n = x.rows();
  if (n < 2) throw InputError("standard scaling needs at least 2 rows");
  if (!x.allFinite()) throw InputError("feature matrix contains non-finite values");

  ScaledFeatureMatrix out;
  out.values.resize(n, x.cols());
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    double sum = 0.0;
    double lo = x(0, j);
    double hi = x(0, j);
    for (Eigen::Index i = 0; i < n; ++i) {
      sum += x(i, j);
      lo = std::min(lo, x(i, j));
      hi = std::max(hi, x(i, j));
    }
    const double mean = sum / static_cast<double>(n);
    double ss = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) ss += (x(i, j) - mean) * (x(i, j) - mean);
    const double sd = std::sqrt(ss / static_cast<double>(n));

    out.column_means.push_back(mean);
    if (lo == hi || sd == 0.0) {
      out.column_stds.push_back(0.0);
      out.values.col(j).setZero();
      continue;
    }
    out.column_stds.push_back(sd);
    for (Eigen::Index i = 0; i < n; ++i) out.values(i, j) = (x(i, j) - mean) / sd;
  }
  return out;
}

void write_features_csv(std::ostream& out, const FeatureTable& table) {
  out << "instance_id";
  for (const auto& name : table.column_names()) out << ',' << name;
  out << '\n';
  for (const auto& row : table.rows) {
    out << csv_escape(row.instance_id);
    for (double v : row.values) out << ',' << format_double(v);
    out << '\n';
  }
}

}  // namespace dyncart
