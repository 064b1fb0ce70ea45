#include "dyncart/characterize.hpp"

#include <algorithm>
#include <charconv>
#include <istream>
#include <numeric>
#include <ostream>

#include "dyncart/error.hpp"
#include "dyncart/io.hpp"

namespace dyncart {

std::optional<std::size_t> DifficultyAssignment::find(std::string_view id) const {
  auto it = std::lower_bound(ids.begin(), ids.end(), id);
  if (it == ids.end() || *it != id) return std::nullopt;
  return static_cast<std::size_t>(it - ids.begin());
}

std::vector<double> ranking_confidence(const FeatureTable& features) {
  const auto col = features.column(features.settings.front(), DynamicsMeasure::confidence);
  return features.column_values(*col);
}

Characterization characterize(const DynamicsLog& log, const CharacterizeOptions& options) {
  Characterization out;
  out.features = build_feature_vectors(log, options.features);
  out.scaled = standard_scale(out.features.matrix());
  const auto confidence = ranking_confidence(out.features);

  for (std::size_t attempt = 0;; ++attempt) {
    GmmOptions gmm = options.gmm;
    gmm.seed = options.gmm.seed + attempt;
    GmmFit fit = fit_gmm(out.scaled.values, gmm);
    const Eigen::MatrixXd resp = responsibilities(fit.model, out.scaled.values);
    const auto labels = assign_clusters(resp);
    try {
      out.assignment.ranking = rank_difficulty(labels, confidence, gmm.components);
    } catch (const EmptyClusterError& e) {
      out.warnings.push_back(std::string(e.what()) + " with seed " + std::to_string(gmm.seed) +
                             "; refitting");
      if (attempt >= options.max_refits) {
        throw InputError("every fit left a cluster empty after " + std::to_string(attempt + 1) +
                         " attempts; the data may not support " +
                         std::to_string(gmm.components) + " clusters");
      }
      continue;
    }
    out.refits = attempt;
    for (const auto& w : fit.warnings) out.warnings.push_back(w);
    out.fit = std::move(fit);
    for (std::size_t i = 0; i < labels.size(); ++i) {
      out.assignment.ids.push_back(out.features.rows[i].instance_id);
      out.assignment.cluster.push_back(labels[i]);
      out.assignment.difficulty.push_back(out.assignment.ranking.difficulty[labels[i]]);
      out.assignment.max_responsibility.push_back(resp(static_cast<Eigen::Index>(i),
                                                       static_cast<Eigen::Index>(labels[i])));
    }
    break;
  }
  return out;
}

nlohmann::ordered_json model_to_json(const GmmModel& model) {
  nlohmann::ordered_json j;
  j["k"] = model.k();
  j["dim"] = model.dim();
  j["weights"] = model.weights;
  auto means = nlohmann::ordered_json::array();
  for (const auto& m : model.means) means.push_back(std::vector<double>(m.data(), m.data() + m.size()));
  j["means"] = means;
  auto covs = nlohmann::ordered_json::array();
  for (const auto& c : model.covariances) {
    auto rows = nlohmann::ordered_json::array();
    for (Eigen::Index r = 0; r < c.rows(); ++r) {
      std::vector<double> row(static_cast<std::size_t>(c.cols()));
      for (Eigen::Index k = 0; k < c.cols(); ++k) row[static_cast<std::size_t>(k)] = c(r, k);
      rows.push_back(row);
    }
    covs.push_back(rows);
  }
  j["covariances"] = covs;
  j["seed"] = model.seed;
  j["iterations"] = model.iterations;
  j["converged"] = model.converged;
  j["log_likelihood"] = model.log_likelihood;
  return j;
}

void write_assignments_csv(std::ostream& out, const DifficultyAssignment& assignment) {
  out << "instance_id,cluster_id,difficulty,max_responsibility\n";
  for (std::size_t i = 0; i < assignment.size(); ++i) {
    out << csv_escape(assignment.ids[i]) << ',' << assignment.cluster[i] << ','
        << to_string(assignment.difficulty[i]) << ','
        << format_double(assignment.max_responsibility[i]) << '\n';
  }
}

DifficultyAssignment read_assignments_csv(std::istream& in) {
  std::string line;
  std::size_t lineno = 0;
  auto fail = [&](const std::string& msg) {
    throw InputError("assignments CSV line " + std::to_string(lineno) + ": " + msg);
  };
  if (!std::getline(in, line)) throw InputError("assignments CSV is empty");
  ++lineno;
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "instance_id,cluster_id,difficulty,max_responsibility") fail("unexpected header");

  struct Row {
    std::string id;
    std::size_t cluster;
    Difficulty difficulty;
    double resp;
  };
  std::vector<Row> rows;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> f;
    try {
      f = split_csv_line(line);
    } catch (const std::exception&) {
      fail("malformed CSV");
    }
    if (f.size() != 4) fail("expected 4 fields");
    Row r;
    r.id = f[0];
    auto [p, ec] = std::from_chars(f[1].data(), f[1].data() + f[1].size(), r.cluster);
    if (ec != std::errc() || p != f[1].data() + f[1].size()) fail("bad cluster_id '" + f[1] + "'");
    auto d = parse_difficulty(f[2]);
    if (!d) fail("bad difficulty '" + f[2] + "'");
    r.difficulty = *d;
    try {
      std::size_t used = 0;
      r.resp = std::stod(f[3], &used);
      if (used != f[3].size()) fail("bad max_responsibility '" + f[3] + "'");
    } catch (const std::logic_error&) {
      fail("bad max_responsibility '" + f[3] + "'");
    }
    rows.push_back(std::move(r));
  }
  std::sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) { return a.id < b.id; });
  DifficultyAssignment out;
  for (auto& r : rows) {
    if (!out.ids.empty() && out.ids.back() == r.id) {
      throw InputError("assignments CSV lists instance '" + r.id + "' twice");
    }
    out.ids.push_back(std::move(r.id));
    out.cluster.push_back(r.cluster);
    out.difficulty.push_back(r.difficulty);
    out.max_responsibility.push_back(r.resp);
  }
  return out;
}

}  // namespace dyncart
