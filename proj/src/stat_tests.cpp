#include "dyncart/stat_tests.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <ostream>
#include <unordered_map>

#include "dyncart/error.hpp"
#include "dyncart/io.hpp"

namespace dyncart {

UTestResult mann_whitney_u(std::span<const double> a, std::span<const double> b) {
  if (a.empty() || b.empty()) throw InputError("Mann-Whitney U needs two non-empty samples");
  for (auto s : {a, b}) {
    for (double v : s) {
      if (!std::isfinite(v)) throw InputError("Mann-Whitney U sample contains a non-finite value");
    }
  }

  const std::size_t n1 = a.size();
  const std::size_t n2 = b.size();
  const std::size_t n = n1 + n2;
  std::vector<std::pair<double, bool>> pooled;  // value, belongs to a
  pooled.reserve(n);
  for (double v : a) pooled.emplace_back(v, true);
  for (double v : b) pooled.emplace_back(v, false);
  std::sort(pooled.begin(), pooled.end(),
            [](const auto& x, const auto& y) { return x.first < y.first; });

  double rank_sum_a = 0.0;
  double tie_term = 0.0;  // sum of t^3 - t over tie groups
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && pooled[j].first == pooled[i].first) ++j;
    const double midrank = 0.5 * static_cast<double>(i + 1 + j);
    const auto t = static_cast<double>(j - i);
    tie_term += t * t * t - t;
    for (std::size_t k = i; k < j; ++k) {
      if (pooled[k].second) rank_sum_a += midrank;
    }
    i = j;
  }

  const double dn1 = static_cast<double>(n1);
  const double dn2 = static_cast<double>(n2);
  const double dn = static_cast<double>(n);
  const double u_a = rank_sum_a - dn1 * (dn1 + 1.0) / 2.0;
  const double u_b = dn1 * dn2 - u_a;

  UTestResult r;
  r.n1 = n1;
  r.n2 = n2;
  r.u = std::min(u_a, u_b);
  r.tie_correction_applied = tie_term > 0.0;

  const double mean = dn1 * dn2 / 2.0;
  const double variance = dn1 * dn2 / 12.0 * ((dn + 1.0) - tie_term / (dn * (dn - 1.0)));
  if (!(variance > 0.0)) {
    r.zero_variance = true;
    r.p_value = 1.0;
    return r;
  }
  const double z = std::max(0.0, std::abs(u_a - mean) - 0.5) / std::sqrt(variance);
  r.p_value = std::min(1.0, std::erfc(z / std::sqrt(2.0)));
  return r;
}

double bonferroni(double p, std::size_t m) {
  if (m < 1) throw InputError("Bonferroni family size must be >= 1");
  if (!(p >= 0.0 && p <= 1.0)) throw InputError("p-value must lie in [0, 1]");
  return std::min(1.0, p * static_cast<double>(m));
}

Significance significance_code(double p) {
  if (p <= 0.001) return Significance::p001;
  if (p <= 0.01) return Significance::p01;
  if (p <= 0.05) return Significance::p05;
  return Significance::ns;
}

std::string_view to_string(Significance s) {
  switch (s) {
    case Significance::ns: return "ns";
    case Significance::p05: return "*";
    case Significance::p01: return "**";
    case Significance::p001: return "***";
  }
  return "?";
}

SignificanceReport compare_splits(std::span<const HeuristicProfile> profiles,
                                  const DifficultyAssignment& assignment,
                                  std::span<const InstanceMeta> instances, const LabelSpace& labels) {
  std::unordered_map<std::string_view, std::size_t> gold_of;
  for (const auto& m : instances) {
    auto g = labels.index_of(m.gold);
    if (!g) throw InputError("instance '" + m.id + "' has unknown gold label '" + m.gold + "'");
    gold_of.emplace(m.id, *g);
  }
  if (profiles.size() != instances.size() || assignment.size() != instances.size()) {
    throw InputError("profiles, assignment and instances cover different instance sets");
  }

  // [difficulty][class] -> profile indices
  std::vector<std::vector<std::vector<std::size_t>>> groups(
      kAllDifficulties.size(), std::vector<std::vector<std::size_t>>(labels.size()));
  std::vector<bool> present(labels.size(), false);
  for (std::size_t i = 0; i < profiles.size(); ++i) {
    const auto& id = profiles[i].instance_id;
    auto g = gold_of.find(id);
    auto a = assignment.find(id);
    if (g == gold_of.end() || !a) {
      throw InputError("instance '" + id + "' is missing from the assignment or metadata");
    }
    const auto d = static_cast<std::size_t>(assignment.difficulty[*a]);
    groups[d][g->second].push_back(i);
    present[g->second] = true;
  }

  std::vector<std::size_t> classes;
  for (std::size_t c = 0; c < labels.size(); ++c) {
    if (present[c]) classes.push_back(c);
  }

  SignificanceReport report;
  std::vector<double> xa;
  std::vector<double> xb;
  for (auto d : kAllDifficulties) {
    const auto& by_class = groups[static_cast<std::size_t>(d)];
    for (auto h : kAllHeuristics) {
      for (std::size_t i = 0; i < classes.size(); ++i) {
        for (std::size_t j = i + 1; j < classes.size(); ++j) {
          const auto& ga = by_class[classes[i]];
          const auto& gb = by_class[classes[j]];
          if (ga.size() < 2 || gb.size() < 2) {
            report.skipped.push_back({d, h, labels.name(classes[i]), labels.name(classes[j]),
                                      ga.size(), gb.size()});
            continue;
          }
          xa.clear();
          xb.clear();
          for (auto k : ga) xa.push_back(profiles[k].value(h));
          for (auto k : gb) xb.push_back(profiles[k].value(h));
          ComparisonCell cell{d, h, labels.name(classes[i]), labels.name(classes[j]),
                              mann_whitney_u(xa, xb)};
          report.cells.push_back(std::move(cell));
        }
      }
    }
  }

  report.m = report.cells.size();
  for (auto& cell : report.cells) {
    cell.p_adjusted = bonferroni(cell.test.p_value, report.m);
    cell.code = significance_code(cell.p_adjusted);
  }
  return report;
}

void write_significance_csv(std::ostream& out, const SignificanceReport& report) {
  out << "difficulty,measure,class_a,class_b,n_a,n_b,u,p_raw,p_adjusted,code\n";
  for (const auto& c : report.cells) {
    out << to_string(c.difficulty) << ',' << to_string(c.measure) << ',' << csv_escape(c.class_a)
        << ',' << csv_escape(c.class_b) << ',' << c.test.n1 << ',' << c.test.n2 << ','
        << format_double(c.test.u) << ',' << format_double(c.test.p_value) << ','
        << format_double(c.p_adjusted) << ',' << to_string(c.code) << '\n';
  }
}

nlohmann::ordered_json significance_summary(const SignificanceReport& report) {
  nlohmann::ordered_json j;
  j["test"] = "mann-whitney-u, two-sided, normal approximation with tie and continuity correction";
  j["correction"] = "bonferroni";
  j["m"] = report.m;
  std::map<std::string, std::size_t> codes{{"ns", 0}, {"*", 0}, {"**", 0}, {"***", 0}};
  for (const auto& c : report.cells) ++codes[std::string(to_string(c.code))];
  j["code_counts"] = {{"ns", codes["ns"]}, {"*", codes["*"]}, {"**", codes["**"]}, {"***", codes["***"]}};
  auto skipped = nlohmann::ordered_json::array();
  for (const auto& s : report.skipped) {
    skipped.push_back({{"difficulty", to_string(s.difficulty)},
                       {"measure", to_string(s.measure)},
                       {"class_a", s.class_a},
                       {"class_b", s.class_b},
                       {"n_a", s.n_a},
                       {"n_b", s.n_b}});
  }
  j["skipped"] = skipped;
  return j;
}

}  // namespace dyncart
