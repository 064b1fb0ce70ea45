#pragma once

// Constructed datasets shared by module tests and the acceptance suite.

#include <array>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "dyncart/characterize.hpp"
#include "dyncart/dynamics_log.hpp"
#include "dyncart/heuristics.hpp"
#include "test_support.hpp"

namespace dyncart::testing {

// ---- per-cell heuristic profiles for the significance machinery ----

struct ProfileFixture {
  LabelSpace labels;
  std::vector<InstanceMeta> instances;
  std::vector<HeuristicProfile> profiles;
  DifficultyAssignment assignment;
};

struct Shift {
  Difficulty difficulty;
  std::size_t class_index;
  Heuristic measure;
  double sigmas;
};

// 3 classes x 3 difficulties, per_cell instances each. Continuous measures
// are N(0.5, sd); the negation flag is Bernoulli(0.3). An optional shift
// moves one cell's measure by `sigmas` standard deviations.
inline ProfileFixture profile_fixture(std::uint64_t seed, std::size_t per_cell,
                                      std::optional<Shift> shift = std::nullopt) {
  constexpr double sd = 0.05;
  std::mt19937_64 gen(seed);
  ProfileFixture f{LabelSpace({"entailment", "neutral", "contradiction"}), {}, {}, {}};
  std::vector<std::pair<std::string, Difficulty>> rows;
  std::size_t next = 0;
  for (auto d : kAllDifficulties) {
    for (std::size_t c = 0; c < 3; ++c) {
      for (std::size_t i = 0; i < per_cell; ++i) {
        const auto id = instance_id(next++);
        f.instances.push_back({id, "p", "h", f.labels.name(c), std::nullopt});
        rows.emplace_back(id, d);
        HeuristicProfile p;
        p.instance_id = id;
        p.word_overlap = gaussian(gen, 0.5, sd);
        p.antonym_score = gaussian(gen, 0.5, sd);
        p.length_mismatch = gaussian(gen, 0.5, sd);
        p.misspelled_ratio = gaussian(gen, 0.5, sd);
        p.contains_negation = unit(gen) < 0.3;
        if (shift && shift->difficulty == d && shift->class_index == c) {
          const double delta = shift->sigmas * sd;
          switch (shift->measure) {
            case Heuristic::word_overlap: p.word_overlap += delta; break;
            case Heuristic::antonym_score: p.antonym_score += delta; break;
            case Heuristic::length_mismatch: p.length_mismatch += delta; break;
            case Heuristic::misspelled_ratio: p.misspelled_ratio += delta; break;
            case Heuristic::contains_negation: p.contains_negation = true; break;
          }
        }
        f.profiles.push_back(p);
      }
    }
  }
  f.assignment = make_assignment(std::move(rows));
  return f;
}

// ---- dynamics log with three constructed behaviour groups ----
//
// easy:      gold probability 0.95 +- 0.035 uniform (std ~0.02) in both settings.
// ambiguous: gold probability alternating 0.25 / 0.75 (mean 0.5, std 0.25).
// hard:      gold probability ~0.1 and a wrong class always on top.
// Each group cycles through the classes for its gold label; reference
// predictions are correct on a fixed pattern so accuracies are known.

enum class Group { easy, ambiguous, hard };

struct GroupedLog {
  DynamicsLog log;
  std::vector<Group> group;  // per instance, in log order
};

inline std::vector<double> logits_for(double gold_prob, std::size_t gold, std::size_t classes,
                                      std::size_t top_wrong, double jitter) {
  // gold gets log(p), the others share the rest. A hard instance puts most of
  // the remaining mass on `top_wrong` so it is the argmax.
  std::vector<double> prob(classes, 0.0);
  prob[gold] = gold_prob;
  const double rest = 1.0 - gold_prob;
  if (top_wrong < classes) {
    const double others = static_cast<double>(classes - 2);
    prob[top_wrong] = others > 0 ? rest * 0.8 : rest;
    for (std::size_t c = 0; c < classes; ++c) {
      if (c != gold && c != top_wrong) prob[c] = rest * 0.2 / others;
    }
  } else {
    for (std::size_t c = 0; c < classes; ++c) {
      if (c != gold) prob[c] = rest / static_cast<double>(classes - 1);
    }
  }
  std::vector<double> z(classes);
  for (std::size_t c = 0; c < classes; ++c) z[c] = std::log(prob[c]) + jitter;
  return z;
}

inline GroupedLog grouped_log(std::size_t n_easy, std::size_t n_ambiguous, std::size_t n_hard,
                              int epochs, std::uint64_t seed) {
  const std::vector<std::string> names{"entailment", "neutral", "contradiction"};
  std::mt19937_64 gen(seed);
  std::vector<InstanceMeta> instances;
  std::vector<EpochLogits> records;
  std::vector<std::pair<std::string, Group>> ids;
  std::size_t next = 0;
  auto add = [&](Group g, std::size_t count) {
    for (std::size_t i = 0; i < count; ++i) {
      const std::size_t gold = i % 3;
      InstanceMeta m;
      m.id = instance_id(next++);
      m.premise = "premise " + m.id;
      m.hypothesis = "hypothesis " + m.id;
      m.gold = names[gold];
      // Correct on every instance except each fourth one.
      m.reference_prediction = (i % 4 == 3) ? names[(gold + 1) % 3] : names[gold];
      instances.push_back(m);
      ids.emplace_back(m.id, g);
      for (auto s : kAllSettings) {
        for (int e = 1; e <= epochs; ++e) {
          double p = 0.0;
          std::size_t top_wrong = 3;
          switch (g) {
            case Group::easy: p = 0.95 + uniform(gen, -0.035, 0.035); break;
            case Group::ambiguous: p = (e % 2 == 1 ? 0.25 : 0.75) + uniform(gen, -0.02, 0.02); break;
            case Group::hard:
              p = 0.1 + uniform(gen, -0.02, 0.02);
              top_wrong = (gold + 1) % 3;
              break;
          }
          const double jitter = uniform(gen, -1.0, 1.0);  // softmax ignores it
          records.push_back({m.id, s, e, logits_for(p, gold, 3, top_wrong, jitter)});
        }
      }
    }
  };
  add(Group::easy, n_easy);
  add(Group::ambiguous, n_ambiguous);
  add(Group::hard, n_hard);

  GroupedLog out{DynamicsLog::assemble(LabelSpace(names), {{Setting::ph, epochs}, {Setting::h, epochs}},
                                       instances, records),
                 {}};
  std::sort(ids.begin(), ids.end());
  for (const auto& [id, g] : ids) out.group.push_back(g);
  return out;
}

}  // namespace dyncart::testing
