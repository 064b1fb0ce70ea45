#pragma once

// Lexical measures of spurious premise/hypothesis correlation.
//
// Normalization choices: overlap and antonym scores divide by the number of
// hypothesis types; the misspelling ratio divides by the total token count;
// length mismatch is (|P| - |H|) / (|P| + |H|), keeping the sign.

#include <array>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dyncart/dynamics_log.hpp"

namespace dyncart {

// Lowercases, splits on non-alphanumeric code points, and rewrites the
// contraction suffix n't (ASCII or U+2019 apostrophe) into a separate "not".
std::vector<std::string> tokenize(std::string_view text);

struct TokenizedPair {
  std::vector<std::string> premise;
  std::vector<std::string> hypothesis;

  static TokenizedPair from_text(std::string_view premise, std::string_view hypothesis);
};

using WordSet = std::set<std::string, std::less<>>;
using AntonymMap = std::map<std::string, WordSet, std::less<>>;

struct LexiconSet {
  AntonymMap antonyms;
  WordSet dictionary;
  WordSet negations = default_negations();

  static WordSet default_negations();
};

// word<TAB>antonym per line. Blank lines and lines starting with '#' are
// skipped. With symmetrize, b->a is added for every a->b.
AntonymMap load_antonyms(std::istream& in, bool symmetrize = true);
AntonymMap load_antonyms_file(const std::filesystem::path& path, bool symmetrize = true);
// One word per line, lowercased and trimmed.
WordSet load_word_list(std::istream& in);
WordSet load_word_list_file(const std::filesystem::path& path);

// Non-fatal lexicon problems (e.g. an empty dictionary).
std::vector<std::string> lexicon_warnings(const LexiconSet& lexicons);

double word_overlap(const TokenizedPair& pair);
double antonym_score(const TokenizedPair& pair, const AntonymMap& antonyms);
double length_mismatch(const TokenizedPair& pair);
double misspelled_ratio(const TokenizedPair& pair, const WordSet& dictionary);
bool contains_negation(const TokenizedPair& pair, const WordSet& negations);

enum class Heuristic { word_overlap, antonym_score, length_mismatch, misspelled_ratio, contains_negation };

inline constexpr std::array<Heuristic, 5> kAllHeuristics{
    Heuristic::word_overlap, Heuristic::antonym_score, Heuristic::length_mismatch,
    Heuristic::misspelled_ratio, Heuristic::contains_negation};

std::string_view to_string(Heuristic h);

struct HeuristicProfile {
  std::string instance_id;
  double word_overlap = 0.0;
  double antonym_score = 0.0;
  double length_mismatch = 0.0;
  double misspelled_ratio = 0.0;
  bool contains_negation = false;

  // Booleans come back as 0/1.
  double value(Heuristic h) const;
};

HeuristicProfile profile_pair(const TokenizedPair& pair, const LexiconSet& lexicons);

// One profile per instance, in input order. Errors carry the instance id.
std::vector<HeuristicProfile> profile_dataset(std::span<const InstanceMeta> instances,
                                              const LexiconSet& lexicons);

void write_profiles_csv(std::ostream& out, std::span<const HeuristicProfile> profiles);

}  // namespace dyncart
