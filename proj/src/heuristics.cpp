#include "dyncart/heuristics.hpp"

#include <algorithm>
#include <fstream>
#include <istream>
#include <locale>
#include <optional>
#include <ostream>

#include "dyncart/error.hpp"
#include "dyncart/io.hpp"

namespace dyncart {

namespace {

constexpr char32_t kReplacement = 0xFFFD;

std::u32string decode_utf8(std::string_view s) {
  std::u32string out;
  out.reserve(s.size());
  std::size_t i = 0;
  while (i < s.size()) {
    const auto b0 = static_cast<unsigned char>(s[i]);
    std::size_t len = 0;
    char32_t cp = 0;
    if (b0 < 0x80) {
      len = 1;
      cp = b0;
    } else if ((b0 & 0xE0) == 0xC0) {
      len = 2;
      cp = b0 & 0x1F;
    } else if ((b0 & 0xF0) == 0xE0) {
      len = 3;
      cp = b0 & 0x0F;
    } else if ((b0 & 0xF8) == 0xF0) {
      len = 4;
      cp = b0 & 0x07;
    }
    bool ok = len > 0 && i + len <= s.size();
    for (std::size_t k = 1; ok && k < len; ++k) {
      const auto b = static_cast<unsigned char>(s[i + k]);
      if ((b & 0xC0) != 0x80) ok = false;
      cp = (cp << 6) | (b & 0x3F);
    }
    if (!ok) {
      out.push_back(kReplacement);
      ++i;
      continue;
    }
    out.push_back(cp);
    i += len;
  }
  return out;
}

void append_utf8(std::string& out, char32_t cp) {
  if (cp < 0x80) {
    out += static_cast<char>(cp);
  } else if (cp < 0x800) {
    out += static_cast<char>(0xC0 | (cp >> 6));
    out += static_cast<char>(0x80 | (cp & 0x3F));
  } else if (cp < 0x10000) {
    out += static_cast<char>(0xE0 | (cp >> 12));
    out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
    out += static_cast<char>(0x80 | (cp & 0x3F));
  } else {
    out += static_cast<char>(0xF0 | (cp >> 18));
    out += static_cast<char>(0x80 | ((cp >> 12) & 0x3F));
    out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
    out += static_cast<char>(0x80 | (cp & 0x3F));
  }
}

// Unicode classification for code points above ASCII comes from the
// C.UTF-8 locale when the platform provides it. Without it, non-ASCII code
// points count as letters and keep their case.
class CharClass {
 public:
  static const CharClass& instance() {
    static const CharClass c;
    return c;
  }

  bool is_alnum(char32_t cp) const {
    if (cp < 0x80) return (cp >= 'a' && cp <= 'z') || (cp >= 'A' && cp <= 'Z') || is_digit(cp);
    if (cp == kReplacement) return false;
    if (!facet_) return true;
    return facet_->is(std::ctype_base::alnum, static_cast<wchar_t>(cp));
  }

  bool is_digit(char32_t cp) const {
    if (cp < 0x80) return cp >= '0' && cp <= '9';
    if (!facet_) return false;
    return facet_->is(std::ctype_base::digit, static_cast<wchar_t>(cp));
  }

  char32_t lower(char32_t cp) const {
    if (cp < 0x80) return (cp >= 'A' && cp <= 'Z') ? cp + ('a' - 'A') : cp;
    if (!facet_) return cp;
    return static_cast<char32_t>(facet_->tolower(static_cast<wchar_t>(cp)));
  }

 private:
  CharClass() {
    try {
      locale_ = std::locale("C.UTF-8");
      facet_ = &std::use_facet<std::ctype<wchar_t>>(*locale_);
    } catch (const std::runtime_error&) {
      facet_ = nullptr;
    }
  }

  std::optional<std::locale> locale_;
  const std::ctype<wchar_t>* facet_ = nullptr;
};

bool is_apostrophe(char32_t cp) { return cp == U'\'' || cp == 0x2019; }

std::string lowercase_word(std::string_view s) {
  const auto& cc = CharClass::instance();
  std::string out;
  for (char32_t cp : decode_utf8(s)) append_utf8(out, cc.lower(cp));
  return out;
}

std::string_view trim(std::string_view s) {
  const auto ws = " \t\r\n\v\f";
  const auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(ws);
  return s.substr(b, e - b + 1);
}

WordSet types_of(const std::vector<std::string>& tokens) {
  return WordSet(tokens.begin(), tokens.end());
}

bool has_digit(std::string_view token) {
  const auto& cc = CharClass::instance();
  for (char32_t cp : decode_utf8(token)) {
    if (cc.is_digit(cp)) return true;
  }
  return false;
}

void require_hypothesis(const TokenizedPair& pair, const char* what) {
  if (pair.hypothesis.empty()) throw InputError(std::string(what) + ": hypothesis has no tokens");
}

void require_tokens(const TokenizedPair& pair, const char* what) {
  if (pair.premise.empty() && pair.hypothesis.empty()) {
    throw InputError(std::string(what) + ": premise and hypothesis are both empty");
  }
}

}  // namespace

std::vector<std::string> tokenize(std::string_view text) {
  const auto& cc = CharClass::instance();
  const std::u32string cps = decode_utf8(text);
  std::vector<std::string> tokens;
  std::u32string current;
  auto flush = [&] {
    if (current.empty()) return;
    std::string t;
    for (char32_t cp : current) append_utf8(t, cp);
    tokens.push_back(std::move(t));
    current.clear();
  };
  for (std::size_t i = 0; i < cps.size(); ++i) {
    const char32_t c = cps[i];
    if (cc.is_alnum(c)) {
      current.push_back(cc.lower(c));
      continue;
    }
    const bool contraction = is_apostrophe(c) && !current.empty() && current.back() == U'n' &&
                             i + 1 < cps.size() && cc.lower(cps[i + 1]) == U't' &&
                             (i + 2 == cps.size() || !cc.is_alnum(cps[i + 2]));
    if (contraction) {
      current.pop_back();
      flush();
      tokens.emplace_back("not");
      ++i;
      continue;
    }
    flush();
  }
  flush();
  return tokens;
}

TokenizedPair TokenizedPair::from_text(std::string_view premise, std::string_view hypothesis) {
  return {tokenize(premise), tokenize(hypothesis)};
}

WordSet LexiconSet::default_negations() { return {"no", "not", "never", "none"}; }

AntonymMap load_antonyms(std::istream& in, bool symmetrize) {
  AntonymMap map;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    const auto tab = t.find('\t');
    if (tab == std::string_view::npos) {
      throw InputError("antonym lexicon line " + std::to_string(lineno) +
                       ": expected word<TAB>antonym");
    }
    const auto a = lowercase_word(trim(t.substr(0, tab)));
    const auto b = lowercase_word(trim(t.substr(tab + 1)));
    if (a.empty() || b.empty()) {
      throw InputError("antonym lexicon line " + std::to_string(lineno) + ": empty word");
    }
    map[a].insert(b);
    if (symmetrize) map[b].insert(a);
  }
  return map;
}

AntonymMap load_antonyms_file(const std::filesystem::path& path, bool symmetrize) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open antonym lexicon '" + path.string() + "'");
  return load_antonyms(in, symmetrize);
}

WordSet load_word_list(std::istream& in) {
  WordSet words;
  std::string line;
  while (std::getline(in, line)) {
    const auto t = trim(line);
    if (!t.empty()) words.insert(lowercase_word(t));
  }
  return words;
}

WordSet load_word_list_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open word list '" + path.string() + "'");
  return load_word_list(in);
}

std::vector<std::string> lexicon_warnings(const LexiconSet& lexicons) {
  std::vector<std::string> out;
  if (lexicons.dictionary.empty()) {
    out.emplace_back("dictionary is empty; every alphabetic token counts as misspelled");
  }
  if (lexicons.antonyms.empty()) {
    out.emplace_back("antonym lexicon is empty; antonym scores are all 0");
  }
  if (lexicons.negations.empty()) {
    out.emplace_back("negation list is empty; contains_negation is always false");
  }
  return out;
}

double word_overlap(const TokenizedPair& pair) {
  require_hypothesis(pair, "word_overlap");
  const auto premise = types_of(pair.premise);
  const auto hypothesis = types_of(pair.hypothesis);
  std::size_t shared = 0;
  for (const auto& w : hypothesis) shared += premise.contains(w) ? 1 : 0;
  return static_cast<double>(shared) / static_cast<double>(hypothesis.size());
}

double antonym_score(const TokenizedPair& pair, const AntonymMap& antonyms) {
  require_hypothesis(pair, "antonym_score");
  const auto hypothesis = types_of(pair.hypothesis);
  std::size_t count = 0;
  for (const auto& token : pair.premise) {
    auto it = antonyms.find(token);
    if (it == antonyms.end()) continue;
    for (const auto& ant : it->second) count += hypothesis.contains(ant) ? 1 : 0;
  }
  return static_cast<double>(count) / static_cast<double>(hypothesis.size());
}

double length_mismatch(const TokenizedPair& pair) {
  require_tokens(pair, "length_mismatch");
  const auto p = static_cast<double>(pair.premise.size());
  const auto h = static_cast<double>(pair.hypothesis.size());
  return (p - h) / (p + h);
}

double misspelled_ratio(const TokenizedPair& pair, const WordSet& dictionary) {
  require_tokens(pair, "misspelled_ratio");
  std::size_t missing = 0;
  for (const auto* side : {&pair.premise, &pair.hypothesis}) {
    for (const auto& t : *side) {
      if (!has_digit(t) && !dictionary.contains(t)) ++missing;
    }
  }
  return static_cast<double>(missing) /
         static_cast<double>(pair.premise.size() + pair.hypothesis.size());
}

bool contains_negation(const TokenizedPair& pair, const WordSet& negations) {
  auto hit = [&](const std::string& t) { return negations.contains(t); };
  return std::any_of(pair.premise.begin(), pair.premise.end(), hit) ||
         std::any_of(pair.hypothesis.begin(), pair.hypothesis.end(), hit);
}

std::string_view to_string(Heuristic h) {
  switch (h) {
    case Heuristic::word_overlap: return "word_overlap";
    case Heuristic::antonym_score: return "antonym_score";
    case Heuristic::length_mismatch: return "length_mismatch";
    case Heuristic::misspelled_ratio: return "misspelled_ratio";
    case Heuristic::contains_negation: return "contains_negation";
  }
  return "?";
}

double HeuristicProfile::value(Heuristic h) const {
  switch (h) {
    case Heuristic::word_overlap: return word_overlap;
    case Heuristic::antonym_score: return antonym_score;
    case Heuristic::length_mismatch: return length_mismatch;
    case Heuristic::misspelled_ratio: return misspelled_ratio;
    case Heuristic::contains_negation: return contains_negation ? 1.0 : 0.0;
  }
  return 0.0;
}

HeuristicProfile profile_pair(const TokenizedPair& pair, const LexiconSet& lexicons) {
  HeuristicProfile p;
  p.word_overlap = word_overlap(pair);
  p.antonym_score = antonym_score(pair, lexicons.antonyms);
  p.length_mismatch = length_mismatch(pair);
  p.misspelled_ratio = misspelled_ratio(pair, lexicons.dictionary);
  p.contains_negation = contains_negation(pair, lexicons.negations);
  return p;
}

std::vector<HeuristicProfile> profile_dataset(std::span<const InstanceMeta> instances,
                                              const LexiconSet& lexicons) {
  std::vector<HeuristicProfile> out;
  out.reserve(instances.size());
  for (const auto& m : instances) {
    try {
      auto p = profile_pair(TokenizedPair::from_text(m.premise, m.hypothesis), lexicons);
      p.instance_id = m.id;
      out.push_back(std::move(p));
    } catch (const InputError& e) {
      throw InputError("instance '" + m.id + "': " + e.what());
    }
  }
  return out;
}

void write_profiles_csv(std::ostream& out, std::span<const HeuristicProfile> profiles) {
  out << "instance_id";
  for (auto h : kAllHeuristics) out << ',' << to_string(h);
  out << '\n';
  for (const auto& p : profiles) {
    out << csv_escape(p.instance_id) << ',' << format_double(p.word_overlap) << ','
        << format_double(p.antonym_score) << ',' << format_double(p.length_mismatch) << ','
        << format_double(p.misspelled_ratio) << ',' << (p.contains_negation ? 1 : 0) << '\n';
  }
}

}  // namespace dyncart
