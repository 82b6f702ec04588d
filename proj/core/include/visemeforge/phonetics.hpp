#pragma once

#include <map>
#include <string>
#include <vector>

#include "visemeforge/errors.hpp"

namespace vf::phonetics {

enum class Language { english, hindi };

std::string to_string(Language lang);
Language language_from_string(const std::string& s);

// Normalized ARPAbet symbol: uppercase, stress digits stripped.
using Phoneme = std::string;
using PhonemeSeq = std::vector<Phoneme>;

Phoneme normalize_phoneme(const std::string& raw);

struct VisemeId {
  int id = -1;
  std::string name;

  bool operator==(const VisemeId& o) const { return id == o.id; }
  bool operator!=(const VisemeId& o) const { return id != o.id; }
  bool operator<(const VisemeId& o) const { return id < o.id; }
};

// Descriptive name for the bundled viseme group ids; "viseme_<id>" otherwise.
std::string viseme_name(int id);

constexpr int kSilenceVisemeId = 0;

// Word -> pronunciation table in CMU dictionary text format:
// one entry per line, `WORD  PH1 PH2 ...`, ';' comments. Lookup is
// case-insensitive and ignores surrounding punctuation.
class Lexicon {
 public:
  static Lexicon parse(const std::string& text);
  static Lexicon load_file(const std::string& path);

  void add(const std::string& word, PhonemeSeq pron);
  const PhonemeSeq* find(const std::string& word) const;
  std::size_t size() const { return entries_.size(); }

 private:
  std::map<std::string, PhonemeSeq> entries_;
};

// Total phoneme -> viseme function, loaded from a two-column data file.
class JeffersMap {
 public:
  static JeffersMap parse(const std::string& text);
  static JeffersMap load_file(const std::string& path);

  VisemeId at(const Phoneme& p) const;  // throws UnmappedPhonemeError
  bool contains(const Phoneme& p) const;
  std::size_t phoneme_count() const { return mapping_.size(); }
  // Phonemes in file order; doubles as the bundled phoneme inventory.
  const std::vector<Phoneme>& phonemes() const { return order_; }
  std::vector<VisemeId> viseme_inventory() const;  // distinct ids, ascending

 private:
  std::map<Phoneme, int> mapping_;
  std::vector<Phoneme> order_;
};

// Lexicons plus viseme map; the handle the rest of the library works with.
class Phonetics {
 public:
  Phonetics(Lexicon english, Lexicon hindi, JeffersMap map);

  // Bundled data (embedded copies of core/data/*); asserts map totality over
  // every lexicon pronunciation at load.
  static const Phonetics& bundled();

  PhonemeSeq text_to_phonemes(const std::string& text, Language lang) const;
  // Same lookup but keeps word boundaries (for silence insertion downstream).
  std::vector<PhonemeSeq> words_to_phonemes(const std::string& text, Language lang) const;

  const JeffersMap& map() const { return map_; }
  const std::vector<Phoneme>& inventory() const { return map_.phonemes(); }
  // Index of a phoneme within the inventory; drives the tone synthesizer.
  long phoneme_index(const Phoneme& p) const;

 private:
  PhonemeSeq lookup_word(const std::string& word, Language lang) const;

  Lexicon english_;
  Lexicon hindi_;
  JeffersMap map_;
  std::map<Phoneme, long> index_;
};

std::vector<VisemeId> phonemes_to_visemes(const PhonemeSeq& seq, const JeffersMap& map);

// Splits on whitespace, strips punctuation, uppercases. Empty tokens vanish.
std::vector<std::string> normalize_words(const std::string& text);

// Rule-based romanized-Hindi transliteration used when a word is not in the
// Hindi lexicon. Greedy digraph-first mapping; never fails on A-Z input.
PhonemeSeq transliterate_hindi(const std::string& word);

}  // namespace vf::phonetics
