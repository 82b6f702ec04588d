#include "visemeforge/phonetics.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

namespace vf::data {
extern const char* const kCmudictEn;
extern const char* const kLexiconHi;
extern const char* const kJeffersMap;
}  // namespace vf::data

namespace vf::phonetics {

std::string to_string(Language lang) {
  return lang == Language::english ? "english" : "hindi";
}

Language language_from_string(const std::string& s) {
  if (s == "english" || s == "en") return Language::english;
  if (s == "hindi" || s == "hi") return Language::hindi;
  throw InvalidArgument("unknown language: " + s);
}

Phoneme normalize_phoneme(const std::string& raw) {
  Phoneme p;
  for (char c : raw) {
    if (std::isdigit(static_cast<unsigned char>(c))) continue;  // stress digit
    p.push_back(static_cast<char>(std::toupper(static_cast<unsigned char>(c))));
  }
  return p;
}

std::string viseme_name(int id) {
  static const char* const kNames[] = {
      "silence",       "lip_to_teeth", "lip_rounding", "lips_together",
      "open_jaw",      "tongue_teeth", "lips_forward", "rounded_open",
      "teeth_together", "lips_relaxed", "tongue_gum",   "tongue_back"};
  if (id >= 0 && id < 12) return kNames[id];
  return "viseme_" + std::to_string(id);
}

std::vector<std::string> normalize_words(const std::string& text) {
  std::vector<std::string> words;
  std::string cur;
  auto flush = [&] {
    if (!cur.empty()) {
      words.push_back(cur);
      cur.clear();
    }
  };
  for (char c : text) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      flush();
    } else if (std::isalnum(static_cast<unsigned char>(c)) || c == '\'') {
      cur.push_back(static_cast<char>(std::toupper(static_cast<unsigned char>(c))));
    }
    // other punctuation is dropped
  }
  flush();
  return words;
}

Lexicon Lexicon::parse(const std::string& text) {
  Lexicon lex;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == ';' || line[0] == '#') continue;
    std::istringstream ls(line);
    std::string word;
    if (!(ls >> word)) continue;
    // cmudict alternate pronunciations look like WORD(1); keep the first only.
    const auto paren = word.find('(');
    if (paren != std::string::npos) continue;
    std::transform(word.begin(), word.end(), word.begin(),
                   [](unsigned char c) { return std::toupper(c); });
    PhonemeSeq pron;
    std::string ph;
    while (ls >> ph) pron.push_back(normalize_phoneme(ph));
    if (!pron.empty()) lex.entries_.emplace(word, std::move(pron));
  }
  return lex;
}

Lexicon Lexicon::load_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open lexicon: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

void Lexicon::add(const std::string& word, PhonemeSeq pron) {
  std::string key = word;
  std::transform(key.begin(), key.end(), key.begin(),
                 [](unsigned char c) { return std::toupper(c); });
  entries_[key] = std::move(pron);
}

const PhonemeSeq* Lexicon::find(const std::string& word) const {
  std::string key = word;
  std::transform(key.begin(), key.end(), key.begin(),
                 [](unsigned char c) { return std::toupper(c); });
  auto it = entries_.find(key);
  return it == entries_.end() ? nullptr : &it->second;
}

JeffersMap JeffersMap::parse(const std::string& text) {
  JeffersMap map;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#' || line[0] == ';') continue;
    std::istringstream ls(line);
    std::string ph;
    int id;
    if (!(ls >> ph >> id)) continue;
    const Phoneme key = normalize_phoneme(ph);
    if (!map.mapping_.count(key)) map.order_.push_back(key);
    map.mapping_[key] = id;
  }
  if (map.mapping_.empty()) throw InvalidArgument("viseme map file has no entries");
  return map;
}

JeffersMap JeffersMap::load_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open viseme map: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

VisemeId JeffersMap::at(const Phoneme& p) const {
  auto it = mapping_.find(p);
  if (it == mapping_.end()) throw UnmappedPhonemeError(p);
  return VisemeId{it->second, viseme_name(it->second)};
}

bool JeffersMap::contains(const Phoneme& p) const { return mapping_.count(p) > 0; }

std::vector<VisemeId> JeffersMap::viseme_inventory() const {
  std::vector<int> ids;
  for (const auto& [ph, id] : mapping_) ids.push_back(id);
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  std::vector<VisemeId> out;
  out.reserve(ids.size());
  for (int id : ids) out.push_back(VisemeId{id, viseme_name(id)});
  return out;
}

Phonetics::Phonetics(Lexicon english, Lexicon hindi, JeffersMap map)
    : english_(std::move(english)), hindi_(std::move(hindi)), map_(std::move(map)) {
  long i = 0;
  for (const Phoneme& p : map_.phonemes()) index_[p] = i++;
}

const Phonetics& Phonetics::bundled() {
  static const Phonetics instance = [] {
    Phonetics ph(Lexicon::parse(data::kCmudictEn), Lexicon::parse(data::kLexiconHi),
                 JeffersMap::parse(data::kJeffersMap));
    // Totality over the bundled inventory is a load-time invariant.
    for (const Phoneme& p : ph.map_.phonemes()) ph.map_.at(p);
    return ph;
  }();
  return instance;
}

PhonemeSeq Phonetics::lookup_word(const std::string& word, Language lang) const {
  if (lang == Language::english) {
    if (const PhonemeSeq* pron = english_.find(word)) return *pron;
    throw UnknownWordError(word);
  }
  if (const PhonemeSeq* pron = hindi_.find(word)) return *pron;
  return transliterate_hindi(word);
}

std::vector<PhonemeSeq> Phonetics::words_to_phonemes(const std::string& text,
                                                     Language lang) const {
  std::vector<PhonemeSeq> out;
  for (const std::string& word : normalize_words(text)) out.push_back(lookup_word(word, lang));
  return out;
}

PhonemeSeq Phonetics::text_to_phonemes(const std::string& text, Language lang) const {
  PhonemeSeq seq;
  for (const PhonemeSeq& word : words_to_phonemes(text, lang))
    seq.insert(seq.end(), word.begin(), word.end());
  return seq;
}

long Phonetics::phoneme_index(const Phoneme& p) const {
  auto it = index_.find(p);
  if (it == index_.end()) throw UnmappedPhonemeError(p);
  return it->second;
}

std::vector<VisemeId> phonemes_to_visemes(const PhonemeSeq& seq, const JeffersMap& map) {
  std::vector<VisemeId> out;
  out.reserve(seq.size());
  // Elementwise; consecutive duplicates are kept so clip timing stays
  // proportional to the phoneme count.
  for (const Phoneme& p : seq) out.push_back(map.at(p));
  return out;
}

PhonemeSeq transliterate_hindi(const std::string& word) {
  static const std::vector<std::pair<std::string, std::vector<const char*>>> kDigraphs = {
      {"AA", {"AA"}}, {"EE", {"IY"}}, {"II", {"IY"}}, {"OO", {"UW"}}, {"UU", {"UW"}},
      {"AI", {"AY"}}, {"AU", {"AW"}}, {"EY", {"EY"}}, {"CH", {"CH"}}, {"SH", {"SH"}},
      {"TH", {"TH"}}, {"DH", {"DH"}}, {"BH", {"B"}},  {"GH", {"G"}},  {"JH", {"JH"}},
      {"KH", {"K"}},  {"PH", {"F"}},  {"NG", {"NG"}}};
  static const std::map<char, std::vector<const char*>> kSingles = {
      {'A', {"AH"}}, {'B', {"B"}},  {'C', {"K"}},  {'D', {"D"}},  {'E', {"EH"}},
      {'F', {"F"}},  {'G', {"G"}},  {'H', {"HH"}}, {'I', {"IY"}}, {'J', {"JH"}},
      {'K', {"K"}},  {'L', {"L"}},  {'M', {"M"}},  {'N', {"N"}},  {'O', {"OW"}},
      {'P', {"P"}},  {'Q', {"K"}},  {'R', {"R"}},  {'S', {"S"}},  {'T', {"T"}},
      {'U', {"UH"}}, {'V', {"V"}},  {'W', {"W"}},  {'X', {"K", "S"}}, {'Y', {"Y"}},
      {'Z', {"Z"}}};
  PhonemeSeq out;
  std::size_t i = 0;
  while (i < word.size()) {
    bool matched = false;
    for (const auto& [pattern, phonemes] : kDigraphs) {
      if (word.compare(i, pattern.size(), pattern) == 0) {
        for (const char* p : phonemes) out.emplace_back(p);
        i += pattern.size();
        matched = true;
        break;
      }
    }
    if (matched) continue;
    auto it = kSingles.find(word[i]);
    if (it == kSingles.end()) throw UnknownWordError(word);
    for (const char* p : it->second) out.emplace_back(p);
    ++i;
  }
  return out;
}

}  // namespace vf::phonetics
