#include <doctest.h>

#include <set>

#include "visemeforge/phonetics.hpp"

using namespace vf;
using namespace vf::phonetics;

TEST_CASE("goodbye phonemizes to the dictionary sequence") {
  const auto& ph = Phonetics::bundled();
  const PhonemeSeq seq = ph.text_to_phonemes("goodbye", Language::english);
  CHECK(seq == PhonemeSeq{"G", "UH", "D", "B", "AY"});
}

TEST_CASE("hindi phrase phonemizes to the nine-phoneme sequence") {
  const auto& ph = Phonetics::bundled();
  const PhonemeSeq seq = ph.text_to_phonemes("aap kaisey hain", Language::hindi);
  CHECK(seq == PhonemeSeq{"AA", "P", "K", "AY", "Z", "IY", "HH", "IY", "N"});
}

TEST_CASE("empty input yields an empty sequence") {
  const auto& ph = Phonetics::bundled();
  CHECK(ph.text_to_phonemes("", Language::english).empty());
  CHECK(ph.text_to_phonemes("   ", Language::english).empty());
}

TEST_CASE("unknown english word raises naming the word") {
  const auto& ph = Phonetics::bundled();
  try {
    ph.text_to_phonemes("hello zyzzyva", Language::english);
    FAIL("expected UnknownWordError");
  } catch (const UnknownWordError& e) {
    CHECK(e.word() == "ZYZZYVA");
  }
}

TEST_CASE("lookup is case-insensitive and punctuation-blind") {
  const auto& ph = Phonetics::bundled();
  CHECK(ph.text_to_phonemes("GoodBye!", Language::english) ==
        ph.text_to_phonemes("goodbye", Language::english));
  CHECK(ph.text_to_phonemes("excuse me.", Language::english) ==
        ph.text_to_phonemes("EXCUSE ME", Language::english));
}

TEST_CASE("stress digits normalize away") {
  CHECK(normalize_phoneme("AA1") == "AA");
  CHECK(normalize_phoneme("AA0") == "AA");
  CHECK(normalize_phoneme("aa2") == "AA");
  const Lexicon lex = Lexicon::parse("TEST  AA1 B IY0\n");
  CHECK(*lex.find("test") == PhonemeSeq{"AA", "B", "IY"});
}

TEST_CASE("jeffers map is total over the bundled inventory") {
  const auto& ph = Phonetics::bundled();
  const JeffersMap& map = ph.map();
  CHECK(map.phoneme_count() == 40);  // 39 ARPAbet phonemes + SIL
  for (const Phoneme& p : ph.inventory()) CHECK_NOTHROW(map.at(p));
  CHECK(map.at("SIL").id == kSilenceVisemeId);
}

TEST_CASE("lips-together phonemes share one viseme") {
  const auto& ph = Phonetics::bundled();
  const auto visemes = phonemes_to_visemes({"B", "P", "M"}, ph.map());
  REQUIRE(visemes.size() == 3);
  CHECK(visemes[0] == visemes[1]);
  CHECK(visemes[1] == visemes[2]);
}

TEST_CASE("phonemes_to_visemes preserves length and maps elementwise") {
  const auto& ph = Phonetics::bundled();
  CHECK(phonemes_to_visemes({}, ph.map()).empty());
  const auto seq = ph.text_to_phonemes("goodbye", Language::english);
  const auto visemes = phonemes_to_visemes(seq, ph.map());
  CHECK(visemes.size() == 5);
  for (std::size_t i = 0; i < seq.size(); ++i) CHECK(visemes[i] == ph.map().at(seq[i]));
}

TEST_CASE("unmapped phoneme raises") {
  const auto& ph = Phonetics::bundled();
  CHECK_THROWS_AS(phonemes_to_visemes({"QX"}, ph.map()), UnmappedPhonemeError);
}

TEST_CASE("bundled hindi phrases stay within the map domain") {
  const auto& ph = Phonetics::bundled();
  for (const char* phrase : {"aap kaisey hain", "kyaa chal rahaa hai", "shubh raatri"}) {
    const PhonemeSeq seq = ph.text_to_phonemes(phrase, Language::hindi);
    CHECK(!seq.empty());
    for (const Phoneme& p : seq) CHECK(ph.map().contains(p));
  }
}

TEST_CASE("hindi transliteration fallback handles unknown words") {
  const auto& ph = Phonetics::bundled();
  const PhonemeSeq seq = ph.text_to_phonemes("namaskar", Language::hindi);
  CHECK(!seq.empty());
  for (const Phoneme& p : seq) CHECK(ph.map().contains(p));
}

TEST_CASE("composition text->phonemes->visemes is deterministic") {
  const auto& ph = Phonetics::bundled();
  const auto a = phonemes_to_visemes(ph.text_to_phonemes("see you", Language::english), ph.map());
  const auto b = phonemes_to_visemes(ph.text_to_phonemes("see you", Language::english), ph.map());
  CHECK(a == b);
}

TEST_CASE("viseme inventory has 12 groups") {
  const auto& ph = Phonetics::bundled();
  const auto inv = ph.map().viseme_inventory();
  CHECK(inv.size() == 12);
  std::set<int> ids;
  for (const auto& v : inv) ids.insert(v.id);
  for (int i = 0; i < 12; ++i) CHECK(ids.count(i));
}
