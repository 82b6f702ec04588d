#include <doctest.h>

#include <cmath>
#include <numeric>

#include "test_util.hpp"
#include "visemeforge/corpus.hpp"
#include "visemeforge/harness.hpp"

using namespace vf;
using namespace vf::corpus;

namespace {

std::vector<int> iota_ids(int n) {
  std::vector<int> ids(static_cast<std::size_t>(n));
  std::iota(ids.begin(), ids.end(), 0);
  return ids;
}

SyntheticCorpusSpec small_spec() {
  SyntheticCorpusSpec spec;
  spec.n_speakers = 2;
  spec.labels = harness::bundled_phrase_labels();
  spec.poses = {0};
  spec.reps = 1;
  spec.seed = 42;
  return spec;
}

}  // namespace

TEST_CASE("speaker split sizes follow rounded shares") {
  const SplitSpec s =
      make_speaker_splits(iota_ids(52), {35.0 / 52.0, 5.0 / 52.0, 12.0 / 52.0}, 7);
  CHECK(s.train.size() == 35);
  CHECK(s.val.size() == 5);
  CHECK(s.test.size() == 12);
  CHECK(s.disjoint());
  CHECK(s.all_speakers() == iota_ids(52));
}

TEST_CASE("three speakers split one per part") {
  const SplitSpec s = make_speaker_splits(iota_ids(3), {1.0 / 3, 1.0 / 3, 1.0 / 3}, 123);
  CHECK(s.train.size() == 1);
  CHECK(s.val.size() == 1);
  CHECK(s.test.size() == 1);
}

TEST_CASE("speaker splits are seed-deterministic") {
  const SplitSpec a = make_speaker_splits(iota_ids(6), {0.5, 0.25, 0.25}, 9);
  const SplitSpec b = make_speaker_splits(iota_ids(6), {0.5, 0.25, 0.25}, 9);
  CHECK(a.train == b.train);
  CHECK(a.val == b.val);
  CHECK(a.test == b.test);
}

TEST_CASE("speaker split argument errors") {
  CHECK_THROWS_AS(make_speaker_splits(iota_ids(2), {0.5, 0.25, 0.25}, 0), InvalidArgument);
  CHECK_THROWS_AS(make_speaker_splits(iota_ids(6), {0.5, 0.2, 0.2}, 0), InvalidArgument);
}

TEST_CASE("class partition sizes and determinism") {
  const auto labels = harness::bundled_phrase_labels();
  const ClassPartition p1 = partition_classes(labels, 1, 3);
  CHECK(p1.seen.size() == 9);
  CHECK(p1.unseen.size() == 1);
  const ClassPartition cold = partition_classes(labels, 10, 3);
  CHECK(cold.seen.empty());
  CHECK(cold.unseen.size() == 10);
  const ClassPartition none = partition_classes(labels, 0, 3);
  CHECK(none.unseen.empty());
  const ClassPartition again = partition_classes(labels, 1, 3);
  CHECK(p1.unseen == again.unseen);
  CHECK_THROWS_AS(partition_classes(labels, 11, 3), InvalidArgument);
}

TEST_CASE("synthetic corpus has one sample per (speaker,label,pose,rep)") {
  const auto samples = generate_synthetic_corpus(small_spec(), phonetics::Phonetics::bundled());
  CHECK(samples.size() == 20);  // 2 speakers x 10 labels x 1 pose x 1 rep
  for (const Sample& s : samples) {
    CHECK(s.provenance == Provenance::real);
    CHECK_NOTHROW(s.validate());
  }
}

TEST_CASE("synthetic corpus is bit-identical for equal spec and seed") {
  const auto& ph = phonetics::Phonetics::bundled();
  const auto a = generate_synthetic_corpus(small_spec(), ph);
  const auto b = generate_synthetic_corpus(small_spec(), ph);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].video.frames.vec() == b[i].video.frames.vec());
    CHECK(a[i].audio.samples == b[i].audio.samples);
  }
}

TEST_CASE("goodbye renders hold_frames x phoneme_count frames") {
  const auto& ph = phonetics::Phonetics::bundled();
  SyntheticCorpusSpec spec = small_spec();
  spec.labels = {UtteranceLabel{1, "goodbye", phonetics::Language::english}};
  spec.n_speakers = 1;
  const auto visemes = phonetics::phonemes_to_visemes(
      ph.text_to_phonemes("goodbye", phonetics::Language::english), ph.map());
  const auto samples = generate_synthetic_corpus(spec, ph);
  REQUIRE(samples.size() == 1);
  CHECK(visemes.size() == 5);
  CHECK(samples[0].video.t() == spec.hold_frames * static_cast<long>(visemes.size()));
  CHECK(samples[0].video.t() == 15);
}

TEST_CASE("silence insertion lengthens multi-word utterances") {
  const auto& ph = phonetics::Phonetics::bundled();
  SyntheticCorpusSpec spec = small_spec();
  spec.labels = {UtteranceLabel{6, "see you", phonetics::Language::english}};
  spec.n_speakers = 1;
  const auto phonemes = ph.text_to_phonemes("see you", phonetics::Language::english);
  const auto samples = generate_synthetic_corpus(spec, ph);
  // one word gap -> one silence viseme
  CHECK(samples[0].video.t() ==
        spec.hold_frames * static_cast<long>(phonemes.size() + 1));
}

TEST_CASE("labels are separable within a pose and reps differ only by jitter") {
  const auto& ph = phonetics::Phonetics::bundled();
  SyntheticCorpusSpec spec = small_spec();
  spec.n_speakers = 1;
  spec.reps = 2;
  const auto samples = generate_synthetic_corpus(spec, ph);

  for (std::size_t i = 0; i < samples.size(); ++i)
    for (std::size_t j = i + 1; j < samples.size(); ++j) {
      const Sample& a = samples[i];
      const Sample& b = samples[j];
      if (a.label.class_id != b.label.class_id &&
          a.video.frames.same_shape(b.video.frames)) {
        CHECK(a.video.frames.vec() != b.video.frames.vec());
      }
      if (a.label.class_id == b.label.class_id && a.rep != b.rep) {
        REQUIRE(a.video.frames.same_shape(b.video.frames));
        double max_diff = 0.0;
        for (long k = 0; k < a.video.frames.numel(); ++k)
          max_diff = std::max(max_diff,
                              std::fabs(a.video.frames[k] - b.video.frames[k]));
        CHECK(max_diff > 0.0);
        CHECK(max_diff <= 0.02 + 1e-12);
      }
    }
}

TEST_CASE("unphonemizable label propagates the phonetics error") {
  SyntheticCorpusSpec spec = small_spec();
  spec.labels = {UtteranceLabel{0, "qqqxyzzy", phonetics::Language::english}};
  CHECK_THROWS_AS(generate_synthetic_corpus(spec, phonetics::Phonetics::bundled()),
                  UnknownWordError);
}

TEST_CASE("lookup_audio prefers dataset audio in canonical order") {
  const auto& ph = phonetics::Phonetics::bundled();
  SyntheticCorpusSpec spec = small_spec();
  spec.n_speakers = 3;
  spec.labels = {UtteranceLabel{2, "hello", phonetics::Language::english}};
  auto samples = generate_synthetic_corpus(spec, ph);
  REQUIRE(samples.size() == 3);

  const AudioTrack got = lookup_audio(samples[0].label, samples, nullptr);
  // canonical order puts speaker 0 first
  CHECK(got.samples == samples[0].audio.samples);
  CHECK(samples[0].who.speaker_id == 0);
}

TEST_CASE("lookup_audio falls back to the TTS adapter for unseen labels") {
  const auto& ph = phonetics::Phonetics::bundled();
  SyntheticCorpusSpec spec = small_spec();
  const auto samples = generate_synthetic_corpus(spec, ph);
  const UtteranceLabel unseen{77, "thank you", phonetics::Language::english};

  std::vector<Sample> without;
  for (const Sample& s : samples)
    if (s.label.class_id != 7) without.push_back(s);

  const TtsAdapter tts = synthetic_tts(ph, spec);
  const AudioTrack got = lookup_audio(unseen, without, &tts);
  const AudioTrack expect = synth_schedule_audio(
      ph, utterance_schedule(ph, unseen, spec.hold_frames, spec.insert_silence), spec.fps,
      spec.sample_rate);
  CHECK(got.samples == expect.samples);

  CHECK_THROWS_AS(lookup_audio(unseen, without, nullptr), MissingAudioError);
}

TEST_CASE("sample duration invariant rejects mismatched audio") {
  const auto& ph = phonetics::Phonetics::bundled();
  auto samples = generate_synthetic_corpus(small_spec(), ph);
  Sample bad = samples[0];
  bad.audio.samples.resize(bad.audio.samples.size() / 2);
  CHECK_THROWS_AS(bad.validate(), InvalidArgument);
}

TEST_CASE("corpus round-trips through the on-disk layout") {
  const auto& ph = phonetics::Phonetics::bundled();
  SyntheticCorpusSpec spec = small_spec();
  spec.n_speakers = 2;
  spec.labels = {UtteranceLabel{0, "hello", phonetics::Language::english},
                 UtteranceLabel{1, "goodbye", phonetics::Language::english}};
  spec.reps = 2;
  const auto samples = generate_synthetic_corpus(spec, ph);

  vftest::TempDir dir("corpus");
  save_corpus(samples, dir.path());
  const auto loaded = load_corpus(dir.path());
  REQUIRE(loaded.size() == samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    CHECK(loaded[i].label == samples[i].label);
    CHECK(loaded[i].who == samples[i].who);
    CHECK(loaded[i].rep == samples[i].rep);
    CHECK(loaded[i].provenance == samples[i].provenance);
    CHECK(loaded[i].video.t() == samples[i].video.t());
    double max_diff = 0.0;
    for (long k = 0; k < samples[i].video.frames.numel(); ++k)
      max_diff = std::max(max_diff, std::fabs(loaded[i].video.frames[k] -
                                              samples[i].video.frames[k]));
    CHECK(max_diff <= 0.5 / 255.0 + 1e-9);  // 8-bit quantization only
    CHECK(loaded[i].audio.sample_rate == samples[i].audio.sample_rate);
    CHECK(loaded[i].audio.samples.size() == samples[i].audio.samples.size());
  }
}

TEST_CASE("pose shear distinguishes poses for the same speaker and viseme") {
  const Tensor a = render_viseme_frame(3, 0, 0, 32, 32);
  const Tensor b = render_viseme_frame(3, 0, 60, 32, 32);
  CHECK(a.vec() != b.vec());
}
