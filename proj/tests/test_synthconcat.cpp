#include <doctest.h>

#include <cmath>

#include "test_util.hpp"
#include "visemeforge/harness.hpp"
#include "visemeforge/synthconcat.hpp"

using namespace vf;
using namespace vf::corpus;
using namespace vf::synthconcat;

namespace {

// Shared fixture: a one-pose corpus rich enough for a complete viseme DB.
struct ConcatFixture {
  SyntheticCorpusSpec spec;
  std::vector<Sample> samples;
  phonetics::SpeakerVisemeDB db;
  TtsAdapter tts;

  ConcatFixture() {
    const auto& ph = phonetics::Phonetics::bundled();
    spec.n_speakers = 2;
    spec.labels = harness::bundled_sentence_labels();
    spec.poses = {0};
    spec.reps = 1;
    spec.seed = 5;
    samples = generate_synthetic_corpus(spec, ph);
    const auto annotations =
        phonetics::synthetic_annotations(samples, ph, spec.hold_frames, spec.insert_silence);
    db = phonetics::build_viseme_db(samples, annotations);
    tts = synthetic_tts(ph, spec);
  }
};

}  // namespace

TEST_CASE("auto-annotated db is complete and clips equal the renderer glyphs") {
  const auto& ph = phonetics::Phonetics::bundled();
  ConcatFixture fx;
  const auto inventory = ph.map().viseme_inventory();
  for (int speaker : {0, 1}) {
    CHECK(fx.db.complete_for(speaker, 0, inventory));
    for (const auto& v : inventory) {
      const auto& clip = fx.db.lookup(SpeakerPose{speaker, 0}, v);
      const Tensor oracle = render_viseme_frame(v.id, speaker, 0, fx.spec.height, fx.spec.width);
      REQUIRE(clip.frame.same_shape(oracle));
      CHECK(clip.frame.vec() == oracle.vec());
    }
  }
}

TEST_CASE("viseme db lookup errors and annotation validation") {
  const auto& ph = phonetics::Phonetics::bundled();
  ConcatFixture fx;
  CHECK_THROWS_AS(fx.db.lookup(SpeakerPose{0, 90}, ph.map().at("B")),
                  MissingVisemeError);
  CHECK_THROWS_AS(fx.db.lookup(SpeakerPose{7, 0}, ph.map().at("B")),
                  MissingVisemeError);

  // out-of-range frame index
  std::vector<phonetics::VisemeAnnotation> bad{{0, 3, fx.samples[0].video.t()}};
  CHECK_THROWS_AS(phonetics::build_viseme_db(fx.samples, bad), InvalidAnnotationError);

  // empty annotations -> empty db
  CHECK(phonetics::build_viseme_db(fx.samples, {}).size() == 0);
}

TEST_CASE("viseme db round-trips through its directory layout") {
  ConcatFixture fx;
  vftest::TempDir dir("visemedb");
  fx.db.save(dir.path());
  const auto loaded = phonetics::SpeakerVisemeDB::load(dir.path());
  CHECK(loaded.size() == fx.db.size());
  for (const auto& [key, clip] : fx.db.clips()) {
    const auto [speaker, pose, viseme] = key;
    REQUIRE(loaded.contains(speaker, pose, viseme));
    const auto& got = loaded.clips().at(key);
    double max_diff = 0.0;
    for (long i = 0; i < clip.frame.numel(); ++i)
      max_diff = std::max(max_diff, std::fabs(clip.frame[i] - got.frame[i]));
    CHECK(max_diff <= 0.5 / 255.0 + 1e-9);
  }
}

TEST_CASE("concat_generate obeys the duration law and copies db frames") {
  const auto& ph = phonetics::Phonetics::bundled();
  ConcatFixture fx;
  const UtteranceLabel label{50, "goodbye", phonetics::Language::english};
  ConcatConfig cfg;
  cfg.hold_frames = 3;
  cfg.insert_silence = false;

  const VideoClip clip = concat_generate(label, SpeakerPose{0, 0}, fx.db, ph, cfg);
  CHECK(clip.t() == 15);  // 5 visemes x 3 frames, single word
  // frames come verbatim from the db, repeated hold_frames at a time
  const auto visemes = phonetics::phonemes_to_visemes(
      ph.text_to_phonemes("goodbye", phonetics::Language::english), ph.map());
  for (std::size_t v = 0; v < visemes.size(); ++v) {
    const auto& stored = fx.db.lookup(SpeakerPose{0, 0}, visemes[v]);
    for (long r = 0; r < cfg.hold_frames; ++r) {
      const Tensor frame = clip.frame(static_cast<long>(v) * cfg.hold_frames + r);
      CHECK(frame.vec() == stored.frame.vec());
    }
  }
}

TEST_CASE("concat output is bit-identical across runs") {
  const auto& ph = phonetics::Phonetics::bundled();
  ConcatFixture fx;
  const UtteranceLabel label{51, "how are you", phonetics::Language::english};
  const ConcatConfig cfg;
  const VideoClip a = concat_generate(label, SpeakerPose{1, 0}, fx.db, ph, cfg);
  const VideoClip b = concat_generate(label, SpeakerPose{1, 0}, fx.db, ph, cfg);
  CHECK(a.frames.vec() == b.frames.vec());
}

TEST_CASE("hindi utterance concatenates hold x 9 phonemes plus silences") {
  const auto& ph = phonetics::Phonetics::bundled();
  ConcatFixture fx;
  const UtteranceLabel label{52, "aap kaisey hain", phonetics::Language::hindi};
  ConcatConfig cfg;
  cfg.hold_frames = 3;
  cfg.insert_silence = true;
  const VideoClip clip = concat_generate(label, SpeakerPose{0, 0}, fx.db, ph, cfg);
  // 9 phonemes + 2 word gaps
  CHECK(clip.t() == cfg.hold_frames * (9 + 2));
  cfg.insert_silence = false;
  const VideoClip bare = concat_generate(label, SpeakerPose{0, 0}, fx.db, ph, cfg);
  CHECK(bare.t() == cfg.hold_frames * 9);
}

TEST_CASE("empty text raises an empty-utterance error") {
  const auto& ph = phonetics::Phonetics::bundled();
  ConcatFixture fx;
  const UtteranceLabel label{53, "", phonetics::Language::english};
  CHECK_THROWS_AS(concat_generate(label, SpeakerPose{0, 0}, fx.db, ph, ConcatConfig{}),
                  EmptyUtteranceError);
}

TEST_CASE("hallucinate_concat_set yields one sample per pair and records failures") {
  const auto& ph = phonetics::Phonetics::bundled();
  ConcatFixture fx;
  const std::vector<UtteranceLabel> labels{
      {60, "see you", phonetics::Language::english},
      {61, "thank you", phonetics::Language::english},
  };
  const std::vector<SpeakerPose> speakers{{0, 0}, {1, 0}, {0, 0}};
  const auto result =
      hallucinate_concat_set(labels, speakers, fx.db, ph, ConcatConfig{}, fx.samples, &fx.tts);
  CHECK(result.samples.size() == 6);  // 2 labels x 3 speaker-poses
  CHECK(result.failures.empty());
  for (const Sample& s : result.samples) {
    CHECK(s.provenance == Provenance::concat);
    CHECK_NOTHROW(s.validate());
  }

  // empty label set
  const auto empty = hallucinate_concat_set({}, speakers, fx.db, ph, ConcatConfig{},
                                            fx.samples, &fx.tts);
  CHECK(empty.samples.empty());

  // a pose missing from the db is recorded and skipped, not thrown
  const std::vector<SpeakerPose> bad_pose{{0, 45}};
  const auto partial = hallucinate_concat_set(labels, bad_pose, fx.db, ph, ConcatConfig{},
                                              fx.samples, &fx.tts);
  CHECK(partial.samples.empty());
  CHECK(partial.failures.size() == 2);
}

TEST_CASE("every concat frame exists verbatim in the speaker's db") {
  const auto& ph = phonetics::Phonetics::bundled();
  ConcatFixture fx;
  const std::vector<UtteranceLabel> labels{{62, "nice to meet you", phonetics::Language::english}};
  const auto result = hallucinate_concat_set(labels, {{0, 0}}, fx.db, ph, ConcatConfig{},
                                             fx.samples, &fx.tts);
  REQUIRE(result.samples.size() == 1);
  const VideoClip& clip = result.samples[0].video;
  for (long f = 0; f < clip.t(); ++f) {
    const Tensor frame = clip.frame(f);
    bool found = false;
    for (const auto& [key, stored] : fx.db.clips()) {
      if (std::get<0>(key) != 0 || std::get<1>(key) != 0) continue;
      if (stored.frame.vec() == frame.vec()) {
        found = true;
        break;
      }
    }
    CHECK(found);
  }
}
