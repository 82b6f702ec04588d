#pragma once

#include <set>
#include <string>
#include <vector>

#include "visemeforge/corpus.hpp"
#include "visemeforge/viseme_db.hpp"

namespace vf::synthconcat {

struct ConcatConfig {
  long hold_frames = 3;        // 120 ms per viseme at 25 fps
  bool insert_silence = true;  // silence viseme between words
  double fps = 25.0;

  void validate() const {
    if (hold_frames < 1) throw InvalidArgument("hold_frames must be >= 1");
    if (fps <= 0.0) throw InvalidArgument("fps must be positive");
  }
};

// Stitches stored viseme clips for the utterance, each held hold_frames
// frames, with no transition frames in between. T = hold_frames * (#visemes +
// #silence insertions).
corpus::VideoClip concat_generate(const corpus::UtteranceLabel& label,
                                  const corpus::SpeakerPose& who,
                                  const phonetics::SpeakerVisemeDB& db,
                                  const phonetics::Phonetics& ph, const ConcatConfig& cfg);

struct ConcatFailure {
  corpus::UtteranceLabel label;
  corpus::SpeakerPose who;
  std::string reason;
};

struct ConcatSetResult {
  std::vector<corpus::Sample> samples;
  std::vector<ConcatFailure> failures;
};

// One sample per (label, speaker-pose); per-item failures are recorded and
// skipped. Audio comes from lookup_audio over `audio_corpus`, then trimmed or
// zero-padded to the video duration.
ConcatSetResult hallucinate_concat_set(const std::vector<corpus::UtteranceLabel>& labels,
                                       const std::vector<corpus::SpeakerPose>& speakers,
                                       const phonetics::SpeakerVisemeDB& db,
                                       const phonetics::Phonetics& ph, const ConcatConfig& cfg,
                                       const std::vector<corpus::Sample>& audio_corpus,
                                       const corpus::TtsAdapter* tts);

}  // namespace vf::synthconcat
