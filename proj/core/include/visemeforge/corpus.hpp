#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <set>
#include <string>
#include <vector>

#include "visemeforge/phonetics.hpp"
#include "visemeforge/tensor.hpp"

namespace vf::corpus {

using phonetics::Language;

struct UtteranceLabel {
  int class_id = 0;
  std::string text;
  Language language = Language::english;

  bool operator==(const UtteranceLabel& o) const {
    return class_id == o.class_id && text == o.text && language == o.language;
  }
};

constexpr std::array<int, 5> kPoseAngles{0, 30, 45, 60, 90};
bool valid_pose(int pose_deg);

struct SpeakerPose {
  int speaker_id = 0;
  int pose_deg = 0;

  bool operator<(const SpeakerPose& o) const {
    return speaker_id != o.speaker_id ? speaker_id < o.speaker_id : pose_deg < o.pose_deg;
  }
  bool operator==(const SpeakerPose& o) const {
    return speaker_id == o.speaker_id && pose_deg == o.pose_deg;
  }
};

// Frames are stored [T,C,H,W] with values in [0,1].
struct VideoClip {
  Tensor frames;
  double fps = 25.0;

  long t() const { return frames.ndim() == 4 ? frames.dim(0) : 0; }
  long channels() const { return frames.dim(1); }
  long height() const { return frames.dim(2); }
  long width() const { return frames.dim(3); }
  double duration() const { return static_cast<double>(t()) / fps; }
  Tensor frame(long i) const;  // [C,H,W]
  void validate() const;
};

struct AudioTrack {
  std::vector<double> samples;
  int sample_rate = 8000;

  double duration() const {
    return static_cast<double>(samples.size()) / static_cast<double>(sample_rate);
  }
  void validate() const;
};

enum class Provenance { real, tcgan, concat };
std::string to_string(Provenance p);
Provenance provenance_from_string(const std::string& s);

struct Sample {
  VideoClip video;
  AudioTrack audio;
  UtteranceLabel label;
  SpeakerPose who;
  Provenance provenance = Provenance::real;
  int rep = 0;

  // Video and audio duration must agree within one frame period.
  void validate() const;
};

// Canonical (speaker_id, class_id, pose_deg, rep) order used everywhere.
void sort_samples(std::vector<Sample>& samples);
bool sample_order_less(const Sample& a, const Sample& b);

struct SplitSpec {
  std::vector<int> train, val, test;  // each sorted ascending

  bool disjoint() const;
  std::vector<int> all_speakers() const;
};

// Deterministic speaker split with largest-remainder size rounding.
SplitSpec make_speaker_splits(const std::vector<int>& speaker_ids,
                              std::array<double, 3> ratios, std::uint64_t seed);

struct ClassPartition {
  std::set<int> seen, unseen;
};

ClassPartition partition_classes(const std::vector<UtteranceLabel>& labels,
                                 std::size_t n_unseen, std::uint64_t seed);

struct SyntheticCorpusSpec {
  int n_speakers = 2;
  std::vector<UtteranceLabel> labels;
  std::vector<int> poses{0};
  int reps = 1;
  double fps = 25.0;
  long height = 32;
  long width = 32;
  std::uint64_t seed = 0;
  long hold_frames = 3;        // frames per phoneme-derived viseme
  bool insert_silence = true;  // silence viseme at word boundaries
  int sample_rate = 8000;

  void validate() const;
};

// One row of the renderer's timing plan: which viseme shows for which frames
// and which phoneme drives the matching audio span.
struct ScheduleEntry {
  phonetics::Phoneme phoneme;  // "SIL" for inserted silence
  phonetics::VisemeId viseme;
  long start_frame = 0;
  long frames = 0;
};
using VisemeSchedule = std::vector<ScheduleEntry>;

VisemeSchedule utterance_schedule(const phonetics::Phonetics& ph, const UtteranceLabel& label,
                                  long hold_frames, bool insert_silence);

// Per-speaker appearance: brightness gain plus a small glyph offset, fixed by
// speaker id so identity is consistent across corpora.
struct SpeakerStyle {
  double gain = 1.0;
  long dx = 0, dy = 0;
};
SpeakerStyle speaker_style(int speaker_id);

// The glyph oracle: deterministic mouth image for one viseme, [1,H,W].
Tensor render_viseme_frame(int viseme_id, int speaker_id, int pose_deg, long height, long width);

// Per-phoneme fixed-frequency tone (silence for SIL), matching a schedule's
// frame spans exactly.
AudioTrack synth_schedule_audio(const phonetics::Phonetics& ph, const VisemeSchedule& schedule,
                                double fps, int sample_rate);

std::vector<Sample> generate_synthetic_corpus(const SyntheticCorpusSpec& spec,
                                              const phonetics::Phonetics& ph);

using TtsAdapter = std::function<AudioTrack(const UtteranceLabel&)>;

// Tone-synthesis TTS with the same timing rules as the synthetic corpus.
TtsAdapter synthetic_tts(const phonetics::Phonetics& ph, const SyntheticCorpusSpec& spec);

// Dataset audio when the label has a real sample (first in canonical order),
// otherwise the TTS adapter; null adapter means dataset-only.
AudioTrack lookup_audio(const UtteranceLabel& label, const std::vector<Sample>& corpus,
                        const TtsAdapter* tts);

// On-disk corpus layout:
//   <root>/<speaker>/<class>/<pose>/<rep>/frame_%04d.png + audio.wav + meta.json
// with a corpus.json index at the root.
void save_corpus(const std::vector<Sample>& samples, const std::string& root);
std::vector<Sample> load_corpus(const std::string& root);

}  // namespace vf::corpus
