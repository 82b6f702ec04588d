#include "visemeforge/synthconcat.hpp"

#include <algorithm>
#include <cmath>

namespace vf::synthconcat {

corpus::VideoClip concat_generate(const corpus::UtteranceLabel& label,
                                  const corpus::SpeakerPose& who,
                                  const phonetics::SpeakerVisemeDB& db,
                                  const phonetics::Phonetics& ph, const ConcatConfig& cfg) {
  cfg.validate();
  const corpus::VisemeSchedule schedule =
      corpus::utterance_schedule(ph, label, cfg.hold_frames, cfg.insert_silence);
  if (schedule.empty())
    throw EmptyUtteranceError("cannot synthesize empty utterance: '" + label.text + "'");

  const phonetics::VisemeClip& first = db.lookup(who, schedule.front().viseme);
  const long c = first.frame.dim(0), h = first.frame.dim(1), w = first.frame.dim(2);
  const long total = schedule.back().start_frame + schedule.back().frames;

  corpus::VideoClip clip;
  clip.fps = cfg.fps;
  clip.frames = Tensor({total, c, h, w});
  for (const corpus::ScheduleEntry& entry : schedule) {
    const phonetics::VisemeClip& stored = db.lookup(who, entry.viseme);
    if (stored.frame.dim(0) != c || stored.frame.dim(1) != h || stored.frame.dim(2) != w)
      throw ShapeError("viseme clip geometry mismatch in database");
    for (long f = entry.start_frame; f < entry.start_frame + entry.frames; ++f)
      std::copy(stored.frame.data(), stored.frame.data() + stored.frame.numel(),
                clip.frames.data() + f * stored.frame.numel());
  }
  return clip;
}

ConcatSetResult hallucinate_concat_set(const std::vector<corpus::UtteranceLabel>& labels,
                                       const std::vector<corpus::SpeakerPose>& speakers,
                                       const phonetics::SpeakerVisemeDB& db,
                                       const phonetics::Phonetics& ph, const ConcatConfig& cfg,
                                       const std::vector<corpus::Sample>& audio_corpus,
                                       const corpus::TtsAdapter* tts) {
  ConcatSetResult result;
  for (const corpus::UtteranceLabel& label : labels) {
    for (const corpus::SpeakerPose& who : speakers) {
      try {
        corpus::Sample s;
        s.video = concat_generate(label, who, db, ph, cfg);
        s.audio = corpus::lookup_audio(label, audio_corpus, tts);
        // Reconcile: trim or zero-pad audio to the video duration so the
        // sample invariant holds regardless of the audio source.
        const long want = static_cast<long>(std::lround(
            static_cast<double>(s.video.t()) / cfg.fps * s.audio.sample_rate));
        s.audio.samples.resize(static_cast<std::size_t>(std::max<long>(want, 1)), 0.0);
        s.label = label;
        s.who = who;
        s.provenance = corpus::Provenance::concat;
        s.rep = 0;
        s.validate();
        result.samples.push_back(std::move(s));
      } catch (const Error& e) {
        result.failures.push_back(ConcatFailure{label, who, e.what()});
      }
    }
  }
  corpus::sort_samples(result.samples);
  return result;
}

}  // namespace vf::synthconcat
