#pragma once

#include <map>
#include <string>
#include <tuple>
#include <vector>

#include "visemeforge/corpus.hpp"
#include "visemeforge/phonetics.hpp"

namespace vf::phonetics {

struct VisemeClip {
  Tensor frame;        // [C,H,W] in [0,1]
  std::string source;  // provenance note, e.g. "speaker 3 class 2 frame 7"
};

// The speaker-to-viseme database behind concatenative synthesis: one stored
// mouth image per (speaker, pose, viseme).
class SpeakerVisemeDB {
 public:
  using Key = std::tuple<int, int, int>;  // speaker_id, pose_deg, viseme_id

  void insert(int speaker_id, int pose_deg, int viseme_id, VisemeClip clip);
  const VisemeClip& lookup(const corpus::SpeakerPose& who, const VisemeId& v) const;
  bool contains(int speaker_id, int pose_deg, int viseme_id) const;
  bool complete_for(int speaker_id, int pose_deg,
                    const std::vector<VisemeId>& inventory) const;
  std::size_t size() const { return clips_.size(); }
  const std::map<Key, VisemeClip>& clips() const { return clips_; }

  // Directory layout: <speaker>/<pose>/<viseme_id>.png plus a db.json index.
  void save(const std::string& dir) const;
  static SpeakerVisemeDB load(const std::string& dir);

 private:
  std::map<Key, VisemeClip> clips_;
};

// Frame-index annotations per sample: which frame of sample i shows viseme v.
struct VisemeAnnotation {
  std::size_t sample_index = 0;
  int viseme_id = 0;
  long frame_index = 0;
};

// Extracts annotated frames into a database. Later annotations for the same
// (speaker, pose, viseme) key overwrite earlier ones.
SpeakerVisemeDB build_viseme_db(const std::vector<corpus::Sample>& samples,
                                const std::vector<VisemeAnnotation>& annotations);

// Derives annotations for synthetic-corpus samples from the renderer's known
// viseme schedule (midpoint frame of the first span showing each viseme).
std::vector<VisemeAnnotation> synthetic_annotations(
    const std::vector<corpus::Sample>& samples, const Phonetics& ph, long hold_frames,
    bool insert_silence);

const VisemeClip& lookup_viseme_clip(const SpeakerVisemeDB& db, const corpus::SpeakerPose& who,
                                     const VisemeId& v);

}  // namespace vf::phonetics
