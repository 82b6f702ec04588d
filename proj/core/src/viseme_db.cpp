#include "visemeforge/viseme_db.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <fstream>

#include "visemeforge/image_io.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace vf::phonetics {

void SpeakerVisemeDB::insert(int speaker_id, int pose_deg, int viseme_id, VisemeClip clip) {
  clips_[Key{speaker_id, pose_deg, viseme_id}] = std::move(clip);
}

const VisemeClip& SpeakerVisemeDB::lookup(const corpus::SpeakerPose& who,
                                          const VisemeId& v) const {
  auto it = clips_.find(Key{who.speaker_id, who.pose_deg, v.id});
  if (it == clips_.end())
    throw MissingVisemeError("no clip for speaker " + std::to_string(who.speaker_id) +
                             " pose " + std::to_string(who.pose_deg) + " viseme " +
                             std::to_string(v.id) + " (" + v.name + ")");
  return it->second;
}

bool SpeakerVisemeDB::contains(int speaker_id, int pose_deg, int viseme_id) const {
  return clips_.count(Key{speaker_id, pose_deg, viseme_id}) > 0;
}

bool SpeakerVisemeDB::complete_for(int speaker_id, int pose_deg,
                                   const std::vector<VisemeId>& inventory) const {
  for (const VisemeId& v : inventory)
    if (!contains(speaker_id, pose_deg, v.id)) return false;
  return true;
}

void SpeakerVisemeDB::save(const std::string& dir) const {
  fs::create_directories(dir);
  json index = json::array();
  for (const auto& [key, clip] : clips_) {
    const auto [speaker, pose, viseme] = key;
    const fs::path sub = fs::path(dir) / std::to_string(speaker) / std::to_string(pose);
    fs::create_directories(sub);
    const std::string file = std::to_string(viseme) + ".png";
    io::write_png((sub / file).string(), clip.frame);
    index.push_back({{"speaker", speaker},
                     {"pose", pose},
                     {"viseme", viseme},
                     {"source", clip.source}});
  }
  std::ofstream(fs::path(dir) / "db.json") << index.dump(2) << "\n";
}

SpeakerVisemeDB SpeakerVisemeDB::load(const std::string& dir) {
  const fs::path root(dir);
  if (!fs::exists(root / "db.json")) throw IoError("missing db.json in " + dir);
  json index;
  std::ifstream(root / "db.json") >> index;
  SpeakerVisemeDB db;
  for (const auto& entry : index) {
    const int speaker = entry["speaker"].get<int>();
    const int pose = entry["pose"].get<int>();
    const int viseme = entry["viseme"].get<int>();
    const fs::path file =
        root / std::to_string(speaker) / std::to_string(pose) / (std::to_string(viseme) + ".png");
    VisemeClip clip;
    clip.frame = io::read_png(file.string());
    clip.source = entry.value("source", "");
    db.insert(speaker, pose, viseme, std::move(clip));
  }
  return db;
}

SpeakerVisemeDB build_viseme_db(const std::vector<corpus::Sample>& samples,
                                const std::vector<VisemeAnnotation>& annotations) {
  SpeakerVisemeDB db;
  for (const VisemeAnnotation& a : annotations) {
    if (a.sample_index >= samples.size())
      throw InvalidAnnotationError("annotation refers to sample " +
                                   std::to_string(a.sample_index) + " of " +
                                   std::to_string(samples.size()));
    const corpus::Sample& s = samples[a.sample_index];
    if (a.frame_index < 0 || a.frame_index >= s.video.t())
      throw InvalidAnnotationError("frame index " + std::to_string(a.frame_index) +
                                   " out of range [0," + std::to_string(s.video.t()) + ")");
    VisemeClip clip;
    clip.frame = s.video.frame(a.frame_index);
    clip.source = "speaker " + std::to_string(s.who.speaker_id) + " class " +
                  std::to_string(s.label.class_id) + " rep " + std::to_string(s.rep) +
                  " frame " + std::to_string(a.frame_index);
    db.insert(s.who.speaker_id, s.who.pose_deg, a.viseme_id, std::move(clip));
  }
  return db;
}

std::vector<VisemeAnnotation> synthetic_annotations(
    const std::vector<corpus::Sample>& samples, const Phonetics& ph, long hold_frames,
    bool insert_silence) {
  std::vector<VisemeAnnotation> out;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const corpus::Sample& s = samples[i];
    // Only clean takes: rep 0 carries no pixel jitter, so the extracted clip
    // matches the renderer's glyph exactly.
    if (s.provenance != corpus::Provenance::real || s.rep != 0) continue;
    const corpus::VisemeSchedule schedule =
        utterance_schedule(ph, s.label, hold_frames, insert_silence);
    for (const corpus::ScheduleEntry& entry : schedule) {
      out.push_back(VisemeAnnotation{i, entry.viseme.id,
                                     entry.start_frame + entry.frames / 2});
    }
  }
  return out;
}

const VisemeClip& lookup_viseme_clip(const SpeakerVisemeDB& db, const corpus::SpeakerPose& who,
                                     const VisemeId& v) {
  return db.lookup(who, v);
}

}  // namespace vf::phonetics
