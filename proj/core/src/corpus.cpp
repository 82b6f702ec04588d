#include "visemeforge/corpus.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "visemeforge/image_io.hpp"
#include "visemeforge/rng.hpp"
#include "visemeforge/wav_io.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace vf::corpus {

bool valid_pose(int pose_deg) {
  return std::find(kPoseAngles.begin(), kPoseAngles.end(), pose_deg) != kPoseAngles.end();
}

Tensor VideoClip::frame(long i) const {
  const long c = channels(), h = height(), w = width();
  Tensor out({c, h, w});
  const double* src = frames.data() + i * c * h * w;
  std::copy(src, src + c * h * w, out.data());
  return out;
}

void VideoClip::validate() const {
  if (frames.ndim() != 4 || t() < 1)
    throw InvalidArgument("video must have at least one [T,C,H,W] frame");
  if (fps <= 0.0) throw InvalidArgument("fps must be positive");
  for (long i = 0; i < frames.numel(); ++i)
    if (!(frames[i] >= 0.0 && frames[i] <= 1.0))
      throw InvalidArgument("video values must lie in [0,1]");
}

void AudioTrack::validate() const {
  if (samples.empty()) throw InvalidArgument("audio must have at least one sample");
  if (sample_rate <= 0) throw InvalidArgument("sample_rate must be positive");
}

std::string to_string(Provenance p) {
  switch (p) {
    case Provenance::real: return "real";
    case Provenance::tcgan: return "tcgan";
    case Provenance::concat: return "concat";
  }
  return "real";
}

Provenance provenance_from_string(const std::string& s) {
  if (s == "real") return Provenance::real;
  if (s == "tcgan") return Provenance::tcgan;
  if (s == "concat") return Provenance::concat;
  throw InvalidArgument("unknown provenance: " + s);
}

void Sample::validate() const {
  video.validate();
  audio.validate();
  if (!valid_pose(who.pose_deg))
    throw InvalidArgument("pose must be one of {0,30,45,60,90}: got " +
                          std::to_string(who.pose_deg));
  const double frame_period = 1.0 / video.fps;
  if (std::fabs(video.duration() - audio.duration()) > frame_period + 1e-9)
    throw InvalidArgument("video/audio duration mismatch beyond one frame period");
}

bool sample_order_less(const Sample& a, const Sample& b) {
  if (a.who.speaker_id != b.who.speaker_id) return a.who.speaker_id < b.who.speaker_id;
  if (a.label.class_id != b.label.class_id) return a.label.class_id < b.label.class_id;
  if (a.who.pose_deg != b.who.pose_deg) return a.who.pose_deg < b.who.pose_deg;
  return a.rep < b.rep;
}

void sort_samples(std::vector<Sample>& samples) {
  std::stable_sort(samples.begin(), samples.end(), sample_order_less);
}

bool SplitSpec::disjoint() const {
  std::set<int> seen;
  for (const auto* part : {&train, &val, &test})
    for (int s : *part)
      if (!seen.insert(s).second) return false;
  return true;
}

std::vector<int> SplitSpec::all_speakers() const {
  std::vector<int> all;
  all.insert(all.end(), train.begin(), train.end());
  all.insert(all.end(), val.begin(), val.end());
  all.insert(all.end(), test.begin(), test.end());
  std::sort(all.begin(), all.end());
  return all;
}

SplitSpec make_speaker_splits(const std::vector<int>& speaker_ids,
                              std::array<double, 3> ratios, std::uint64_t seed) {
  const double ratio_sum = ratios[0] + ratios[1] + ratios[2];
  if (std::fabs(ratio_sum - 1.0) > 1e-6)
    throw InvalidArgument("split ratios must sum to 1");
  const std::size_t n = speaker_ids.size();
  if (n < 3) throw InvalidArgument("need at least as many speakers as split parts (3)");

  // Largest-remainder rounding of the three shares.
  std::array<std::size_t, 3> sizes{};
  std::array<double, 3> remainders{};
  std::size_t assigned = 0;
  for (int i = 0; i < 3; ++i) {
    const double share = ratios[static_cast<std::size_t>(i)] * static_cast<double>(n);
    sizes[static_cast<std::size_t>(i)] = static_cast<std::size_t>(std::floor(share + 1e-9));
    remainders[static_cast<std::size_t>(i)] =
        share - std::floor(share + 1e-9);
    assigned += sizes[static_cast<std::size_t>(i)];
  }
  while (assigned < n) {
    int best = 0;
    for (int i = 1; i < 3; ++i)
      if (remainders[static_cast<std::size_t>(i)] > remainders[static_cast<std::size_t>(best)])
        best = i;
    sizes[static_cast<std::size_t>(best)] += 1;
    remainders[static_cast<std::size_t>(best)] = -1.0;
    ++assigned;
  }

  std::vector<int> ids = speaker_ids;
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  if (ids.size() != n) throw InvalidArgument("duplicate speaker ids");
  Rng rng(seed);
  rng.shuffle(ids);

  SplitSpec split;
  split.train.assign(ids.begin(), ids.begin() + static_cast<long>(sizes[0]));
  split.val.assign(ids.begin() + static_cast<long>(sizes[0]),
                   ids.begin() + static_cast<long>(sizes[0] + sizes[1]));
  split.test.assign(ids.begin() + static_cast<long>(sizes[0] + sizes[1]), ids.end());
  std::sort(split.train.begin(), split.train.end());
  std::sort(split.val.begin(), split.val.end());
  std::sort(split.test.begin(), split.test.end());
  return split;
}

ClassPartition partition_classes(const std::vector<UtteranceLabel>& labels,
                                 std::size_t n_unseen, std::uint64_t seed) {
  if (n_unseen > labels.size())
    throw InvalidArgument("n_unseen exceeds the number of labels");
  std::vector<int> ids;
  ids.reserve(labels.size());
  for (const auto& l : labels) ids.push_back(l.class_id);
  std::sort(ids.begin(), ids.end());
  if (std::adjacent_find(ids.begin(), ids.end()) != ids.end())
    throw InvalidArgument("duplicate class ids");
  Rng rng(seed);
  rng.shuffle(ids);
  ClassPartition part;
  for (std::size_t i = 0; i < ids.size(); ++i)
    (i < n_unseen ? part.unseen : part.seen).insert(ids[i]);
  return part;
}

void SyntheticCorpusSpec::validate() const {
  if (n_speakers < 1) throw InvalidArgument("n_speakers must be >= 1");
  if (reps < 1) throw InvalidArgument("reps must be >= 1");
  if (labels.empty()) throw InvalidArgument("labels must be non-empty");
  if (poses.empty()) throw InvalidArgument("poses must be non-empty");
  for (int p : poses)
    if (!valid_pose(p)) throw InvalidArgument("invalid pose: " + std::to_string(p));
  if (fps <= 0.0 || height < 8 || width < 8 || hold_frames < 1 || sample_rate <= 0)
    throw InvalidArgument("invalid corpus geometry");
}

VisemeSchedule utterance_schedule(const phonetics::Phonetics& ph, const UtteranceLabel& label,
                                  long hold_frames, bool insert_silence) {
  const auto words = ph.words_to_phonemes(label.text, label.language);
  VisemeSchedule schedule;
  long frame = 0;
  const phonetics::VisemeId silence = ph.map().at("SIL");
  for (std::size_t w = 0; w < words.size(); ++w) {
    if (insert_silence && w > 0) {
      schedule.push_back({"SIL", silence, frame, hold_frames});
      frame += hold_frames;
    }
    for (const auto& phoneme : words[w]) {
      schedule.push_back({phoneme, ph.map().at(phoneme), frame, hold_frames});
      frame += hold_frames;
    }
  }
  return schedule;
}

SpeakerStyle speaker_style(int speaker_id) {
  const std::uint64_t h = Rng::mix(0x5eede5u, {static_cast<std::uint64_t>(speaker_id)});
  SpeakerStyle style;
  style.gain = 0.72 + 0.28 * static_cast<double>(h & 0xffff) / 65535.0;
  style.dx = static_cast<long>((h >> 16) % 5) - 2;
  style.dy = static_cast<long>((h >> 24) % 5) - 2;
  return style;
}

Tensor render_viseme_frame(int viseme_id, int speaker_id, int pose_deg, long height,
                           long width) {
  const SpeakerStyle style = speaker_style(speaker_id);
  const double shear = 0.5 * static_cast<double>(pose_deg) / 90.0;
  // Mouth ellipse radii form a 4x3 grid over the 12 viseme groups, so every
  // group renders a distinct opening shape.
  const double rx = 0.16 * static_cast<double>(width) * (1.0 + 0.45 * (viseme_id % 4));
  const double ry = 0.08 * static_cast<double>(height) * (1.0 + 1.15 * (viseme_id / 4));
  const double cx = 0.5 * static_cast<double>(width - 1) + static_cast<double>(style.dx);
  const double cy = 0.5 * static_cast<double>(height - 1) + static_cast<double>(style.dy);
  const double theta = 2.0 * 3.14159265358979323846 * static_cast<double>(viseme_id) / 12.0;
  const double mark_x = cx + 0.8 * rx * std::cos(theta);
  const double mark_y = cy + 0.8 * ry * std::sin(theta);

  Tensor img({1, height, width});
  const double background = 0.12;
  for (long y = 0; y < height; ++y) {
    for (long x = 0; x < width; ++x) {
      const double yr = static_cast<double>(y) - cy;
      const double xr = (static_cast<double>(x) - cx) + shear * yr;
      const double e = (xr / rx) * (xr / rx) + (yr / ry) * (yr / ry);
      const double ring = std::exp(-(e - 1.0) * (e - 1.0) / 0.18);
      const double mxr = (static_cast<double>(x) - mark_x) + shear * (static_cast<double>(y) - mark_y);
      const double myr = static_cast<double>(y) - mark_y;
      const double mark = 0.6 * std::exp(-(mxr * mxr + myr * myr) / 2.0);
      double v = background + style.gain * std::min(1.0, ring + mark);
      img[y * width + x] = std::min(std::max(v, 0.0), 1.0);
    }
  }
  return img;
}

namespace {

constexpr double kToneBaseHz = 220.0;
constexpr double kToneStepHz = 70.0;
constexpr double kToneAmplitude = 0.6;

long samples_per_frame(double fps, int sample_rate) {
  return static_cast<long>(std::lround(static_cast<double>(sample_rate) / fps));
}

}  // namespace

AudioTrack synth_schedule_audio(const phonetics::Phonetics& ph, const VisemeSchedule& schedule,
                                double fps, int sample_rate) {
  AudioTrack audio;
  audio.sample_rate = sample_rate;
  const long spf = samples_per_frame(fps, sample_rate);
  for (const ScheduleEntry& entry : schedule) {
    const long n = entry.frames * spf;
    if (entry.phoneme == "SIL") {
      audio.samples.insert(audio.samples.end(), static_cast<std::size_t>(n), 0.0);
      continue;
    }
    const double freq =
        kToneBaseHz + kToneStepHz * static_cast<double>(ph.phoneme_index(entry.phoneme));
    const long offset = entry.start_frame * spf;
    for (long i = 0; i < n; ++i) {
      const double t = static_cast<double>(offset + i) / static_cast<double>(sample_rate);
      audio.samples.push_back(kToneAmplitude *
                              std::sin(2.0 * 3.14159265358979323846 * freq * t));
    }
  }
  return audio;
}

std::vector<Sample> generate_synthetic_corpus(const SyntheticCorpusSpec& spec,
                                              const phonetics::Phonetics& ph) {
  spec.validate();

  std::vector<UtteranceLabel> labels = spec.labels;
  std::sort(labels.begin(), labels.end(),
            [](const UtteranceLabel& a, const UtteranceLabel& b) {
              return a.class_id < b.class_id;
            });
  std::vector<int> poses = spec.poses;
  std::sort(poses.begin(), poses.end());

  // Phonemize once per label; errors propagate before any rendering.
  std::vector<VisemeSchedule> schedules;
  schedules.reserve(labels.size());
  for (const auto& label : labels) {
    VisemeSchedule s = utterance_schedule(ph, label, spec.hold_frames, spec.insert_silence);
    if (s.empty()) throw EmptyUtteranceError("label has no phonemes: '" + label.text + "'");
    schedules.push_back(std::move(s));
  }

  std::vector<Sample> out;
  out.reserve(static_cast<std::size_t>(spec.n_speakers) * labels.size() * poses.size() *
              static_cast<std::size_t>(spec.reps));
  for (int speaker = 0; speaker < spec.n_speakers; ++speaker) {
    for (std::size_t li = 0; li < labels.size(); ++li) {
      const VisemeSchedule& schedule = schedules[li];
      const long total_frames = schedule.back().start_frame + schedule.back().frames;
      for (int pose : poses) {
        // One clean base rendering per (speaker,label,pose); reps jitter it.
        Tensor base({total_frames, 1, spec.height, spec.width});
        for (const ScheduleEntry& entry : schedule) {
          const Tensor glyph =
              render_viseme_frame(entry.viseme.id, speaker, pose, spec.height, spec.width);
          for (long f = entry.start_frame; f < entry.start_frame + entry.frames; ++f)
            std::copy(glyph.data(), glyph.data() + glyph.numel(),
                      base.data() + f * glyph.numel());
        }
        const AudioTrack audio =
            synth_schedule_audio(ph, schedule, spec.fps, spec.sample_rate);
        for (int rep = 0; rep < spec.reps; ++rep) {
          Sample s;
          s.video.fps = spec.fps;
          s.video.frames = base;
          if (rep > 0) {
            // Rep 0 is the clean take; later reps add seeded uniform pixel
            // noise so repetitions are not bit-identical.
            Rng rng(Rng::mix(spec.seed,
                             {static_cast<std::uint64_t>(speaker),
                              static_cast<std::uint64_t>(labels[li].class_id),
                              static_cast<std::uint64_t>(pose),
                              static_cast<std::uint64_t>(rep)}));
            for (long i = 0; i < s.video.frames.numel(); ++i) {
              const double v = s.video.frames[i] + rng.uniform(-0.02, 0.02);
              s.video.frames[i] = std::min(std::max(v, 0.0), 1.0);
            }
          }
          s.audio = audio;
          s.label = labels[li];
          s.who = SpeakerPose{speaker, pose};
          s.provenance = Provenance::real;
          s.rep = rep;
          s.validate();
          out.push_back(std::move(s));
        }
      }
    }
  }
  sort_samples(out);
  return out;
}

TtsAdapter synthetic_tts(const phonetics::Phonetics& ph, const SyntheticCorpusSpec& spec) {
  const double fps = spec.fps;
  const int sample_rate = spec.sample_rate;
  const long hold = spec.hold_frames;
  const bool silence = spec.insert_silence;
  const phonetics::Phonetics* php = &ph;
  return [php, fps, sample_rate, hold, silence](const UtteranceLabel& label) {
    const VisemeSchedule schedule = utterance_schedule(*php, label, hold, silence);
    if (schedule.empty()) throw EmptyUtteranceError("label has no phonemes: '" + label.text + "'");
    return synth_schedule_audio(*php, schedule, fps, sample_rate);
  };
}

AudioTrack lookup_audio(const UtteranceLabel& label, const std::vector<Sample>& corpus,
                        const TtsAdapter* tts) {
  const Sample* best = nullptr;
  for (const Sample& s : corpus) {
    if (s.provenance != Provenance::real || s.label.class_id != label.class_id) continue;
    if (!best || sample_order_less(s, *best)) best = &s;
  }
  if (best) return best->audio;
  if (tts && *tts) return (*tts)(label);
  throw MissingAudioError("no dataset audio and no TTS adapter for label '" + label.text + "'");
}

namespace {

std::string frame_name(long i) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "frame_%04ld.png", i);
  return buf;
}

}  // namespace

void save_corpus(const std::vector<Sample>& samples, const std::string& root) {
  if (samples.empty()) throw InvalidArgument("refusing to save an empty corpus");
  fs::create_directories(root);

  json index;
  std::set<int> speakers;
  std::map<int, json> label_index;
  for (const Sample& s : samples) {
    speakers.insert(s.who.speaker_id);
    label_index[s.label.class_id] = {{"class_id", s.label.class_id},
                                     {"text", s.label.text},
                                     {"language", phonetics::to_string(s.label.language)}};
  }
  index["speakers"] = speakers;
  index["labels"] = json::array();
  for (const auto& [id, j] : label_index) index["labels"].push_back(j);

  for (const Sample& s : samples) {
    const fs::path dir = fs::path(root) / std::to_string(s.who.speaker_id) /
                         std::to_string(s.label.class_id) / std::to_string(s.who.pose_deg) /
                         std::to_string(s.rep);
    fs::create_directories(dir);
    for (long f = 0; f < s.video.t(); ++f)
      io::write_png((dir / frame_name(f)).string(), s.video.frame(f));
    io::write_wav((dir / "audio.wav").string(), s.audio.samples, s.audio.sample_rate);
    json meta = {{"fps", s.video.fps},
                 {"text", s.label.text},
                 {"language", phonetics::to_string(s.label.language)},
                 {"provenance", to_string(s.provenance)}};
    std::ofstream(dir / "meta.json") << meta.dump(2) << "\n";
  }
  std::ofstream(fs::path(root) / "corpus.json") << index.dump(2) << "\n";
}

std::vector<Sample> load_corpus(const std::string& root) {
  const fs::path root_path(root);
  if (!fs::exists(root_path / "corpus.json"))
    throw IoError("not a corpus directory (missing corpus.json): " + root);
  json index;
  std::ifstream(root_path / "corpus.json") >> index;

  std::map<int, UtteranceLabel> labels;
  for (const auto& j : index["labels"]) {
    UtteranceLabel l{j["class_id"].get<int>(), j["text"].get<std::string>(),
                     phonetics::language_from_string(j["language"].get<std::string>())};
    labels[l.class_id] = l;
  }

  std::vector<Sample> out;
  for (int speaker : index["speakers"].get<std::vector<int>>()) {
    const fs::path sp_dir = root_path / std::to_string(speaker);
    if (!fs::is_directory(sp_dir)) continue;
    for (const auto& class_entry : fs::directory_iterator(sp_dir)) {
      if (!class_entry.is_directory()) continue;
      const int class_id = std::stoi(class_entry.path().filename().string());
      for (const auto& pose_entry : fs::directory_iterator(class_entry.path())) {
        if (!pose_entry.is_directory()) continue;
        const int pose = std::stoi(pose_entry.path().filename().string());
        for (const auto& rep_entry : fs::directory_iterator(pose_entry.path())) {
          if (!rep_entry.is_directory()) continue;
          const int rep = std::stoi(rep_entry.path().filename().string());
          const fs::path dir = rep_entry.path();

          json meta;
          std::ifstream(dir / "meta.json") >> meta;

          std::vector<std::string> frame_files;
          for (const auto& f : fs::directory_iterator(dir)) {
            const std::string name = f.path().filename().string();
            if (name.rfind("frame_", 0) == 0 && name.size() > 4 &&
                name.substr(name.size() - 4) == ".png")
              frame_files.push_back(f.path().string());
          }
          std::sort(frame_files.begin(), frame_files.end());
          if (frame_files.empty()) throw IoError("no frames in " + dir.string());

          Sample s;
          const Tensor first = io::read_png(frame_files[0]);
          s.video.fps = meta["fps"].get<double>();
          s.video.frames =
              Tensor({static_cast<long>(frame_files.size()), first.dim(0), first.dim(1),
                      first.dim(2)});
          for (std::size_t f = 0; f < frame_files.size(); ++f) {
            const Tensor img = f == 0 ? first : io::read_png(frame_files[f]);
            if (!img.same_shape(first)) throw IoError("inconsistent frame geometry in " + dir.string());
            std::copy(img.data(), img.data() + img.numel(),
                      s.video.frames.data() + static_cast<long>(f) * img.numel());
          }
          auto [samples_, rate] = io::read_wav((dir / "audio.wav").string());
          s.audio.samples = std::move(samples_);
          s.audio.sample_rate = rate;
          auto it = labels.find(class_id);
          if (it == labels.end()) throw IoError("sample class not in corpus.json index");
          s.label = it->second;
          s.who = SpeakerPose{speaker, pose};
          s.provenance = provenance_from_string(meta["provenance"].get<std::string>());
          s.rep = rep;
          s.validate();
          out.push_back(std::move(s));
        }
      }
    }
  }
  sort_samples(out);
  return out;
}

}  // namespace vf::corpus
