#include "visemeforge/harness.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <iomanip>
#include <map>
#include <numeric>
#include <ostream>
#include <sstream>

using json = nlohmann::json;

namespace vf::harness {

std::string to_string(ModelVariant v) {
  switch (v) {
    case ModelVariant::model1: return "model1";
    case ModelVariant::model2: return "model2";
    case ModelVariant::model3: return "model3";
  }
  return "model1";
}

ModelVariant variant_from_string(const std::string& s) {
  if (s == "model1") return ModelVariant::model1;
  if (s == "model2") return ModelVariant::model2;
  if (s == "model3") return ModelVariant::model3;
  throw InvalidArgument("unknown model variant: " + s);
}

bool ReportRow::operator==(const ReportRow& o) const {
  return experiment == o.experiment && setting == o.setting && variant == o.variant &&
         metric == o.metric && scope == o.scope && value == o.value && spread == o.spread &&
         views == o.views && paper_ref == o.paper_ref && note == o.note;
}

namespace {

struct PaperCell {
  const char* setting;
  const char* metric;
  const char* scope;
  double m1, m2, m3;
};

// Tables 1/2/4/5 of the source experiments on OuluVS2 (reference metadata).
const PaperCell kSet1Cells[] = {
    {"unseen=1", "top3", "overall", 90.0, 98.3, 86.4},
    {"unseen=2", "top3", "overall", 79.4, 90.0, 76.4},
    {"unseen=3", "top3", "overall", 70.0, 84.4, 67.8},
    {"unseen=4", "top3", "overall", 60.0, 72.2, 60.5},
    {"unseen=10", "top3", "overall", 30.8, 70.0, 34.7},
    {"unseen=1", "top1", "overall", 87.2, 89.7, 81.1},
    {"unseen=2", "top1", "overall", 77.2, 81.4, 70.8},
    {"unseen=3", "top1", "overall", 69.2, 72.8, 62.8},
    {"unseen=4", "top1", "overall", 58.9, 65.3, 54.7},
    {"unseen=10", "top1", "overall", 13.3, 40.0, 17.5},
    {"unseen=1", "top3", "unseen_only", 0.0, 86.1, 5.5},
    {"unseen=2", "top3", "unseen_only", 0.0, 52.8, 1.4},
    {"unseen=3", "top3", "unseen_only", 0.0, 49.1, 0.0},
    {"unseen=4", "top3", "unseen_only", 0.0, 31.2, 8.3},
    {"unseen=1", "top3", "seen_only", 100.0, 99.7, 95.4},
    {"unseen=2", "top3", "seen_only", 99.3, 99.3, 95.1},
    {"unseen=3", "top3", "seen_only", 100.0, 99.6, 96.8},
    {"unseen=4", "top3", "seen_only", 100.0, 99.5, 95.4},
    {"unseen=1", "top1", "unseen_only", 0.0, 33.3, 0.0},
    {"unseen=2", "top1", "unseen_only", 0.0, 23.6, 0.0},
    {"unseen=3", "top1", "unseen_only", 0.0, 21.3, 0.0},
    {"unseen=4", "top1", "unseen_only", 0.0, 16.0, 0.7},
    {"unseen=1", "top1", "seen_only", 96.9, 96.0, 90.1},
    {"unseen=2", "top1", "seen_only", 96.5, 95.8, 88.5},
    {"unseen=3", "top1", "seen_only", 98.8, 94.8, 89.7},
    {"unseen=4", "top1", "seen_only", 98.1, 98.1, 90.7},
};

const PaperCell kSet2Cells[] = {
    {"hindi", "top1", "overall", 72.6, 95.1, 72.6},
    {"hindi", "top3", "overall", 76.7, 99.6, 83.9},
    {"hindi", "top1", "unseen_only", 0.0, 96.3, 7.4},
    {"hindi", "top3", "unseen_only", 0.0, 100.0, 32.4},
    {"hindi", "top1", "seen_only", 94.4, 94.7, 92.2},
    {"hindi", "top3", "seen_only", 99.7, 99.4, 99.4},
};

std::string format_value(double v) {
  std::ostringstream os;
  os << v;
  return os.str();
}

}  // namespace

std::string paper_reference(const std::string& experiment, const std::string& setting,
                            const std::string& variant, const std::string& metric,
                            const std::string& scope) {
  const PaperCell* cells = nullptr;
  std::size_t n = 0;
  if (experiment == "set1") {
    cells = kSet1Cells;
    n = std::size(kSet1Cells);
  } else if (experiment == "set2") {
    cells = kSet2Cells;
    n = std::size(kSet2Cells);
  } else {
    return "";
  }
  for (std::size_t i = 0; i < n; ++i) {
    const PaperCell& c = cells[i];
    if (setting == c.setting && metric == c.metric && scope == c.scope) {
      if (variant == "model1") return format_value(c.m1);
      if (variant == "model2") return format_value(c.m2);
      if (variant == "model3") return format_value(c.m3);
    }
  }
  return "";
}

void validate_no_leakage(const std::vector<corpus::Sample>& training_set,
                         const corpus::ClassPartition& partition,
                         const corpus::SplitSpec& splits) {
  const std::set<int> train_speakers(splits.train.begin(), splits.train.end());
  for (const corpus::Sample& s : training_set) {
    if (s.provenance == corpus::Provenance::real &&
        partition.unseen.count(s.label.class_id))
      throw InvalidArgument("leakage: real sample of unseen class " +
                            std::to_string(s.label.class_id) + " in a training set");
    if (!train_speakers.count(s.who.speaker_id))
      throw InvalidArgument("leakage: speaker " + std::to_string(s.who.speaker_id) +
                            " is not in the training split");
  }
}

std::vector<corpus::Sample> build_training_set(
    ModelVariant variant, const std::vector<corpus::Sample>& full_corpus,
    const corpus::ClassPartition& partition, const corpus::SplitSpec& splits,
    const std::vector<corpus::UtteranceLabel>& label_registry, const std::vector<int>& poses,
    const GeneratorBundle* generators, const phonetics::Phonetics& ph,
    std::vector<synthconcat::ConcatFailure>* concat_failures) {
  const std::set<int> train_speakers(splits.train.begin(), splits.train.end());
  const std::set<int> pose_set(poses.begin(), poses.end());

  std::vector<corpus::Sample> training;
  std::vector<corpus::Sample> still_pool;  // train-split real samples, any label
  for (const corpus::Sample& s : full_corpus) {
    if (s.provenance != corpus::Provenance::real) continue;
    if (!train_speakers.count(s.who.speaker_id)) continue;
    if (!pose_set.count(s.who.pose_deg)) continue;
    still_pool.push_back(s);
    if (partition.seen.count(s.label.class_id)) training.push_back(s);
  }

  if (variant != ModelVariant::model1) {
    if (!generators) throw MissingModelError("variant requires trained generators");
    std::vector<corpus::UtteranceLabel> unseen_labels;
    for (const corpus::UtteranceLabel& l : label_registry)
      if (partition.unseen.count(l.class_id)) unseen_labels.push_back(l);
    std::vector<corpus::SpeakerPose> targets;
    for (int speaker : splits.train)
      for (int pose : poses) targets.push_back(corpus::SpeakerPose{speaker, pose});

    if (variant == ModelVariant::model2) {
      std::vector<corpus::Sample> fake = tcgan::hallucinate_tcgan(
          unseen_labels, targets, still_pool, generators->tcgan_models, &generators->tts,
          generators->hallucination_seed);
      training.insert(training.end(), std::make_move_iterator(fake.begin()),
                      std::make_move_iterator(fake.end()));
    } else {
      synthconcat::ConcatSetResult result = synthconcat::hallucinate_concat_set(
          unseen_labels, targets, generators->viseme_db, ph, generators->concat_cfg,
          still_pool, &generators->tts);
      if (concat_failures)
        concat_failures->insert(concat_failures->end(), result.failures.begin(),
                                result.failures.end());
      training.insert(training.end(), std::make_move_iterator(result.samples.begin()),
                      std::make_move_iterator(result.samples.end()));
    }
  }

  corpus::sort_samples(training);
  validate_no_leakage(training, partition, splits);
  return training;
}

void ExperimentConfig::validate() const {
  if (corpus_root.empty()) corpus_spec.validate();
  if (class_labels.empty()) throw InvalidArgument("no classification labels");
  if (seeds.empty()) throw InvalidArgument("need at least one seed");
  if (view_candidates.empty()) throw InvalidArgument("need at least one view candidate");
  for (const auto& v : view_candidates) v.validate();
  if (variants.empty()) throw InvalidArgument("need at least one variant");
  const double rs = split_ratios[0] + split_ratios[1] + split_ratios[2];
  if (std::fabs(rs - 1.0) > 1e-6) throw InvalidArgument("split ratios must sum to 1");
}

std::vector<corpus::UtteranceLabel> bundled_phrase_labels() {
  using corpus::UtteranceLabel;
  const phonetics::Language en = phonetics::Language::english;
  return {
      UtteranceLabel{0, "excuse me", en},       UtteranceLabel{1, "goodbye", en},
      UtteranceLabel{2, "hello", en},           UtteranceLabel{3, "how are you", en},
      UtteranceLabel{4, "i am sorry", en},      UtteranceLabel{5, "nice to meet you", en},
      UtteranceLabel{6, "see you", en},         UtteranceLabel{7, "thank you", en},
      UtteranceLabel{8, "have a good time", en}, UtteranceLabel{9, "you are welcome", en},
  };
}

std::vector<corpus::UtteranceLabel> bundled_sentence_labels() {
  using corpus::UtteranceLabel;
  const phonetics::Language en = phonetics::Language::english;
  // Short sentences jointly covering the full phoneme inventory, the
  // stand-in for a phonetically rich recording set.
  return {
      UtteranceLabel{100, "the chef saw red fish", en},
      UtteranceLabel{101, "choose a page boy", en},
      UtteranceLabel{102, "her usual measure", en},
      UtteranceLabel{103, "time will tell", en},
      UtteranceLabel{104, "dogs bark loud", en},
      UtteranceLabel{105, "keep them thin", en},
  };
}

std::vector<corpus::UtteranceLabel> bundled_hindi_labels() {
  using corpus::UtteranceLabel;
  const phonetics::Language hi = phonetics::Language::hindi;
  return {
      UtteranceLabel{20, "aap kaisey hain", hi},
      UtteranceLabel{21, "kyaa chal rahaa hai", hi},
      UtteranceLabel{22, "shubh raatri", hi},
  };
}

ExperimentConfig desk_default() {
  ExperimentConfig cfg;
  cfg.class_labels = bundled_phrase_labels();
  cfg.generator_labels = bundled_sentence_labels();
  cfg.hindi_labels = bundled_hindi_labels();

  cfg.corpus_spec.n_speakers = 6;
  cfg.corpus_spec.poses = {0};
  cfg.corpus_spec.reps = 2;
  cfg.corpus_spec.fps = 25.0;
  cfg.corpus_spec.height = 32;
  cfg.corpus_spec.width = 32;
  cfg.corpus_spec.hold_frames = 3;
  cfg.corpus_spec.insert_silence = true;
  cfg.corpus_spec.sample_rate = 8000;
  cfg.corpus_spec.seed = 0;
  cfg.corpus_spec.labels = cfg.class_labels;
  cfg.corpus_spec.labels.insert(cfg.corpus_spec.labels.end(), cfg.generator_labels.begin(),
                                cfg.generator_labels.end());
  cfg.corpus_spec.labels.insert(cfg.corpus_spec.labels.end(), cfg.hindi_labels.begin(),
                                cfg.hindi_labels.end());

  cfg.split_ratios = {4.0 / 6.0, 1.0 / 6.0, 1.0 / 6.0};
  cfg.seeds = {1, 2, 3};
  cfg.view_candidates = {vsr::ViewCombination{{0}}};

  cfg.gan_net.image_h = 32;
  cfg.gan_net.image_w = 32;
  cfg.gan_net.channels = 1;
  cfg.gan_train.steps = 300;
  cfg.gan_train.batch_size = 4;

  cfg.vsr_net.frame_dim = 32 * 32;
  cfg.vsr_train.epochs = 60;
  cfg.vsr_train.patience = 10;

  cfg.concat_cfg.fps = cfg.corpus_spec.fps;
  cfg.concat_cfg.hold_frames = cfg.corpus_spec.hold_frames;
  cfg.concat_cfg.insert_silence = cfg.corpus_spec.insert_silence;
  return cfg;
}

GeneratorBundle train_generators(const std::vector<corpus::Sample>& corpus_all,
                                 const corpus::SplitSpec& splits,
                                 const std::set<int>& generator_class_ids,
                                 const std::vector<int>& poses,
                                 const ExperimentConfig& cfg, std::uint64_t seed,
                                 const phonetics::Phonetics& ph, std::ostream* log) {
  const std::set<int> train_speakers(splits.train.begin(), splits.train.end());

  GeneratorBundle bundle;
  bundle.concat_cfg = cfg.concat_cfg;
  bundle.tts = corpus::synthetic_tts(ph, cfg.corpus_spec);
  bundle.hallucination_seed = seed;

  std::vector<corpus::Sample> db_samples;
  for (int pose : poses) {
    std::vector<corpus::Sample> train_videos;
    for (const corpus::Sample& s : corpus_all) {
      if (s.provenance != corpus::Provenance::real) continue;
      if (!train_speakers.count(s.who.speaker_id)) continue;
      if (s.who.pose_deg != pose) continue;
      if (!generator_class_ids.count(s.label.class_id)) continue;
      train_videos.push_back(s);
      db_samples.push_back(s);
    }
    if (train_videos.empty())
      throw InvalidArgument("no generator-training samples at pose " + std::to_string(pose));

    tcgan::TcganNetConfig net = cfg.gan_net;
    tcgan::TcganTrainConfig train_cfg = cfg.gan_train;
    train_cfg.seed = Rng::mix(seed, {static_cast<std::uint64_t>(pose), 0x6a4});
    auto gen = std::make_shared<tcgan::Generator>(net, Rng::mix(seed, {1, static_cast<std::uint64_t>(pose)}));
    tcgan::FrameDiscriminator d_img(net, Rng::mix(seed, {2, static_cast<std::uint64_t>(pose)}));
    tcgan::SequenceDiscriminator d_seq(net, Rng::mix(seed, {3, static_cast<std::uint64_t>(pose)}));
    tcgan::TcganTrainer trainer(*gen, d_img, d_seq, train_cfg);
    const auto history = trainer.train(train_videos, nullptr);
    if (log && !history.empty())
      *log << "[tcgan pose " << pose << " seed " << seed << "] steps=" << history.size()
           << " l1 " << history.front().loss_l1 << " -> " << history.back().loss_l1 << "\n";
    bundle.tcgan_models.by_pose[pose] = std::move(gen);
  }

  const auto annotations = phonetics::synthetic_annotations(
      db_samples, ph, cfg.corpus_spec.hold_frames, cfg.corpus_spec.insert_silence);
  bundle.viseme_db = phonetics::build_viseme_db(db_samples, annotations);
  return bundle;
}

namespace {

struct ScopeAccus {
  std::optional<double> top1_overall, top3_overall;
  std::optional<double> top1_seen, top3_seen;
  std::optional<double> top1_unseen, top3_unseen;
};

ScopeAccus evaluate_predictions(
    const std::vector<vsr::ViewItem>& items,
    const std::function<vsr::Prediction(const vsr::ViewItem&)>& predict,
    const corpus::ClassPartition& partition) {
  std::vector<vsr::Prediction> all_preds;
  std::vector<int> all_truth;
  std::vector<vsr::Prediction> seen_preds, unseen_preds;
  std::vector<int> seen_truth, unseen_truth;
  for (const vsr::ViewItem& item : items) {
    vsr::Prediction p = predict(item);
    all_truth.push_back(item.class_id);
    if (partition.seen.count(item.class_id)) {
      seen_preds.push_back(p);
      seen_truth.push_back(item.class_id);
    } else if (partition.unseen.count(item.class_id)) {
      unseen_preds.push_back(p);
      unseen_truth.push_back(item.class_id);
    }
    all_preds.push_back(std::move(p));
  }
  ScopeAccus acc;
  if (!all_preds.empty()) {
    acc.top1_overall = vsr::top_k_accuracy(all_preds, all_truth, 1);
    acc.top3_overall = vsr::top_k_accuracy(all_preds, all_truth, 3);
  }
  if (!seen_preds.empty()) {
    acc.top1_seen = vsr::top_k_accuracy(seen_preds, seen_truth, 1);
    acc.top3_seen = vsr::top_k_accuracy(seen_preds, seen_truth, 3);
  }
  if (!unseen_preds.empty()) {
    acc.top1_unseen = vsr::top_k_accuracy(unseen_preds, unseen_truth, 1);
    acc.top3_unseen = vsr::top_k_accuracy(unseen_preds, unseen_truth, 3);
  }
  return acc;
}

struct VariantSeedResult {
  ScopeAccus acc;
  std::string views;
  std::string note;
};

std::vector<corpus::Sample> filter_real(const std::vector<corpus::Sample>& corpus_all,
                                        const std::vector<int>& speakers,
                                        const std::set<int>& class_ids) {
  const std::set<int> speaker_set(speakers.begin(), speakers.end());
  std::vector<corpus::Sample> out;
  for (const corpus::Sample& s : corpus_all)
    if (s.provenance == corpus::Provenance::real && speaker_set.count(s.who.speaker_id) &&
        class_ids.count(s.label.class_id))
      out.push_back(s);
  return out;
}

VariantSeedResult run_variant(const ExperimentConfig& cfg, const phonetics::Phonetics& ph,
                              const std::vector<corpus::Sample>& corpus_all,
                              const corpus::SplitSpec& splits,
                              const corpus::ClassPartition& partition,
                              const std::vector<corpus::UtteranceLabel>& registry,
                              ModelVariant variant, const GeneratorBundle& bundle,
                              std::uint64_t seed, std::ostream* log) {
  std::set<int> registry_ids;
  std::vector<int> class_id_list;
  for (const auto& l : registry) {
    registry_ids.insert(l.class_id);
    class_id_list.push_back(l.class_id);
  }

  std::vector<int> pose_union;
  for (const auto& combo : cfg.view_candidates)
    for (int p : combo.poses)
      if (std::find(pose_union.begin(), pose_union.end(), p) == pose_union.end())
        pose_union.push_back(p);
  std::sort(pose_union.begin(), pose_union.end());

  std::vector<synthconcat::ConcatFailure> concat_failures;
  const std::vector<corpus::Sample> training =
      build_training_set(variant, corpus_all, partition, splits, registry, pose_union,
                         &bundle, ph, &concat_failures);
  if (log)
    for (const auto& f : concat_failures)
      *log << "[concat skip] label '" << f.label.text << "' speaker " << f.who.speaker_id
           << ": " << f.reason << "\n";

  const std::vector<corpus::Sample> val_samples =
      filter_real(corpus_all, splits.val, registry_ids);
  const std::vector<corpus::Sample> test_samples =
      filter_real(corpus_all, splits.test, registry_ids);

  VariantSeedResult result;
  if (!concat_failures.empty())
    result.note = "concat_failures=" + std::to_string(concat_failures.size());

  if (training.empty()) {
    // Cold-start fallback: nothing to train on, evaluate the uniform prior.
    result.note = result.note.empty() ? "cold_start_prior" : result.note + ";cold_start_prior";
    result.views = cfg.view_candidates.front().str();
    const auto test_items = vsr::group_views(test_samples, cfg.view_candidates.front());
    result.acc = evaluate_predictions(
        test_items,
        [&](const vsr::ViewItem&) { return vsr::uniform_prediction(class_id_list); },
        partition);
    return result;
  }

  // Train one model per view candidate, keep the validation winner.
  const corpus::VideoClip& probe = corpus_all.front().video;
  const long frame_dim = probe.channels() * probe.height() * probe.width();
  std::vector<std::shared_ptr<vsr::VsrModel>> models;
  std::vector<double> val_scores;
  for (const vsr::ViewCombination& combo : cfg.view_candidates) {
    vsr::VsrNetConfig net = cfg.vsr_net;
    net.views = combo;
    net.frame_dim = frame_dim;
    auto model = std::make_shared<vsr::VsrModel>(
        net, class_id_list,
        Rng::mix(seed, {0x7571, static_cast<std::uint64_t>(models.size())}));
    vsr::VsrTrainConfig tc = cfg.vsr_train;
    tc.seed = Rng::mix(seed, {0x7572, static_cast<std::uint64_t>(models.size())});
    const auto train_items = vsr::group_views(training, combo);
    const auto val_items = vsr::group_views(val_samples, combo);
    const auto history = vsr::train_vsr(*model, train_items, val_items, tc);
    const double score = history.val_top1.empty()
                             ? 0.0
                             : *std::max_element(history.val_top1.begin(),
                                                 history.val_top1.end());
    if (log)
      *log << "[vsr " << to_string(variant) << " views " << combo.str() << " seed " << seed
           << "] epochs=" << history.train_loss.size() << " val_top1=" << score << "\n";
    models.push_back(std::move(model));
    val_scores.push_back(score);
  }
  const std::size_t win = vsr::select_view_combination_index(cfg.view_candidates, val_scores);
  result.views = cfg.view_candidates[win].str();

  const auto test_items = vsr::group_views(test_samples, cfg.view_candidates[win]);
  const vsr::VsrModel& winner = *models[win];
  result.acc = evaluate_predictions(
      test_items, [&](const vsr::ViewItem& item) { return winner.predict(item.views); },
      partition);
  return result;
}

void append_rows(std::vector<ReportRow>& rows, const std::string& experiment,
                 const std::string& setting, ModelVariant variant,
                 const std::vector<VariantSeedResult>& seed_results) {
  struct Cell {
    const char* metric;
    const char* scope;
    std::optional<double> ScopeAccus::*field;
  };
  static const Cell kCells[] = {
      {"top1", "overall", &ScopeAccus::top1_overall},
      {"top3", "overall", &ScopeAccus::top3_overall},
      {"top1", "seen_only", &ScopeAccus::top1_seen},
      {"top3", "seen_only", &ScopeAccus::top3_seen},
      {"top1", "unseen_only", &ScopeAccus::top1_unseen},
      {"top3", "unseen_only", &ScopeAccus::top3_unseen},
  };
  const std::string variant_name = to_string(variant);
  for (const Cell& cell : kCells) {
    std::vector<double> values;
    for (const VariantSeedResult& r : seed_results)
      if ((r.acc.*cell.field).has_value()) values.push_back(*(r.acc.*cell.field) * 100.0);
    if (values.empty()) continue;
    const double mean =
        std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
    const double mx = *std::max_element(values.begin(), values.end());
    const double mn = *std::min_element(values.begin(), values.end());

    ReportRow row;
    row.experiment = experiment;
    row.setting = setting;
    row.variant = variant_name;
    row.metric = cell.metric;
    row.scope = cell.scope;
    row.value = mean;
    row.spread = (mx - mn) / 2.0;
    std::string views;
    std::string note;
    for (const VariantSeedResult& r : seed_results) {
      if (!r.views.empty() && views.find(r.views) == std::string::npos)
        views += (views.empty() ? "" : "|") + r.views;
      if (!r.note.empty() && note.find(r.note) == std::string::npos)
        note += (note.empty() ? "" : "|") + r.note;
    }
    row.views = views;
    row.note = note;
    row.paper_ref = paper_reference(experiment, setting, variant_name, cell.metric, cell.scope);
    rows.push_back(std::move(row));
  }
}

std::vector<corpus::Sample> obtain_corpus(const ExperimentConfig& cfg,
                                          const phonetics::Phonetics& ph) {
  if (!cfg.corpus_root.empty()) return corpus::load_corpus(cfg.corpus_root);
  return corpus::generate_synthetic_corpus(cfg.corpus_spec, ph);
}

std::vector<ReportRow> run_experiment(
    const ExperimentConfig& cfg, const phonetics::Phonetics& ph, const std::string& name,
    const std::vector<std::pair<std::string, std::function<corpus::ClassPartition(std::uint64_t)>>>&
        settings,
    const std::vector<corpus::UtteranceLabel>& registry, std::ostream* log) {
  cfg.validate();
  const std::vector<corpus::Sample> corpus_all = obtain_corpus(cfg, ph);

  std::set<int> speakers;
  for (const corpus::Sample& s : corpus_all) speakers.insert(s.who.speaker_id);
  const corpus::SplitSpec splits = corpus::make_speaker_splits(
      std::vector<int>(speakers.begin(), speakers.end()), cfg.split_ratios, cfg.split_seed);

  std::set<int> generator_ids;
  for (const auto& l : cfg.generator_labels) generator_ids.insert(l.class_id);
  std::vector<int> pose_union;
  for (const auto& combo : cfg.view_candidates)
    for (int p : combo.poses)
      if (std::find(pose_union.begin(), pose_union.end(), p) == pose_union.end())
        pose_union.push_back(p);
  std::sort(pose_union.begin(), pose_union.end());

  // The generator stack is partition-independent: train once per seed.
  std::map<std::uint64_t, GeneratorBundle> bundles;
  const bool needs_generators =
      std::any_of(cfg.variants.begin(), cfg.variants.end(),
                  [](ModelVariant v) { return v != ModelVariant::model1; });
  if (needs_generators) {
    // Generator training sets never contain unseen-class real samples by
    // construction (they use the generator-label utterances), but assert it
    // against every setting's partition below via validate_no_leakage.
    for (std::uint64_t seed : cfg.seeds)
      bundles.emplace(seed, train_generators(corpus_all, splits, generator_ids, pose_union,
                                             cfg, seed, ph, log));
  } else {
    for (std::uint64_t seed : cfg.seeds) bundles.emplace(seed, GeneratorBundle{});
  }

  std::vector<ReportRow> rows;
  for (const auto& [setting_name, make_partition] : settings) {
    std::map<ModelVariant, std::vector<VariantSeedResult>> by_variant;
    for (std::uint64_t seed : cfg.seeds) {
      const corpus::ClassPartition partition = make_partition(seed);
      if (needs_generators) {
        std::vector<corpus::Sample> gen_train;
        const std::set<int> train_speakers(splits.train.begin(), splits.train.end());
        for (const corpus::Sample& s : corpus_all)
          if (s.provenance == corpus::Provenance::real &&
              train_speakers.count(s.who.speaker_id) &&
              generator_ids.count(s.label.class_id))
            gen_train.push_back(s);
        validate_no_leakage(gen_train, partition, splits);
      }
      for (ModelVariant variant : cfg.variants) {
        if (log)
          *log << "== " << name << " " << setting_name << " seed " << seed << " "
               << to_string(variant) << " ==\n";
        by_variant[variant].push_back(run_variant(cfg, ph, corpus_all, splits, partition,
                                                  registry, variant, bundles.at(seed), seed,
                                                  log));
      }
    }
    for (ModelVariant variant : cfg.variants)
      append_rows(rows, name, setting_name, variant, by_variant[variant]);
  }
  return rows;
}

}  // namespace

std::vector<ReportRow> run_set1(const ExperimentConfig& cfg, const phonetics::Phonetics& ph,
                                std::ostream* log) {
  std::vector<std::pair<std::string, std::function<corpus::ClassPartition(std::uint64_t)>>>
      settings;
  const std::vector<corpus::UtteranceLabel> registry = cfg.class_labels;
  for (long n_unseen : cfg.unseen_sweep) {
    if (n_unseen < 0 || n_unseen > static_cast<long>(registry.size()))
      throw InvalidArgument("unseen sweep value out of range: " + std::to_string(n_unseen));
    settings.emplace_back(
        "unseen=" + std::to_string(n_unseen), [&registry, n_unseen](std::uint64_t seed) {
          return corpus::partition_classes(registry, static_cast<std::size_t>(n_unseen), seed);
        });
  }
  return run_experiment(cfg, ph, "set1", settings, registry, log);
}

std::vector<ReportRow> run_set2(const ExperimentConfig& cfg, const phonetics::Phonetics& ph,
                                std::ostream* log) {
  if (cfg.hindi_labels.empty()) throw InvalidArgument("set2 requires hindi labels");
  std::vector<corpus::UtteranceLabel> registry = cfg.class_labels;
  registry.insert(registry.end(), cfg.hindi_labels.begin(), cfg.hindi_labels.end());

  corpus::ClassPartition partition;
  for (const auto& l : cfg.class_labels) partition.seen.insert(l.class_id);
  for (const auto& l : cfg.hindi_labels) partition.unseen.insert(l.class_id);

  std::vector<std::pair<std::string, std::function<corpus::ClassPartition(std::uint64_t)>>>
      settings;
  settings.emplace_back("hindi", [partition](std::uint64_t) { return partition; });
  return run_experiment(cfg, ph, "set2", settings, registry, log);
}

namespace {

std::string csv_escape(std::string s) {
  for (char& c : s)
    if (c == ',' || c == '\n') c = ';';
  return s;
}

}  // namespace

void write_report(const std::vector<ReportRow>& rows, const std::string& path_prefix) {
  if (rows.empty()) throw InvalidArgument("write_report: no rows");

  std::ofstream csv(path_prefix + ".csv");
  if (!csv) throw IoError("cannot write " + path_prefix + ".csv");
  csv << "experiment,setting,variant,metric,scope,value,spread,views,paper_ref,note\n";
  csv << std::setprecision(17);
  for (const ReportRow& r : rows)
    csv << csv_escape(r.experiment) << "," << csv_escape(r.setting) << ","
        << csv_escape(r.variant) << "," << csv_escape(r.metric) << "," << csv_escape(r.scope)
        << "," << r.value << "," << r.spread << "," << csv_escape(r.views) << ","
        << csv_escape(r.paper_ref) << "," << csv_escape(r.note) << "\n";
  if (!csv) throw IoError("failed writing " + path_prefix + ".csv");

  // Markdown rendering grouped like the paper's tables: one table per
  // (experiment, setting, metric), scopes as rows, variants as columns.
  std::ofstream md(path_prefix + ".md");
  if (!md) throw IoError("cannot write " + path_prefix + ".md");
  md << "# Experiment report\n";
  std::vector<std::string> variants;
  for (const ReportRow& r : rows)
    if (std::find(variants.begin(), variants.end(), r.variant) == variants.end())
      variants.push_back(r.variant);

  std::vector<std::tuple<std::string, std::string, std::string>> groups;
  for (const ReportRow& r : rows) {
    const auto key = std::make_tuple(r.experiment, r.setting, r.metric);
    if (std::find(groups.begin(), groups.end(), key) == groups.end()) groups.push_back(key);
  }
  md << std::fixed << std::setprecision(1);
  for (const auto& [experiment, setting, metric] : groups) {
    md << "\n## " << experiment << " / " << setting << " / " << metric << "\n\n";
    md << "| scope |";
    for (const auto& v : variants) md << " " << v << " |";
    md << "\n|---|";
    for (std::size_t i = 0; i < variants.size(); ++i) md << "---|";
    md << "\n";
    for (const char* scope : {"overall", "seen_only", "unseen_only"}) {
      bool any = false;
      std::string line = "| " + std::string(scope) + " |";
      for (const auto& v : variants) {
        const ReportRow* found = nullptr;
        for (const ReportRow& r : rows)
          if (r.experiment == experiment && r.setting == setting && r.metric == metric &&
              r.scope == scope && r.variant == v) {
            found = &r;
            break;
          }
        if (found) {
          any = true;
          std::ostringstream cell;
          cell << std::fixed << std::setprecision(1) << found->value;
          if (found->spread > 0.0) cell << " ±" << found->spread;
          if (!found->paper_ref.empty()) cell << " (paper: " << found->paper_ref << ")";
          line += " " + cell.str() + " |";
        } else {
          line += " - |";
        }
      }
      if (any) md << line << "\n";
    }
  }

  // Winning view combinations.
  md << "\n## Selected view combinations\n\n| experiment | setting |";
  for (const auto& v : variants) md << " " << v << " |";
  md << "\n|---|---|";
  for (std::size_t i = 0; i < variants.size(); ++i) md << "---|";
  md << "\n";
  std::vector<std::pair<std::string, std::string>> vgroups;
  for (const ReportRow& r : rows) {
    const auto key = std::make_pair(r.experiment, r.setting);
    if (std::find(vgroups.begin(), vgroups.end(), key) == vgroups.end()) vgroups.push_back(key);
  }
  for (const auto& [experiment, setting] : vgroups) {
    md << "| " << experiment << " | " << setting << " |";
    for (const auto& v : variants) {
      std::string views = "-";
      for (const ReportRow& r : rows)
        if (r.experiment == experiment && r.setting == setting && r.variant == v &&
            !r.views.empty()) {
          views = r.views;
          break;
        }
      md << " " << views << " |";
    }
    md << "\n";
  }
  if (!md) throw IoError("failed writing " + path_prefix + ".md");
}

std::vector<ReportRow> parse_report_csv(const std::string& csv_path) {
  std::ifstream is(csv_path);
  if (!is) throw IoError("cannot read " + csv_path);
  std::string line;
  if (!std::getline(is, line)) throw IoError("empty report csv: " + csv_path);
  std::vector<ReportRow> rows;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::string cur;
    for (char c : line) {
      if (c == ',') {
        fields.push_back(cur);
        cur.clear();
      } else {
        cur.push_back(c);
      }
    }
    fields.push_back(cur);
    if (fields.size() != 10) throw IoError("malformed report row: " + line);
    ReportRow r;
    r.experiment = fields[0];
    r.setting = fields[1];
    r.variant = fields[2];
    r.metric = fields[3];
    r.scope = fields[4];
    r.value = std::stod(fields[5]);
    r.spread = std::stod(fields[6]);
    r.views = fields[7];
    r.paper_ref = fields[8];
    r.note = fields[9];
    rows.push_back(std::move(r));
  }
  return rows;
}

void write_eval_csv(const std::vector<ReportRow>& rows, const std::string& path) {
  if (rows.empty()) throw InvalidArgument("write_eval_csv: no rows");
  std::ofstream os(path);
  if (!os) throw IoError("cannot write " + path);
  os << "model_variant,split,classes,k,accuracy\n";
  os << std::setprecision(17);
  for (const ReportRow& r : rows) {
    const long k = r.metric == "top1" ? 1 : 3;
    os << r.variant << ",test," << r.scope << "," << k << "," << r.value << "\n";
  }
  if (!os) throw IoError("failed writing " + path);
}

namespace {

json label_to_json(const corpus::UtteranceLabel& l) {
  return {{"class_id", l.class_id},
          {"text", l.text},
          {"language", phonetics::to_string(l.language)}};
}

corpus::UtteranceLabel label_from_json(const json& j) {
  return corpus::UtteranceLabel{
      j.at("class_id").get<int>(), j.at("text").get<std::string>(),
      phonetics::language_from_string(j.at("language").get<std::string>())};
}

std::vector<corpus::UtteranceLabel> labels_from_json(const json& j) {
  std::vector<corpus::UtteranceLabel> out;
  for (const auto& e : j) out.push_back(label_from_json(e));
  return out;
}

}  // namespace

ExperimentConfig config_from_json_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open config: " + path);
  json j;
  try {
    is >> j;
  } catch (const json::exception& e) {
    throw IoError("malformed config json: " + std::string(e.what()));
  }

  ExperimentConfig cfg = desk_default();
  if (j.contains("corpus_root")) cfg.corpus_root = j["corpus_root"].get<std::string>();
  if (j.contains("class_labels")) cfg.class_labels = labels_from_json(j["class_labels"]);
  if (j.contains("generator_labels"))
    cfg.generator_labels = labels_from_json(j["generator_labels"]);
  if (j.contains("hindi_labels")) cfg.hindi_labels = labels_from_json(j["hindi_labels"]);
  if (j.contains("corpus")) {
    const json& c = j["corpus"];
    auto& s = cfg.corpus_spec;
    s.n_speakers = c.value("n_speakers", s.n_speakers);
    s.poses = c.value("poses", s.poses);
    s.reps = c.value("reps", s.reps);
    s.fps = c.value("fps", s.fps);
    s.height = c.value("height", s.height);
    s.width = c.value("width", s.width);
    s.seed = c.value("seed", s.seed);
    s.hold_frames = c.value("hold_frames", s.hold_frames);
    s.insert_silence = c.value("insert_silence", s.insert_silence);
    s.sample_rate = c.value("sample_rate", s.sample_rate);
  }
  // Keep the corpus label list in sync with the (possibly overridden) sets.
  cfg.corpus_spec.labels = cfg.class_labels;
  cfg.corpus_spec.labels.insert(cfg.corpus_spec.labels.end(), cfg.generator_labels.begin(),
                                cfg.generator_labels.end());
  cfg.corpus_spec.labels.insert(cfg.corpus_spec.labels.end(), cfg.hindi_labels.begin(),
                                cfg.hindi_labels.end());

  if (j.contains("split_ratios")) {
    const auto v = j["split_ratios"].get<std::vector<double>>();
    if (v.size() != 3) throw InvalidArgument("split_ratios must have 3 entries");
    cfg.split_ratios = {v[0], v[1], v[2]};
  }
  if (j.contains("split_seed")) cfg.split_seed = j["split_seed"].get<std::uint64_t>();
  if (j.contains("unseen_sweep")) cfg.unseen_sweep = j["unseen_sweep"].get<std::vector<long>>();
  if (j.contains("seeds")) cfg.seeds = j["seeds"].get<std::vector<std::uint64_t>>();
  if (j.contains("view_candidates")) {
    cfg.view_candidates.clear();
    for (const auto& v : j["view_candidates"])
      cfg.view_candidates.push_back(vsr::ViewCombination{v.get<std::vector<int>>()});
  }
  if (j.contains("variants")) {
    cfg.variants.clear();
    for (const auto& v : j["variants"])
      cfg.variants.push_back(variant_from_string(v.get<std::string>()));
  }
  if (j.contains("gan_net")) {
    const json& g = j["gan_net"];
    auto& n = cfg.gan_net;
    n.image_h = g.value("image_h", n.image_h);
    n.image_w = g.value("image_w", n.image_w);
    n.channels = g.value("channels", n.channels);
    n.d_identity = g.value("d_identity", n.d_identity);
    n.d_audio = g.value("d_audio", n.d_audio);
    n.d_noise = g.value("d_noise", n.d_noise);
    n.enc_base = g.value("enc_base", n.enc_base);
    n.audio_channels = g.value("audio_channels", n.audio_channels);
    n.disc_base = g.value("disc_base", n.disc_base);
    n.seq_hidden = g.value("seq_hidden", n.seq_hidden);
    n.fps = g.value("fps", n.fps);
    n.overlap = g.value("overlap", n.overlap);
    n.clamp_eps = g.value("clamp_eps", n.clamp_eps);
  }
  if (j.contains("gan_train")) {
    const json& g = j["gan_train"];
    auto& t = cfg.gan_train;
    t.steps = g.value("steps", t.steps);
    t.batch_size = g.value("batch_size", t.batch_size);
    t.lr_gen = g.value("lr_gen", t.lr_gen);
    t.lr_disc = g.value("lr_disc", t.lr_disc);
    t.beta1 = g.value("beta1", t.beta1);
    t.beta2 = g.value("beta2", t.beta2);
    t.lambda_rec = g.value("lambda_rec", t.lambda_rec);
    t.disc_steps_per_gen = g.value("disc_steps_per_gen", t.disc_steps_per_gen);
  }
  if (j.contains("vsr_net")) {
    const json& g = j["vsr_net"];
    auto& n = cfg.vsr_net;
    n.encoder = g.value("encoder", n.encoder);
    n.view_hidden = g.value("view_hidden", n.view_hidden);
    n.fusion_hidden = g.value("fusion_hidden", n.fusion_hidden);
    n.shared_encoder = g.value("shared_encoder", n.shared_encoder);
  }
  if (j.contains("vsr_train")) {
    const json& g = j["vsr_train"];
    auto& t = cfg.vsr_train;
    t.epochs = g.value("epochs", t.epochs);
    t.batch_size = g.value("batch_size", t.batch_size);
    t.lr = g.value("lr", t.lr);
    t.beta1 = g.value("beta1", t.beta1);
    t.beta2 = g.value("beta2", t.beta2);
    t.patience = g.value("patience", t.patience);
    t.balance_classes = g.value("balance_classes", t.balance_classes);
  }
  if (j.contains("concat")) {
    const json& g = j["concat"];
    auto& c = cfg.concat_cfg;
    c.hold_frames = g.value("hold_frames", c.hold_frames);
    c.insert_silence = g.value("insert_silence", c.insert_silence);
    c.fps = g.value("fps", c.fps);
  }
  cfg.validate();
  return cfg;
}

void config_to_json_file(const ExperimentConfig& cfg, const std::string& path) {
  json j;
  j["corpus_root"] = cfg.corpus_root;
  json class_labels = json::array(), generator_labels = json::array(),
       hindi_labels = json::array();
  for (const auto& l : cfg.class_labels) class_labels.push_back(label_to_json(l));
  for (const auto& l : cfg.generator_labels) generator_labels.push_back(label_to_json(l));
  for (const auto& l : cfg.hindi_labels) hindi_labels.push_back(label_to_json(l));
  j["class_labels"] = class_labels;
  j["generator_labels"] = generator_labels;
  j["hindi_labels"] = hindi_labels;
  j["corpus"] = {{"n_speakers", cfg.corpus_spec.n_speakers},
                 {"poses", cfg.corpus_spec.poses},
                 {"reps", cfg.corpus_spec.reps},
                 {"fps", cfg.corpus_spec.fps},
                 {"height", cfg.corpus_spec.height},
                 {"width", cfg.corpus_spec.width},
                 {"seed", cfg.corpus_spec.seed},
                 {"hold_frames", cfg.corpus_spec.hold_frames},
                 {"insert_silence", cfg.corpus_spec.insert_silence},
                 {"sample_rate", cfg.corpus_spec.sample_rate}};
  j["split_ratios"] = cfg.split_ratios;
  j["split_seed"] = cfg.split_seed;
  j["unseen_sweep"] = cfg.unseen_sweep;
  j["seeds"] = cfg.seeds;
  json candidates = json::array();
  for (const auto& v : cfg.view_candidates) candidates.push_back(v.poses);
  j["view_candidates"] = candidates;
  json variants = json::array();
  for (const auto& v : cfg.variants) variants.push_back(to_string(v));
  j["variants"] = variants;
  j["gan_net"] = {{"image_h", cfg.gan_net.image_h},
                  {"image_w", cfg.gan_net.image_w},
                  {"channels", cfg.gan_net.channels},
                  {"d_identity", cfg.gan_net.d_identity},
                  {"d_audio", cfg.gan_net.d_audio},
                  {"d_noise", cfg.gan_net.d_noise},
                  {"enc_base", cfg.gan_net.enc_base},
                  {"audio_channels", cfg.gan_net.audio_channels},
                  {"disc_base", cfg.gan_net.disc_base},
                  {"seq_hidden", cfg.gan_net.seq_hidden},
                  {"fps", cfg.gan_net.fps},
                  {"overlap", cfg.gan_net.overlap},
                  {"clamp_eps", cfg.gan_net.clamp_eps}};
  j["gan_train"] = {{"steps", cfg.gan_train.steps},
                    {"batch_size", cfg.gan_train.batch_size},
                    {"lr_gen", cfg.gan_train.lr_gen},
                    {"lr_disc", cfg.gan_train.lr_disc},
                    {"beta1", cfg.gan_train.beta1},
                    {"beta2", cfg.gan_train.beta2},
                    {"lambda_rec", cfg.gan_train.lambda_rec},
                    {"disc_steps_per_gen", cfg.gan_train.disc_steps_per_gen}};
  j["vsr_net"] = {{"encoder", cfg.vsr_net.encoder},
                  {"view_hidden", cfg.vsr_net.view_hidden},
                  {"fusion_hidden", cfg.vsr_net.fusion_hidden},
                  {"shared_encoder", cfg.vsr_net.shared_encoder}};
  j["vsr_train"] = {{"epochs", cfg.vsr_train.epochs},
                    {"batch_size", cfg.vsr_train.batch_size},
                    {"lr", cfg.vsr_train.lr},
                    {"beta1", cfg.vsr_train.beta1},
                    {"beta2", cfg.vsr_train.beta2},
                    {"patience", cfg.vsr_train.patience},
                    {"balance_classes", cfg.vsr_train.balance_classes}};
  j["concat"] = {{"hold_frames", cfg.concat_cfg.hold_frames},
                 {"insert_silence", cfg.concat_cfg.insert_silence},
                 {"fps", cfg.concat_cfg.fps}};
  std::ofstream os(path);
  if (!os) throw IoError("cannot write config: " + path);
  os << j.dump(2) << "\n";
}

}  // namespace vf::harness
