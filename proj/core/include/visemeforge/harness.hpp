#pragma once

#include <array>
#include <iosfwd>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "visemeforge/corpus.hpp"
#include "visemeforge/synthconcat.hpp"
#include "visemeforge/tcgan.hpp"
#include "visemeforge/viseme_db.hpp"
#include "visemeforge/vsr.hpp"

namespace vf::harness {

enum class ModelVariant { model1, model2, model3 };
std::string to_string(ModelVariant v);
ModelVariant variant_from_string(const std::string& s);

struct ReportRow {
  std::string experiment;  // "set1" | "set2"
  std::string setting;     // e.g. "unseen=2" | "hindi"
  std::string variant;     // "model1" | "model2" | "model3"
  std::string metric;      // "top1" | "top3"
  std::string scope;       // "overall" | "seen_only" | "unseen_only"
  double value = 0.0;      // percent
  double spread = 0.0;     // half-range across seeds, percent
  std::string views;       // winning view combination, e.g. "0+30"
  std::string paper_ref;   // registered paper value, "" when none
  std::string note;

  bool operator==(const ReportRow& o) const;
};

// Registered values from the paper's result tables; reference metadata only,
// never an acceptance target.
std::string paper_reference(const std::string& experiment, const std::string& setting,
                            const std::string& variant, const std::string& metric,
                            const std::string& scope);

// Trained data-generation models sharing the classifier's speaker splits.
struct GeneratorBundle {
  tcgan::TcganModelRegistry tcgan_models;
  phonetics::SpeakerVisemeDB viseme_db;
  corpus::TtsAdapter tts;
  synthconcat::ConcatConfig concat_cfg;
  std::uint64_t hallucination_seed = 0;
};

// Throws InvalidArgument when the set contains a real sample of an unseen
// class or any sample from a non-training speaker.
void validate_no_leakage(const std::vector<corpus::Sample>& training_set,
                         const corpus::ClassPartition& partition,
                         const corpus::SplitSpec& splits);

// Assembles a variant's training set: real train-split samples of seen
// classes, plus the variant's hallucinated unseen-class samples (train-split
// speaker identities only). The result always passes validate_no_leakage.
std::vector<corpus::Sample> build_training_set(
    ModelVariant variant, const std::vector<corpus::Sample>& full_corpus,
    const corpus::ClassPartition& partition, const corpus::SplitSpec& splits,
    const std::vector<corpus::UtteranceLabel>& label_registry, const std::vector<int>& poses,
    const GeneratorBundle* generators, const phonetics::Phonetics& ph,
    std::vector<synthconcat::ConcatFailure>* concat_failures = nullptr);

struct ExperimentConfig {
  corpus::SyntheticCorpusSpec corpus_spec;  // used when corpus_root is empty
  std::string corpus_root;                  // ingest an on-disk corpus instead
  std::vector<corpus::UtteranceLabel> class_labels;      // classification classes
  std::vector<corpus::UtteranceLabel> generator_labels;  // generator-training utterances
  std::vector<corpus::UtteranceLabel> hindi_labels;      // set2 unseen classes
  std::array<double, 3> split_ratios{4.0 / 6.0, 1.0 / 6.0, 1.0 / 6.0};
  std::uint64_t split_seed = 0;
  std::vector<long> unseen_sweep{1, 2, 3, 4, 10};
  std::vector<std::uint64_t> seeds{1, 2, 3};
  std::vector<vsr::ViewCombination> view_candidates{vsr::ViewCombination{{0}}};
  std::vector<ModelVariant> variants{ModelVariant::model1, ModelVariant::model2,
                                     ModelVariant::model3};
  tcgan::TcganNetConfig gan_net;
  tcgan::TcganTrainConfig gan_train;
  vsr::VsrNetConfig vsr_net;  // views/frame_dim are overridden per run
  vsr::VsrTrainConfig vsr_train;
  synthconcat::ConcatConfig concat_cfg;

  void validate() const;
};

// Bundled utterance sets: the ten phrase classes (ids 0-9), the phonetically
// rich generator-training sentences (ids 100+), and the three Hindi phrases
// (ids 20-22).
std::vector<corpus::UtteranceLabel> bundled_phrase_labels();
std::vector<corpus::UtteranceLabel> bundled_sentence_labels();
std::vector<corpus::UtteranceLabel> bundled_hindi_labels();

// Desk-scale defaults: 6 speakers, pose 0, CPU-sized networks.
ExperimentConfig desk_default();

ExperimentConfig config_from_json_file(const std::string& path);
void config_to_json_file(const ExperimentConfig& cfg, const std::string& path);

GeneratorBundle train_generators(const std::vector<corpus::Sample>& corpus_all,
                                 const corpus::SplitSpec& splits,
                                 const std::set<int>& generator_class_ids,
                                 const std::vector<int>& poses,
                                 const ExperimentConfig& cfg, std::uint64_t seed,
                                 const phonetics::Phonetics& ph, std::ostream* log);

// Unseen-class sweep in the training language (plus the cold-start row when
// the sweep covers every class).
std::vector<ReportRow> run_set1(const ExperimentConfig& cfg, const phonetics::Phonetics& ph,
                                std::ostream* log = nullptr);

// Unseen classes from a different language: English seen, Hindi unseen.
std::vector<ReportRow> run_set2(const ExperimentConfig& cfg, const phonetics::Phonetics& ph,
                                std::ostream* log = nullptr);

// CSV plus a Markdown rendering grouped like the paper's tables.
void write_report(const std::vector<ReportRow>& rows, const std::string& path_prefix);
std::vector<ReportRow> parse_report_csv(const std::string& csv_path);

// Evaluation stream: model_variant,split,classes,k,accuracy.
void write_eval_csv(const std::vector<ReportRow>& rows, const std::string& path);

}  // namespace vf::harness
