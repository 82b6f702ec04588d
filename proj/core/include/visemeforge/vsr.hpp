#pragma once

#include <map>
#include <string>
#include <vector>

#include "visemeforge/corpus.hpp"
#include "visemeforge/nn.hpp"

namespace vf::vsr {

struct ViewCombination {
  std::vector<int> poses;  // sorted ascending, duplicate-free, non-empty

  void validate() const;
  std::string str() const;
  bool operator==(const ViewCombination& o) const { return poses == o.poses; }
};

struct VsrNetConfig {
  ViewCombination views{{0}};
  long frame_dim = 32 * 32;            // flattened frame size (C*H*W)
  std::vector<long> encoder{256, 128, 64};
  long view_hidden = 64;               // per-direction BiLSTM width
  long fusion_hidden = 64;
  bool shared_encoder = false;         // one encoder per view by default

  void validate() const;
};

struct Prediction {
  std::vector<double> probs;  // simplex over the registered classes
  std::vector<int> top;       // class ids by descending prob, id-ascending ties
};

// x: [T,d] -> [T,3d], concatenating first and second central differences with
// edge replication at the boundaries.
ad::Var delta_features(const ad::Var& x);
Tensor delta_features(const Tensor& x);

// Per-frame encoder -> deltas -> per-view BiLSTM -> cross-view fusion BiLSTM
// -> dense softmax head over every registered class (seen and unseen).
class VsrModel {
 public:
  VsrModel(VsrNetConfig cfg, std::vector<int> class_ids, std::uint64_t init_seed);

  const VsrNetConfig& config() const { return cfg_; }
  const std::vector<int>& class_ids() const { return class_ids_; }
  long class_index(int class_id) const;  // throws InvalidArgument if unknown

  // views: pose -> clip; must match the configured combination exactly and
  // share T. Returns [1,K] logits.
  ad::Var logits(const std::map<int, const corpus::VideoClip*>& views) const;
  Prediction predict(const std::map<int, const corpus::VideoClip*>& views) const;

  nn::ParamSet& params() { return params_; }
  const nn::ParamSet& params() const { return params_; }

 private:
  VsrNetConfig cfg_;
  std::vector<int> class_ids_;
  nn::ParamSet params_;
  std::vector<std::vector<nn::Linear>> encoders_;  // [view][layer]
  std::vector<nn::BiLSTM> view_lstm_;              // one per view
  nn::BiLSTM fusion_lstm_;
  nn::Linear head_;
};

Prediction uniform_prediction(const std::vector<int>& class_ids);

// One multi-view item: the clips of a single utterance recording across the
// poses of interest.
struct ViewItem {
  std::map<int, const corpus::VideoClip*> views;
  int class_id = 0;
};

// Groups samples by (speaker, class, rep, provenance) and keeps groups that
// cover every pose of the combination.
std::vector<ViewItem> group_views(const std::vector<corpus::Sample>& samples,
                                  const ViewCombination& views);

struct VsrTrainConfig {
  long epochs = 60;
  long batch_size = 8;
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  long patience = 10;           // early stop on validation top-1
  bool balance_classes = true;  // oversample minority classes each epoch
  std::uint64_t seed = 0;
};

struct TrainHistory {
  std::vector<double> train_loss;  // per epoch
  std::vector<double> val_top1;    // per epoch (empty when no val set)
  long best_epoch = -1;
};

TrainHistory train_vsr(VsrModel& model, const std::vector<ViewItem>& train,
                       const std::vector<ViewItem>& val, const VsrTrainConfig& cfg);

double top_k_accuracy(const std::vector<Prediction>& preds, const std::vector<int>& truth,
                      long k);

// Argmax of validation top-1; ties prefer fewer views, then the
// lexicographically smaller pose list.
ViewCombination select_view_combination(
    const std::vector<std::pair<ViewCombination, const VsrModel*>>& candidates,
    const std::vector<corpus::Sample>& val_samples);
std::size_t select_view_combination_index(const std::vector<ViewCombination>& candidates,
                                          const std::vector<double>& val_scores);

void save_vsr_checkpoint(const std::string& path, const VsrModel& model, std::uint64_t seed,
                         long epoch);
struct LoadedVsr {
  std::shared_ptr<VsrModel> model;
  std::uint64_t seed = 0;
  long epoch = 0;
};
LoadedVsr load_vsr_checkpoint(const std::string& path);

}  // namespace vf::vsr
